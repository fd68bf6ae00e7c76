#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace rpra {

// In-place iterative radix-2 FFT. n must be a power of two.
void fft(std::vector<std::complex<double>>& a, bool inverse = false);

std::size_t next_pow2(std::size_t n);

}  // namespace rpra
