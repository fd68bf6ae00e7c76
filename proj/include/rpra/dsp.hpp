#pragma once

#include <vector>

#include "rpra/types.hpp"

namespace rpra {

// Front-end defaults: 25 ms Hann window, 10 ms hop, 512-point FFT, 128
// HTK-mel triangular filters on the magnitude spectrum, log floor 1e-10,
// then per-utterance standardization over the whole grid.
struct FbankConfig {
    int mel_bins = 128;
    double window_ms = 25.0;
    double hop_ms = 10.0;
    int target_frames = 1024;  // grid width after padding/cropping; 10 s at defaults
    int fft_size = 512;
    double log_floor = 1e-10;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Center frequencies (Hz) of the triangular filters for a given config.
std::vector<double> mel_center_frequencies(int mel_bins, int sample_rate);

// Raw frame count before padding/cropping: 1 + floor((samples - window)/hop),
// zero when the signal is shorter than one window.
int raw_frame_count(std::size_t samples, int window_samples, int hop_samples);

// Waveform -> standardized log-mel grid (mel_bins x target_frames).
// Signals too short for target_frames are zero-padded at the tail before
// analysis; longer ones are center-cropped in the frame domain.
// Standardization runs last; grids with variance < 1e-12 come out all-zero.
FbankGrid compute_fbank(const Waveform& w, const FbankConfig& cfg = FbankConfig());

// Splits the grid into 16x16 patches, row-major over (band segment f,
// time segment t); each patch is flattened row-major to 256 values.
PatchSet patchify(const FbankGrid& g);

// Exact inverse of patchify; reassembles by coords, so patch order is free.
FbankGrid unpatchify(const PatchSet& p);

}  // namespace rpra
