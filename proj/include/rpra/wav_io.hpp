#pragma once

#include <string>

#include "rpra/types.hpp"

namespace rpra {

// Reads a RIFF WAV file. Only mono 16-bit PCM at 16 kHz is accepted;
// anything else is rejected with a diagnostic naming the offending field.
Waveform read_wav(const std::string& path);

// Writes mono 16-bit PCM. Samples are clamped to [-1, 1] and scaled by 32767.
void write_wav(const std::string& path, const Waveform& w);

}  // namespace rpra
