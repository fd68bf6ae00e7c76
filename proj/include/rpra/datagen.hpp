#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rpra/types.hpp"

namespace rpra {

// Resynthesis artifacts applied to a clean waveform. A field at its disabled
// value (0 bits, non-positive corner, zero jitter) is skipped; a spoof needs
// at least one active artifact.
struct ArtifactConfig {
    int quantization_bits = 6;      // mid-tread requantization depth; 0 disables
    double band_cut_hz = 3000.0;    // low-pass corner; <= 0 disables
    double phase_jitter_rad = 0.3;  // stddev of the per-frame phase rotation; 0 disables
    double intensity = 1.0;         // artifact blend in (0, 1]

    bool any_active() const;
    void validate() const;
};

// Harmonic tone with a random fundamental in [100, 300] Hz, attack/decay
// envelope and low-level broadband noise, peak-normalized to 0.9.
Waveform gen_bonafide(std::uint64_t seed, double duration_s);

// Applies the configured artifacts (requantization, band-limiting, STFT
// phase jitter, in that order) blended by `intensity`. Duration preserved.
Waveform gen_spoof(const Waveform& bonafide, const ArtifactConfig& a, std::uint64_t seed);

// Mid-tread requantizer used by the spoof channel; exposed for oracles.
double requantize(double x, int bits);

struct ManifestEntry {
    std::string path;  // relative to the manifest directory
    Label label = Label::spoof;
};

struct Manifest {
    std::string dir;  // directory holding the manifest + audio
    std::vector<ManifestEntry> entries;

    std::string resolve(std::size_t i) const { return dir + "/" + entries[i].path; }
};

// Writes n_real bonafide and n_fake spoof WAVs plus manifest.tsv
// (path<TAB>label, paths relative to out_dir). Spoofs are synthesized from a
// seed stream disjoint from the bonafide one, so no spoof is a corrupted
// copy of a corpus bonafide. Fully deterministic per (seed, counts, config).
Manifest build_corpus(int n_real, int n_fake, std::uint64_t seed, const std::string& out_dir,
                      double duration_s = 1.0, const ArtifactConfig& artifact = ArtifactConfig());

Manifest read_manifest(const std::string& manifest_path);

}  // namespace rpra
