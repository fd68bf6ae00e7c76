#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rpra {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Bad arguments or malformed inputs (shape mismatches, empty data, ...).
class InvalidInput : public std::runtime_error {
public:
    explicit InvalidInput(const std::string& msg) : std::runtime_error(msg) {}
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite loss or gradient during optimization.
class TrainingDiverged : public std::runtime_error {
public:
    explicit TrainingDiverged(const std::string& msg) : std::runtime_error(msg) {}
};

struct Waveform {
    std::vector<double> samples;  // amplitudes in [-1, 1]
    int sample_rate = 16000;

    double duration_s() const {
        return static_cast<double>(samples.size()) / sample_rate;
    }
};

// Log-mel filterbank plane, mel_bins x frames.
struct FbankGrid {
    Mat values;
    double frame_hop_ms = 10.0;
    double frame_window_ms = 25.0;

    int mel_bins() const { return static_cast<int>(values.rows()); }
    int frames() const { return static_cast<int>(values.cols()); }
};

constexpr int kPatchSide = 16;
constexpr int kPatchDim = kPatchSide * kPatchSide;  // C = 256

// Ordered sequence of flattened 16x16 patches. Row i of `patches` is the
// patch at coords[i] = (band index f, time index t); patch index = f*T + t.
// mask[i] == true means the patch is hidden from the encoder.
struct PatchSet {
    Mat patches;  // N x 256
    std::vector<std::pair<int, int>> coords;
    int F = 0;
    int T = 0;
    std::vector<std::uint8_t> mask;

    int size() const { return static_cast<int>(patches.rows()); }

    std::vector<int> visible_indices() const {
        std::vector<int> out;
        for (int i = 0; i < size(); ++i)
            if (!mask[i]) out.push_back(i);
        return out;
    }
    std::vector<int> masked_indices() const {
        std::vector<int> out;
        for (int i = 0; i < size(); ++i)
            if (mask[i]) out.push_back(i);
        return out;
    }
};

enum class Label { bonafide, spoof };

inline const char* label_name(Label l) { return l == Label::bonafide ? "bonafide" : "spoof"; }

inline Label parse_label(const std::string& s) {
    if (s == "bonafide") return Label::bonafide;
    if (s == "spoof") return Label::spoof;
    throw InvalidInput("unknown label: '" + s + "' (expected bonafide or spoof)");
}

// One scored trial; higher score = more bonafide.
struct ScoreRecord {
    std::string utt_id;
    Label label = Label::spoof;
    double score = 0.0;
};

}  // namespace rpra
