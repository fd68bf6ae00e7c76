#pragma once

#include <vector>

#include "rpra/autodiff.hpp"
#include "rpra/types.hpp"

namespace rpra {

struct LossWeights {
    double lambda_garl = 0.01;  // weight on the genuine-audio reconstruction loss
    double lambda_mdel = 0.1;   // weight on the multi-stage dispersal loss
    double margin = 1.0;        // hinge margin of the dispersal term

    void validate() const;
};

namespace losses {

using ad::Tape;
using ad::Value;

// One real sample's reconstruction term: `recon` and `target` are N x C over
// the full grid; `rows` selects the positions that count (masked positions
// during training, everything in diagnostic mode; empty = all rows).
struct GarlTerm {
    Value recon;
    Mat target;
    std::vector<int> rows;
};

// Mean squared error per real sample, averaged over real samples.
// No real samples -> constant zero.
Value garl(Tape& t, const std::vector<GarlTerm>& real_samples);

// Re-exported dispersal kernel (mean real-real distance + real-fake hinge).
inline Value dispersal(Value emb, const std::vector<std::uint8_t>& is_real, double margin) {
    return ad::dispersal_loss(emb, is_real, margin);
}

// Arithmetic mean of the dispersal loss over probe layers.
Value mdel(Tape& t, const std::vector<Value>& probe_embeddings,
           const std::vector<std::uint8_t>& is_real, double margin);

inline Value cross_entropy(Value logits, const std::vector<int>& labels) {
    return ad::cross_entropy_loss(logits, labels);
}

// ce + lambda1 * garl + lambda2 * mdel. Throws TrainingDiverged when any
// component is non-finite.
Value total_loss(Tape& t, Value ce, Value garl, Value mdel, const LossWeights& w);

// ---- plain-value helpers (tests, diagnostics) ----

double dispersal_value(const Mat& emb, const std::vector<std::uint8_t>& is_real, double margin);
double mdel_value(const std::vector<Mat>& layer_embeddings,
                  const std::vector<std::uint8_t>& is_real, double margin);
double cross_entropy_value(const Mat& logits, const std::vector<int>& labels);
double total_value(double ce, double garl, double mdel, const LossWeights& w);

// Full-grid mean squared reconstruction error of one sample (the quantity
// histogrammed per utterance in diagnostic mode).
double reconstruction_mse(const PatchSet& original, const PatchSet& reconstructed);

}  // namespace losses
}  // namespace rpra
