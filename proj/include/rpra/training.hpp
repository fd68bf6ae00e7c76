#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rpra/datagen.hpp"
#include "rpra/dsp.hpp"
#include "rpra/losses.hpp"
#include "rpra/metrics.hpp"
#include "rpra/model.hpp"

namespace rpra {

struct TrainConfig {
    double lr0 = 5e-6;  // paper recipe; desk-scale presets raise this
    double lr_min = 0.0;
    int epochs = 100;
    int batch_size = 16;
    std::uint64_t seed = 0;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double grad_clip = 0.0;  // global-norm clip, 0 = off
    LossWeights loss;
    bool garl_masked_only = true;  // score reconstruction on masked positions only

    void validate() const;
};

// Decoupled-weight-decay adaptive-moment optimizer with bias correction:
//   p <- p - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * p
class AdamW {
public:
    AdamW(std::vector<ad::Parameter*> params, const TrainConfig& cfg);

    // Consumes the accumulated Parameter::grad values (then zeroed by caller).
    void step(double lr);
    int step_count() const { return t_; }

private:
    std::vector<ad::Parameter*> params_;
    std::vector<Mat> m_, v_;
    double beta1_, beta2_, eps_, weight_decay_;
    int t_ = 0;
};

// lr_min + (lr0 - lr_min) * (1 + cos(pi * step / total)) / 2, clamped to
// lr_min past the end.
double cosine_lr(int step, int total_steps, double lr0, double lr_min);

struct Utterance {
    std::string utt_id;
    Label label = Label::spoof;
    PatchSet features;
};

// Reads every manifest entry and extracts features (parallel, order-stable).
std::vector<Utterance> load_utterances(const Manifest& manifest, const FbankConfig& fbank);

struct EpochStats {
    double total = 0.0, ce = 0.0, garl = 0.0, mdel = 0.0;
    double grad_norm = 0.0;
};

// One pass over seeded, shuffled mini-batches: forward (masked), total loss,
// backward, optimizer step on a per-step cosine schedule. Throws
// TrainingDiverged naming the failing batch on non-finite loss or gradient.
EpochStats train_epoch(RpraModel& model, const std::vector<Utterance>& data,
                       const TrainConfig& cfg, AdamW& opt, int epoch, int& global_step,
                       int total_steps);

struct EvalResult {
    std::vector<ScoreRecord> records;
    double eer = 0.0;
    double threshold = 0.0;
    double accuracy = 0.0;  // at the EER threshold
};

// Unmasked forward per utterance; requires both classes to be present.
EvalResult evaluate(RpraModel& model, const std::vector<Utterance>& data);

}  // namespace rpra
