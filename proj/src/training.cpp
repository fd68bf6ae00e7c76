#include "rpra/training.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <numeric>
#include <thread>

#include "rpra/rng.hpp"
#include "rpra/wav_io.hpp"

namespace rpra {

namespace {
constexpr std::uint64_t kTagShuffle = 0x73687566ULL;
constexpr std::uint64_t kTagMask = 0x6d736b32ULL;
}  // namespace

void TrainConfig::validate() const {
    if (!(lr0 >= lr_min) || lr_min < 0.0)
        throw InvalidInput("train config: need lr0 >= lr_min >= 0");
    if (epochs < 1) throw InvalidInput("train config: epochs must be >= 1");
    if (batch_size < 2) throw InvalidInput("train config: batch_size must be >= 2");
    if (weight_decay < 0.0 || grad_clip < 0.0)
        throw InvalidInput("train config: negative weight_decay or grad_clip");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0) || eps <= 0.0)
        throw InvalidInput("train config: invalid optimizer constants");
    loss.validate();
}

AdamW::AdamW(std::vector<ad::Parameter*> params, const TrainConfig& cfg)
    : params_(std::move(params)),
      beta1_(cfg.beta1),
      beta2_(cfg.beta2),
      eps_(cfg.eps),
      weight_decay_(cfg.weight_decay) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const ad::Parameter* p : params_) {
        m_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
        v_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
    }
}

void AdamW::step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
        ad::Parameter& p = *params_[i];
        if (!p.grad.allFinite())
            throw TrainingDiverged("non-finite gradient in parameter " + p.name);
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
        const Mat m_hat = m_[i] / bc1;
        const Mat v_hat = v_[i] / bc2;
        p.value -= lr * (m_hat.array() / (v_hat.array().sqrt() + eps_)).matrix();
        if (weight_decay_ != 0.0) p.value -= (lr * weight_decay_) * p.value;
    }
}

double cosine_lr(int step, int total_steps, double lr0, double lr_min) {
    if (step < 0 || total_steps <= 0) throw InvalidInput("cosine_lr: bad step/total");
    if (step > total_steps) return lr_min;
    return lr_min + 0.5 * (lr0 - lr_min) *
                        (1.0 + std::cos(M_PI * static_cast<double>(step) / total_steps));
}

std::vector<Utterance> load_utterances(const Manifest& manifest, const FbankConfig& fbank) {
    const int n = static_cast<int>(manifest.entries.size());
    std::vector<Utterance> out(static_cast<std::size_t>(n));

    unsigned workers = std::thread::hardware_concurrency();
    if (workers == 0) workers = 1;
    workers = std::min<unsigned>({workers, 8u, static_cast<unsigned>(n)});

    std::exception_ptr err;
    std::mutex err_mu;
    auto work = [&](int i) {
        const ManifestEntry& e = manifest.entries[static_cast<std::size_t>(i)];
        Utterance u;
        u.utt_id = std::filesystem::path(e.path).stem().string();
        u.label = e.label;
        u.features = patchify(compute_fbank(read_wav(manifest.resolve(static_cast<std::size_t>(i))), fbank));
        out[static_cast<std::size_t>(i)] = std::move(u);
    };
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) work(i);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (int i = static_cast<int>(w); i < n; i += static_cast<int>(workers)) work(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mu);
                    if (!err) err = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        if (err) std::rethrow_exception(err);
    }
    return out;
}

EpochStats train_epoch(RpraModel& model, const std::vector<Utterance>& data,
                       const TrainConfig& cfg, AdamW& opt, int epoch, int& global_step,
                       int total_steps) {
    cfg.validate();
    if (data.empty()) throw InvalidInput("train_epoch: empty dataset");

    // Batch order and per-utterance masks are functions of the run seed only,
    // not the epoch, so a zero learning rate makes every epoch bit-identical.
    std::vector<int> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(cfg.seed, kTagShuffle));
    shuffle_rng.shuffle(order);

    auto params = model.parameters();
    EpochStats stats;
    int n_batches = 0;

    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(cfg.batch_size)) {
        const std::size_t b_sz = std::min<std::size_t>(cfg.batch_size, order.size() - at);

        ad::Tape tape(true);
        std::vector<ad::Value> logit_rows;
        std::vector<losses::GarlTerm> garl_terms;
        std::vector<int> ce_labels;
        std::vector<std::uint8_t> is_real;

        const std::vector<int> probes = model.config().resolved_probe_layers();
        std::vector<std::vector<ad::Value>> probe_feats(probes.size());

        for (std::size_t k = 0; k < b_sz; ++k) {
            const int item = order[at + k];
            const Utterance& u = data[static_cast<std::size_t>(item)];
            const std::uint64_t mask_seed =
                derive_seed(cfg.seed, kTagMask, static_cast<std::uint64_t>(item));
            PatchSet masked = mask_patches(u.features, model.config().mask_ratio, mask_seed);
            auto sf = model.forward_sample(tape, masked, true);

            logit_rows.push_back(sf.logits);
            for (std::size_t pi = 0; pi < probes.size(); ++pi)
                probe_feats[pi].push_back(sf.probe_feats[pi]);

            const bool real = u.label == Label::bonafide;
            ce_labels.push_back(real ? 1 : 0);
            is_real.push_back(real ? 1 : 0);
            if (real) {
                losses::GarlTerm term;
                term.recon = sf.recon;
                term.target = u.features.patches;
                if (cfg.garl_masked_only) term.rows = masked.masked_indices();
                garl_terms.push_back(std::move(term));
            }
        }

        const bool has_real = std::find(is_real.begin(), is_real.end(), 1) != is_real.end();
        const bool has_fake = std::find(is_real.begin(), is_real.end(), 0) != is_real.end();
        if (!has_real || !has_fake)
            std::cerr << "warning: epoch " << epoch << " batch " << n_batches
                      << " contains a single class; dispersal terms degenerate\n";

        ad::Value logits = ad::concat_rows(logit_rows);
        ad::Value ce = losses::cross_entropy(logits, ce_labels);
        ad::Value garl_v = losses::garl(tape, garl_terms);
        std::vector<ad::Value> probe_embs;
        probe_embs.reserve(probes.size());
        for (auto& rows : probe_feats) probe_embs.push_back(ad::concat_rows(rows));
        ad::Value mdel_v = losses::mdel(tape, probe_embs, is_real, cfg.loss.margin);

        ad::Value total;
        try {
            total = losses::total_loss(tape, ce, garl_v, mdel_v, cfg.loss);
        } catch (const TrainingDiverged& e) {
            throw TrainingDiverged("epoch " + std::to_string(epoch) + " batch " +
                                   std::to_string(n_batches) + ": " + e.what());
        }

        for (ad::Parameter* p : params) p->zero_grad();
        tape.backward(total);

        double sq_norm = 0.0;
        for (const ad::Parameter* p : params) sq_norm += p->grad.squaredNorm();
        const double grad_norm = std::sqrt(sq_norm);
        if (!std::isfinite(grad_norm))
            throw TrainingDiverged("epoch " + std::to_string(epoch) + " batch " +
                                   std::to_string(n_batches) + ": non-finite gradient norm");
        if (cfg.grad_clip > 0.0 && grad_norm > cfg.grad_clip) {
            const double s = cfg.grad_clip / grad_norm;
            for (ad::Parameter* p : params) p->grad *= s;
        }

        opt.step(cosine_lr(global_step, total_steps, cfg.lr0, cfg.lr_min));
        ++global_step;

        stats.total += total.val()(0, 0);
        stats.ce += ce.val()(0, 0);
        stats.garl += garl_v.val()(0, 0);
        stats.mdel += mdel_v.val()(0, 0);
        stats.grad_norm += grad_norm;
        ++n_batches;
    }

    stats.total /= n_batches;
    stats.ce /= n_batches;
    stats.garl /= n_batches;
    stats.mdel /= n_batches;
    stats.grad_norm /= n_batches;
    return stats;
}

EvalResult evaluate(RpraModel& model, const std::vector<Utterance>& data) {
    if (data.empty()) throw InvalidInput("evaluate: empty dataset");
    EvalResult out;
    out.records.reserve(data.size());
    for (const Utterance& u : data) {
        ad::Tape tape(false);
        auto sf = model.forward_sample(tape, u.features, false);
        ScoreRecord r;
        r.utt_id = u.utt_id;
        r.label = u.label;
        r.score = realness_score(sf.logits.val().row(0));
        out.records.push_back(std::move(r));
    }
    const EerResult e = eer(out.records);
    out.eer = e.eer;
    out.threshold = e.threshold;
    out.accuracy = accuracy(out.records, e.threshold);
    return out;
}

}  // namespace rpra
