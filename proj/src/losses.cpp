#include "rpra/losses.hpp"

#include <cmath>

namespace rpra {

void LossWeights::validate() const {
    if (lambda_garl < 0.0 || lambda_mdel < 0.0)
        throw InvalidInput("loss weights must be non-negative");
    if (margin <= 0.0) throw InvalidInput("dispersal margin must be positive");
}

namespace losses {

Value garl(Tape& t, const std::vector<GarlTerm>& real_samples) {
    if (real_samples.empty()) return t.constant(Mat::Zero(1, 1));
    Value acc;
    for (const GarlTerm& s : real_samples) {
        Value r = s.rows.empty() ? s.recon : ad::gather_rows(s.recon, s.rows);
        Mat target;
        if (s.rows.empty()) {
            target = s.target;
        } else {
            target.resize(static_cast<Eigen::Index>(s.rows.size()), s.target.cols());
            for (std::size_t k = 0; k < s.rows.size(); ++k)
                target.row(static_cast<Eigen::Index>(k)) = s.target.row(s.rows[k]);
        }
        Value term = ad::mean_all(ad::square(ad::sub(r, t.constant(std::move(target)))));
        acc = acc.defined() ? ad::add(acc, term) : term;
    }
    return ad::scale(acc, 1.0 / static_cast<double>(real_samples.size()));
}

Value mdel(Tape& t, const std::vector<Value>& probe_embeddings,
           const std::vector<std::uint8_t>& is_real, double margin) {
    if (probe_embeddings.empty()) throw InvalidInput("mdel: no probe layers");
    Value acc;
    for (const Value& emb : probe_embeddings) {
        Value term = dispersal(emb, is_real, margin);
        acc = acc.defined() ? ad::add(acc, term) : term;
    }
    return ad::scale(acc, 1.0 / static_cast<double>(probe_embeddings.size()));
}

Value total_loss(Tape& t, Value ce, Value garl, Value mdel, const LossWeights& w) {
    w.validate();
    const double cv = ce.val()(0, 0), gv = garl.val()(0, 0), mv = mdel.val()(0, 0);
    if (!std::isfinite(cv) || !std::isfinite(gv) || !std::isfinite(mv))
        throw TrainingDiverged("total_loss: non-finite component (ce=" + std::to_string(cv) +
                               ", garl=" + std::to_string(gv) + ", mdel=" + std::to_string(mv) + ")");
    (void)t;
    return ad::add(ce, ad::add(ad::scale(garl, w.lambda_garl), ad::scale(mdel, w.lambda_mdel)));
}

double dispersal_value(const Mat& emb, const std::vector<std::uint8_t>& is_real, double margin) {
    ad::Tape t(false);
    return dispersal(t.constant(emb), is_real, margin).val()(0, 0);
}

double mdel_value(const std::vector<Mat>& layer_embeddings,
                  const std::vector<std::uint8_t>& is_real, double margin) {
    ad::Tape t(false);
    std::vector<Value> vals;
    vals.reserve(layer_embeddings.size());
    for (const Mat& m : layer_embeddings) vals.push_back(t.constant(m));
    return mdel(t, vals, is_real, margin).val()(0, 0);
}

double cross_entropy_value(const Mat& logits, const std::vector<int>& labels) {
    ad::Tape t(false);
    return cross_entropy(t.constant(logits), labels).val()(0, 0);
}

double total_value(double ce, double garl, double mdel, const LossWeights& w) {
    w.validate();
    if (!std::isfinite(ce) || !std::isfinite(garl) || !std::isfinite(mdel))
        throw TrainingDiverged("total_loss: non-finite component");
    return ce + w.lambda_garl * garl + w.lambda_mdel * mdel;
}

double reconstruction_mse(const PatchSet& original, const PatchSet& reconstructed) {
    if (original.patches.rows() != reconstructed.patches.rows() ||
        original.patches.cols() != reconstructed.patches.cols())
        throw InvalidInput("reconstruction_mse: patch sets differ in shape");
    return (original.patches - reconstructed.patches).array().square().mean();
}

}  // namespace losses
}  // namespace rpra
