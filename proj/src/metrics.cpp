#include "rpra/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace rpra {

void TdcfCosts::validate() const {
    auto rate = [](double r) { return r >= 0.0 && r <= 1.0; };
    if (!rate(p_miss_asv) || !rate(p_fa_asv) || !rate(p_fa_spoof_asv))
        throw InvalidInput("t-DCF: ASV rates must lie in [0, 1]");
    if (c_miss_asv <= 0.0 || c_fa_asv <= 0.0 || c_miss_cm <= 0.0 || c_fa_cm <= 0.0)
        throw InvalidInput("t-DCF: costs must be positive");
    if (p_target < 0.0 || p_nontarget < 0.0 || p_spoof < 0.0 ||
        std::abs(p_target + p_nontarget + p_spoof - 1.0) > 1e-9)
        throw InvalidInput("t-DCF: priors must be non-negative and sum to 1");
}

namespace {

struct SplitScores {
    std::vector<double> bona, spoof;  // sorted ascending
};

SplitScores split_and_sort(const std::vector<ScoreRecord>& records) {
    SplitScores s;
    for (const ScoreRecord& r : records) {
        if (!std::isfinite(r.score)) throw InvalidInput("metrics: non-finite score");
        (r.label == Label::bonafide ? s.bona : s.spoof).push_back(r.score);
    }
    if (s.bona.empty() || s.spoof.empty())
        throw InvalidInput("metrics: need at least one bonafide and one spoof record");
    std::sort(s.bona.begin(), s.bona.end());
    std::sort(s.spoof.begin(), s.spoof.end());
    return s;
}

// Candidate thresholds: every distinct score plus a reject-all sentinel
// strictly above the maximum.
std::vector<double> sweep_thresholds(const SplitScores& s) {
    std::vector<double> t;
    t.reserve(s.bona.size() + s.spoof.size() + 1);
    t.insert(t.end(), s.bona.begin(), s.bona.end());
    t.insert(t.end(), s.spoof.begin(), s.spoof.end());
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    t.push_back(t.back() + 1.0);
    return t;
}

// fraction of spoof scores >= t
double far_at(const SplitScores& s, double t) {
    const auto it = std::lower_bound(s.spoof.begin(), s.spoof.end(), t);
    return static_cast<double>(s.spoof.end() - it) / static_cast<double>(s.spoof.size());
}

// fraction of bonafide scores < t
double frr_at(const SplitScores& s, double t) {
    const auto it = std::lower_bound(s.bona.begin(), s.bona.end(), t);
    return static_cast<double>(it - s.bona.begin()) / static_cast<double>(s.bona.size());
}

}  // namespace

EerResult eer(const std::vector<ScoreRecord>& records) {
    const SplitScores s = split_and_sort(records);
    const std::vector<double> ts = sweep_thresholds(s);

    // FAR - FRR is non-increasing in t, from +1 (accept all) towards -1.
    double prev_t = ts[0], prev_far = far_at(s, ts[0]), prev_frr = frr_at(s, ts[0]);
    if (prev_far <= prev_frr) return {prev_far, prev_t};  // already crossed at min score
    for (std::size_t i = 1; i < ts.size(); ++i) {
        const double far = far_at(s, ts[i]);
        const double frr = frr_at(s, ts[i]);
        if (far == frr) return {far, ts[i]};
        if (far < frr) {
            const double dfar = far - prev_far;
            const double dfrr = frr - prev_frr;
            const double lambda = (prev_frr - prev_far) / (dfar - dfrr);
            return {prev_far + lambda * dfar, prev_t + lambda * (ts[i] - prev_t)};
        }
        prev_t = ts[i];
        prev_far = far;
        prev_frr = frr;
    }
    return {prev_far, prev_t};  // unreachable: sentinel gives FAR=0, FRR=1
}

double min_tdcf(const std::vector<ScoreRecord>& records, const TdcfCosts& c) {
    c.validate();
    const double c1 = c.p_target * (c.c_miss_cm - c.c_miss_asv * c.p_miss_asv) -
                      c.p_nontarget * c.c_fa_asv * c.p_fa_asv;
    const double c2 = c.c_fa_cm * c.p_spoof * c.p_fa_spoof_asv;
    if (c1 <= 0.0 || c2 <= 0.0)
        throw InvalidInput("t-DCF: cost model yields non-positive C1 or C2");

    const SplitScores s = split_and_sort(records);
    const double norm = std::min(c1, c2);
    double best = std::numeric_limits<double>::infinity();
    for (double t : sweep_thresholds(s)) {
        const double p_miss_cm = frr_at(s, t);
        const double p_fa_cm = far_at(s, t);
        best = std::min(best, (c1 * p_miss_cm + c2 * p_fa_cm) / norm);
    }
    return best;
}

double accuracy(const std::vector<ScoreRecord>& records, double threshold) {
    if (records.empty()) return 0.0;
    std::size_t correct = 0;
    for (const ScoreRecord& r : records) {
        const bool predicted_bona = r.score >= threshold;
        if (predicted_bona == (r.label == Label::bonafide)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(records.size());
}

void write_scores(const std::string& path, const std::vector<ScoreRecord>& records) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot create score file: " + path);
    char buf[64];
    for (const ScoreRecord& r : records) {
        std::snprintf(buf, sizeof(buf), "%.17g", r.score);
        out << r.utt_id << '\t' << label_name(r.label) << '\t' << buf << '\n';
    }
    if (!out) throw IoError("short write: " + path);
}

std::vector<ScoreRecord> read_scores(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open score file: " + path);
    std::vector<ScoreRecord> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        ScoreRecord r;
        std::string label, score;
        if (!std::getline(ss, r.utt_id, '\t') || !std::getline(ss, label, '\t') ||
            !std::getline(ss, score))
            throw InvalidInput(path + ":" + std::to_string(line_no) + ": expected 3 tab-separated fields");
        r.label = parse_label(label);
        r.score = std::stod(score);
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace rpra
