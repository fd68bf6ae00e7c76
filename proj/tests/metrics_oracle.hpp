#pragma once

#include <algorithm>
#include <vector>

#include "rpra/metrics.hpp"
#include "rpra/types.hpp"

// Naive reference implementations: error rates recomputed by direct counting
// at every candidate threshold, no sorting/prefix tricks. Deliberately kept
// independent of src/metrics.cpp.
namespace rpra::testing {

inline double far_count(const std::vector<ScoreRecord>& r, double t) {
    int num = 0, den = 0;
    for (const auto& s : r)
        if (s.label == Label::spoof) {
            ++den;
            if (s.score >= t) ++num;
        }
    return static_cast<double>(num) / den;
}

inline double frr_count(const std::vector<ScoreRecord>& r, double t) {
    int num = 0, den = 0;
    for (const auto& s : r)
        if (s.label == Label::bonafide) {
            ++den;
            if (s.score < t) ++num;
        }
    return static_cast<double>(num) / den;
}

inline std::vector<double> all_thresholds(const std::vector<ScoreRecord>& r) {
    std::vector<double> t;
    for (const auto& s : r) t.push_back(s.score);
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    t.push_back(t.back() + 1.0);
    return t;
}

inline EerResult eer_bruteforce(const std::vector<ScoreRecord>& r) {
    const auto ts = all_thresholds(r);
    double pt = ts[0], pf = far_count(r, ts[0]), pr = frr_count(r, ts[0]);
    for (std::size_t i = 1; i < ts.size(); ++i) {
        const double f = far_count(r, ts[i]);
        const double m = frr_count(r, ts[i]);
        if (f == m) return {f, ts[i]};
        if (f < m) {
            const double lambda = (pr - pf) / ((f - pf) - (m - pr));
            return {pf + lambda * (f - pf), pt + lambda * (ts[i] - pt)};
        }
        pt = ts[i];
        pf = f;
        pr = m;
    }
    return {pf, pt};
}

inline double min_tdcf_bruteforce(const std::vector<ScoreRecord>& r, const TdcfCosts& c) {
    const double c1 = c.p_target * (c.c_miss_cm - c.c_miss_asv * c.p_miss_asv) -
                      c.p_nontarget * c.c_fa_asv * c.p_fa_asv;
    const double c2 = c.c_fa_cm * c.p_spoof * c.p_fa_spoof_asv;
    double best = 1e300;
    for (double t : all_thresholds(r)) {
        const double v = (c1 * frr_count(r, t) + c2 * far_count(r, t)) / std::min(c1, c2);
        best = std::min(best, v);
    }
    return best;
}

}  // namespace rpra::testing
