#pragma once

#include <string>
#include <vector>

#include "rpra/types.hpp"

namespace rpra {

// Tandem cost model. Priors and costs default to the ASVspoof 2019 LA
// evaluation values; the ASV operating-point rates are protocol inputs with
// documented placeholder defaults (see configs/tdcf_asvspoof19.json).
struct TdcfCosts {
    double p_target = 0.9405;
    double p_nontarget = 0.0095;
    double p_spoof = 0.05;
    double c_miss_asv = 1.0;
    double c_fa_asv = 10.0;
    double c_miss_cm = 1.0;
    double c_fa_cm = 10.0;
    double p_miss_asv = 0.05;      // ASV miss rate on targets at its operating point
    double p_fa_asv = 0.01;        // ASV false-alarm rate on nontargets
    double p_fa_spoof_asv = 0.05;  // fraction of spoofs the ASV accepts

    void validate() const;
};

struct EerResult {
    double eer = 0.0;
    double threshold = 0.0;
};

// FAR(t) = fraction of spoof scores >= t, FRR(t) = fraction of bonafide
// scores < t. Sweeps all distinct scores (plus a reject-all sentinel) and
// linearly interpolates the DET segment that crosses FAR = FRR.
EerResult eer(const std::vector<ScoreRecord>& records);

// Normalized minimum tandem cost, minimized over CM thresholds by exhaustive
// sweep. Always in [0, 1].
double min_tdcf(const std::vector<ScoreRecord>& records, const TdcfCosts& costs);

// Fraction of records classified correctly with the >= threshold convention.
double accuracy(const std::vector<ScoreRecord>& records, double threshold);

// TSV score file: utt_id<TAB>label<TAB>score, full double precision.
void write_scores(const std::string& path, const std::vector<ScoreRecord>& records);
std::vector<ScoreRecord> read_scores(const std::string& path);

}  // namespace rpra
