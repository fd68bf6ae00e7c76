#pragma once

#include <string>

#include "rpra/datagen.hpp"
#include "rpra/dsp.hpp"
#include "rpra/metrics.hpp"
#include "rpra/model.hpp"
#include "rpra/training.hpp"

namespace rpra {

struct DatagenConfig {
    int n_real = 200;
    int n_fake = 200;
    double duration_s = 1.0;
    ArtifactConfig artifact;
};

// Everything one run needs, loadable from a single JSON file. Fields missing
// from the file keep their defaults; command-line flags override file values.
struct RunConfig {
    std::uint64_t seed = 42;
    std::string out_dir = "out";
    std::string train_manifest;
    std::string eval_manifest;
    ModelConfig model;
    TrainConfig train;
    FbankConfig fbank;
    DatagenConfig datagen;
    TdcfCosts tdcf;

    static RunConfig load(const std::string& path);
    void save(const std::string& path) const;

    // Desk-scale preset: 1 s clips, 96-frame grids, raised learning rate,
    // short schedule. Matches configs/smoke.json.
    static RunConfig desk_smoke();
};

}  // namespace rpra
