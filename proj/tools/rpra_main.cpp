// Command-line front end: corpus generation, training, scoring, and the
// diagnostic exports (attention heatmaps, reconstruction-error maps,
// embedding dumps).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>

#include <CLI11.hpp>

#include "rpra/datagen.hpp"
#include "rpra/dsp.hpp"
#include "rpra/losses.hpp"
#include "rpra/metrics.hpp"
#include "rpra/model.hpp"
#include "rpra/rng.hpp"
#include "rpra/run_config.hpp"
#include "rpra/training.hpp"
#include "rpra/wav_io.hpp"

namespace {

using namespace rpra;
namespace fs = std::filesystem;

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
}

std::string format_g(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Grid-shaped CSV (F rows, T cols) from a per-patch vector indexed f*T + t.
void write_grid_csv(const std::string& path, const Vec& per_patch, int F, int T) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot create " + path);
    for (int f = 0; f < F; ++f) {
        for (int t = 0; t < T; ++t) {
            if (t) out << ',';
            out << format_g(per_patch(static_cast<Eigen::Index>(f) * T + t));
        }
        out << '\n';
    }
}

void write_grid_pgm(const std::string& path, const Vec& per_patch, int F, int T) {
    const double lo = per_patch.minCoeff(), hi = per_patch.maxCoeff();
    const double span = hi - lo;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot create " + path);
    out << "P5\n" << T << ' ' << F << "\n255\n";
    for (int f = 0; f < F; ++f)
        for (int t = 0; t < T; ++t) {
            const double v = per_patch(static_cast<Eigen::Index>(f) * T + t);
            const int px = span > 0.0 ? static_cast<int>(std::lround(255.0 * (v - lo) / span)) : 0;
            out.put(static_cast<char>(std::clamp(px, 0, 255)));
        }
}

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    bool seed_set = false;
};

RunConfig resolve_config(const CommonOpts& c) {
    RunConfig cfg = c.config_path.empty() ? RunConfig() : RunConfig::load(c.config_path);
    if (c.seed_set) cfg.seed = c.seed;
    cfg.out_dir = c.out_dir;
    cfg.train.seed = cfg.seed;
    return cfg;
}

int cmd_datagen(const RunConfig& cfg) {
    ensure_dir(cfg.out_dir);
    const Manifest m = build_corpus(cfg.datagen.n_real, cfg.datagen.n_fake, cfg.seed,
                                    cfg.out_dir, cfg.datagen.duration_s, cfg.datagen.artifact);
    std::cout << m.dir << "/manifest.tsv\n";
    return 0;
}

int cmd_train(const RunConfig& cfg) {
    if (cfg.train_manifest.empty() || cfg.eval_manifest.empty())
        throw InvalidInput("train: both train_manifest and eval_manifest are required");
    ensure_dir(cfg.out_dir);

    std::cerr << "loading features...\n";
    const auto train_data = load_utterances(read_manifest(cfg.train_manifest), cfg.fbank);
    const auto dev_data = load_utterances(read_manifest(cfg.eval_manifest), cfg.fbank);

    RpraModel model(cfg.model, cfg.seed);
    cfg.train.validate();
    AdamW opt(model.parameters(), cfg.train);
    const int steps_per_epoch =
        static_cast<int>((train_data.size() + cfg.train.batch_size - 1) / cfg.train.batch_size);
    const int total_steps = steps_per_epoch * cfg.train.epochs;

    std::ofstream log(cfg.out_dir + "/train.log");
    if (!log) throw IoError("cannot create train.log in " + cfg.out_dir);
    const std::string ckpt_path = cfg.out_dir + "/checkpoint_best.bin";

    double best_eer = std::numeric_limits<double>::infinity();
    int global_step = 0;
    for (int epoch = 1; epoch <= cfg.train.epochs; ++epoch) {
        const double lr_now = cosine_lr(global_step, total_steps, cfg.train.lr0, cfg.train.lr_min);
        const EpochStats st =
            train_epoch(model, train_data, cfg.train, opt, epoch, global_step, total_steps);
        const EvalResult ev = evaluate(model, dev_data);

        char line[512];
        std::snprintf(line, sizeof(line),
                      "epoch=%d lr=%.8g total=%.8g ce=%.8g garl=%.8g mdel=%.8g grad_norm=%.8g "
                      "dev_eer=%.8g",
                      epoch, lr_now, st.total, st.ce, st.garl, st.mdel, st.grad_norm, ev.eer);
        std::cout << line << std::endl;
        log << line << '\n';
        log.flush();

        if (ev.eer < best_eer || !fs::exists(ckpt_path)) {
            best_eer = std::min(best_eer, ev.eer);
            save_checkpoint(ckpt_path, model, cfg.fbank);
        }
    }
    std::cout << ckpt_path << "\n";
    return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& ckpt_path, const std::string& manifest_path) {
    ensure_dir(cfg.out_dir);
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    const auto data = load_utterances(read_manifest(manifest_path), ckpt.fbank);

    const EvalResult ev = evaluate(ckpt.model, data);
    const double tdcf = min_tdcf(ev.records, cfg.tdcf);

    write_scores(cfg.out_dir + "/scores.tsv", ev.records);
    std::ofstream report(cfg.out_dir + "/metrics.txt");
    if (!report) throw IoError("cannot create metrics.txt in " + cfg.out_dir);
    const std::string body = "eer=" + format_g(ev.eer) + "\neer_threshold=" +
                             format_g(ev.threshold) + "\nmin_tdcf=" + format_g(tdcf) +
                             "\naccuracy=" + format_g(ev.accuracy) + "\n";
    report << body;
    std::cout << body;
    return 0;
}

int cmd_trace(const RunConfig& cfg, const std::string& ckpt_path, const std::string& wav_path) {
    ensure_dir(cfg.out_dir);
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    const PatchSet ps = patchify(compute_fbank(read_wav(wav_path), ckpt.fbank));

    ad::Tape tape(false);
    auto sf = ckpt.model.forward_sample(tape, ps, false);

    const Vec weights = sf.ftfa_weights.val().col(0);
    write_grid_csv(cfg.out_dir + "/ftfa_weights.csv", weights, ps.F, ps.T);
    write_grid_pgm(cfg.out_dir + "/ftfa_weights.pgm", weights, ps.F, ps.T);

    const Mat abs_diff = (ps.patches - sf.recon.val()).cwiseAbs();
    const Vec per_patch = abs_diff.rowwise().mean();
    write_grid_csv(cfg.out_dir + "/recon_error.csv", per_patch, ps.F, ps.T);
    write_grid_pgm(cfg.out_dir + "/recon_error.pgm", per_patch, ps.F, ps.T);

    PatchSet recon = ps;
    recon.patches = sf.recon.val();
    std::cout << "mean_reconstruction_error=" << format_g(losses::reconstruction_mse(ps, recon))
              << "\n";
    return 0;
}

int cmd_embed_dump(const RunConfig& cfg, const std::string& ckpt_path,
                   const std::string& manifest_path, int layer) {
    ensure_dir(cfg.out_dir);
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    const auto probes = ckpt.model.config().resolved_probe_layers();
    const auto probe_pos = std::find(probes.begin(), probes.end(), layer);
    if (probe_pos == probes.end())
        throw InvalidInput("embed-dump: layer " + std::to_string(layer) +
                           " is not a probe layer of this checkpoint");
    const std::size_t probe_idx = static_cast<std::size_t>(probe_pos - probes.begin());

    const auto data = load_utterances(read_manifest(manifest_path), ckpt.fbank);
    const std::string path = cfg.out_dir + "/embeddings.tsv";
    std::ofstream out(path);
    if (!out) throw IoError("cannot create " + path);
    for (const Utterance& u : data) {
        ad::Tape tape(false);
        auto sf = ckpt.model.forward_sample(tape, u.features, false);
        out << u.utt_id << '\t' << label_name(u.label);
        const Mat& e = sf.probe_feats[probe_idx].val();
        for (Eigen::Index j = 0; j < e.cols(); ++j) out << '\t' << format_g(e(0, j));
        out << '\n';
    }
    std::cout << path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"RPRA-ADD: reconstruction-based audio deepfake detection pipeline"};
    app.require_subcommand(1);

    CommonOpts common;
    double lr0_flag = -1.0;
    int epochs_flag = -1, batch_flag = -1, layer_flag = -1;
    double lambda_mdel_flag = -1.0, lambda_garl_flag = -1.0, mask_ratio_flag = -1.0;
    std::string ckpt_path, manifest_path, wav_path, train_manifest, eval_manifest;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config_path, "JSON run config");
        sub->add_option("--out", common.out_dir, "output directory");
        sub->add_option("--seed", common.seed, "master seed (overrides config)")
            ->each([&](const std::string&) { common.seed_set = true; });
    };

    CLI::App* datagen = app.add_subcommand("datagen", "generate a synthetic corpus");
    add_common(datagen);

    CLI::App* train = app.add_subcommand("train", "train a model");
    add_common(train);
    train->add_option("--train-manifest", train_manifest, "training manifest TSV");
    train->add_option("--eval-manifest", eval_manifest, "dev/eval manifest TSV");
    train->add_option("--lr0", lr0_flag, "initial learning rate");
    train->add_option("--epochs", epochs_flag, "training epochs");
    train->add_option("--batch-size", batch_flag, "mini-batch size");
    train->add_option("--lambda-garl", lambda_garl_flag, "reconstruction loss weight");
    train->add_option("--lambda-mdel", lambda_mdel_flag, "dispersal loss weight");
    train->add_option("--mask-ratio", mask_ratio_flag, "patch masking ratio");

    CLI::App* eval_cmd = app.add_subcommand("eval", "score a manifest and report metrics");
    add_common(eval_cmd);
    eval_cmd->add_option("--checkpoint", ckpt_path, "model checkpoint")->required();
    eval_cmd->add_option("--manifest", manifest_path, "manifest TSV")->required();

    CLI::App* trace = app.add_subcommand("trace", "export attention/reconstruction heatmaps");
    add_common(trace);
    trace->add_option("--checkpoint", ckpt_path, "model checkpoint")->required();
    trace->add_option("--wav", wav_path, "input WAV file")->required();

    CLI::App* embed = app.add_subcommand("embed-dump", "dump probe-layer embeddings");
    add_common(embed);
    embed->add_option("--checkpoint", ckpt_path, "model checkpoint")->required();
    embed->add_option("--manifest", manifest_path, "manifest TSV")->required();
    embed->add_option("--layer", layer_flag, "probe layer index (1-based)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        RunConfig cfg = resolve_config(common);
        if (train->parsed()) {
            if (!train_manifest.empty()) cfg.train_manifest = train_manifest;
            if (!eval_manifest.empty()) cfg.eval_manifest = eval_manifest;
            if (lr0_flag >= 0.0) cfg.train.lr0 = lr0_flag;
            if (epochs_flag > 0) cfg.train.epochs = epochs_flag;
            if (batch_flag > 0) cfg.train.batch_size = batch_flag;
            if (lambda_garl_flag >= 0.0) cfg.train.loss.lambda_garl = lambda_garl_flag;
            if (lambda_mdel_flag >= 0.0) cfg.train.loss.lambda_mdel = lambda_mdel_flag;
            if (mask_ratio_flag >= 0.0) cfg.model.mask_ratio = mask_ratio_flag;
            return cmd_train(cfg);
        }
        if (datagen->parsed()) return cmd_datagen(cfg);
        if (eval_cmd->parsed()) return cmd_eval(cfg, ckpt_path, manifest_path);
        if (trace->parsed()) return cmd_trace(cfg, ckpt_path, wav_path);
        if (embed->parsed()) return cmd_embed_dump(cfg, ckpt_path, manifest_path, layer_flag);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
