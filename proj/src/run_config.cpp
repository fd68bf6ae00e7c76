#include "rpra/run_config.hpp"

#include <fstream>

#include <json.hpp>

namespace rpra {

using json = nlohmann::json;

namespace {

template <typename T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void parse_model(const json& j, ModelConfig& m) {
    maybe(j, "embed_dim", m.embed_dim);
    maybe(j, "encoder_layers", m.encoder_layers);
    maybe(j, "decoder_layers", m.decoder_layers);
    maybe(j, "heads", m.heads);
    maybe(j, "mask_ratio", m.mask_ratio);
    maybe(j, "glfp_local_scale", m.glfp_local_scale);
    maybe(j, "probe_layers", m.probe_layers);
}

void parse_train(const json& j, TrainConfig& t) {
    maybe(j, "lr0", t.lr0);
    maybe(j, "lr_min", t.lr_min);
    maybe(j, "epochs", t.epochs);
    maybe(j, "batch_size", t.batch_size);
    maybe(j, "weight_decay", t.weight_decay);
    maybe(j, "beta1", t.beta1);
    maybe(j, "beta2", t.beta2);
    maybe(j, "eps", t.eps);
    maybe(j, "grad_clip", t.grad_clip);
    maybe(j, "garl_masked_only", t.garl_masked_only);
    if (j.contains("loss")) {
        const json& l = j.at("loss");
        maybe(l, "lambda_garl", t.loss.lambda_garl);
        maybe(l, "lambda_mdel", t.loss.lambda_mdel);
        maybe(l, "margin", t.loss.margin);
    }
}

void parse_fbank(const json& j, FbankConfig& f) {
    maybe(j, "mel_bins", f.mel_bins);
    maybe(j, "window_ms", f.window_ms);
    maybe(j, "hop_ms", f.hop_ms);
    maybe(j, "target_frames", f.target_frames);
    maybe(j, "fft_size", f.fft_size);
}

void parse_datagen(const json& j, DatagenConfig& d) {
    maybe(j, "n_real", d.n_real);
    maybe(j, "n_fake", d.n_fake);
    maybe(j, "duration_s", d.duration_s);
    if (j.contains("artifact")) {
        const json& a = j.at("artifact");
        maybe(a, "quantization_bits", d.artifact.quantization_bits);
        maybe(a, "band_cut_hz", d.artifact.band_cut_hz);
        maybe(a, "phase_jitter_rad", d.artifact.phase_jitter_rad);
        maybe(a, "intensity", d.artifact.intensity);
    }
}

void parse_tdcf(const json& j, TdcfCosts& c) {
    maybe(j, "p_target", c.p_target);
    maybe(j, "p_nontarget", c.p_nontarget);
    maybe(j, "p_spoof", c.p_spoof);
    maybe(j, "c_miss_asv", c.c_miss_asv);
    maybe(j, "c_fa_asv", c.c_fa_asv);
    maybe(j, "c_miss_cm", c.c_miss_cm);
    maybe(j, "c_fa_cm", c.c_fa_cm);
    maybe(j, "p_miss_asv", c.p_miss_asv);
    maybe(j, "p_fa_asv", c.p_fa_asv);
    maybe(j, "p_fa_spoof_asv", c.p_fa_spoof_asv);
}

}  // namespace

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw InvalidInput(path + ": " + e.what());
    }

    RunConfig c;
    maybe(j, "seed", c.seed);
    maybe(j, "out_dir", c.out_dir);
    maybe(j, "train_manifest", c.train_manifest);
    maybe(j, "eval_manifest", c.eval_manifest);
    if (j.contains("model")) parse_model(j.at("model"), c.model);
    if (j.contains("train")) parse_train(j.at("train"), c.train);
    if (j.contains("fbank")) parse_fbank(j.at("fbank"), c.fbank);
    if (j.contains("datagen")) parse_datagen(j.at("datagen"), c.datagen);
    if (j.contains("tdcf")) parse_tdcf(j.at("tdcf"), c.tdcf);
    c.train.seed = c.seed;
    return c;
}

void RunConfig::save(const std::string& path) const {
    json j{
        {"seed", seed},
        {"out_dir", out_dir},
        {"train_manifest", train_manifest},
        {"eval_manifest", eval_manifest},
        {"model",
         {{"embed_dim", model.embed_dim},
          {"encoder_layers", model.encoder_layers},
          {"decoder_layers", model.decoder_layers},
          {"heads", model.heads},
          {"mask_ratio", model.mask_ratio},
          {"glfp_local_scale", model.glfp_local_scale},
          {"probe_layers", model.probe_layers}}},
        {"train",
         {{"lr0", train.lr0},
          {"lr_min", train.lr_min},
          {"epochs", train.epochs},
          {"batch_size", train.batch_size},
          {"weight_decay", train.weight_decay},
          {"beta1", train.beta1},
          {"beta2", train.beta2},
          {"eps", train.eps},
          {"grad_clip", train.grad_clip},
          {"garl_masked_only", train.garl_masked_only},
          {"loss",
           {{"lambda_garl", train.loss.lambda_garl},
            {"lambda_mdel", train.loss.lambda_mdel},
            {"margin", train.loss.margin}}}}},
        {"fbank",
         {{"mel_bins", fbank.mel_bins},
          {"window_ms", fbank.window_ms},
          {"hop_ms", fbank.hop_ms},
          {"target_frames", fbank.target_frames},
          {"fft_size", fbank.fft_size}}},
        {"datagen",
         {{"n_real", datagen.n_real},
          {"n_fake", datagen.n_fake},
          {"duration_s", datagen.duration_s},
          {"artifact",
           {{"quantization_bits", datagen.artifact.quantization_bits},
            {"band_cut_hz", datagen.artifact.band_cut_hz},
            {"phase_jitter_rad", datagen.artifact.phase_jitter_rad},
            {"intensity", datagen.artifact.intensity}}}}},
        {"tdcf",
         {{"p_target", tdcf.p_target},
          {"p_nontarget", tdcf.p_nontarget},
          {"p_spoof", tdcf.p_spoof},
          {"c_miss_asv", tdcf.c_miss_asv},
          {"c_fa_asv", tdcf.c_fa_asv},
          {"c_miss_cm", tdcf.c_miss_cm},
          {"c_fa_cm", tdcf.c_fa_cm},
          {"p_miss_asv", tdcf.p_miss_asv},
          {"p_fa_asv", tdcf.p_fa_asv},
          {"p_fa_spoof_asv", tdcf.p_fa_spoof_asv}}},
    };
    std::ofstream out(path);
    if (!out) throw IoError("cannot create config: " + path);
    out << j.dump(2) << '\n';
}

RunConfig RunConfig::desk_smoke() {
    RunConfig c;
    c.seed = 42;
    c.fbank.target_frames = 96;  // 1 s clips -> 98 raw frames, center-cropped
    c.datagen.n_real = 200;
    c.datagen.n_fake = 200;
    c.datagen.duration_s = 1.0;
    c.train.lr0 = 1e-3;
    c.train.lr_min = 1e-5;
    c.train.epochs = 12;
    c.train.batch_size = 16;
    c.train.seed = c.seed;
    return c;
}

}  // namespace rpra
