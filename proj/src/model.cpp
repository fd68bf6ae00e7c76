#include "rpra/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include <json.hpp>

namespace rpra {

using ad::Tape;
using ad::Value;
using json = nlohmann::json;

namespace {

Mat randn(int rows, int cols, Rng& rng, double stddev) {
    Mat m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = rng.normal(0.0, stddev);
    return m;
}

}  // namespace

std::vector<int> ModelConfig::resolved_probe_layers() const {
    if (!probe_layers.empty()) return probe_layers;
    const int d = decoder_layers;
    if (d % 4 == 0) return {d / 4, d / 2, 3 * d / 4, d};
    return {d};
}

void ModelConfig::validate() const {
    if (embed_dim <= 0 || embed_dim % heads != 0)
        throw InvalidInput("model: embed_dim must be a positive multiple of heads");
    if (embed_dim % 4 != 0)
        throw InvalidInput("model: embed_dim must be divisible by 4");
    if (encoder_layers < 1 || decoder_layers < 1)
        throw InvalidInput("model: need at least one encoder and one decoder layer");
    if (patch_dim != kPatchDim)
        throw InvalidInput("model: patch_dim must be 256 (16x16 patches)");
    if (!(mask_ratio >= 0.0 && mask_ratio < 1.0))
        throw InvalidInput("model: mask_ratio must be in [0, 1)");
    const auto probes = resolved_probe_layers();
    if (probes.empty()) throw InvalidInput("model: probe layer set is empty");
    for (int l : probes)
        if (l < 1 || l > decoder_layers)
            throw InvalidInput("model: probe layer " + std::to_string(l) + " outside 1.." +
                               std::to_string(decoder_layers));
}

PatchSet mask_patches(const PatchSet& p, double rho, std::uint64_t seed) {
    if (!(rho >= 0.0 && rho < 1.0))
        throw InvalidInput("mask_patches: mask ratio must be in [0, 1)");
    const int n = p.size();
    const int n_visible = n - static_cast<int>(std::lround(rho * n));
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, 0x6d61736bULL));
    rng.shuffle(order);

    PatchSet out = p;
    out.mask.assign(n, 1);
    for (int k = 0; k < n_visible; ++k) out.mask[static_cast<std::size_t>(order[k])] = 0;
    return out;
}

ad::Value ftfa_weights_from_discrepancy(Tape& t, Value recon_rows, const Mat& original_rows) {
    if (recon_rows.rows() != original_rows.rows() || recon_rows.cols() != original_rows.cols())
        throw InvalidInput("ftfa: reconstruction/original patch sets differ in shape");
    Value e = ad::scale(
        ad::rowwise_sum(ad::absval(ad::sub(recon_rows, t.constant(original_rows)))),
        1.0 / static_cast<double>(original_rows.cols()));
    return ad::softmax_col(e);
}

Mat sincos_position_encoding(const std::vector<std::pair<int, int>>& coords, int dim) {
    if (dim % 4 != 0) throw InvalidInput("position encoding: dim must be divisible by 4");
    const int half = dim / 2;
    const int quarter = half / 2;
    Mat pe(static_cast<Eigen::Index>(coords.size()), dim);
    for (std::size_t r = 0; r < coords.size(); ++r) {
        const auto [f, t] = coords[r];
        for (int i = 0; i < quarter; ++i) {
            const double omega = std::pow(10000.0, -static_cast<double>(i) / quarter);
            pe(static_cast<Eigen::Index>(r), 2 * i) = std::sin(f * omega);
            pe(static_cast<Eigen::Index>(r), 2 * i + 1) = std::cos(f * omega);
            pe(static_cast<Eigen::Index>(r), half + 2 * i) = std::sin(t * omega);
            pe(static_cast<Eigen::Index>(r), half + 2 * i + 1) = std::cos(t * omega);
        }
    }
    return pe;
}

namespace nn {

void Linear::init(const std::string& name, int in, int out, Rng& rng, bool bias, double stddev) {
    w = ad::Parameter(name + ".w", randn(in, out, rng, stddev));
    has_bias = bias;
    if (bias) b = ad::Parameter(name + ".b", Mat::Zero(1, out));
}

Value Linear::forward(Tape& t, Value x) {
    Value y = ad::matmul(x, t.param(w));
    if (has_bias) y = ad::add_row_vector(y, t.param(b));
    return y;
}

void Linear::collect(std::vector<ad::Parameter*>& out) {
    out.push_back(&w);
    if (has_bias) out.push_back(&b);
}

void LayerNorm::init(const std::string& name, int dim) {
    gamma = ad::Parameter(name + ".gamma", Mat::Ones(1, dim));
    beta = ad::Parameter(name + ".beta", Mat::Zero(1, dim));
}

Value LayerNorm::forward(Tape& t, Value x) {
    return ad::layer_norm_rows(x, t.param(gamma), t.param(beta));
}

void LayerNorm::collect(std::vector<ad::Parameter*>& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
}

void MultiHeadAttention::init(const std::string& name, int dim, int n_heads, Rng& rng) {
    heads = n_heads;
    head_dim = dim / n_heads;
    wq.init(name + ".q", dim, dim, rng);
    wk.init(name + ".k", dim, dim, rng);
    wv.init(name + ".v", dim, dim, rng);
    wo.init(name + ".o", dim, dim, rng);
}

Value MultiHeadAttention::forward(Tape& t, Value x) {
    const Eigen::Index n = x.rows();
    Value q = wq.forward(t, x), k = wk.forward(t, x), v = wv.forward(t, x);
    const double s = 1.0 / std::sqrt(static_cast<double>(head_dim));
    std::vector<Value> out;
    out.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        Value qh = ad::block(q, 0, h * head_dim, n, head_dim);
        Value kh = ad::block(k, 0, h * head_dim, n, head_dim);
        Value vh = ad::block(v, 0, h * head_dim, n, head_dim);
        Value a = ad::softmax_rows(ad::scale(ad::matmul(qh, ad::transpose(kh)), s));
        out.push_back(ad::matmul(a, vh));
    }
    return wo.forward(t, ad::concat_cols(out));
}

void MultiHeadAttention::collect(std::vector<ad::Parameter*>& out) {
    wq.collect(out);
    wk.collect(out);
    wv.collect(out);
    wo.collect(out);
}

void TransformerBlock::init(const std::string& name, int dim, int n_heads, Rng& rng) {
    ln1.init(name + ".ln1", dim);
    attn.init(name + ".attn", dim, n_heads, rng);
    ln2.init(name + ".ln2", dim);
    fc1.init(name + ".fc1", dim, 4 * dim, rng);
    fc2.init(name + ".fc2", 4 * dim, dim, rng);
}

Value TransformerBlock::forward(Tape& t, Value x) {
    x = ad::add(x, attn.forward(t, ln1.forward(t, x)));
    return ad::add(x, fc2.forward(t, ad::gelu(fc1.forward(t, ln2.forward(t, x)))));
}

void TransformerBlock::collect(std::vector<ad::Parameter*>& out) {
    ln1.collect(out);
    attn.collect(out);
    ln2.collect(out);
    fc1.collect(out);
    fc2.collect(out);
}

void BandAttention::init(const std::string& name, int dim, Rng& rng) {
    wq.init(name + ".q", dim, dim, rng);
    wk.init(name + ".k", dim, dim, rng);
    wv.init(name + ".v", dim, dim, rng);
    wo.init(name + ".o", dim, dim, rng);
}

std::array<Value, 4> BandAttention::forward(Tape& t, const std::array<Value, 4>& bands) {
    const Eigen::Index s_pos = bands[0].rows();
    const double s = 1.0 / std::sqrt(static_cast<double>(bands[0].cols()));
    std::array<Value, 4> q, k, v;
    for (int b = 0; b < 4; ++b) {
        q[b] = wq.forward(t, bands[b]);
        k[b] = wk.forward(t, bands[b]);
        v[b] = wv.forward(t, bands[b]);
    }
    std::array<Value, 4> out;
    for (int b1 = 0; b1 < 4; ++b1) {
        std::vector<Value> scores;
        scores.reserve(4);
        for (int b2 = 0; b2 < 4; ++b2)
            scores.push_back(ad::scale(ad::rowwise_sum(ad::cmul(q[b1], k[b2])), s));
        Value a = ad::softmax_rows(ad::concat_cols(scores));  // s_pos x 4
        Value mix;
        for (int b2 = 0; b2 < 4; ++b2) {
            Value term = ad::row_scale(v[b2], ad::block(a, 0, b2, s_pos, 1));
            mix = mix.defined() ? ad::add(mix, term) : term;
        }
        out[b1] = wo.forward(t, mix);
    }
    return out;
}

void BandAttention::collect(std::vector<ad::Parameter*>& out) {
    wq.collect(out);
    wk.collect(out);
    wv.collect(out);
    wo.collect(out);
}

void SingleHeadAttention::init(const std::string& name, int dim, Rng& rng) {
    wq.init(name + ".q", dim, dim, rng);
    wk.init(name + ".k", dim, dim, rng);
    wv.init(name + ".v", dim, dim, rng);
    wo.init(name + ".o", dim, dim, rng);
}

Value SingleHeadAttention::forward(Tape& t, Value x) {
    const double s = 1.0 / std::sqrt(static_cast<double>(x.cols()));
    Value a = ad::softmax_rows(
        ad::scale(ad::matmul(wq.forward(t, x), ad::transpose(wk.forward(t, x))), s));
    return wo.forward(t, ad::matmul(a, wv.forward(t, x)));
}

void SingleHeadAttention::collect(std::vector<ad::Parameter*>& out) {
    wq.collect(out);
    wk.collect(out);
    wv.collect(out);
    wo.collect(out);
}

void GlobalStream::init(const std::string& name, int dim, Rng& rng) {
    ln_band.init(name + ".ln_band", dim);
    band_attn.init(name + ".band_attn", dim, rng);
    ln_spatial.init(name + ".ln_spatial", dim);
    spatial_attn.init(name + ".spatial_attn", dim, rng);
    ln_ffn.init(name + ".ln_ffn", dim);
    ffn1.init(name + ".ffn1", dim, 2 * dim, rng);
    ffn2.init(name + ".ffn2", 2 * dim, dim, rng);
}

Value GlobalStream::forward(Tape& t, Value x, int F, int T) {
    std::array<Value, 4> bands = {
        ad::dwt_band(x, F, T, ad::Band::LL), ad::dwt_band(x, F, T, ad::Band::HL),
        ad::dwt_band(x, F, T, ad::Band::LH), ad::dwt_band(x, F, T, ad::Band::HH)};

    std::array<Value, 4> normed;
    for (int b = 0; b < 4; ++b) normed[b] = ln_band.forward(t, bands[b]);
    std::array<Value, 4> attended = band_attn.forward(t, normed);
    for (int b = 0; b < 4; ++b) bands[b] = ad::add(bands[b], attended[b]);

    for (int b = 0; b < 4; ++b)
        bands[b] = ad::add(bands[b], spatial_attn.forward(t, ln_spatial.forward(t, bands[b])));

    for (int b = 0; b < 4; ++b)
        bands[b] = ad::add(
            bands[b], ffn2.forward(t, ad::gelu(ffn1.forward(t, ln_ffn.forward(t, bands[b])))));

    return ad::idwt_merge(bands[0], bands[1], bands[2], bands[3], F, T);
}

void GlobalStream::collect(std::vector<ad::Parameter*>& out) {
    ln_band.collect(out);
    band_attn.collect(out);
    ln_spatial.collect(out);
    spatial_attn.collect(out);
    ln_ffn.collect(out);
    ffn1.collect(out);
    ffn2.collect(out);
}

void LocalStream::init(const std::string& name, int dim, double scale, Rng& rng) {
    const int bottleneck = dim / 4;
    down.init(name + ".down", dim, bottleneck, rng);
    kernel = ad::Parameter(name + ".kernel", randn(3, bottleneck, rng, 0.02));
    up.init(name + ".up", bottleneck, dim, rng);
    s_a = scale;
}

Value LocalStream::forward(Tape& t, Value x) {
    Value y = down.forward(t, x);
    y = ad::dwconv1d(y, t.param(kernel));
    y = up.forward(t, y);
    return ad::scale(ad::gelu(y), s_a);
}

void LocalStream::collect(std::vector<ad::Parameter*>& out) {
    down.collect(out);
    out.push_back(&kernel);
    up.collect(out);
}

void GatedFusion::init(const std::string& name, int dim) {
    wg = ad::Parameter(name + ".wg", Mat::Zero(2 * dim, 1));
}

Value GatedFusion::forward(Tape& t, Value gg, Value gl) {
    if (gg.rows() != gl.rows() || gg.cols() != gl.cols())
        throw InvalidInput("gated_fuse: stream shapes differ");
    Value alpha = ad::sigmoid(ad::matmul(ad::concat_cols({gg, gl}), t.param(wg)));
    Value ones = t.constant(Mat::Ones(gg.rows(), 1));
    return ad::add(ad::row_scale(gg, alpha), ad::row_scale(gl, ad::sub(ones, alpha)));
}

void GatedFusion::collect(std::vector<ad::Parameter*>& out) { out.push_back(&wg); }

void Glfp::init(const std::string& name, int dim, double local_scale, Rng& rng) {
    global.init(name + ".global", dim, rng);
    local.init(name + ".local", dim, local_scale, rng);
    fuse.init(name + ".fuse", dim);
}

Value Glfp::forward(Tape& t, Value x, int F, int T) {
    if (x.rows() != static_cast<Eigen::Index>(F) * T)
        throw InvalidInput("glfp: sequence length does not match the configured grid");
    return fuse.forward(t, global.forward(t, x, F, T), local.forward(t, x));
}

void Glfp::collect(std::vector<ad::Parameter*>& out) {
    global.collect(out);
    local.collect(out);
    fuse.collect(out);
}

void DecoderLayer::init(const std::string& name, int dim, int n_heads, double local_scale,
                        Rng& rng) {
    block.init(name + ".block", dim, n_heads, rng);
    glfp.init(name + ".glfp", dim, local_scale, rng);
}

void DecoderLayer::collect(std::vector<ad::Parameter*>& out) {
    block.collect(out);
    glfp.collect(out);
}

void Classifier::init(const std::string& name, int dim, Rng& rng) {
    query = ad::Parameter(name + ".query", randn(1, dim, rng, 0.02));
    key.init(name + ".key", dim, dim, rng);
    fc1.init(name + ".fc1", dim, dim, rng);
    fc2.init(name + ".fc2", dim, 2, rng);
}

Value Classifier::forward(Tape& t, Value feats) {
    const double s = 1.0 / std::sqrt(static_cast<double>(feats.cols()));
    Value scores = ad::scale(ad::matmul(key.forward(t, feats), ad::transpose(t.param(query))), s);
    Value a = ad::softmax_col(scores);
    Value pooled = ad::matmul(ad::transpose(a), feats);
    return fc2.forward(t, ad::gelu(fc1.forward(t, pooled)));
}

void Classifier::collect(std::vector<ad::Parameter*>& out) {
    out.push_back(&query);
    key.collect(out);
    fc1.collect(out);
    fc2.collect(out);
}

}  // namespace nn

RpraModel::RpraModel(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng rng(derive_seed(seed, 0x6d6f64656cULL));
    const int d = cfg_.embed_dim;

    patch_embed_.init("patch_embed", cfg_.patch_dim, d, rng);
    mask_token_ = ad::Parameter("mask_token", randn(1, d, rng, 0.02));
    encoder_.resize(static_cast<std::size_t>(cfg_.encoder_layers));
    for (int i = 0; i < cfg_.encoder_layers; ++i)
        encoder_[static_cast<std::size_t>(i)].init("enc." + std::to_string(i), d, cfg_.heads, rng);
    enc_norm_.init("enc_norm", d);
    decoder_.resize(static_cast<std::size_t>(cfg_.decoder_layers));
    for (int i = 0; i < cfg_.decoder_layers; ++i)
        decoder_[static_cast<std::size_t>(i)].init("dec." + std::to_string(i), d, cfg_.heads,
                                                   cfg_.glfp_local_scale, rng);
    dec_norm_.init("dec_norm", d);
    dec_pred_.init("dec_pred", d, cfg_.patch_dim, rng);
    ftfa_norm_.init("ftfa_norm", d);
    head_.init("head", d, rng);
}

std::vector<ad::Parameter*> RpraModel::parameters() {
    std::vector<ad::Parameter*> out;
    patch_embed_.collect(out);
    out.push_back(&mask_token_);
    for (auto& b : encoder_) b.collect(out);
    enc_norm_.collect(out);
    for (auto& l : decoder_) l.collect(out);
    dec_norm_.collect(out);
    dec_pred_.collect(out);
    ftfa_norm_.collect(out);
    head_.collect(out);
    return out;
}

Value RpraModel::glfp_forward(Tape& t, int layer, Value feats, int F, int T) {
    if (layer < 0 || layer >= cfg_.decoder_layers)
        throw InvalidInput("glfp_forward: layer out of range");
    return decoder_[static_cast<std::size_t>(layer)].glfp.forward(t, feats, F, T);
}

RpraModel::SampleForward RpraModel::forward_sample(Tape& t, const PatchSet& p, bool train_mode) {
    const int n = p.size();
    if (n <= 0 || n != p.F * p.T || p.patches.cols() != cfg_.patch_dim)
        throw InvalidInput("forward: malformed patch set");
    if (static_cast<int>(p.mask.size()) != n || static_cast<int>(p.coords.size()) != n)
        throw InvalidInput("forward: mask/coords size mismatch");

    std::vector<int> visible;
    if (train_mode) {
        visible = p.visible_indices();
    } else {
        visible.resize(static_cast<std::size_t>(n));
        std::iota(visible.begin(), visible.end(), 0);
    }
    if (visible.empty()) throw InvalidInput("encode: zero visible patches");

    const int d = cfg_.embed_dim;
    const Mat posenc = sincos_position_encoding(p.coords, d);
    const Eigen::Index n_vis = static_cast<Eigen::Index>(visible.size());

    Mat vis_patches(n_vis, cfg_.patch_dim), vis_pos(n_vis, d);
    for (Eigen::Index k = 0; k < n_vis; ++k) {
        vis_patches.row(k) = p.patches.row(visible[static_cast<std::size_t>(k)]);
        vis_pos.row(k) = posenc.row(visible[static_cast<std::size_t>(k)]);
    }

    // encoder over visible patches
    Value x = patch_embed_.forward(t, t.constant(std::move(vis_patches)));
    x = ad::add(x, t.constant(std::move(vis_pos)));
    for (auto& blk : encoder_) x = blk.forward(t, x);
    Value f_en = enc_norm_.forward(t, x);

    // decoder over the full grid, mask token at hidden positions
    Value tokens = ad::assemble_tokens(n, t.param(mask_token_), f_en, visible);
    tokens = ad::add(tokens, t.constant(posenc));

    const std::vector<int> probes = cfg_.resolved_probe_layers();
    SampleForward out;
    for (int l = 0; l < cfg_.decoder_layers; ++l) {
        auto& layer = decoder_[static_cast<std::size_t>(l)];
        tokens = layer.block.forward(t, tokens);
        tokens = layer.glfp.forward(t, tokens, p.F, p.T);
        if (std::find(probes.begin(), probes.end(), l + 1) != probes.end())
            out.probe_feats.push_back(ad::colwise_mean(tokens));
    }
    out.recon = dec_pred_.forward(t, dec_norm_.forward(t, tokens));

    // FTFA: per-patch mean absolute reconstruction discrepancy -> softmax ->
    // residual reweighting of the encoded features.
    out.participating = visible;
    Mat orig(n_vis, cfg_.patch_dim);
    for (Eigen::Index k = 0; k < n_vis; ++k)
        orig.row(k) = p.patches.row(visible[static_cast<std::size_t>(k)]);
    Value recon_part = (static_cast<int>(visible.size()) == n)
                           ? out.recon
                           : ad::gather_rows(out.recon, visible);
    out.ftfa_weights = ftfa_weights_from_discrepancy(t, recon_part, orig);
    out.encoded = f_en;
    out.ftfa_out = ftfa_norm_.forward(t, ad::add(f_en, ad::row_scale(f_en, out.ftfa_weights)));
    out.logits = head_.forward(t, out.ftfa_out);
    return out;
}

ForwardOutput forward_full(RpraModel& model, const std::vector<Waveform>& batch, bool train_mode,
                           std::uint64_t mask_seed, const FbankConfig& fbank) {
    if (batch.empty()) throw InvalidInput("forward_full: empty batch");
    for (const Waveform& w : batch)
        if (w.samples.size() != batch[0].samples.size())
            throw InvalidInput("forward_full: batch durations differ");

    const auto& cfg = model.config();
    const std::vector<int> probes = cfg.resolved_probe_layers();
    const int b_sz = static_cast<int>(batch.size());

    ForwardOutput out;
    out.logits.resize(b_sz, 2);
    out.probe_embeddings.resize(probes.size());
    for (std::size_t k = 0; k < probes.size(); ++k) {
        out.probe_embeddings[k].layer_index = probes[k];
        out.probe_embeddings[k].features.resize(b_sz, cfg.embed_dim);
    }

    for (int b = 0; b < b_sz; ++b) {
        PatchSet ps = patchify(compute_fbank(batch[static_cast<std::size_t>(b)], fbank));
        if (train_mode)
            ps = mask_patches(ps, cfg.mask_ratio,
                              derive_seed(mask_seed, static_cast<std::uint64_t>(b)));

        ad::Tape t(false);
        auto sf = model.forward_sample(t, ps, train_mode);

        out.logits.row(b) = sf.logits.val().row(0);
        PatchSet recon = ps;
        recon.patches = sf.recon.val();
        out.reconstructed.push_back(std::move(recon));
        for (std::size_t k = 0; k < probes.size(); ++k)
            out.probe_embeddings[k].features.row(b) = sf.probe_feats[k].val().row(0);
        out.ftfa_weights.push_back(sf.ftfa_weights.val().col(0));
        out.encoded.push_back(sf.encoded.val());
    }
    return out;
}

// ---- checkpoint io -----------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'R', 'P', 'R', 'A', 'C', 'K', 'P', '1'};

json config_to_json(const ModelConfig& c, const FbankConfig& f) {
    return json{{"embed_dim", c.embed_dim},
                {"encoder_layers", c.encoder_layers},
                {"decoder_layers", c.decoder_layers},
                {"heads", c.heads},
                {"patch_dim", c.patch_dim},
                {"mask_ratio", c.mask_ratio},
                {"glfp_local_scale", c.glfp_local_scale},
                {"probe_layers", c.probe_layers},
                {"fbank",
                 {{"mel_bins", f.mel_bins},
                  {"window_ms", f.window_ms},
                  {"hop_ms", f.hop_ms},
                  {"target_frames", f.target_frames},
                  {"fft_size", f.fft_size}}}};
}

ModelConfig config_from_json(const json& j) {
    ModelConfig c;
    c.embed_dim = j.at("embed_dim").get<int>();
    c.encoder_layers = j.at("encoder_layers").get<int>();
    c.decoder_layers = j.at("decoder_layers").get<int>();
    c.heads = j.at("heads").get<int>();
    c.patch_dim = j.at("patch_dim").get<int>();
    c.mask_ratio = j.at("mask_ratio").get<double>();
    c.glfp_local_scale = j.at("glfp_local_scale").get<double>();
    c.probe_layers = j.at("probe_layers").get<std::vector<int>>();
    return c;
}

FbankConfig fbank_from_json(const json& j) {
    FbankConfig f;
    f.mel_bins = j.at("mel_bins").get<int>();
    f.window_ms = j.at("window_ms").get<double>();
    f.hop_ms = j.at("hop_ms").get<double>();
    f.target_frames = j.at("target_frames").get<int>();
    f.fft_size = j.at("fft_size").get<int>();
    return f;
}

void write_u64(std::ostream& out, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 8);
}

std::uint64_t read_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, RpraModel& model, const FbankConfig& fbank) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot create checkpoint: " + path);
    out.write(kMagic, 8);
    const std::string cfg = config_to_json(model.config(), fbank).dump();
    write_u64(out, cfg.size());
    out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));

    auto params = model.parameters();
    write_u64(out, params.size());
    for (const ad::Parameter* p : params) {
        write_u64(out, p->name.size());
        out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        write_u64(out, static_cast<std::uint64_t>(p->value.rows()));
        write_u64(out, static_cast<std::uint64_t>(p->value.cols()));
        out.write(reinterpret_cast<const char*>(p->value.data()),
                  static_cast<std::streamsize>(sizeof(double) * p->value.size()));
    }
    if (!out) throw IoError("short write: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw InvalidInput(path + ": not a checkpoint file");

    const std::uint64_t cfg_len = read_u64(in);
    std::string cfg_str(cfg_len, '\0');
    in.read(cfg_str.data(), static_cast<std::streamsize>(cfg_len));
    const json cfg_json = json::parse(cfg_str);
    Checkpoint ckpt{RpraModel(config_from_json(cfg_json), 0),
                    fbank_from_json(cfg_json.at("fbank"))};
    RpraModel& model = ckpt.model;

    std::unordered_map<std::string, ad::Parameter*> by_name;
    for (ad::Parameter* p : model.parameters()) by_name[p->name] = p;

    const std::uint64_t count = read_u64(in);
    if (count != by_name.size())
        throw InvalidInput(path + ": parameter count mismatch");
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint64_t name_len = read_u64(in);
        std::string name(name_len, '\0');
        in.read(name.data(), static_cast<std::streamsize>(name_len));
        const auto rows = static_cast<Eigen::Index>(read_u64(in));
        const auto cols = static_cast<Eigen::Index>(read_u64(in));
        auto it = by_name.find(name);
        if (it == by_name.end()) throw InvalidInput(path + ": unknown parameter " + name);
        if (it->second->value.rows() != rows || it->second->value.cols() != cols)
            throw InvalidInput(path + ": shape mismatch for " + name);
        in.read(reinterpret_cast<char*>(it->second->value.data()),
                static_cast<std::streamsize>(sizeof(double) * rows * cols));
    }
    if (!in) throw IoError("truncated checkpoint: " + path);
    return ckpt;
}

}  // namespace rpra
