#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rpra/autodiff.hpp"
#include "rpra/dsp.hpp"
#include "rpra/rng.hpp"
#include "rpra/types.hpp"

namespace rpra {

struct ModelConfig {
    int embed_dim = 64;       // d
    int encoder_layers = 4;
    int decoder_layers = 4;   // D
    int heads = 4;
    int patch_dim = kPatchDim;    // C = 256, fixed by 16x16 patching
    double mask_ratio = 0.8;      // rho
    double glfp_local_scale = 1.0;  // s_a
    std::vector<int> probe_layers;  // empty -> default placement

    // Default probe placement: {D/4, D/2, 3D/4, D} when D is divisible by 4,
    // otherwise just the final layer.
    std::vector<int> resolved_probe_layers() const;
    void validate() const;
};

// Per-sample, per-layer pooled features consumed by the dispersal losses.
struct EmbeddingBatch {
    Mat features;  // B x d
    int layer_index = 0;
    std::vector<std::uint8_t> labels;  // true = real/bonafide
};

struct ForwardOutput {
    Mat logits;                                   // B x 2
    std::vector<PatchSet> reconstructed;          // X~ per sample
    std::vector<EmbeddingBatch> probe_embeddings; // one per probe layer
    std::vector<Vec> ftfa_weights;                // per sample, over participating patches
    std::vector<Mat> encoded;                     // per sample F_en
};

// Sets mask flags: exactly N - round(rho*N) patches stay visible, chosen
// uniformly by a generator seeded with `seed`.
PatchSet mask_patches(const PatchSet& p, double rho, std::uint64_t seed);

// Fixed 2-D sinusoidal table; first half of each row encodes the band index,
// second half the time index.
Mat sincos_position_encoding(const std::vector<std::pair<int, int>>& coords, int dim);

// Per-patch mean absolute discrepancy between reconstruction and original,
// softmax-normalized over patches. This is the attention-weight kernel of
// the reconstruction-discrepancy reweighting.
ad::Value ftfa_weights_from_discrepancy(ad::Tape& t, ad::Value recon_rows,
                                        const Mat& original_rows);

namespace nn {

using ad::Tape;
using ad::Value;

struct Linear {
    ad::Parameter w, b;
    bool has_bias = true;

    void init(const std::string& name, int in, int out, Rng& rng, bool bias = true,
              double stddev = 0.02);
    Value forward(Tape& t, Value x);
    void collect(std::vector<ad::Parameter*>& out);
};

struct LayerNorm {
    ad::Parameter gamma, beta;

    void init(const std::string& name, int dim);
    Value forward(Tape& t, Value x);
    void collect(std::vector<ad::Parameter*>& out);
};

struct MultiHeadAttention {
    int heads = 1;
    int head_dim = 0;
    Linear wq, wk, wv, wo;

    void init(const std::string& name, int dim, int n_heads, Rng& rng);
    Value forward(Tape& t, Value x);
    void collect(std::vector<ad::Parameter*>& out);
};

struct TransformerBlock {
    LayerNorm ln1, ln2;
    MultiHeadAttention attn;
    Linear fc1, fc2;

    void init(const std::string& name, int dim, int n_heads, Rng& rng);
    Value forward(Tape& t, Value x);
    void collect(std::vector<ad::Parameter*>& out);
};

// Attention over the four subbands at each spatial location (single head,
// parameters shared across locations).
struct BandAttention {
    Linear wq, wk, wv, wo;

    void init(const std::string& name, int dim, Rng& rng);
    std::array<Value, 4> forward(Tape& t, const std::array<Value, 4>& bands);
    void collect(std::vector<ad::Parameter*>& out);
};

// Plain single-head self-attention over spatial positions, applied to each
// band with shared parameters.
struct SingleHeadAttention {
    Linear wq, wk, wv, wo;

    void init(const std::string& name, int dim, Rng& rng);
    Value forward(Tape& t, Value x);
    void collect(std::vector<ad::Parameter*>& out);
};

// DWT -> pre-norm residual (band attention, spatial attention, FFN) -> IDWT.
// With the attention/FFN output projections zeroed the whole stream is the
// identity, since the Haar pair reconstructs perfectly.
struct GlobalStream {
    LayerNorm ln_band, ln_spatial, ln_ffn;
    BandAttention band_attn;
    SingleHeadAttention spatial_attn;
    Linear ffn1, ffn2;

    void init(const std::string& name, int dim, Rng& rng);
    Value forward(Tape& t, Value x, int F, int T);
    void collect(std::vector<ad::Parameter*>& out);
};

// Bottleneck adapter: pointwise d -> d/4, depthwise conv (k=3) along the
// patch sequence, pointwise d/4 -> d, GELU, scaled by s_a.
struct LocalStream {
    Linear down, up;
    ad::Parameter kernel;  // 3 x d/4
    double s_a = 1.0;

    void init(const std::string& name, int dim, double scale, Rng& rng);
    Value forward(Tape& t, Value x);
    void collect(std::vector<ad::Parameter*>& out);
};

struct GatedFusion {
    ad::Parameter wg;  // 2d x 1, zero-initialized (alpha starts at 0.5)

    void init(const std::string& name, int dim);
    Value forward(Tape& t, Value gg, Value gl);
    void collect(std::vector<ad::Parameter*>& out);
};

struct Glfp {
    GlobalStream global;
    LocalStream local;
    GatedFusion fuse;

    void init(const std::string& name, int dim, double local_scale, Rng& rng);
    Value forward(Tape& t, Value x, int F, int T);
    void collect(std::vector<ad::Parameter*>& out);
};

struct DecoderLayer {
    TransformerBlock block;
    Glfp glfp;

    void init(const std::string& name, int dim, int n_heads, double local_scale, Rng& rng);
    void collect(std::vector<ad::Parameter*>& out);
};

// Learned-query attention pooling over patches, then a 2-layer head.
struct Classifier {
    ad::Parameter query;  // 1 x d
    Linear key, fc1, fc2;

    void init(const std::string& name, int dim, Rng& rng);
    Value forward(Tape& t, Value feats);
    void collect(std::vector<ad::Parameter*>& out);
};

}  // namespace nn

class RpraModel {
public:
    RpraModel(ModelConfig cfg, std::uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    std::vector<ad::Parameter*> parameters();

    struct SampleForward {
        ad::Value recon;         // N x 256
        ad::Value encoded;       // N' x d, F_en
        ad::Value ftfa_weights;  // N' x 1
        ad::Value ftfa_out;      // N' x d
        ad::Value logits;        // 1 x 2
        std::vector<ad::Value> probe_feats;  // 1 x d per probe layer
        std::vector<int> participating;      // patch indices scored by FTFA
    };

    // Full differentiable pipeline for one sample. In train mode the encoder
    // sees only unmasked patches and FTFA scores those; in eval mode masking
    // is ignored and every patch participates.
    SampleForward forward_sample(ad::Tape& t, const PatchSet& p, bool train_mode);

    // Standalone GLFP application (testing / inspection).
    ad::Value glfp_forward(ad::Tape& t, int layer, ad::Value feats, int F, int T);

    nn::Glfp& glfp(int layer) { return decoder_[static_cast<std::size_t>(layer)].glfp; }
    nn::TransformerBlock& encoder_block(int i) { return encoder_[static_cast<std::size_t>(i)]; }
    nn::DecoderLayer& decoder_layer(int i) { return decoder_[static_cast<std::size_t>(i)]; }
    nn::Classifier& classifier() { return head_; }
    nn::LayerNorm& ftfa_norm() { return ftfa_norm_; }

private:
    ModelConfig cfg_;
    nn::Linear patch_embed_;
    ad::Parameter mask_token_;
    std::vector<nn::TransformerBlock> encoder_;
    nn::LayerNorm enc_norm_;
    std::vector<nn::DecoderLayer> decoder_;
    nn::LayerNorm dec_norm_;
    nn::Linear dec_pred_;
    nn::LayerNorm ftfa_norm_;
    nn::Classifier head_;
};

// Batch forward on a no-grad tape: fbank -> patchify -> (train: mask) ->
// model. All waveforms must share one duration. Labels are not consumed here;
// EmbeddingBatch.labels is left for the caller to fill.
ForwardOutput forward_full(RpraModel& model, const std::vector<Waveform>& batch,
                           bool train_mode, std::uint64_t mask_seed,
                           const FbankConfig& fbank = FbankConfig());

// Real-ness score used by the metrics: logit(bonafide) - logit(spoof).
inline double realness_score(const Eigen::Ref<const Eigen::RowVectorXd>& logits_row) {
    return logits_row(1) - logits_row(0);
}

// Binary container: config JSON (model + front-end) and named parameter
// tensors as little-endian doubles. Round-trips parameters bit-exactly.
struct Checkpoint {
    RpraModel model;
    FbankConfig fbank;
};

void save_checkpoint(const std::string& path, RpraModel& model, const FbankConfig& fbank);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace rpra
