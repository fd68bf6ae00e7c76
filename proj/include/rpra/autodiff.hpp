#pragma once

#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "rpra/types.hpp"

namespace rpra::ad {

using rpra::Mat;

// Named trainable tensor. `grad` accumulates across Tape::backward calls
// until zero_grad().
struct Parameter {
    std::string name;
    Mat value;
    Mat grad;

    Parameter() = default;
    Parameter(std::string n, Mat v)
        : name(std::move(n)), value(std::move(v)),
          grad(Mat::Zero(value.rows(), value.cols())) {}

    void zero_grad() { grad.setZero(); }
};

class Tape;

// Handle to a node on a Tape. Cheap to copy; owns nothing.
class Value {
public:
    Value() = default;
    Value(Tape* tape, int idx) : tape_(tape), idx_(idx) {}

    const Mat& val() const;
    const Mat& grad() const;  // valid after Tape::backward
    bool defined() const { return tape_ != nullptr; }
    Tape* tape() const { return tape_; }
    int idx() const { return idx_; }
    Eigen::Index rows() const { return val().rows(); }
    Eigen::Index cols() const { return val().cols(); }

private:
    Tape* tape_ = nullptr;
    int idx_ = -1;
};

// Reverse-mode tape. Nodes are created in execution order, which is a
// topological order, so backward() is a single reverse sweep. Constructing
// with grads_enabled=false turns every op into plain evaluation.
class Tape {
public:
    using Backward = std::function<void(Tape&, const Mat& out_value, const Mat& out_grad)>;

    explicit Tape(bool grads_enabled = true) : grads_enabled_(grads_enabled) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    bool grads_enabled() const { return grads_enabled_; }

    Value constant(Mat v);
    Value input(Mat v);              // grad-tracked leaf
    Value param(Parameter& p);       // cached: one leaf per parameter per tape
    Value make(Mat value, bool needs_grad, Backward fn);

    // Seeds the (1x1) root with grad 1 and sweeps the tape in reverse.
    // Parameter gradients are then accumulated into their Parameter::grad.
    void backward(Value root);

    const Mat& value_of(int idx) const { return nodes_[idx]->value; }
    const Mat& grad_view(int idx) const { return nodes_[idx]->grad; }
    bool needs(int idx) const { return nodes_[idx]->needs_grad; }
    std::size_t size() const { return nodes_.size(); }

    template <typename E>
    void accum(int idx, const E& e) {
        NodeRec& n = *nodes_[idx];
        if (!n.needs_grad) return;
        if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
        n.grad += e;
    }

private:
    struct NodeRec {
        Mat value;
        Mat grad;
        Backward fn;
        bool needs_grad = false;
    };

    bool grads_enabled_;
    std::vector<std::unique_ptr<NodeRec>> nodes_;
    std::unordered_map<Parameter*, int> param_leaves_;
    std::vector<std::pair<Parameter*, int>> param_order_;
};

// ---- elementwise / structural ops -----------------------------------------

Value add(Value a, Value b);
Value sub(Value a, Value b);
Value neg(Value a);
Value scale(Value a, double s);
Value matmul(Value a, Value b);
Value cmul(Value a, Value b);
Value square(Value a);
Value absval(Value a);
Value sigmoid(Value a);
Value gelu(Value a);
Value transpose(Value a);

// a: m x n plus row vector r: 1 x n broadcast over rows (bias add)
Value add_row_vector(Value a, Value r);
// a: m x n, w: m x 1; scales row i by w(i)
Value row_scale(Value a, Value w);

Value concat_rows(const std::vector<Value>& parts);
Value concat_cols(const std::vector<Value>& parts);
Value block(Value a, Eigen::Index i, Eigen::Index j, Eigen::Index p, Eigen::Index q);
Value gather_rows(Value a, const std::vector<int>& rows);

Value sum_all(Value a);
Value mean_all(Value a);
Value colwise_mean(Value a);  // m x n -> 1 x n
Value rowwise_sum(Value a);   // m x n -> m x 1

Value softmax_rows(Value a);
Value softmax_col(Value a);  // m x 1 softmax down the column

// Per-row layer normalization with learned gain/bias (1 x n each).
Value layer_norm_rows(Value a, Value gamma, Value beta, double eps = 1e-5);

// ---- grid / sequence ops ---------------------------------------------------

enum class Band { LL = 0, HL = 1, LH = 2, HH = 3 };

// a: N x d with row index f*T + t. Extracts one orthonormal-Haar subband as
// an (N/4) x d matrix with row index fs*(T/2) + ts.
Value dwt_band(Value a, int F, int T, Band band);

// Inverse of the four dwt_band extractions; returns N x d.
Value idwt_merge(Value ll, Value hl, Value lh, Value hh, int F, int T);

// x: N x C, kernel k: 3 x C (offsets -1, 0, +1), zero padding, per-channel.
Value dwconv1d(Value x, Value k);

// Builds the decoder input: visible rows come from `visible_feats`
// (n_vis x d, row order = visible_indices), all other rows are the shared
// mask token (1 x d).
Value assemble_tokens(int n_total, Value mask_token, Value visible_feats,
                      const std::vector<int>& visible_indices);

// ---- loss kernels ----------------------------------------------------------

// logits: B x 2, labels: class index per row. Mean batch NLL with
// log-sum-exp stabilization.
Value cross_entropy_loss(Value logits, const std::vector<int>& labels);

// Mean pairwise real-real distance plus mean hinge(m - d) over real-fake
// pairs; emb: B x d, is_real: per-row flags. Degenerate pair sets contribute
// zero for their term.
Value dispersal_loss(Value emb, const std::vector<std::uint8_t>& is_real, double margin);

}  // namespace rpra::ad
