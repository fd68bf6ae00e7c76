#include "rpra/autodiff.hpp"

#include <cmath>

namespace rpra::ad {

namespace {

Tape& same_tape(Value a, Value b) {
    if (a.tape() != b.tape())
        throw InvalidInput("autodiff: operands come from different tapes");
    return *a.tape();
}

void check_same_shape(Value a, Value b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw InvalidInput(std::string(op) + ": shape mismatch " +
                           std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                           std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
}

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

}  // namespace

const Mat& Value::val() const { return tape_->value_of(idx_); }
const Mat& Value::grad() const { return tape_->grad_view(idx_); }

Value Tape::constant(Mat v) {
    auto n = std::make_unique<NodeRec>();
    n->value = std::move(v);
    nodes_.push_back(std::move(n));
    return Value(this, static_cast<int>(nodes_.size()) - 1);
}

Value Tape::input(Mat v) {
    auto n = std::make_unique<NodeRec>();
    n->value = std::move(v);
    n->needs_grad = grads_enabled_;
    nodes_.push_back(std::move(n));
    return Value(this, static_cast<int>(nodes_.size()) - 1);
}

Value Tape::param(Parameter& p) {
    auto it = param_leaves_.find(&p);
    if (it != param_leaves_.end()) return Value(this, it->second);
    Value v = grads_enabled_ ? input(p.value) : constant(p.value);
    param_leaves_.emplace(&p, v.idx());
    if (grads_enabled_) param_order_.emplace_back(&p, v.idx());
    return v;
}

Value Tape::make(Mat value, bool needs_grad, Backward fn) {
    auto n = std::make_unique<NodeRec>();
    n->value = std::move(value);
    if (grads_enabled_ && needs_grad) {
        n->needs_grad = true;
        n->fn = std::move(fn);
    }
    nodes_.push_back(std::move(n));
    return Value(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::backward(Value root) {
    if (!grads_enabled_) throw InvalidInput("backward on a no-grad tape");
    if (root.rows() != 1 || root.cols() != 1)
        throw InvalidInput("backward: root must be a 1x1 scalar");
    nodes_[root.idx()]->grad = Mat::Ones(1, 1);
    for (int i = root.idx(); i >= 0; --i) {
        NodeRec& n = *nodes_[i];
        if (n.fn && n.grad.size() != 0) n.fn(*this, n.value, n.grad);
    }
    for (auto& [p, idx] : param_order_) {
        const Mat& g = nodes_[idx]->grad;
        if (g.size() != 0) p->grad += g;
    }
}

// ---- elementwise / structural ----------------------------------------------

Value add(Value a, Value b) {
    Tape& t = same_tape(a, b);
    check_same_shape(a, b, "add");
    const int ai = a.idx(), bi = b.idx();
    return t.make(a.val() + b.val(), t.needs(ai) || t.needs(bi),
                  [ai, bi](Tape& t, const Mat&, const Mat& g) {
                      t.accum(ai, g);
                      t.accum(bi, g);
                  });
}

Value sub(Value a, Value b) {
    Tape& t = same_tape(a, b);
    check_same_shape(a, b, "sub");
    const int ai = a.idx(), bi = b.idx();
    return t.make(a.val() - b.val(), t.needs(ai) || t.needs(bi),
                  [ai, bi](Tape& t, const Mat&, const Mat& g) {
                      t.accum(ai, g);
                      t.accum(bi, -g);
                  });
}

Value neg(Value a) { return scale(a, -1.0); }

Value scale(Value a, double s) {
    Tape& t = *a.tape();
    const int ai = a.idx();
    return t.make(a.val() * s, t.needs(ai),
                  [ai, s](Tape& t, const Mat&, const Mat& g) { t.accum(ai, g * s); });
}

Value matmul(Value a, Value b) {
    Tape& t = same_tape(a, b);
    if (a.cols() != b.rows()) throw InvalidInput("matmul: inner dimensions differ");
    const int ai = a.idx(), bi = b.idx();
    return t.make(a.val() * b.val(), t.needs(ai) || t.needs(bi),
                  [ai, bi](Tape& t, const Mat&, const Mat& g) {
                      t.accum(ai, g * t.value_of(bi).transpose());
                      t.accum(bi, t.value_of(ai).transpose() * g);
                  });
}

Value cmul(Value a, Value b) {
    Tape& t = same_tape(a, b);
    check_same_shape(a, b, "cmul");
    const int ai = a.idx(), bi = b.idx();
    return t.make(a.val().cwiseProduct(b.val()), t.needs(ai) || t.needs(bi),
                  [ai, bi](Tape& t, const Mat&, const Mat& g) {
                      t.accum(ai, g.cwiseProduct(t.value_of(bi)));
                      t.accum(bi, g.cwiseProduct(t.value_of(ai)));
                  });
}

Value square(Value a) {
    Tape& t = *a.tape();
    const int ai = a.idx();
    return t.make(a.val().array().square().matrix(), t.needs(ai),
                  [ai](Tape& t, const Mat&, const Mat& g) {
                      t.accum(ai, 2.0 * g.cwiseProduct(t.value_of(ai)));
                  });
}

Value absval(Value a) {
    Tape& t = *a.tape();
    const int ai = a.idx();
    return t.make(a.val().cwiseAbs(), t.needs(ai),
                  [ai](Tape& t, const Mat&, const Mat& g) {
                      t.accum(ai, g.cwiseProduct(t.value_of(ai).unaryExpr(
                                      [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); })));
                  });
}

Value sigmoid(Value a) {
    Tape& t = *a.tape();
    const int ai = a.idx();
    Mat y = a.val().unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
    return t.make(std::move(y), t.needs(ai),
                  [ai](Tape& t, const Mat& y, const Mat& g) {
                      t.accum(ai, g.cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix())));
                  });
}

Value gelu(Value a) {
    Tape& t = *a.tape();
    const int ai = a.idx();
    Mat y = a.val().unaryExpr(
        [](double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); });
    return t.make(std::move(y), t.needs(ai),
                  [ai](Tape& t, const Mat&, const Mat& g) {
                      const Mat& x = t.value_of(ai);
                      Mat d = x.unaryExpr([](double v) {
                          return 0.5 * (1.0 + std::erf(v * kInvSqrt2)) +
                                 v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
                      });
                      t.accum(ai, g.cwiseProduct(d));
                  });
}

Value transpose(Value a) {
    Tape& t = *a.tape();
    const int ai = a.idx();
    return t.make(a.val().transpose(), t.needs(ai),
                  [ai](Tape& t, const Mat&, const Mat& g) { t.accum(ai, g.transpose()); });
}

Value add_row_vector(Value a, Value r) {
    Tape& t = same_tape(a, r);
    if (r.rows() != 1 || r.cols() != a.cols())
        throw InvalidInput("add_row_vector: bias must be 1 x cols(a)");
    const int ai = a.idx(), ri = r.idx();
    Mat v = a.val();
    v.rowwise() += r.val().row(0);
    return t.make(std::move(v), t.needs(ai) || t.needs(ri),
                  [ai, ri](Tape& t, const Mat&, const Mat& g) {
                      t.accum(ai, g);
                      t.accum(ri, g.colwise().sum());
                  });
}

Value row_scale(Value a, Value w) {
    Tape& t = same_tape(a, w);
    if (w.cols() != 1 || w.rows() != a.rows())
        throw InvalidInput("row_scale: weight must be rows(a) x 1");
    const int ai = a.idx(), wi = w.idx();
    Mat v = a.val().array().colwise() * w.val().col(0).array();
    return t.make(std::move(v), t.needs(ai) || t.needs(wi),
                  [ai, wi](Tape& t, const Mat&, const Mat& g) {
                      t.accum(ai, (g.array().colwise() * t.value_of(wi).col(0).array()).matrix());
                      t.accum(wi, g.cwiseProduct(t.value_of(ai)).rowwise().sum());
                  });
}

Value concat_rows(const std::vector<Value>& parts) {
    if (parts.empty()) throw InvalidInput("concat_rows: no parts");
    Tape& t = *parts[0].tape();
    Eigen::Index rows = 0;
    const Eigen::Index cols = parts[0].cols();
    bool needs = false;
    for (const Value& p : parts) {
        if (p.cols() != cols) throw InvalidInput("concat_rows: column mismatch");
        rows += p.rows();
        needs = needs || t.needs(p.idx());
    }
    Mat v(rows, cols);
    std::vector<int> idxs;
    std::vector<Eigen::Index> sizes;
    Eigen::Index at = 0;
    for (const Value& p : parts) {
        v.middleRows(at, p.rows()) = p.val();
        idxs.push_back(p.idx());
        sizes.push_back(p.rows());
        at += p.rows();
    }
    return t.make(std::move(v), needs,
                  [idxs, sizes](Tape& t, const Mat&, const Mat& g) {
                      Eigen::Index at = 0;
                      for (std::size_t k = 0; k < idxs.size(); ++k) {
                          t.accum(idxs[k], g.middleRows(at, sizes[k]));
                          at += sizes[k];
                      }
                  });
}

Value concat_cols(const std::vector<Value>& parts) {
    if (parts.empty()) throw InvalidInput("concat_cols: no parts");
    Tape& t = *parts[0].tape();
    Eigen::Index cols = 0;
    const Eigen::Index rows = parts[0].rows();
    bool needs = false;
    for (const Value& p : parts) {
        if (p.rows() != rows) throw InvalidInput("concat_cols: row mismatch");
        cols += p.cols();
        needs = needs || t.needs(p.idx());
    }
    Mat v(rows, cols);
    std::vector<int> idxs;
    std::vector<Eigen::Index> sizes;
    Eigen::Index at = 0;
    for (const Value& p : parts) {
        v.middleCols(at, p.cols()) = p.val();
        idxs.push_back(p.idx());
        sizes.push_back(p.cols());
        at += p.cols();
    }
    return t.make(std::move(v), needs,
                  [idxs, sizes](Tape& t, const Mat&, const Mat& g) {
                      Eigen::Index at = 0;
                      for (std::size_t k = 0; k < idxs.size(); ++k) {
                          t.accum(idxs[k], g.middleCols(at, sizes[k]));
                          at += sizes[k];
                      }
                  });
}

Value block(Value a, Eigen::Index i, Eigen::Index j, Eigen::Index p, Eigen::Index q) {
    Tape& t = *a.tape();
    const int ai = a.idx();
    const Eigen::Index rows = a.rows(), cols = a.cols();
    if (i < 0 || j < 0 || i + p > rows || j + q > cols)
        throw InvalidInput("block: out of range");
    return t.make(a.val().block(i, j, p, q), t.needs(ai),
                  [ai, i, j, p, q, rows, cols](Tape& t, const Mat&, const Mat& g) {
                      Mat full = Mat::Zero(rows, cols);
                      full.block(i, j, p, q) = g;
                      t.accum(ai, full);
                  });
}

Value gather_rows(Value a, const std::vector<int>& rows) {
    Tape& t = *a.tape();
    const int ai = a.idx();
    Mat v(static_cast<Eigen::Index>(rows.size()), a.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        if (rows[k] < 0 || rows[k] >= a.rows()) throw InvalidInput("gather_rows: index out of range");
        v.row(static_cast<Eigen::Index>(k)) = a.val().row(rows[k]);
    }
    const Eigen::Index nr = a.rows(), nc = a.cols();
    return t.make(std::move(v), t.needs(ai),
                  [ai, rows, nr, nc](Tape& t, const Mat&, const Mat& g) {
                      Mat full = Mat::Zero(nr, nc);
                      for (std::size_t k = 0; k < rows.size(); ++k)
                          full.row(rows[k]) += g.row(static_cast<Eigen::Index>(k));
                      t.accum(ai, full);
                  });
}

Value sum_all(Value a) {
    Tape& t = *a.tape();
    const int ai = a.idx();
    Mat v(1, 1);
    v(0, 0) = a.val().sum();
    const Eigen::Index r = a.rows(), c = a.cols();
    return t.make(std::move(v), t.needs(ai),
                  [ai, r, c](Tape& t, const Mat&, const Mat& g) {
                      t.accum(ai, Mat::Constant(r, c, g(0, 0)));
                  });
}

Value mean_all(Value a) {
    return scale(sum_all(a), 1.0 / static_cast<double>(a.rows() * a.cols()));
}

Value colwise_mean(Value a) {
    Tape& t = *a.tape();
    const int ai = a.idx();
    const Eigen::Index r = a.rows();
    Mat v = a.val().colwise().mean();
    return t.make(std::move(v), t.needs(ai),
                  [ai, r](Tape& t, const Mat&, const Mat& g) {
                      t.accum(ai, (Mat::Ones(r, 1) * g) / static_cast<double>(r));
                  });
}

Value rowwise_sum(Value a) {
    Tape& t = *a.tape();
    const int ai = a.idx();
    const Eigen::Index c = a.cols();
    Mat v = a.val().rowwise().sum();
    return t.make(std::move(v), t.needs(ai),
                  [ai, c](Tape& t, const Mat&, const Mat& g) {
                      t.accum(ai, g * Mat::Ones(1, c));
                  });
}

Value softmax_rows(Value a) {
    Tape& t = *a.tape();
    const int ai = a.idx();
    Mat y = a.val();
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
        const double mx = y.row(i).maxCoeff();
        y.row(i) = (y.row(i).array() - mx).exp();
        y.row(i) /= y.row(i).sum();
    }
    return t.make(std::move(y), t.needs(ai),
                  [ai](Tape& t, const Mat& y, const Mat& g) {
                      Mat d(y.rows(), y.cols());
                      for (Eigen::Index i = 0; i < y.rows(); ++i) {
                          const double dot = g.row(i).dot(y.row(i));
                          d.row(i) = y.row(i).cwiseProduct((g.row(i).array() - dot).matrix());
                      }
                      t.accum(ai, d);
                  });
}

Value softmax_col(Value a) {
    if (a.cols() != 1) throw InvalidInput("softmax_col: expected a column vector");
    Tape& t = *a.tape();
    const int ai = a.idx();
    Mat y = a.val();
    const double mx = y.maxCoeff();
    y = (y.array() - mx).exp();
    y /= y.sum();
    return t.make(std::move(y), t.needs(ai),
                  [ai](Tape& t, const Mat& y, const Mat& g) {
                      const double dot = (g.cwiseProduct(y)).sum();
                      t.accum(ai, y.cwiseProduct((g.array() - dot).matrix()));
                  });
}

Value layer_norm_rows(Value a, Value gamma, Value beta, double eps) {
    Tape& t = same_tape(a, gamma);
    same_tape(gamma, beta);
    const Eigen::Index n = a.cols();
    if (gamma.rows() != 1 || gamma.cols() != n || beta.rows() != 1 || beta.cols() != n)
        throw InvalidInput("layer_norm_rows: gain/bias must be 1 x cols(a)");
    const int ai = a.idx(), gi = gamma.idx(), bi = beta.idx();

    const Mat& x = a.val();
    Mat xhat(x.rows(), n);
    Mat inv_std(x.rows(), 1);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double mu = x.row(i).mean();
        const double var = (x.row(i).array() - mu).square().mean();
        const double s = 1.0 / std::sqrt(var + eps);
        inv_std(i, 0) = s;
        xhat.row(i) = (x.row(i).array() - mu) * s;
    }
    Mat y = xhat;
    y.array().rowwise() *= gamma.val().row(0).array();
    y.rowwise() += beta.val().row(0);

    const bool needs = t.needs(ai) || t.needs(gi) || t.needs(bi);
    return t.make(std::move(y), needs,
                  [ai, gi, bi, xhat, inv_std](Tape& t, const Mat&, const Mat& g) {
                      t.accum(gi, g.cwiseProduct(xhat).colwise().sum());
                      t.accum(bi, g.colwise().sum());
                      if (!t.needs(ai)) return;
                      const Mat& gamma = t.value_of(gi);
                      Mat dxhat = g;
                      dxhat.array().rowwise() *= gamma.row(0).array();
                      Mat dx(g.rows(), g.cols());
                      for (Eigen::Index i = 0; i < g.rows(); ++i) {
                          const double m1 = dxhat.row(i).mean();
                          const double m2 = dxhat.row(i).cwiseProduct(xhat.row(i)).mean();
                          dx.row(i) = inv_std(i, 0) *
                                      (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2);
                      }
                      t.accum(ai, dx);
                  });
}

// ---- grid / sequence ops ----------------------------------------------------

namespace {

// 2x2 analysis stencils, indexed [band][u][v]
constexpr double kHaar[4][2][2] = {
    {{0.5, 0.5}, {0.5, 0.5}},    // LL
    {{0.5, -0.5}, {0.5, -0.5}},  // HL
    {{0.5, 0.5}, {-0.5, -0.5}},  // LH
    {{0.5, -0.5}, {-0.5, 0.5}},  // HH
};

void check_grid(Value a, int F, int T) {
    if (F <= 0 || T <= 0 || a.rows() != static_cast<Eigen::Index>(F) * T)
        throw InvalidInput("wavelet op: rows must equal F*T");
    if (F % 2 != 0 || T % 2 != 0)
        throw InvalidInput("wavelet op: grid dimensions must be even");
}

}  // namespace

Value dwt_band(Value a, int F, int T, Band band) {
    check_grid(a, F, T);
    Tape& t = *a.tape();
    const int ai = a.idx();
    const int F2 = F / 2, T2 = T / 2, b = static_cast<int>(band);
    const Eigen::Index d = a.cols();
    const Mat& x = a.val();
    Mat v(static_cast<Eigen::Index>(F2) * T2, d);
    for (int fs = 0; fs < F2; ++fs)
        for (int ts = 0; ts < T2; ++ts) {
            Eigen::Index out_row = static_cast<Eigen::Index>(fs) * T2 + ts;
            v.row(out_row) = kHaar[b][0][0] * x.row((2 * fs) * T + 2 * ts) +
                             kHaar[b][0][1] * x.row((2 * fs) * T + 2 * ts + 1) +
                             kHaar[b][1][0] * x.row((2 * fs + 1) * T + 2 * ts) +
                             kHaar[b][1][1] * x.row((2 * fs + 1) * T + 2 * ts + 1);
        }
    return t.make(std::move(v), t.needs(ai),
                  [ai, F, T, F2, T2, b, d](Tape& t, const Mat&, const Mat& g) {
                      Mat full = Mat::Zero(static_cast<Eigen::Index>(F) * T, d);
                      for (int fs = 0; fs < F2; ++fs)
                          for (int ts = 0; ts < T2; ++ts) {
                              const auto gr = g.row(static_cast<Eigen::Index>(fs) * T2 + ts);
                              full.row((2 * fs) * T + 2 * ts) += kHaar[b][0][0] * gr;
                              full.row((2 * fs) * T + 2 * ts + 1) += kHaar[b][0][1] * gr;
                              full.row((2 * fs + 1) * T + 2 * ts) += kHaar[b][1][0] * gr;
                              full.row((2 * fs + 1) * T + 2 * ts + 1) += kHaar[b][1][1] * gr;
                          }
                      t.accum(ai, full);
                  });
}

Value idwt_merge(Value ll, Value hl, Value lh, Value hh, int F, int T) {
    Tape& t = same_tape(ll, hl);
    same_tape(lh, hh);
    same_tape(ll, lh);
    if (F % 2 != 0 || T % 2 != 0) throw InvalidInput("idwt_merge: grid dimensions must be even");
    const int F2 = F / 2, T2 = T / 2;
    const Eigen::Index expect = static_cast<Eigen::Index>(F2) * T2;
    const Value bands[4] = {ll, hl, lh, hh};
    const Eigen::Index d = ll.cols();
    bool needs = false;
    for (const Value& bv : bands) {
        if (bv.rows() != expect || bv.cols() != d)
            throw InvalidInput("idwt_merge: subband shape mismatch");
        needs = needs || t.needs(bv.idx());
    }
    Mat v = Mat::Zero(static_cast<Eigen::Index>(F) * T, d);
    for (int b = 0; b < 4; ++b) {
        const Mat& x = bands[b].val();
        for (int fs = 0; fs < F2; ++fs)
            for (int ts = 0; ts < T2; ++ts) {
                const auto xr = x.row(static_cast<Eigen::Index>(fs) * T2 + ts);
                v.row((2 * fs) * T + 2 * ts) += kHaar[b][0][0] * xr;
                v.row((2 * fs) * T + 2 * ts + 1) += kHaar[b][0][1] * xr;
                v.row((2 * fs + 1) * T + 2 * ts) += kHaar[b][1][0] * xr;
                v.row((2 * fs + 1) * T + 2 * ts + 1) += kHaar[b][1][1] * xr;
            }
    }
    const int idxs[4] = {ll.idx(), hl.idx(), lh.idx(), hh.idx()};
    return t.make(std::move(v), needs,
                  [idxs, F2, T2, T, d](Tape& t, const Mat&, const Mat& g) {
                      for (int b = 0; b < 4; ++b) {
                          if (!t.needs(idxs[b])) continue;
                          Mat gb(static_cast<Eigen::Index>(F2) * T2, d);
                          for (int fs = 0; fs < F2; ++fs)
                              for (int ts = 0; ts < T2; ++ts)
                                  gb.row(static_cast<Eigen::Index>(fs) * T2 + ts) =
                                      kHaar[b][0][0] * g.row((2 * fs) * T + 2 * ts) +
                                      kHaar[b][0][1] * g.row((2 * fs) * T + 2 * ts + 1) +
                                      kHaar[b][1][0] * g.row((2 * fs + 1) * T + 2 * ts) +
                                      kHaar[b][1][1] * g.row((2 * fs + 1) * T + 2 * ts + 1);
                          t.accum(idxs[b], gb);
                      }
                  });
}

Value dwconv1d(Value x, Value k) {
    Tape& t = same_tape(x, k);
    if (k.rows() != 3 || k.cols() != x.cols())
        throw InvalidInput("dwconv1d: kernel must be 3 x channels");
    const int xi = x.idx(), ki = k.idx();
    const Eigen::Index n = x.rows(), c = x.cols();
    const Mat& xv = x.val();
    const Mat& kv = k.val();
    Mat v = Mat::Zero(n, c);
    for (int j = 0; j < 3; ++j) {
        const Eigen::Index lo = std::max<Eigen::Index>(0, 1 - j);
        const Eigen::Index hi = std::min<Eigen::Index>(n, n + 1 - j);
        for (Eigen::Index i = lo; i < hi; ++i)
            v.row(i) += xv.row(i + j - 1).cwiseProduct(kv.row(j));
    }
    return t.make(std::move(v), t.needs(xi) || t.needs(ki),
                  [xi, ki, n, c](Tape& t, const Mat&, const Mat& g) {
                      const Mat& xv = t.value_of(xi);
                      const Mat& kv = t.value_of(ki);
                      if (t.needs(xi)) {
                          Mat dx = Mat::Zero(n, c);
                          for (int j = 0; j < 3; ++j) {
                              const Eigen::Index lo = std::max<Eigen::Index>(0, 1 - j);
                              const Eigen::Index hi = std::min<Eigen::Index>(n, n + 1 - j);
                              for (Eigen::Index i = lo; i < hi; ++i)
                                  dx.row(i + j - 1) += g.row(i).cwiseProduct(kv.row(j));
                          }
                          t.accum(xi, dx);
                      }
                      if (t.needs(ki)) {
                          Mat dk = Mat::Zero(3, c);
                          for (int j = 0; j < 3; ++j) {
                              const Eigen::Index lo = std::max<Eigen::Index>(0, 1 - j);
                              const Eigen::Index hi = std::min<Eigen::Index>(n, n + 1 - j);
                              for (Eigen::Index i = lo; i < hi; ++i)
                                  dk.row(j) += xv.row(i + j - 1).cwiseProduct(g.row(i));
                          }
                          t.accum(ki, dk);
                      }
                  });
}

Value assemble_tokens(int n_total, Value mask_token, Value visible_feats,
                      const std::vector<int>& visible_indices) {
    Tape& t = same_tape(mask_token, visible_feats);
    if (mask_token.rows() != 1 || mask_token.cols() != visible_feats.cols())
        throw InvalidInput("assemble_tokens: mask token must be 1 x d");
    if (static_cast<Eigen::Index>(visible_indices.size()) != visible_feats.rows())
        throw InvalidInput("assemble_tokens: index/feature count mismatch");
    const Eigen::Index d = visible_feats.cols();
    Mat v = mask_token.val().replicate(n_total, 1);
    std::vector<std::uint8_t> is_visible(n_total, 0);
    for (std::size_t k = 0; k < visible_indices.size(); ++k) {
        const int r = visible_indices[k];
        if (r < 0 || r >= n_total) throw InvalidInput("assemble_tokens: index out of range");
        if (is_visible[r]) throw InvalidInput("assemble_tokens: duplicate visible index");
        is_visible[r] = 1;
        v.row(r) = visible_feats.val().row(static_cast<Eigen::Index>(k));
    }
    const int mi = mask_token.idx(), vi = visible_feats.idx();
    return t.make(std::move(v), t.needs(mi) || t.needs(vi),
                  [mi, vi, visible_indices, is_visible, n_total, d](Tape& t, const Mat&, const Mat& g) {
                      if (t.needs(vi)) {
                          Mat dv(static_cast<Eigen::Index>(visible_indices.size()), d);
                          for (std::size_t k = 0; k < visible_indices.size(); ++k)
                              dv.row(static_cast<Eigen::Index>(k)) = g.row(visible_indices[k]);
                          t.accum(vi, dv);
                      }
                      if (t.needs(mi)) {
                          Mat dm = Mat::Zero(1, d);
                          for (int r = 0; r < n_total; ++r)
                              if (!is_visible[r]) dm += g.row(r);
                          t.accum(mi, dm);
                      }
                  });
}

// ---- loss kernels ------------------------------------------------------------

Value cross_entropy_loss(Value logits, const std::vector<int>& labels) {
    Tape& t = *logits.tape();
    const Eigen::Index b = logits.rows(), c = logits.cols();
    if (static_cast<Eigen::Index>(labels.size()) != b)
        throw InvalidInput("cross_entropy_loss: label count mismatch");
    for (int y : labels)
        if (y < 0 || y >= c) throw InvalidInput("cross_entropy_loss: label out of range");
    const Mat& x = logits.val();
    if (!x.allFinite()) throw InvalidInput("cross_entropy_loss: non-finite logits");

    double loss = 0.0;
    for (Eigen::Index i = 0; i < b; ++i) {
        const double mx = x.row(i).maxCoeff();
        const double lse = mx + std::log((x.row(i).array() - mx).exp().sum());
        loss += lse - x(i, labels[static_cast<std::size_t>(i)]);
    }
    Mat v(1, 1);
    v(0, 0) = loss / static_cast<double>(b);
    const int li = logits.idx();
    return t.make(std::move(v), t.needs(li),
                  [li, labels, b](Tape& t, const Mat&, const Mat& g) {
                      const Mat& x = t.value_of(li);
                      Mat d(x.rows(), x.cols());
                      for (Eigen::Index i = 0; i < x.rows(); ++i) {
                          const double mx = x.row(i).maxCoeff();
                          Eigen::RowVectorXd p = (x.row(i).array() - mx).exp();
                          p /= p.sum();
                          d.row(i) = p;
                          d(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
                      }
                      t.accum(li, d * (g(0, 0) / static_cast<double>(b)));
                  });
}

Value dispersal_loss(Value emb, const std::vector<std::uint8_t>& is_real, double margin) {
    Tape& t = *emb.tape();
    const Eigen::Index b = emb.rows();
    if (static_cast<Eigen::Index>(is_real.size()) != b)
        throw InvalidInput("dispersal_loss: label count mismatch");
    if (margin <= 0.0) throw InvalidInput("dispersal_loss: margin must be positive");

    std::vector<Eigen::Index> real, fake;
    for (Eigen::Index i = 0; i < b; ++i)
        (is_real[static_cast<std::size_t>(i)] ? real : fake).push_back(i);

    const Mat& x = emb.val();
    const std::size_t n_rr = real.size() >= 2 ? real.size() * (real.size() - 1) / 2 : 0;
    const std::size_t n_rf = real.size() * fake.size();

    double pos = 0.0, neg = 0.0;
    for (std::size_t a = 0; a + 1 < real.size(); ++a)
        for (std::size_t c = a + 1; c < real.size(); ++c)
            pos += (x.row(real[a]) - x.row(real[c])).norm();
    for (Eigen::Index i : real)
        for (Eigen::Index j : fake) {
            const double d = (x.row(i) - x.row(j)).norm();
            if (d < margin) neg += margin - d;
        }
    Mat v(1, 1);
    v(0, 0) = (n_rr ? pos / static_cast<double>(n_rr) : 0.0) +
              (n_rf ? neg / static_cast<double>(n_rf) : 0.0);

    const int ei = emb.idx();
    return t.make(std::move(v), t.needs(ei),
                  [ei, real, fake, n_rr, n_rf, margin](Tape& t, const Mat&, const Mat& g) {
                      const Mat& x = t.value_of(ei);
                      Mat d = Mat::Zero(x.rows(), x.cols());
                      const double g0 = g(0, 0);
                      for (std::size_t a = 0; a + 1 < real.size(); ++a)
                          for (std::size_t c = a + 1; c < real.size(); ++c) {
                              const Eigen::RowVectorXd diff = x.row(real[a]) - x.row(real[c]);
                              const double dist = diff.norm();
                              if (dist < 1e-12) continue;
                              const Eigen::RowVectorXd dd =
                                  diff * (g0 / (dist * static_cast<double>(n_rr)));
                              d.row(real[a]) += dd;
                              d.row(real[c]) -= dd;
                          }
                      for (Eigen::Index i : real)
                          for (Eigen::Index j : fake) {
                              const Eigen::RowVectorXd diff = x.row(i) - x.row(j);
                              const double dist = diff.norm();
                              if (dist >= margin || dist < 1e-12) continue;
                              const Eigen::RowVectorXd dd =
                                  diff * (g0 / (dist * static_cast<double>(n_rf)));
                              d.row(i) -= dd;
                              d.row(j) += dd;
                          }
                      t.accum(ei, d);
                  });
}

}  // namespace rpra::ad
