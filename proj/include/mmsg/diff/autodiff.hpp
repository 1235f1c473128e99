//
// MMSG molecular representation toolkit
// SPDX-License-Identifier: Apache-2.0
//
// Minimal reverse-mode autodiff over dense double matrices.
// A Tape is built per forward pass; backward() runs the recorded
// closures in reverse and accumulates into Parameter gradients.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace mmsg::diff {

using Mat = Eigen::MatrixXd;

struct ShapeMismatch : std::runtime_error {
  explicit ShapeMismatch(const std::string& what)
      : std::runtime_error("shape mismatch: " + what) {}
};

struct IndexOutOfRange : std::runtime_error {
  explicit IndexOutOfRange(const std::string& what)
      : std::runtime_error("index out of range: " + what) {}
};

struct NonDeterministicLoss : std::runtime_error {
  NonDeterministicLoss()
      : std::runtime_error("loss function is not deterministic") {}
};

struct EmptyCheck : std::runtime_error {
  EmptyCheck() : std::runtime_error("grad check sampled zero coordinates") {}
};

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

struct Parameter {
  std::string name;
  Mat value;
  Mat grad;

  Parameter(std::string n, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(n)), value(Mat::Zero(rows, cols)),
        grad(Mat::Zero(rows, cols)) {}

  void zero_grad() { grad.setZero(); }
};

enum class Init { zeros, glorot_uniform };

class ParamStore {
 public:
  Parameter& create(const std::string& name, Eigen::Index rows,
                    Eigen::Index cols, Init init, std::mt19937_64& rng) {
    auto p = std::make_unique<Parameter>(name, rows, cols);
    if (init == Init::glorot_uniform) {
      double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) p->value(i, j) = dist(rng);
    }
    params_.push_back(std::move(p));
    return *params_.back();
  }

  void zero_grads() {
    for (auto& p : params_) p->zero_grad();
  }

  std::vector<Parameter*> all() {
    std::vector<Parameter*> out;
    out.reserve(params_.size());
    for (auto& p : params_) out.push_back(p.get());
    return out;
  }

  Parameter* find(const std::string& name) {
    for (auto& p : params_)
      if (p->name == name) return p.get();
    return nullptr;
  }

  std::size_t size() const { return params_.size(); }

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

enum class SegmentMode { sum, max, mean };

class Tape {
 public:
  // --- leaves ---
  Var input(Mat v) { return make(std::move(v), {}); }

  Var param(Parameter& p) {
    Var out = make(p.value, {});
    Parameter* ptr = &p;
    int id = out.id;
    node(id).backprop = [this, id, ptr] { ptr->grad += node(id).grad; };
    return out;
  }

  const Mat& val(Var v) const { return nodes_[check(v)].value; }
  const Mat& grad_of(Var v) const { return nodes_[check(v)].grad; }

  // --- arithmetic ---
  Var add(Var a, Var b) {
    require_same(a, b, "add");
    Var out = make(val(a) + val(b), {a, b});
    record(out, [this, out, a, b] {
      node(a.id).grad += node(out.id).grad;
      node(b.id).grad += node(out.id).grad;
    });
    return out;
  }

  Var sub(Var a, Var b) {
    require_same(a, b, "sub");
    Var out = make(val(a) - val(b), {a, b});
    record(out, [this, out, a, b] {
      node(a.id).grad += node(out.id).grad;
      node(b.id).grad -= node(out.id).grad;
    });
    return out;
  }

  Var mul(Var a, Var b) {  // elementwise
    require_same(a, b, "mul");
    Var out = make(val(a).cwiseProduct(val(b)), {a, b});
    record(out, [this, out, a, b] {
      node(a.id).grad += node(out.id).grad.cwiseProduct(node(b.id).value);
      node(b.id).grad += node(out.id).grad.cwiseProduct(node(a.id).value);
    });
    return out;
  }

  Var scale(Var a, double s) {
    Var out = make(val(a) * s, {a});
    record(out, [this, out, a, s] { node(a.id).grad += node(out.id).grad * s; });
    return out;
  }

  Var matmul(Var a, Var b) {
    if (val(a).cols() != val(b).rows())
      throw ShapeMismatch("matmul " + dims(a) + " x " + dims(b));
    Var out = make(val(a) * val(b), {a, b});
    record(out, [this, out, a, b] {
      node(a.id).grad += node(out.id).grad * node(b.id).value.transpose();
      node(b.id).grad += node(a.id).value.transpose() * node(out.id).grad;
    });
    return out;
  }

  /// y = x W^T (+ row-broadcast bias). W: (out x in), b: (1 x out).
  Var linear(Var x, Parameter& W, Parameter* b = nullptr) {
    if (val(x).cols() != W.value.cols())
      throw ShapeMismatch("linear input " + dims(x) + " vs W " +
                          std::to_string(W.value.rows()) + "x" +
                          std::to_string(W.value.cols()));
    if (b && (b->value.rows() != 1 || b->value.cols() != W.value.rows()))
      throw ShapeMismatch("linear bias for " + W.name);
    // fused primitive: avoids materializing weight copies on the tape
    Mat y = val(x) * W.value.transpose();
    if (b) y.rowwise() += b->value.row(0);
    Var out = make(std::move(y), {x});
    Parameter* wp = &W;
    record(out, [this, out, x, wp, b] {
      const Mat& dy = node(out.id).grad;
      node(x.id).grad.noalias() += dy * wp->value;
      wp->grad.noalias() += dy.transpose() * node(x.id).value;
      if (b) b->grad.row(0) += dy.colwise().sum();
    });
    return out;
  }

  Var transpose(Var a) {
    Var out = make(val(a).transpose(), {a});
    record(out, [this, out, a] {
      node(a.id).grad += node(out.id).grad.transpose();
    });
    return out;
  }

  /// Adds a 1 x cols row vector to every row of x.
  Var add_rowvec(Var x, Var r) {
    if (val(r).rows() != 1 || val(r).cols() != val(x).cols())
      throw ShapeMismatch("add_rowvec " + dims(x) + " + " + dims(r));
    Mat y = val(x);
    y.rowwise() += val(r).row(0);
    Var out = make(std::move(y), {x, r});
    record(out, [this, out, x, r] {
      node(x.id).grad += node(out.id).grad;
      node(r.id).grad.row(0) += node(out.id).grad.colwise().sum();
    });
    return out;
  }

  // --- elementwise nonlinearities ---
  Var relu(Var a) {
    Var out = make(val(a).cwiseMax(0.0), {a});
    record(out, [this, out, a] {
      node(a.id).grad.array() +=
          node(out.id).grad.array() *
          (node(a.id).value.array() > 0.0).cast<double>();
    });
    return out;
  }

  Var sigmoid(Var a) {
    Mat y = (1.0 / (1.0 + (-val(a).array()).exp())).matrix();
    Var out = make(std::move(y), {a});
    record(out, [this, out, a] {
      const auto& y2 = node(out.id).value.array();
      node(a.id).grad.array() += node(out.id).grad.array() * y2 * (1.0 - y2);
    });
    return out;
  }

  Var tanh(Var a) {
    Mat y = val(a).array().tanh().matrix();
    Var out = make(std::move(y), {a});
    record(out, [this, out, a] {
      const auto& y2 = node(out.id).value.array();
      node(a.id).grad.array() += node(out.id).grad.array() * (1.0 - y2 * y2);
    });
    return out;
  }

  /// Row-wise softmax with max-subtraction guard. Columns where mask[j] is
  /// false get exactly zero weight (logits treated as -inf).
  Var softmax_rows(Var a, const std::vector<char>* mask = nullptr) {
    const Mat& x = val(a);
    if (mask && static_cast<Eigen::Index>(mask->size()) != x.cols())
      throw ShapeMismatch("softmax mask length");
    Mat y(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < x.cols(); ++j)
        if (!mask || (*mask)[static_cast<std::size_t>(j)])
          mx = std::max(mx, x(i, j));
      double sum = 0.0;
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        if (mask && !(*mask)[static_cast<std::size_t>(j)]) {
          y(i, j) = 0.0;
        } else {
          y(i, j) = std::exp(x(i, j) - mx);
          sum += y(i, j);
        }
      }
      y.row(i) /= sum;
    }
    Var out = make(std::move(y), {a});
    record(out, [this, out, a] {
      const Mat& y2 = node(out.id).value;
      const Mat& dy = node(out.id).grad;
      for (Eigen::Index i = 0; i < y2.rows(); ++i) {
        double dot = dy.row(i).dot(y2.row(i));
        node(a.id).grad.row(i).array() +=
            y2.row(i).array() * (dy.row(i).array() - dot);
      }
    });
    return out;
  }

  /// Row-wise layer norm with affine gain/bias (both 1 x cols parameters).
  Var layer_norm(Var x, Parameter& gain, Parameter& bias, double eps = 1e-5) {
    // copy: param() below appends nodes and may invalidate val() references
    const Mat v = val(x);
    if (gain.value.cols() != v.cols() || bias.value.cols() != v.cols())
      throw ShapeMismatch("layer_norm affine width");
    Var g = param(gain);
    Var b = param(bias);
    const Eigen::Index n = v.cols();
    Mat xhat(v.rows(), n);
    std::vector<double> inv_std(static_cast<std::size_t>(v.rows()));
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
      double mu = v.row(i).mean();
      double var = (v.row(i).array() - mu).square().mean();
      double is = 1.0 / std::sqrt(var + eps);
      inv_std[static_cast<std::size_t>(i)] = is;
      xhat.row(i) = ((v.row(i).array() - mu) * is).matrix();
    }
    Mat y = xhat;
    for (Eigen::Index i = 0; i < y.rows(); ++i)
      y.row(i) = xhat.row(i).cwiseProduct(gain.value.row(0));
    y.rowwise() += bias.value.row(0);
    Var out = make(std::move(y), {x, g, b});
    Mat xhat_copy = xhat;
    record(out, [this, out, x, g, b, xhat_copy, inv_std, n] {
      const Mat& dy = node(out.id).grad;
      const Mat& gv = node(g.id).value;
      for (Eigen::Index i = 0; i < dy.rows(); ++i) {
        Eigen::RowVectorXd dxhat =
            (dy.row(i).array() * gv.row(0).array()).matrix();
        double m1 = dxhat.mean();
        double m2 = (dxhat.array() * xhat_copy.row(i).array()).mean();
        node(x.id).grad.row(i).array() +=
            inv_std[static_cast<std::size_t>(i)] *
            (dxhat.array() - m1 - xhat_copy.row(i).array() * m2);
        node(g.id).grad.row(0).array() +=
            dy.row(i).array() * xhat_copy.row(i).array();
        node(b.id).grad.row(0) += dy.row(i);
      }
      (void)n;
    });
    return out;
  }

  // --- gather / segment ops ---
  Var gather_rows(Var x, std::vector<int> rows) {
    const Mat& v = val(x);
    for (int r : rows)
      if (r < 0 || r >= v.rows())
        throw IndexOutOfRange("gather_rows row " + std::to_string(r));
    Mat y(static_cast<Eigen::Index>(rows.size()), v.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
      y.row(static_cast<Eigen::Index>(i)) = v.row(rows[i]);
    Var out = make(std::move(y), {x});
    record(out, [this, out, x, rows] {
      for (std::size_t i = 0; i < rows.size(); ++i)
        node(x.id).grad.row(rows[i]) +=
            node(out.id).grad.row(static_cast<Eigen::Index>(i));
    });
    return out;
  }

  /// Per-segment reduction of rows. Empty segments yield zero rows.
  /// Max gradient routes to the argmax row, first index on ties.
  Var segment_reduce(Var x, const std::vector<int>& seg, int nseg,
                     SegmentMode mode) {
    const Mat& v = val(x);
    if (static_cast<Eigen::Index>(seg.size()) != v.rows())
      throw ShapeMismatch("segment ids vs rows");
    for (int s : seg)
      if (s < 0 || s >= nseg)
        throw IndexOutOfRange("segment id " + std::to_string(s));
    Mat y = Mat::Zero(nseg, v.cols());
    std::vector<int> count(static_cast<std::size_t>(nseg), 0);
    std::vector<std::vector<int>> argmax;
    if (mode == SegmentMode::max)
      argmax.assign(static_cast<std::size_t>(nseg),
                    std::vector<int>(static_cast<std::size_t>(v.cols()), -1));
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
      int s = seg[static_cast<std::size_t>(r)];
      if (mode == SegmentMode::max) {
        for (Eigen::Index c = 0; c < v.cols(); ++c) {
          auto& am = argmax[static_cast<std::size_t>(s)]
                           [static_cast<std::size_t>(c)];
          if (am < 0 || v(r, c) > y(s, c)) {
            y(s, c) = v(r, c);
            am = static_cast<int>(r);
          }
        }
      } else {
        y.row(s) += v.row(r);
      }
      ++count[static_cast<std::size_t>(s)];
    }
    if (mode == SegmentMode::mean) {
      for (int s = 0; s < nseg; ++s)
        if (count[static_cast<std::size_t>(s)] > 0)
          y.row(s) /= static_cast<double>(count[static_cast<std::size_t>(s)]);
    }
    Var out = make(std::move(y), {x});
    std::vector<int> seg_copy = seg;
    record(out, [this, out, x, seg_copy, nseg, mode, count, argmax] {
      const Mat& dy = node(out.id).grad;
      Mat& dx = node(x.id).grad;
      if (mode == SegmentMode::max) {
        for (int s = 0; s < nseg; ++s)
          for (Eigen::Index c = 0; c < dy.cols(); ++c) {
            int r = argmax[static_cast<std::size_t>(s)]
                          [static_cast<std::size_t>(c)];
            if (r >= 0) dx(r, c) += dy(s, c);
          }
      } else {
        for (std::size_t r = 0; r < seg_copy.size(); ++r) {
          int s = seg_copy[r];
          double w = mode == SegmentMode::mean
                         ? 1.0 / static_cast<double>(
                                     count[static_cast<std::size_t>(s)])
                         : 1.0;
          dx.row(static_cast<Eigen::Index>(r)) += dy.row(s) * w;
        }
      }
    });
    return out;
  }

  Var concat_cols(Var a, Var b) {
    if (val(a).rows() != val(b).rows())
      throw ShapeMismatch("concat_cols rows");
    Mat y(val(a).rows(), val(a).cols() + val(b).cols());
    y << val(a), val(b);
    Var out = make(std::move(y), {a, b});
    record(out, [this, out, a, b] {
      Eigen::Index ca = node(a.id).value.cols();
      node(a.id).grad += node(out.id).grad.leftCols(ca);
      node(b.id).grad += node(out.id).grad.rightCols(node(b.id).value.cols());
    });
    return out;
  }

  Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw ShapeMismatch("concat_rows of nothing");
    Eigen::Index cols = val(parts[0]).cols();
    Eigen::Index rows = 0;
    for (Var p : parts) {
      if (val(p).cols() != cols) throw ShapeMismatch("concat_rows cols");
      rows += val(p).rows();
    }
    Mat y(rows, cols);
    Eigen::Index at = 0;
    for (Var p : parts) {
      y.middleRows(at, val(p).rows()) = val(p);
      at += val(p).rows();
    }
    Var out = make(std::move(y), parts);
    std::vector<Var> parts_copy = parts;
    record(out, [this, out, parts_copy] {
      Eigen::Index at = 0;
      for (Var p : parts_copy) {
        Eigen::Index r = node(p.id).value.rows();
        node(p.id).grad += node(out.id).grad.middleRows(at, r);
        at += r;
      }
    });
    return out;
  }

  Var slice_cols(Var x, Eigen::Index start, Eigen::Index len) {
    if (start < 0 || len < 0 || start + len > val(x).cols())
      throw IndexOutOfRange("slice_cols [" + std::to_string(start) + ", +" +
                            std::to_string(len) + ")");
    Var out = make(val(x).middleCols(start, len), {x});
    record(out, [this, out, x, start, len] {
      node(x.id).grad.middleCols(start, len) += node(out.id).grad;
    });
    return out;
  }

  Var mean_rows(Var x) {
    const Mat& v = val(x);
    Mat y = v.colwise().mean();
    Var out = make(std::move(y), {x});
    record(out, [this, out, x] {
      double inv = 1.0 / static_cast<double>(node(x.id).value.rows());
      node(x.id).grad.rowwise() += (node(out.id).grad.row(0) * inv).eval();
    });
    return out;
  }

  Var sum_all(Var x) {
    Mat y(1, 1);
    y(0, 0) = val(x).sum();
    Var out = make(std::move(y), {x});
    record(out, [this, out, x] {
      node(x.id).grad.array() += node(out.id).grad(0, 0);
    });
    return out;
  }

  /// Mean of stable binary cross-entropy with logits over unmasked entries.
  Var masked_bce_with_logits(Var logits, const Mat& labels, const Mat& mask) {
    const Mat& z = val(logits);
    if (labels.rows() != z.rows() || labels.cols() != z.cols() ||
        mask.rows() != z.rows() || mask.cols() != z.cols())
      throw ShapeMismatch("bce labels/mask");
    double count = mask.sum();
    if (count < 0.5) throw ShapeMismatch("all labels masked");
    double total = 0.0;
    for (Eigen::Index i = 0; i < z.rows(); ++i)
      for (Eigen::Index j = 0; j < z.cols(); ++j) {
        if (mask(i, j) == 0.0) continue;
        double zz = z(i, j);
        total += std::max(zz, 0.0) - zz * labels(i, j) +
                 std::log1p(std::exp(-std::abs(zz)));
      }
    Mat y(1, 1);
    y(0, 0) = total / count;
    Var out = make(std::move(y), {logits});
    Mat labels_c = labels, mask_c = mask;
    record(out, [this, out, logits, labels_c, mask_c, count] {
      double up = node(out.id).grad(0, 0) / count;
      const Mat& z2 = node(logits.id).value;
      for (Eigen::Index i = 0; i < z2.rows(); ++i)
        for (Eigen::Index j = 0; j < z2.cols(); ++j) {
          if (mask_c(i, j) == 0.0) continue;
          double sig = 1.0 / (1.0 + std::exp(-z2(i, j)));
          node(logits.id).grad(i, j) += up * (sig - labels_c(i, j));
        }
    });
    return out;
  }

  Var mse(Var preds, const Mat& targets) {
    const Mat& p = val(preds);
    if (p.rows() != targets.rows() || p.cols() != targets.cols())
      throw ShapeMismatch("mse targets");
    if (p.size() == 0) throw ShapeMismatch("mse on empty batch");
    Mat y(1, 1);
    y(0, 0) = (p - targets).squaredNorm() / static_cast<double>(p.size());
    Var out = make(std::move(y), {preds});
    Mat t = targets;
    record(out, [this, out, preds, t] {
      double up = node(out.id).grad(0, 0);
      const Mat& p2 = node(preds.id).value;
      node(preds.id).grad +=
          up * 2.0 / static_cast<double>(p2.size()) * (p2 - t);
    });
    return out;
  }

  // --- backward ---
  void backward(Var loss) {
    if (val(loss).rows() != 1 || val(loss).cols() != 1)
      throw ShapeMismatch("backward needs a scalar loss");
    for (auto& n : nodes_) n.grad.setZero();
    nodes_[static_cast<std::size_t>(loss.id)].grad(0, 0) = 1.0;
    for (int i = loss.id; i >= 0; --i)
      if (nodes_[static_cast<std::size_t>(i)].backprop)
        nodes_[static_cast<std::size_t>(i)].backprop();
  }

 private:
  struct Node {
    Mat value;
    Mat grad;
    std::function<void()> backprop;
  };

  std::vector<Node> nodes_;

  Node& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }

  int check(Var v) const {
    if (!v.valid() || v.id >= static_cast<int>(nodes_.size()))
      throw IndexOutOfRange("invalid tape var");
    return v.id;
  }

  std::string dims(Var v) const {
    return std::to_string(val(v).rows()) + "x" + std::to_string(val(v).cols());
  }

  void require_same(Var a, Var b, const char* op) {
    if (val(a).rows() != val(b).rows() || val(a).cols() != val(b).cols())
      throw ShapeMismatch(std::string(op) + " " + dims(a) + " vs " + dims(b));
  }

  Var make(Mat value, const std::vector<Var>&) {
    Node n;
    n.grad = Mat::Zero(value.rows(), value.cols());
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  void record(Var out, std::function<void()> fn) {
    nodes_[static_cast<std::size_t>(out.id)].backprop = std::move(fn);
  }
};

// ---------------------------------------------------------------------------
// GRU cell
// ---------------------------------------------------------------------------

struct GruParams {
  Parameter *Wz, *Uz, *bz;
  Parameter *Wr, *Ur, *br;
  Parameter *Wh, *Uh, *bh;

  static GruParams create(ParamStore& store, const std::string& prefix,
                          Eigen::Index input_dim, Eigen::Index hidden_dim,
                          std::mt19937_64& rng) {
    GruParams g;
    g.Wz = &store.create(prefix + ".Wz", hidden_dim, input_dim,
                         Init::glorot_uniform, rng);
    g.Uz = &store.create(prefix + ".Uz", hidden_dim, hidden_dim,
                         Init::glorot_uniform, rng);
    g.bz = &store.create(prefix + ".bz", 1, hidden_dim, Init::zeros, rng);
    g.Wr = &store.create(prefix + ".Wr", hidden_dim, input_dim,
                         Init::glorot_uniform, rng);
    g.Ur = &store.create(prefix + ".Ur", hidden_dim, hidden_dim,
                         Init::glorot_uniform, rng);
    g.br = &store.create(prefix + ".br", 1, hidden_dim, Init::zeros, rng);
    g.Wh = &store.create(prefix + ".Wh", hidden_dim, input_dim,
                         Init::glorot_uniform, rng);
    g.Uh = &store.create(prefix + ".Uh", hidden_dim, hidden_dim,
                         Init::glorot_uniform, rng);
    g.bh = &store.create(prefix + ".bh", 1, hidden_dim, Init::zeros, rng);
    return g;
  }
};

/// Standard update/reset-gate GRU step: rows of x and h_prev advance in lock
/// step. Output shape equals h_prev shape.
inline Var gru_cell(Tape& t, Var x, Var h_prev, const GruParams& p) {
  Var z = t.sigmoid(t.add(t.linear(x, *p.Wz, p.bz), t.linear(h_prev, *p.Uz)));
  Var r = t.sigmoid(t.add(t.linear(x, *p.Wr, p.br), t.linear(h_prev, *p.Ur)));
  Var hc = t.tanh(
      t.add(t.linear(x, *p.Wh, p.bh), t.linear(t.mul(r, h_prev), *p.Uh)));
  // h' = h + z * (hc - h)
  return t.add(h_prev, t.mul(z, t.sub(hc, h_prev)));
}

// ---------------------------------------------------------------------------
// Finite-difference gradient check
// ---------------------------------------------------------------------------

struct GradCheckOptions {
  double step = 1e-5;
  std::size_t max_coords_per_param = 24;
  std::uint64_t seed = 0;
};

/// Central finite differences on a random coordinate subsample. Returns the
/// max relative error between numeric and analytic gradients.
inline double grad_check(const std::function<double(bool)>& loss_fn,
                         const std::vector<Parameter*>& params,
                         const GradCheckOptions& opt = {}) {
  // loss_fn(with_grad): evaluate loss; when with_grad, also populate grads.
  for (auto* p : params) p->zero_grad();
  double l1 = loss_fn(true);
  double l2 = loss_fn(false);
  if (l1 != l2) throw NonDeterministicLoss();

  std::vector<Mat> analytic;
  analytic.reserve(params.size());
  for (auto* p : params) analytic.push_back(p->grad);

  std::mt19937_64 rng(opt.seed);
  double max_rel = 0.0;
  std::size_t checked = 0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter* p = params[pi];
    std::size_t total = static_cast<std::size_t>(p->value.size());
    if (total == 0) continue;
    std::vector<std::size_t> coords(total);
    for (std::size_t i = 0; i < total; ++i) coords[i] = i;
    // partial Fisher-Yates for the subsample
    std::size_t take = std::min(opt.max_coords_per_param, total);
    for (std::size_t i = 0; i < take; ++i) {
      std::size_t j = i + rng() % (total - i);
      std::swap(coords[i], coords[j]);
    }
    for (std::size_t i = 0; i < take; ++i) {
      std::size_t c = coords[i];
      double* data = p->value.data();
      double orig = data[c];
      data[c] = orig + opt.step;
      double fp = loss_fn(false);
      data[c] = orig - opt.step;
      double fm = loss_fn(false);
      data[c] = orig;
      double numeric = (fp - fm) / (2.0 * opt.step);
      double a = analytic[pi].data()[c];
      double denom = std::max({std::abs(a), std::abs(numeric), 1.0});
      max_rel = std::max(max_rel, std::abs(a - numeric) / denom);
      ++checked;
    }
  }
  if (checked == 0) throw EmptyCheck();
  // restore analytic grads
  for (std::size_t pi = 0; pi < params.size(); ++pi)
    params[pi]->grad = analytic[pi];
  return max_rel;
}

}  // namespace mmsg::diff
