// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The mfm Authors

#pragma once

#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "mfm/common.hpp"

// Reverse-mode differentiation over dense row-major matrices. A Tape records
// every operation of one forward pass; backward() replays them in reverse.
// Nodes that do not depend on a gradient-requiring leaf record no closure, and
// each closure skips parents that need no gradient, so frozen weights cost
// nothing beyond the activation gradients that flow through them.
namespace mfm::ad {

template <typename Scalar>
class Tape;

template <typename Scalar>
struct Var {
  Tape<Scalar>* tape = nullptr;
  int id = -1;

  const Matrix<Scalar>& value() const { return tape->value(id); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  bool requires_grad() const { return tape->requires_grad(id); }
  Matrix<Scalar>& grad() const { return tape->grad(id); }
};

template <typename Scalar>
class Tape {
 public:
  using Mat = Matrix<Scalar>;
  using Backward = std::function<void(const Mat& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<Scalar> constant(Mat value) { return push(std::move(value), nullptr, false); }

  // Non-owning leaf; `value` must outlive the tape.
  Var<Scalar> parameter(const Mat& value, bool requires_grad) {
    return push(Mat(), &value, requires_grad);
  }

  Var<Scalar> record(Mat value, std::initializer_list<Var<Scalar>> parents, Backward backward) {
    bool needs = false;
    for (const auto& p : parents) needs = needs || requires_grad(p.id);
    auto v = push(std::move(value), nullptr, needs);
    if (needs) nodes_[index(v.id)].backward = std::move(backward);
    return v;
  }

  Var<Scalar> record(Mat value, const std::vector<Var<Scalar>>& parents, Backward backward) {
    bool needs = false;
    for (const auto& p : parents) needs = needs || requires_grad(p.id);
    auto v = push(std::move(value), nullptr, needs);
    if (needs) nodes_[index(v.id)].backward = std::move(backward);
    return v;
  }

  const Mat& value(int id) const {
    const auto& n = nodes_[index(id)];
    return n.external ? *n.external : n.owned;
  }

  bool requires_grad(int id) const { return nodes_[index(id)].requires_grad; }

  // Gradient buffer, zero-initialized on first access.
  Mat& grad(int id) {
    auto& n = nodes_[index(id)];
    if (n.grad.size() == 0) {
      const auto& v = value(id);
      n.grad = Mat::Zero(v.rows(), v.cols());
    }
    return n.grad;
  }

  bool has_grad(int id) const { return nodes_[index(id)].grad.size() != 0; }

  void backward(Var<Scalar> root, Scalar seed = Scalar(1)) {
    if (!requires_grad(root.id)) return;
    grad(root.id).array() += seed;
    for (int i = root.id; i >= 0; --i) {
      auto& n = nodes_[index(i)];
      if (n.backward && n.grad.size() != 0) n.backward(n.grad);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat owned;
    const Mat* external = nullptr;
    Mat grad;
    bool requires_grad = false;
    Backward backward;
  };

  static std::size_t index(int id) { return static_cast<std::size_t>(id); }

  Var<Scalar> push(Mat value, const Mat* external, bool requires_grad) {
    Node n;
    n.owned = std::move(value);
    n.external = external;
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

  std::deque<Node> nodes_;
};

namespace detail {

template <typename Scalar>
void same_tape(const Var<Scalar>& a, const Var<Scalar>& b) {
  if (a.tape != b.tape) throw Error("variables belong to different tapes");
}

inline std::string shape(Eigen::Index r, Eigen::Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Value kernels, shared with the plain (non-recording) model functions.

template <typename Scalar>
Scalar gelu_value(Scalar x) {
  return Scalar(0.5) * x * (Scalar(1) + std::erf(x / std::sqrt(Scalar(2))));
}

template <typename Scalar>
Scalar gelu_derivative(Scalar x) {
  const Scalar cdf = Scalar(0.5) * (Scalar(1) + std::erf(x / std::sqrt(Scalar(2))));
  const Scalar pdf = std::exp(Scalar(-0.5) * x * x) / std::sqrt(Scalar(2) * Scalar(M_PI));
  return cdf + x * pdf;
}

// In-place row softmax; -inf entries get probability 0 and a fully masked
// row is left as zeros.
template <typename Scalar>
void softmax_rows(Matrix<Scalar>& s) {
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    auto row = s.row(i);
    const Scalar m = row.maxCoeff();
    if (!(m > -std::numeric_limits<Scalar>::infinity())) {
      row.setZero();
      continue;
    }
    row = (row.array() - m).exp().matrix();
    row /= row.sum();
  }
}

// Additive causal mask: entry (i, j) is -inf for j > i.
template <typename Scalar>
Matrix<Scalar> causal_mask(Eigen::Index n, Eigen::Index m) {
  Matrix<Scalar> mask = Matrix<Scalar>::Zero(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) mask(i, j) = -std::numeric_limits<Scalar>::infinity();
  }
  return mask;
}

// ---------------------------------------------------------------------------
// Differentiable operations.

template <typename Scalar>
Var<Scalar> matmul(Var<Scalar> a, Var<Scalar> b) {
  detail::same_tape(a, b);
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: " + detail::shape(a.rows(), a.cols()) + " by " +
                         detail::shape(b.rows(), b.cols()));
  }
  return a.tape->record(a.value() * b.value(), {a, b}, [a, b](const Matrix<Scalar>& g) {
    if (a.requires_grad()) a.grad().noalias() += g * b.value().transpose();
    if (b.requires_grad()) b.grad().noalias() += a.value().transpose() * g;
  });
}

// a * b^T
template <typename Scalar>
Var<Scalar> matmul_nt(Var<Scalar> a, Var<Scalar> b) {
  detail::same_tape(a, b);
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_nt: " + detail::shape(a.rows(), a.cols()) + " by transposed " +
                         detail::shape(b.rows(), b.cols()));
  }
  return a.tape->record(a.value() * b.value().transpose(), {a, b},
                        [a, b](const Matrix<Scalar>& g) {
                          if (a.requires_grad()) a.grad().noalias() += g * b.value();
                          if (b.requires_grad()) b.grad().noalias() += g.transpose() * a.value();
                        });
}

template <typename Scalar>
Var<Scalar> operator+(Var<Scalar> a, Var<Scalar> b) {
  detail::same_tape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError("add: " + detail::shape(a.rows(), a.cols()) + " and " +
                         detail::shape(b.rows(), b.cols()));
  }
  return a.tape->record(a.value() + b.value(), {a, b}, [a, b](const Matrix<Scalar>& g) {
    if (a.requires_grad()) a.grad() += g;
    if (b.requires_grad()) b.grad() += g;
  });
}

// Adds a 1 x c row to every row of `a`.
template <typename Scalar>
Var<Scalar> add_row(Var<Scalar> a, Var<Scalar> row) {
  detail::same_tape(a, row);
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw DimensionError("add_row: " + detail::shape(a.rows(), a.cols()) + " and bias " +
                         detail::shape(row.rows(), row.cols()));
  }
  Matrix<Scalar> out = a.value();
  out.rowwise() += row.value().row(0);
  return a.tape->record(std::move(out), {a, row}, [a, row](const Matrix<Scalar>& g) {
    if (a.requires_grad()) a.grad() += g;
    if (row.requires_grad()) row.grad() += g.colwise().sum();
  });
}

template <typename Scalar>
Var<Scalar> scale(Var<Scalar> a, Scalar s) {
  return a.tape->record(a.value() * s, {a}, [a, s](const Matrix<Scalar>& g) {
    if (a.requires_grad()) a.grad() += g * s;
  });
}

template <typename Scalar>
Var<Scalar> gelu(Var<Scalar> a) {
  Matrix<Scalar> out = a.value().unaryExpr([](Scalar x) { return gelu_value(x); });
  return a.tape->record(std::move(out), {a}, [a](const Matrix<Scalar>& g) {
    a.grad().array() +=
        g.array() * a.value().unaryExpr([](Scalar x) { return gelu_derivative(x); }).array();
  });
}

// Row-wise layer normalization with learned scale and offset (1 x c each).
template <typename Scalar>
Var<Scalar> layer_norm(Var<Scalar> x, Var<Scalar> gamma, Var<Scalar> beta,
                       Scalar eps = Scalar(1e-6)) {
  detail::same_tape(x, gamma);
  detail::same_tape(x, beta);
  const auto n = x.rows();
  const auto c = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != c || beta.rows() != 1 || beta.cols() != c) {
    throw DimensionError("layer_norm: scale/offset must be 1x" + std::to_string(c));
  }
  Matrix<Scalar> normalized(n, c);
  RowVector<Scalar> inv_std(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = x.value().row(i);
    const Scalar mean = row.mean();
    const Scalar var = (row.array() - mean).square().mean();
    inv_std[i] = Scalar(1) / std::sqrt(var + eps);
    normalized.row(i) = (row.array() - mean) * inv_std[i];
  }
  Matrix<Scalar> out = normalized;
  for (Eigen::Index i = 0; i < n; ++i) {
    out.row(i) = normalized.row(i).cwiseProduct(gamma.value().row(0)) + beta.value().row(0);
  }
  return x.tape->record(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta, normalized = std::move(normalized),
       inv_std = std::move(inv_std)](const Matrix<Scalar>& g) {
        if (gamma.requires_grad()) gamma.grad() += g.cwiseProduct(normalized).colwise().sum();
        if (beta.requires_grad()) beta.grad() += g.colwise().sum();
        if (!x.requires_grad()) return;
        auto& gx = x.grad();
        const auto cols = static_cast<Scalar>(g.cols());
        for (Eigen::Index i = 0; i < g.rows(); ++i) {
          const RowVector<Scalar> gn = g.row(i).cwiseProduct(gamma.value().row(0));
          const Scalar mean_gn = gn.sum() / cols;
          const Scalar mean_gn_n = gn.dot(normalized.row(i)) / cols;
          gx.row(i).array() +=
              inv_std[i] * (gn.array() - mean_gn - normalized.row(i).array() * mean_gn_n);
        }
      });
}

// out[i] = table[ids[i]]
template <typename Scalar>
Var<Scalar> gather_rows(Var<Scalar> table, std::vector<int> ids) {
  Matrix<Scalar> out(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= table.rows()) {
      throw RangeError("row index " + std::to_string(ids[i]) + " outside table of " +
                       std::to_string(table.rows()) + " rows");
    }
    out.row(static_cast<Eigen::Index>(i)) = table.value().row(ids[i]);
  }
  return table.tape->record(std::move(out), {table},
                            [table, ids = std::move(ids)](const Matrix<Scalar>& g) {
                              auto& gt = table.grad();
                              for (std::size_t i = 0; i < ids.size(); ++i) {
                                gt.row(ids[i]) += g.row(static_cast<Eigen::Index>(i));
                              }
                            });
}

// An n x c matrix whose rows at `positions[j]` come from row j of `part`;
// unlisted rows are zero.
template <typename Scalar>
struct RowPlacement {
  Var<Scalar> part;
  std::vector<int> positions;
};

template <typename Scalar>
Var<Scalar> scatter_rows(Tape<Scalar>& tape, Eigen::Index n, Eigen::Index c,
                         std::vector<RowPlacement<Scalar>> placements) {
  Matrix<Scalar> out = Matrix<Scalar>::Zero(n, c);
  std::vector<Var<Scalar>> parents;
  for (const auto& p : placements) {
    if (p.part.cols() != c || static_cast<std::size_t>(p.part.rows()) != p.positions.size()) {
      throw DimensionError("scatter_rows: part " + detail::shape(p.part.rows(), p.part.cols()) +
                           " does not fit " + std::to_string(p.positions.size()) +
                           " positions of width " + std::to_string(c));
    }
    for (std::size_t j = 0; j < p.positions.size(); ++j) {
      if (p.positions[j] < 0 || p.positions[j] >= n) throw RangeError("scatter_rows: bad position");
      out.row(p.positions[j]) = p.part.value().row(static_cast<Eigen::Index>(j));
    }
    parents.push_back(p.part);
  }
  return tape.record(std::move(out), parents,
                     [placements = std::move(placements)](const Matrix<Scalar>& g) {
                       for (const auto& p : placements) {
                         if (!p.part.requires_grad()) continue;
                         auto& gp = p.part.grad();
                         for (std::size_t j = 0; j < p.positions.size(); ++j) {
                           gp.row(static_cast<Eigen::Index>(j)) += g.row(p.positions[j]);
                         }
                       }
                     });
}

// Row-major reinterpretation to rows x cols.
template <typename Scalar>
Var<Scalar> reshape(Var<Scalar> a, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != a.value().size()) {
    throw DimensionError("reshape: " + detail::shape(a.rows(), a.cols()) + " to " +
                         detail::shape(rows, cols));
  }
  Matrix<Scalar> out = Eigen::Map<const Matrix<Scalar>>(a.value().data(), rows, cols);
  return a.tape->record(std::move(out), {a}, [a](const Matrix<Scalar>& g) {
    a.grad() += Eigen::Map<const Matrix<Scalar>>(g.data(), a.rows(), a.cols());
  });
}

// Multi-head scaled dot-product attention over n x d queries and m x d
// keys/values, heads splitting d into equal column blocks. `mask` is an
// optional additive n x m matrix (0 or -inf).
template <typename Scalar>
Var<Scalar> multi_head_attention(Var<Scalar> q, Var<Scalar> k, Var<Scalar> v, int heads,
                                 const Matrix<Scalar>* mask = nullptr) {
  detail::same_tape(q, k);
  detail::same_tape(q, v);
  const auto n = q.rows();
  const auto m = k.rows();
  const auto d = q.cols();
  if (heads <= 0 || d % heads != 0) throw DimensionError("attention: width not divisible by heads");
  if (k.cols() != d || v.cols() != d || v.rows() != m) {
    throw DimensionError("attention: Q " + detail::shape(n, d) + ", K " +
                         detail::shape(m, k.cols()) + ", V " + detail::shape(v.rows(), v.cols()));
  }
  if (mask && (mask->rows() != n || mask->cols() != m)) {
    throw DimensionError("attention: mask must be " + detail::shape(n, m));
  }
  const auto dh = d / heads;
  const Scalar inv_sqrt = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));
  std::vector<Matrix<Scalar>> probs(static_cast<std::size_t>(heads));
  Matrix<Scalar> out(n, d);
  for (int h = 0; h < heads; ++h) {
    const auto qh = q.value().middleCols(h * dh, dh);
    const auto kh = k.value().middleCols(h * dh, dh);
    const auto vh = v.value().middleCols(h * dh, dh);
    Matrix<Scalar> s = (qh * kh.transpose()) * inv_sqrt;
    if (mask) s += *mask;
    softmax_rows(s);
    out.middleCols(h * dh, dh).noalias() = s * vh;
    probs[static_cast<std::size_t>(h)] = std::move(s);
  }
  return q.tape->record(
      std::move(out), {q, k, v},
      [q, k, v, heads, dh, inv_sqrt, probs = std::move(probs)](const Matrix<Scalar>& g) {
        for (int h = 0; h < heads; ++h) {
          const auto& p = probs[static_cast<std::size_t>(h)];
          const auto gh = g.middleCols(h * dh, dh);
          if (v.requires_grad()) v.grad().middleCols(h * dh, dh).noalias() += p.transpose() * gh;
          if (!q.requires_grad() && !k.requires_grad()) continue;
          Matrix<Scalar> gp = gh * v.value().middleCols(h * dh, dh).transpose();
          // softmax backward: gs = p * (gp - rowsum(gp * p))
          const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dots = gp.cwiseProduct(p).rowwise().sum();
          Matrix<Scalar> gs = p.cwiseProduct(gp.colwise() - dots) * inv_sqrt;
          if (q.requires_grad()) {
            q.grad().middleCols(h * dh, dh).noalias() += gs * k.value().middleCols(h * dh, dh);
          }
          if (k.requires_grad()) {
            k.grad().middleCols(h * dh, dh).noalias() +=
                gs.transpose() * q.value().middleCols(h * dh, dh);
          }
        }
      });
}

// Sum over rows of -log softmax(logits)[target]; rows whose target is
// negative are skipped. Returns a 1 x 1 variable.
template <typename Scalar>
Var<Scalar> cross_entropy_sum(Var<Scalar> logits, std::vector<int> targets) {
  if (static_cast<std::size_t>(logits.rows()) != targets.size()) {
    throw DimensionError("cross_entropy: " + std::to_string(logits.rows()) + " steps but " +
                         std::to_string(targets.size()) + " targets");
  }
  Matrix<Scalar> probs = logits.value();
  Scalar loss = 0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    const int y = targets[static_cast<std::size_t>(i)];
    auto row = probs.row(i);
    const Scalar m = row.maxCoeff();
    const Scalar lse = m + std::log((row.array() - m).exp().sum());
    if (y >= 0) {
      if (y >= probs.cols()) throw RangeError("cross_entropy: target outside vocabulary");
      loss += lse - row(y);
    }
    row = (row.array() - lse).exp().matrix();
  }
  Matrix<Scalar> out(1, 1);
  out(0, 0) = loss;
  return logits.tape->record(std::move(out), {logits},
                             [logits, targets = std::move(targets),
                              probs = std::move(probs)](const Matrix<Scalar>& g) {
                               auto& gl = logits.grad();
                               for (Eigen::Index i = 0; i < probs.rows(); ++i) {
                                 const int y = targets[static_cast<std::size_t>(i)];
                                 if (y < 0) continue;
                                 gl.row(i) += g(0, 0) * probs.row(i);
                                 gl(i, y) -= g(0, 0);
                               }
                             });
}

}  // namespace mfm::ad
