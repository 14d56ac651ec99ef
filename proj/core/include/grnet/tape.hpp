#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "grnet/errors.hpp"
#include "grnet/numeric.hpp"
#include "grnet/parameter.hpp"
#include "grnet/tensor.hpp"

namespace grnet {

// Boolean row mask for masked row-softmax. Every row must keep at least one
// enabled column; the builder enforces that before the op ever sees it.
struct RowMask {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> on;  // row-major

  RowMask(int r, int c) : rows(r), cols(c), on(static_cast<std::size_t>(r) * c, 0) {}
  bool at(int r, int c) const { return on[static_cast<std::size_t>(r) * cols + c] != 0; }
  void set(int r, int c, bool v) { on[static_cast<std::size_t>(r) * cols + c] = v ? 1 : 0; }
  int enabled_in_row(int r) const {
    int n = 0;
    for (int c = 0; c < cols; ++c) n += at(r, c) ? 1 : 0;
    return n;
  }
};

enum class OpKind {
  kConstant,
  kParam,
  kMatmul,
  kMatvec,
  kTranspose,
  kAdd,
  kSub,
  kMul,
  kScale,
  kSqDiff,
  kL2Normalize,
  kSoftmax,
  kMaskedRowSoftmax,
  kRelu,
  kWindowMax,
  kCrossEntropy2,
  kStackRows,
  kRow,
  kSum,
  kSumAll,
  kPropagate,
};

// Handle to a tape node. Only valid for the tape that produced it.
template <typename S>
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

template <typename S>
struct TapeNode {
  OpKind kind;
  std::vector<int> inputs;
  Tensor<S> value;
  Tensor<S> grad;  // sized lazily by backward()

  // Op-specific saved state.
  S scalar = S(0);  // scale factor / l2 eps
  int index = -1;   // cross-entropy label / row index
  std::vector<std::int64_t> arg_index;  // window-max winner per output cell
  std::shared_ptr<const std::vector<std::vector<std::int64_t>>> windows;
  std::shared_ptr<const RowMask> mask;
  Parameter<S>* param = nullptr;
  Tensor<S> saved;  // l2 norm / softmax probabilities, as needed
};

// Reverse-mode tape. Records every operation in execution order (which is a
// topological order by construction) and replays it backward to accumulate
// gradients. Tensors held by nodes are immutable once created; a tape
// belongs to one logical thread of execution.
template <typename S>
class Tape {
 public:
  Var<S> constant(Tensor<S> v) {
    TapeNode<S> n;
    n.kind = OpKind::kConstant;
    n.value = std::move(v);
    return push(std::move(n));
  }

  // Binds a parameter as a leaf; backward() adds the node gradient into
  // p.gradient, so gradients accumulate across tapes until zeroed.
  Var<S> param(Parameter<S>& p) {
    if (!p.gradient.same_shape(p.value))
      throw LogicError("parameter '" + p.name + "' gradient shape " +
                       p.gradient.shape_string() + " != value shape " + p.value.shape_string());
    TapeNode<S> n;
    n.kind = OpKind::kParam;
    n.value = p.value;
    n.param = &p;
    return push(std::move(n));
  }

  Var<S> matmul(Var<S> a, Var<S> b) {
    const Tensor<S>& A = value(a);
    const Tensor<S>& B = value(b);
    require_rank(A, 2, "matmul lhs");
    require_rank(B, 2, "matmul rhs");
    if (A.cols() != B.rows())
      throw DimensionError("matmul: inner dimensions disagree: " + A.shape_string() + " vs " +
                           B.shape_string());
    const int m = A.rows(), k = A.cols(), n = B.cols();
    Tensor<S> C({m, n});
    for (int i = 0; i < m; ++i)
      for (int l = 0; l < k; ++l) {
        const S a_il = A.at(i, l);
        if (a_il == S(0)) continue;
        for (int j = 0; j < n; ++j) C.at(i, j) += a_il * B.at(l, j);
      }
    TapeNode<S> node;
    node.kind = OpKind::kMatmul;
    node.inputs = {a.id, b.id};
    node.value = std::move(C);
    return push(std::move(node));
  }

  Var<S> matvec(Var<S> a, Var<S> x) {
    const Tensor<S>& A = value(a);
    const Tensor<S>& v = value(x);
    require_rank(A, 2, "matvec lhs");
    require_rank(v, 1, "matvec rhs");
    if (A.cols() != v.dim(0))
      throw DimensionError("matvec: inner dimensions disagree: " + A.shape_string() + " vs " +
                           v.shape_string());
    const int m = A.rows(), k = A.cols();
    Tensor<S> y({m});
    for (int i = 0; i < m; ++i) {
      S acc = S(0);
      for (int l = 0; l < k; ++l) acc += A.at(i, l) * v[l];
      y[i] = acc;
    }
    TapeNode<S> node;
    node.kind = OpKind::kMatvec;
    node.inputs = {a.id, x.id};
    node.value = std::move(y);
    return push(std::move(node));
  }

  Var<S> transpose(Var<S> a) {
    const Tensor<S>& A = value(a);
    require_rank(A, 2, "transpose");
    Tensor<S> T({A.cols(), A.rows()});
    for (int i = 0; i < A.rows(); ++i)
      for (int j = 0; j < A.cols(); ++j) T.at(j, i) = A.at(i, j);
    TapeNode<S> node;
    node.kind = OpKind::kTranspose;
    node.inputs = {a.id};
    node.value = std::move(T);
    return push(std::move(node));
  }

  Var<S> add(Var<S> a, Var<S> b) { return binary_elementwise(OpKind::kAdd, a, b, "add"); }
  Var<S> sub(Var<S> a, Var<S> b) { return binary_elementwise(OpKind::kSub, a, b, "sub"); }
  Var<S> mul(Var<S> a, Var<S> b) { return binary_elementwise(OpKind::kMul, a, b, "mul"); }

  // out = (a - b)^2 elementwise; the squared-difference term of the
  // similarity vector.
  Var<S> sq_diff(Var<S> a, Var<S> b) { return binary_elementwise(OpKind::kSqDiff, a, b, "sq_diff"); }

  Var<S> scale(Var<S> a, S c) {
    const Tensor<S>& A = value(a);
    Tensor<S> out(A.shape());
    for (std::int64_t i = 0; i < A.numel(); ++i) out[i] = c * A[i];
    TapeNode<S> node;
    node.kind = OpKind::kScale;
    node.inputs = {a.id};
    node.value = std::move(out);
    node.scalar = c;
    return push(std::move(node));
  }

  // out = v / max(||v||, eps). Below eps the map is linear (v / eps), which
  // makes the zero vector map to the zero vector and keeps the op total.
  Var<S> l2_normalize(Var<S> a, S eps) {
    const Tensor<S>& v = value(a);
    require_rank(v, 1, "l2_normalize");
    double ss = 0;
    for (std::int64_t i = 0; i < v.numel(); ++i)
      ss += static_cast<double>(v[i]) * static_cast<double>(v[i]);
    const S norm = static_cast<S>(std::sqrt(ss));
    const S denom = norm >= eps ? norm : eps;
    Tensor<S> out(v.shape());
    for (std::int64_t i = 0; i < v.numel(); ++i) out[i] = v[i] / denom;
    TapeNode<S> node;
    node.kind = OpKind::kL2Normalize;
    node.inputs = {a.id};
    node.value = std::move(out);
    node.scalar = eps;
    node.saved = Tensor<S>::from_vector({norm});
    return push(std::move(node));
  }

  // Max-subtracted softmax over a vector.
  Var<S> softmax(Var<S> a) {
    const Tensor<S>& v = value(a);
    require_rank(v, 1, "softmax");
    if (v.numel() < 1) throw DimensionError("softmax: empty input");
    S m = v[0];
    for (std::int64_t i = 1; i < v.numel(); ++i)
      if (v[i] > m) m = v[i];
    Tensor<S> out(v.shape());
    S z = S(0);
    for (std::int64_t i = 0; i < v.numel(); ++i) {
      out[i] = static_cast<S>(std::exp(static_cast<double>(v[i] - m)));
      z += out[i];
    }
    for (std::int64_t i = 0; i < v.numel(); ++i) out[i] /= z;
    TapeNode<S> node;
    node.kind = OpKind::kSoftmax;
    node.inputs = {a.id};
    node.value = std::move(out);
    return push(std::move(node));
  }

  // Row-wise softmax over the enabled entries of each row. Disabled entries
  // are exactly zero and excluded from the denominator, so every row of the
  // result sums to one over its enabled support. Denominators use exact
  // summation, which keeps the result invariant to column relabeling.
  Var<S> masked_row_softmax(Var<S> a, std::shared_ptr<const RowMask> mask) {
    const Tensor<S>& L = value(a);
    require_rank(L, 2, "masked_row_softmax");
    if (!mask) throw LogicError("masked_row_softmax: null mask");
    if (mask->rows != L.rows() || mask->cols != L.cols())
      throw DimensionError("masked_row_softmax: mask " + std::to_string(mask->rows) + "x" +
                           std::to_string(mask->cols) + " vs logits " + L.shape_string());
    Tensor<S> out(L.shape());
    for (int r = 0; r < L.rows(); ++r) {
      bool any = false;
      S m = S(0);
      for (int c = 0; c < L.cols(); ++c) {
        if (!mask->at(r, c)) continue;
        if (!any || L.at(r, c) > m) m = L.at(r, c);
        any = true;
      }
      if (!any)
        throw ConfigError("edge-mask",
                          "softmax row " + std::to_string(r) + " has no enabled sources");
      ExactAccumulator denom;
      for (int c = 0; c < L.cols(); ++c) {
        if (!mask->at(r, c)) continue;
        const S e = static_cast<S>(std::exp(static_cast<double>(L.at(r, c) - m)));
        out.at(r, c) = e;
        denom.add(static_cast<double>(e));
      }
      const S z = static_cast<S>(denom.round());
      for (int c = 0; c < L.cols(); ++c)
        if (mask->at(r, c)) out.at(r, c) /= z;
    }
    TapeNode<S> node;
    node.kind = OpKind::kMaskedRowSoftmax;
    node.inputs = {a.id};
    node.value = std::move(out);
    node.mask = std::move(mask);
    return push(std::move(node));
  }

  Var<S> relu(Var<S> a) {
    const Tensor<S>& v = value(a);
    Tensor<S> out(v.shape());
    for (std::int64_t i = 0; i < v.numel(); ++i) out[i] = v[i] > S(0) ? v[i] : S(0);
    TapeNode<S> node;
    node.kind = OpKind::kRelu;
    node.inputs = {a.id};
    node.value = std::move(out);
    return push(std::move(node));
  }

  // out[k] = max over the k-th index set of the flat input. The subgradient
  // is routed to the first maximal index in the order the set lists them
  // (callers build the sets in row-major order).
  Var<S> window_max(Var<S> a,
                    std::shared_ptr<const std::vector<std::vector<std::int64_t>>> windows) {
    const Tensor<S>& v = value(a);
    if (!windows) throw LogicError("window_max: null window list");
    const int k = static_cast<int>(windows->size());
    if (k == 0) throw LogicError("window_max: empty window list");
    Tensor<S> out({k});
    std::vector<std::int64_t> winners(static_cast<std::size_t>(k));
    for (int w = 0; w < k; ++w) {
      const auto& idx = (*windows)[static_cast<std::size_t>(w)];
      if (idx.empty()) throw LogicError("window_max: window " + std::to_string(w) + " is empty");
      std::int64_t best = idx[0];
      S best_v = v[best];
      for (std::size_t t = 1; t < idx.size(); ++t) {
        if (v[idx[t]] > best_v) {
          best_v = v[idx[t]];
          best = idx[t];
        }
      }
      out[w] = best_v;
      winners[static_cast<std::size_t>(w)] = best;
    }
    TapeNode<S> node;
    node.kind = OpKind::kWindowMax;
    node.inputs = {a.id};
    node.value = std::move(out);
    node.arg_index = std::move(winners);
    node.windows = std::move(windows);
    return push(std::move(node));
  }

  // -log softmax(logits)[label] for a 2-class logit pair, computed via
  // log1p for stability at saturation.
  Var<S> cross_entropy_with_logits(Var<S> a, int label) {
    const Tensor<S>& l = value(a);
    require_rank(l, 1, "cross_entropy_with_logits");
    if (l.numel() != 2)
      throw DimensionError("cross_entropy_with_logits: expected 2 logits, got " +
                           l.shape_string());
    if (label != 0 && label != 1)
      throw InputError("cross_entropy_with_logits: label must be 0 or 1, got " +
                       std::to_string(label));
    const double l0 = static_cast<double>(l[0]);
    const double l1 = static_cast<double>(l[1]);
    const double m = l0 > l1 ? l0 : l1;
    const double lse = m + std::log1p(std::exp((l0 > l1 ? l1 : l0) - m));
    const double loss = lse - (label == 0 ? l0 : l1);
    Tensor<S> probs({2});
    probs[0] = static_cast<S>(std::exp(l0 - lse));
    probs[1] = static_cast<S>(std::exp(l1 - lse));
    TapeNode<S> node;
    node.kind = OpKind::kCrossEntropy2;
    node.inputs = {a.id};
    node.value = Tensor<S>::from_vector({static_cast<S>(loss)});
    node.index = label;
    node.saved = std::move(probs);
    return push(std::move(node));
  }

  Var<S> stack_rows(const std::vector<Var<S>>& rows) {
    if (rows.empty()) throw LogicError("stack_rows: no rows");
    const int d = static_cast<int>(value(rows[0]).numel());
    for (const auto& r : rows) {
      require_rank(value(r), 1, "stack_rows");
      if (value(r).numel() != d)
        throw DimensionError("stack_rows: row shape " + value(r).shape_string() +
                             " != " + value(rows[0]).shape_string());
    }
    const int n = static_cast<int>(rows.size());
    Tensor<S> out({n, d});
    TapeNode<S> node;
    node.kind = OpKind::kStackRows;
    node.inputs.reserve(rows.size());
    for (int r = 0; r < n; ++r) {
      const Tensor<S>& v = value(rows[static_cast<std::size_t>(r)]);
      for (int c = 0; c < d; ++c) out.at(r, c) = v[c];
      node.inputs.push_back(rows[static_cast<std::size_t>(r)].id);
    }
    node.value = std::move(out);
    return push(std::move(node));
  }

  Var<S> row(Var<S> a, int r) {
    const Tensor<S>& A = value(a);
    require_rank(A, 2, "row");
    if (r < 0 || r >= A.rows())
      throw DimensionError("row: index " + std::to_string(r) + " out of range for " +
                           A.shape_string());
    Tensor<S> out({A.cols()});
    for (int c = 0; c < A.cols(); ++c) out[c] = A.at(r, c);
    TapeNode<S> node;
    node.kind = OpKind::kRow;
    node.inputs = {a.id};
    node.value = std::move(out);
    node.index = r;
    return push(std::move(node));
  }

  // Elementwise sum of any number of same-shaped tensors.
  Var<S> sum(const std::vector<Var<S>>& xs) {
    if (xs.empty()) throw LogicError("sum: no inputs");
    const Tensor<S>& first = value(xs[0]);
    Tensor<S> out(first.shape());
    TapeNode<S> node;
    node.kind = OpKind::kSum;
    for (const auto& x : xs) {
      const Tensor<S>& v = value(x);
      if (!v.same_shape(first))
        throw DimensionError("sum: shape " + v.shape_string() + " != " + first.shape_string());
      for (std::int64_t i = 0; i < v.numel(); ++i) out[i] += v[i];
      node.inputs.push_back(x.id);
    }
    node.value = std::move(out);
    return push(std::move(node));
  }

  Var<S> sum_all(Var<S> a) {
    const Tensor<S>& v = value(a);
    S acc = S(0);
    for (std::int64_t i = 0; i < v.numel(); ++i) acc += v[i];
    TapeNode<S> node;
    node.kind = OpKind::kSumAll;
    node.inputs = {a.id};
    node.value = Tensor<S>::from_vector({acc});
    return push(std::move(node));
  }

  // out = weights * vectors with exact per-cell accumulation over sources.
  // This is the graph propagation step; exact sums make the result invariant
  // to how the source nodes are ordered.
  Var<S> propagate(Var<S> w, Var<S> v) {
    const Tensor<S>& W = value(w);
    const Tensor<S>& V = value(v);
    require_rank(W, 2, "propagate weights");
    require_rank(V, 2, "propagate vectors");
    if (W.cols() != V.rows())
      throw DimensionError("propagate: weights " + W.shape_string() + " vs vectors " +
                           V.shape_string());
    Tensor<S> out({W.rows(), V.cols()});
    for (int t = 0; t < W.rows(); ++t) {
      for (int c = 0; c < V.cols(); ++c) {
        ExactAccumulator acc;
        for (int s = 0; s < W.cols(); ++s) {
          const S wts = W.at(t, s);
          if (wts == S(0)) continue;
          acc.add(static_cast<double>(wts) * static_cast<double>(V.at(s, c)));
        }
        out.at(t, c) = static_cast<S>(acc.round());
      }
    }
    TapeNode<S> node;
    node.kind = OpKind::kPropagate;
    node.inputs = {w.id, v.id};
    node.value = std::move(out);
    return push(std::move(node));
  }

  const Tensor<S>& value(Var<S> v) const { return node(v).value; }
  const Tensor<S>& grad(Var<S> v) const { return node(v).grad; }
  std::size_t size() const { return nodes_.size(); }

  // Reverse pass from a scalar root. Node gradients are freshly zeroed, so
  // repeated calls from identical state are bit-identical; parameter
  // gradients accumulate (callers zero them per optimization step).
  void backward(Var<S> root, S seed = S(1)) {
    TapeNode<S>& r = node_mut(root);
    if (r.value.numel() != 1)
      throw LogicError("backward: root must be scalar, got " + r.value.shape_string());
    for (auto& n : nodes_) n.grad = Tensor<S>::zeros(n.value.shape());
    r.grad[0] = seed;
    for (int id = root.id; id >= 0; --id) backward_node(nodes_[static_cast<std::size_t>(id)]);
  }

 private:
  std::vector<TapeNode<S>> nodes_;

  const TapeNode<S>& node(Var<S> v) const {
    if (v.id < 0 || v.id >= static_cast<int>(nodes_.size()))
      throw LogicError("tape: invalid node handle");
    return nodes_[static_cast<std::size_t>(v.id)];
  }
  TapeNode<S>& node_mut(Var<S> v) {
    return const_cast<TapeNode<S>&>(static_cast<const Tape*>(this)->node(v));
  }

  static void require_rank(const Tensor<S>& t, int rank, const char* what) {
    if (t.rank() != rank)
      throw DimensionError(std::string(what) + ": expected rank " + std::to_string(rank) +
                           " tensor, got shape " + t.shape_string());
  }

  Var<S> binary_elementwise(OpKind kind, Var<S> a, Var<S> b, const char* what) {
    const Tensor<S>& A = value(a);
    const Tensor<S>& B = value(b);
    if (!A.same_shape(B))
      throw DimensionError(std::string(what) + ": shape mismatch: " + A.shape_string() + " vs " +
                           B.shape_string());
    Tensor<S> out(A.shape());
    switch (kind) {
      case OpKind::kAdd:
        for (std::int64_t i = 0; i < A.numel(); ++i) out[i] = A[i] + B[i];
        break;
      case OpKind::kSub:
        for (std::int64_t i = 0; i < A.numel(); ++i) out[i] = A[i] - B[i];
        break;
      case OpKind::kMul:
        for (std::int64_t i = 0; i < A.numel(); ++i) out[i] = A[i] * B[i];
        break;
      case OpKind::kSqDiff:
        for (std::int64_t i = 0; i < A.numel(); ++i) {
          const S d = A[i] - B[i];
          out[i] = d * d;
        }
        break;
      default:
        throw LogicError("binary_elementwise: bad kind");
    }
    TapeNode<S> node;
    node.kind = kind;
    node.inputs = {a.id, b.id};
    node.value = std::move(out);
    return push(std::move(node));
  }

  Var<S> push(TapeNode<S>&& n) {
    nodes_.push_back(std::move(n));
    return Var<S>{static_cast<int>(nodes_.size()) - 1};
  }

  Tensor<S>& in_grad(const TapeNode<S>& n, int slot) {
    return nodes_[static_cast<std::size_t>(n.inputs[static_cast<std::size_t>(slot)])].grad;
  }
  const Tensor<S>& in_val(const TapeNode<S>& n, int slot) const {
    return nodes_[static_cast<std::size_t>(n.inputs[static_cast<std::size_t>(slot)])].value;
  }

  void backward_node(TapeNode<S>& n) {
    const Tensor<S>& g = n.grad;
    switch (n.kind) {
      case OpKind::kConstant:
        break;
      case OpKind::kParam:
        for (std::int64_t i = 0; i < g.numel(); ++i) n.param->gradient[i] += g[i];
        break;
      case OpKind::kMatmul: {
        const Tensor<S>& A = in_val(n, 0);
        const Tensor<S>& B = in_val(n, 1);
        Tensor<S>& dA = in_grad(n, 0);
        Tensor<S>& dB = in_grad(n, 1);
        const int m = A.rows(), k = A.cols(), c = B.cols();
        // dA += g * B^T ; dB += A^T * g
        for (int i = 0; i < m; ++i)
          for (int l = 0; l < k; ++l) {
            S acc = S(0);
            for (int j = 0; j < c; ++j) acc += g.at(i, j) * B.at(l, j);
            dA.at(i, l) += acc;
          }
        for (int l = 0; l < k; ++l)
          for (int j = 0; j < c; ++j) {
            S acc = S(0);
            for (int i = 0; i < m; ++i) acc += A.at(i, l) * g.at(i, j);
            dB.at(l, j) += acc;
          }
        break;
      }
      case OpKind::kMatvec: {
        const Tensor<S>& A = in_val(n, 0);
        const Tensor<S>& x = in_val(n, 1);
        Tensor<S>& dA = in_grad(n, 0);
        Tensor<S>& dx = in_grad(n, 1);
        const int m = A.rows(), k = A.cols();
        for (int i = 0; i < m; ++i) {
          const S gi = g[i];
          if (gi == S(0)) continue;
          for (int l = 0; l < k; ++l) {
            dA.at(i, l) += gi * x[l];
            dx[l] += gi * A.at(i, l);
          }
        }
        break;
      }
      case OpKind::kTranspose: {
        Tensor<S>& dA = in_grad(n, 0);
        for (int i = 0; i < g.rows(); ++i)
          for (int j = 0; j < g.cols(); ++j) dA.at(j, i) += g.at(i, j);
        break;
      }
      case OpKind::kAdd: {
        Tensor<S>& dA = in_grad(n, 0);
        Tensor<S>& dB = in_grad(n, 1);
        for (std::int64_t i = 0; i < g.numel(); ++i) {
          dA[i] += g[i];
          dB[i] += g[i];
        }
        break;
      }
      case OpKind::kSub: {
        Tensor<S>& dA = in_grad(n, 0);
        Tensor<S>& dB = in_grad(n, 1);
        for (std::int64_t i = 0; i < g.numel(); ++i) {
          dA[i] += g[i];
          dB[i] -= g[i];
        }
        break;
      }
      case OpKind::kMul: {
        const Tensor<S>& A = in_val(n, 0);
        const Tensor<S>& B = in_val(n, 1);
        Tensor<S>& dA = in_grad(n, 0);
        Tensor<S>& dB = in_grad(n, 1);
        for (std::int64_t i = 0; i < g.numel(); ++i) {
          dA[i] += g[i] * B[i];
          dB[i] += g[i] * A[i];
        }
        break;
      }
      case OpKind::kScale: {
        Tensor<S>& dA = in_grad(n, 0);
        for (std::int64_t i = 0; i < g.numel(); ++i) dA[i] += n.scalar * g[i];
        break;
      }
      case OpKind::kSqDiff: {
        const Tensor<S>& A = in_val(n, 0);
        const Tensor<S>& B = in_val(n, 1);
        Tensor<S>& dA = in_grad(n, 0);
        Tensor<S>& dB = in_grad(n, 1);
        for (std::int64_t i = 0; i < g.numel(); ++i) {
          const S t = S(2) * (A[i] - B[i]) * g[i];
          dA[i] += t;
          dB[i] -= t;
        }
        break;
      }
      case OpKind::kL2Normalize: {
        const Tensor<S>& o = n.value;
        Tensor<S>& dv = in_grad(n, 0);
        const S norm = n.saved[0];
        const S eps = n.scalar;
        if (norm >= eps) {
          S dot = S(0);
          for (std::int64_t i = 0; i < o.numel(); ++i) dot += o[i] * g[i];
          for (std::int64_t i = 0; i < o.numel(); ++i) dv[i] += (g[i] - o[i] * dot) / norm;
        } else {
          for (std::int64_t i = 0; i < o.numel(); ++i) dv[i] += g[i] / eps;
        }
        break;
      }
      case OpKind::kSoftmax: {
        const Tensor<S>& p = n.value;
        Tensor<S>& dv = in_grad(n, 0);
        S dot = S(0);
        for (std::int64_t i = 0; i < p.numel(); ++i) dot += p[i] * g[i];
        for (std::int64_t i = 0; i < p.numel(); ++i) dv[i] += p[i] * (g[i] - dot);
        break;
      }
      case OpKind::kMaskedRowSoftmax: {
        const Tensor<S>& p = n.value;
        Tensor<S>& dl = in_grad(n, 0);
        for (int r = 0; r < p.rows(); ++r) {
          S dot = S(0);
          for (int c = 0; c < p.cols(); ++c)
            if (n.mask->at(r, c)) dot += p.at(r, c) * g.at(r, c);
          for (int c = 0; c < p.cols(); ++c)
            if (n.mask->at(r, c)) dl.at(r, c) += p.at(r, c) * (g.at(r, c) - dot);
        }
        break;
      }
      case OpKind::kRelu: {
        const Tensor<S>& x = in_val(n, 0);
        Tensor<S>& dx = in_grad(n, 0);
        for (std::int64_t i = 0; i < g.numel(); ++i)
          if (x[i] > S(0)) dx[i] += g[i];
        break;
      }
      case OpKind::kWindowMax: {
        Tensor<S>& dx = in_grad(n, 0);
        for (std::size_t w = 0; w < n.arg_index.size(); ++w)
          dx[n.arg_index[w]] += g[static_cast<std::int64_t>(w)];
        break;
      }
      case OpKind::kCrossEntropy2: {
        Tensor<S>& dl = in_grad(n, 0);
        const S gl = g[0];
        dl[0] += (n.saved[0] - (n.index == 0 ? S(1) : S(0))) * gl;
        dl[1] += (n.saved[1] - (n.index == 1 ? S(1) : S(0))) * gl;
        break;
      }
      case OpKind::kStackRows: {
        const int d = n.value.cols();
        for (std::size_t r = 0; r < n.inputs.size(); ++r) {
          Tensor<S>& dr = nodes_[static_cast<std::size_t>(n.inputs[r])].grad;
          for (int c = 0; c < d; ++c) dr[c] += g.at(static_cast<int>(r), c);
        }
        break;
      }
      case OpKind::kRow: {
        Tensor<S>& dA = in_grad(n, 0);
        for (int c = 0; c < static_cast<int>(g.numel()); ++c) dA.at(n.index, c) += g[c];
        break;
      }
      case OpKind::kSum: {
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
          Tensor<S>& dx = nodes_[static_cast<std::size_t>(n.inputs[k])].grad;
          for (std::int64_t i = 0; i < g.numel(); ++i) dx[i] += g[i];
        }
        break;
      }
      case OpKind::kSumAll: {
        Tensor<S>& dx = in_grad(n, 0);
        const S gs = g[0];
        for (std::int64_t i = 0; i < dx.numel(); ++i) dx[i] += gs;
        break;
      }
      case OpKind::kPropagate: {
        const Tensor<S>& W = in_val(n, 0);
        const Tensor<S>& V = in_val(n, 1);
        Tensor<S>& dW = in_grad(n, 0);
        Tensor<S>& dV = in_grad(n, 1);
        for (int t = 0; t < W.rows(); ++t)
          for (int s = 0; s < W.cols(); ++s) {
            S acc = S(0);
            for (int c = 0; c < V.cols(); ++c) acc += g.at(t, c) * V.at(s, c);
            dW.at(t, s) += acc;
          }
        for (int s = 0; s < W.cols(); ++s)
          for (int c = 0; c < V.cols(); ++c) {
            S acc = S(0);
            for (int t = 0; t < W.rows(); ++t) acc += W.at(t, s) * g.at(t, c);
            dV.at(s, c) += acc;
          }
        break;
      }
    }
  }
};

}  // namespace grnet
