#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "grnet/pyramid.hpp"
#include "grnet/tape.hpp"

namespace grnet {

// Identity of one similarity node: query window i vs gallery window j at one
// pyramid scale. Indices are 0-based; the global node is (0,0,0) and is
// always first because nodes are ordered by ascending (scale, i, j). That
// ordering is part of the checkpoint contract.
struct NodeKey {
  int scale = 0;
  int query_window = 0;
  int gallery_window = 0;

  bool is_global() const { return scale == 0 && query_window == 0 && gallery_window == 0; }
  bool operator==(const NodeKey&) const = default;
};

inline std::vector<NodeKey> node_keys(const PyramidConfig& cfg) {
  std::vector<NodeKey> keys;
  keys.reserve(static_cast<std::size_t>(cfg.total_pairs()));
  for (int l = 0; l < cfg.scale_count(); ++l) {
    const int w = cfg.windows_at(l);
    for (int i = 0; i < w; ++i)
      for (int j = 0; j < w; ++j) keys.push_back(NodeKey{l, i, j});
  }
  return keys;
}

// Which node pairs may exchange messages. Self-loops are kept in every mode
// so no softmax row can end up empty; keep_global_links retains the edges
// between the global node and every other node even when inter-scale edges
// are otherwise dropped. scale_subset, when set, isolates nodes of scales
// outside the subset (only their self-loop remains).
struct EdgeMaskConfig {
  bool intra = true;
  bool inter = true;
  bool keep_global_links = false;
  bool self_loops = true;
  std::optional<std::vector<int>> scale_subset;

  static EdgeMaskConfig full() { return {}; }
  static EdgeMaskConfig intra_only(bool keep_global = false) {
    EdgeMaskConfig m;
    m.inter = false;
    m.keep_global_links = keep_global;
    return m;
  }
  static EdgeMaskConfig inter_only() {
    EdgeMaskConfig m;
    m.intra = false;
    return m;
  }
  static EdgeMaskConfig self_only(bool keep_global = false) {
    EdgeMaskConfig m;
    m.intra = false;
    m.inter = false;
    m.keep_global_links = keep_global;
    return m;
  }

  bool operator==(const EdgeMaskConfig&) const = default;
};

inline bool edge_enabled(const NodeKey& target, const NodeKey& source, const EdgeMaskConfig& m) {
  if (target == source) return m.self_loops;
  if (m.scale_subset) {
    bool t_in = false, s_in = false;
    for (int l : *m.scale_subset) {
      t_in = t_in || l == target.scale;
      s_in = s_in || l == source.scale;
    }
    if (!t_in || !s_in) return false;
  }
  if (target.scale == source.scale) {
    if (m.intra) return true;
  } else {
    if (m.inter) return true;
    if (m.keep_global_links && (target.is_global() || source.is_global())) return true;
  }
  return false;
}

// Builds the dense (target, source) mask. Throws if any row would have no
// enabled sources.
inline std::shared_ptr<const RowMask> build_edge_mask(const std::vector<NodeKey>& keys,
                                                      const EdgeMaskConfig& cfg) {
  const int n = static_cast<int>(keys.size());
  auto mask = std::make_shared<RowMask>(n, n);
  for (int t = 0; t < n; ++t) {
    bool any = false;
    for (int s = 0; s < n; ++s) {
      const bool on = edge_enabled(keys[static_cast<std::size_t>(t)],
                                   keys[static_cast<std::size_t>(s)], cfg);
      mask->set(t, s, on);
      any = any || on;
    }
    if (!any)
      throw ConfigError("edge-mask", "node " + std::to_string(t) +
                                         " has no enabled incoming edges under this mask");
  }
  return mask;
}

// Similarity vector of a window pair: the projected elementwise squared
// difference, l2-normalized. Identical inputs give the exact zero vector via
// the eps guard (a zero difference is a perfect match).
template <typename S>
Var<S> similarity_vector(Tape<S>& tape, Var<S> x, Var<S> y, Var<S> projection,
                         S eps = static_cast<S>(1e-12)) {
  return tape.l2_normalize(tape.matvec(projection, tape.sq_diff(x, y)), eps);
}

// One similarity node per same-scale (query window, gallery window) pair, in
// node_keys order.
template <typename S>
std::vector<Var<S>> build_nodes(Tape<S>& tape, const PyramidFeatures<S>& q,
                                const PyramidFeatures<S>& g, Var<S> projection,
                                S eps = static_cast<S>(1e-12)) {
  if (!(q.config == g.config))
    throw LogicError("build_nodes: query and gallery pyramid configs differ");
  if (q.channels != g.channels)
    throw LogicError("build_nodes: query channels " + std::to_string(q.channels) +
                     " != gallery channels " + std::to_string(g.channels));
  std::vector<Var<S>> nodes;
  nodes.reserve(static_cast<std::size_t>(q.config.total_pairs()));
  for (std::size_t l = 0; l < q.per_scale.size(); ++l) {
    const auto& qs = q.per_scale[l];
    const auto& gs = g.per_scale[l];
    for (const auto& xi : qs)
      for (const auto& yj : gs) nodes.push_back(similarity_vector(tape, xi, yj, projection, eps));
  }
  return nodes;
}

template <typename S>
struct EdgeWeights {
  Var<S> weights;                       // N x N, row-stochastic over the mask
  std::shared_ptr<const RowMask> mask;  // which (target, source) pairs exist
};

// Attention weights between nodes: logit(t,s) = (T_out v_t) . (T_in v_s),
// then a masked row softmax so each node's incoming weights sum to one.
template <typename S>
EdgeWeights<S> edge_weights(Tape<S>& tape, Var<S> node_matrix, Var<S> in_transform,
                            Var<S> out_transform, std::shared_ptr<const RowMask> mask) {
  const Tensor<S>& v = tape.value(node_matrix);
  const Tensor<S>& ti = tape.value(in_transform);
  const Tensor<S>& to = tape.value(out_transform);
  if (ti.rank() != 2 || to.rank() != 2 || !ti.same_shape(to))
    throw DimensionError("edge_weights: in/out transforms must share a square shape, got " +
                         ti.shape_string() + " and " + to.shape_string());
  if (ti.cols() != v.cols())
    throw DimensionError("edge_weights: transform " + ti.shape_string() +
                         " does not accept node vectors " + v.shape_string());
  Var<S> out_rows = tape.matmul(node_matrix, tape.transpose(out_transform));
  Var<S> in_rows = tape.matmul(node_matrix, tape.transpose(in_transform));
  Var<S> logits = tape.matmul(out_rows, tape.transpose(in_rows));
  return EdgeWeights<S>{tape.masked_row_softmax(logits, mask), std::move(mask)};
}

}  // namespace grnet
