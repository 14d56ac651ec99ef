#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "grnet/parameter.hpp"
#include "grnet/pyramid.hpp"
#include "grnet/simgraph.hpp"
#include "grnet/tape.hpp"

namespace grnet {

// How edge weights evolve across reasoning layers. The default recomputes
// them from each layer's own vectors with transforms sized to that layer's
// input; the alternative freezes the layer-1 weight matrix and reuses it.
enum class EdgeMode { kRecomputePerLayer, kFrozenFirstLayer };

inline const char* edge_mode_name(EdgeMode m) {
  return m == EdgeMode::kRecomputePerLayer ? "recompute-per-layer" : "frozen-first-layer";
}

struct ReasoningConfig {
  int iterations = 3;        // T
  int hidden_channels = 128; // C'
  int proj_dim = 512;        // D
  EdgeMode edge_mode = EdgeMode::kRecomputePerLayer;
  EdgeMaskConfig mask;

  void validate() const {
    if (iterations < 1) throw ConfigError("reasoning iterations must be >= 1");
    if (hidden_channels < 1) throw ConfigError("hidden channels must be >= 1");
    if (proj_dim < 1) throw ConfigError("projection dimension must be >= 1");
  }

  // Node-vector dimension entering layer t (0-based).
  int layer_input_dim(int t) const { return t == 0 ? proj_dim : hidden_channels; }

  bool operator==(const ReasoningConfig&) const = default;
};

// Everything that fixes the shape of a model: input channels, the window
// pyramid, and the reasoning stack.
struct ModelConfig {
  int channels = 0;  // C of the consumed feature maps
  PyramidConfig pyramid;
  ReasoningConfig reasoning;

  void validate() const {
    if (channels < 1) throw ConfigError("model channels must be >= 1");
    pyramid.validate();
    reasoning.validate();
  }

  // The classifier reads the reasoned global node, so the first scale must
  // be the 1x1 global window.
  void validate_for_forward() const {
    validate();
    if (pyramid.scales[0].rows != 1 || pyramid.scales[0].cols != 1)
      throw ConfigError("the first pyramid scale must be 1x1 (the global window)");
  }

  bool operator==(const ModelConfig&) const = default;
};

template <typename S>
struct GcnLayerParams {
  // Edge transforms exist for layer 1 always, and for later layers only in
  // recompute-per-layer mode.
  std::optional<Parameter<S>> in_transform;
  std::optional<Parameter<S>> out_transform;
  Parameter<S> weight;  // C' x (layer input dim)
};

template <typename S>
struct ClassifierHead {
  Parameter<S> weight;  // 2 x C'
  Parameter<S> bias;    // 2
};

// All trained state, in checkpoint order: projection, per-layer
// {in_transform, out_transform, weight}, then the head.
template <typename S>
struct ModelParams {
  Parameter<S> projection;  // D x C
  std::vector<GcnLayerParams<S>> layers;
  ClassifierHead<S> head;

  std::vector<Parameter<S>*> all() {
    std::vector<Parameter<S>*> ps;
    ps.push_back(&projection);
    for (auto& l : layers) {
      if (l.in_transform) ps.push_back(&*l.in_transform);
      if (l.out_transform) ps.push_back(&*l.out_transform);
      ps.push_back(&l.weight);
    }
    ps.push_back(&head.weight);
    ps.push_back(&head.bias);
    return ps;
  }

  void zero_grads() {
    for (auto* p : all()) p->zero_grad();
  }
};

template <typename S>
struct MatchResult {
  std::array<S, 2> logits{};
  S score = S(0);  // probability of "same pair" = softmax(logits)[1]
};

template <typename S>
S match_score_from_logits(S l0, S l1) {
  const S m = l0 > l1 ? l0 : l1;
  const S e0 = static_cast<S>(std::exp(static_cast<double>(l0 - m)));
  const S e1 = static_cast<S>(std::exp(static_cast<double>(l1 - m)));
  return e1 / (e0 + e1);
}

// One reasoning layer: edge weights (fresh or reused), propagation, then a
// linear map and ReLU on every node vector.
template <typename S>
struct GcnLayerOut {
  Var<S> hidden;
  Var<S> weights_used;
};

template <typename S>
GcnLayerOut<S> gcn_layer(Tape<S>& tape, Var<S> node_matrix, GcnLayerParams<S>& layer,
                         const std::shared_ptr<const RowMask>& mask,
                         std::optional<Var<S>> reuse_weights = std::nullopt) {
  Var<S> w;
  if (reuse_weights) {
    w = *reuse_weights;
  } else {
    if (!layer.in_transform || !layer.out_transform)
      throw LogicError("gcn_layer: layer has no edge transforms and no reusable weights");
    Var<S> ti = tape.param(*layer.in_transform);
    Var<S> to = tape.param(*layer.out_transform);
    w = edge_weights(tape, node_matrix, ti, to, mask).weights;
  }
  Var<S> propagated = tape.propagate(w, node_matrix);
  Var<S> wl = tape.param(layer.weight);
  Var<S> hidden = tape.relu(tape.matmul(propagated, tape.transpose(wl)));
  return GcnLayerOut<S>{hidden, w};
}

template <typename S>
struct ForwardVars {
  Var<S> logits;         // [2]
  Var<S> global_hidden;  // reasoned global node vector [C']
  Var<S> node_matrix;    // initial node vectors [N, D]
};

// Full pipeline on an existing tape: pyramids -> similarity nodes -> T
// reasoning layers -> classifier on the reasoned global node.
template <typename S>
ForwardVars<S> forward_on_tape(Tape<S>& tape, const FeatureMap<S>& query,
                               const FeatureMap<S>& gallery, ModelParams<S>& params,
                               const ModelConfig& cfg) {
  cfg.validate_for_forward();
  if (query.channels != cfg.channels || gallery.channels != cfg.channels)
    throw DimensionError("forward: map channels " + std::to_string(query.channels) + "/" +
                         std::to_string(gallery.channels) + " != model channels " +
                         std::to_string(cfg.channels));
  if (static_cast<int>(params.layers.size()) != cfg.reasoning.iterations)
    throw LogicError("forward: model has " + std::to_string(params.layers.size()) +
                     " layers, config wants " + std::to_string(cfg.reasoning.iterations));

  PyramidFeatures<S> q = extract_pyramid(tape, query, cfg.pyramid);
  PyramidFeatures<S> g = extract_pyramid(tape, gallery, cfg.pyramid);
  Var<S> projection = tape.param(params.projection);
  std::vector<Var<S>> nodes = build_nodes(tape, q, g, projection);
  Var<S> v = tape.stack_rows(nodes);
  ForwardVars<S> out;
  out.node_matrix = v;

  const auto keys = node_keys(cfg.pyramid);
  const auto mask = build_edge_mask(keys, cfg.reasoning.mask);
  std::optional<Var<S>> frozen;
  for (int t = 0; t < cfg.reasoning.iterations; ++t) {
    const bool reuse = cfg.reasoning.edge_mode == EdgeMode::kFrozenFirstLayer && t > 0;
    auto layer = gcn_layer(tape, v, params.layers[static_cast<std::size_t>(t)], mask,
                           reuse ? frozen : std::nullopt);
    if (t == 0) frozen = layer.weights_used;
    v = layer.hidden;
  }

  out.global_hidden = tape.row(v, 0);
  Var<S> head_w = tape.param(params.head.weight);
  Var<S> head_b = tape.param(params.head.bias);
  out.logits = tape.add(tape.matvec(head_w, out.global_hidden), head_b);
  return out;
}

// Value-level forward for scoring; builds and discards its own tape.
template <typename S>
MatchResult<S> forward(const FeatureMap<S>& query, const FeatureMap<S>& gallery,
                       ModelParams<S>& params, const ModelConfig& cfg) {
  Tape<S> tape;
  const ForwardVars<S> f = forward_on_tape(tape, query, gallery, params, cfg);
  const Tensor<S>& l = tape.value(f.logits);
  MatchResult<S> r;
  r.logits = {l[0], l[1]};
  r.score = match_score_from_logits(l[0], l[1]);
  return r;
}

// Cross-entropy between a pair's logits and its {0,1} label.
template <typename S>
Var<S> pair_loss(Tape<S>& tape, Var<S> logits, int label) {
  if (label != 0 && label != 1)
    throw InputError("pair label must be 0 or 1, got " + std::to_string(label));
  return tape.cross_entropy_with_logits(logits, label);
}

}  // namespace grnet
