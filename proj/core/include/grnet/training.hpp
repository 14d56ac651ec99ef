#pragma once

#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "grnet/feature_io.hpp"
#include "grnet/manifest.hpp"
#include "grnet/reasoning.hpp"
#include "grnet/retrieval.hpp"
#include "grnet/rng.hpp"
#include "grnet/tape.hpp"

namespace grnet {

// One labeled training pair: label 1 means both items belong to the same
// identity.
struct PairSample {
  std::string query_id;
  std::string gallery_id;
  int label = 0;
};

struct BatchSpec {
  int identities = 32;
  int images_per_identity = 2;  // one query + one gallery
  double negative_ratio = 1.0;  // negatives per positive
  bool full_cross = false;      // all cross-identity negatives instead

  int image_count() const { return identities * images_per_identity; }

  void validate() const {
    if (identities < 1) throw ConfigError("batch identities must be >= 1");
    if (images_per_identity != 2)
      throw ConfigError("images per identity must be 2 (one query, one gallery)");
    if (negative_ratio < 0) throw ConfigError("negative ratio must be >= 0");
  }
};

struct OptimizerHyper {
  double momentum = 0.9;
  double weight_decay = 0.0005;
  double base_lr = 0.01;
  int decay_every_epochs = 20;
  double decay_factor = 10.0;
};

// Learning rate at an epoch: the base rate divided by the decay factor once
// per completed decay interval. Iterated division keeps the schedule values
// exactly equal to their decimal counterparts at small epoch counts.
inline double lr_at(int epoch, const OptimizerHyper& h) {
  if (epoch < 0) throw InputError("lr_at: negative epoch");
  double lr = h.base_lr;
  if (h.decay_every_epochs > 0)
    for (int k = 0; k < epoch / h.decay_every_epochs; ++k) lr /= h.decay_factor;
  return lr;
}

// SGD with momentum and decoupled-from-biases weight decay. Buffers are
// zero-initialized and indexed parallel to the parameter list.
template <typename S>
struct OptimizerState {
  OptimizerHyper hyper;
  std::vector<Tensor<S>> buffers;

  void init(const std::vector<Parameter<S>*>& params) {
    buffers.clear();
    buffers.reserve(params.size());
    for (const auto* p : params) buffers.push_back(Tensor<S>::zeros(p->value.shape()));
  }
};

// One step: g = grad + wd * value (weights only); buf = m * buf + g;
// value -= lr * buf; gradients are zeroed afterwards. Any non-finite
// gradient aborts the step before touching parameters.
template <typename S>
void sgd_step(const std::vector<Parameter<S>*>& params, OptimizerState<S>& state, double lr) {
  if (state.buffers.size() != params.size())
    throw LogicError("sgd_step: optimizer state tracks " + std::to_string(state.buffers.size()) +
                     " parameters, got " + std::to_string(params.size()));
  for (const auto* p : params)
    if (!p->gradient.all_finite())
      throw NumericError("non-finite gradient in parameter '" + p->name + "'");
  const S m = static_cast<S>(state.hyper.momentum);
  const S wd = static_cast<S>(state.hyper.weight_decay);
  const S step = static_cast<S>(lr);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter<S>& p = *params[i];
    Tensor<S>& buf = state.buffers[i];
    const S decay = p.decay_exempt ? S(0) : wd;
    for (std::int64_t j = 0; j < p.value.numel(); ++j) {
      const S g = p.gradient[j] + decay * p.value[j];
      buf[j] = m * buf[j] + g;
      p.value[j] -= step * buf[j];
    }
    p.zero_grad();
  }
}

// He-normal initialization: zero-mean normal with std sqrt(2 / fan_in) for
// every weight matrix, zero biases. Deterministic per seed.
template <typename S>
ModelParams<S> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  auto he_matrix = [&rng](const std::string& name, int rows, int cols) {
    Tensor<S> t({rows, cols});
    const double std_dev = std::sqrt(2.0 / static_cast<double>(cols));
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<S>(rng.normal(0.0, std_dev));
    return Parameter<S>(name, std::move(t));
  };

  ModelParams<S> p;
  p.projection = he_matrix("projection", cfg.reasoning.proj_dim, cfg.channels);
  p.layers.resize(static_cast<std::size_t>(cfg.reasoning.iterations));
  for (int t = 0; t < cfg.reasoning.iterations; ++t) {
    auto& layer = p.layers[static_cast<std::size_t>(t)];
    const int d = cfg.reasoning.layer_input_dim(t);
    const std::string prefix = "layer" + std::to_string(t + 1) + ".";
    const bool has_transforms =
        t == 0 || cfg.reasoning.edge_mode == EdgeMode::kRecomputePerLayer;
    if (has_transforms) {
      layer.in_transform = he_matrix(prefix + "in_transform", d, d);
      layer.out_transform = he_matrix(prefix + "out_transform", d, d);
    }
    layer.weight = he_matrix(prefix + "weight", cfg.reasoning.hidden_channels, d);
  }
  p.head.weight = he_matrix("head.weight", 2, cfg.reasoning.hidden_channels);
  p.head.bias = Parameter<S>("head.bias", Tensor<S>::zeros({2}), /*exempt=*/true);
  return p;
}

// Draws a training batch: `identities` identities without replacement, one
// positive pair each, then ratio-many negatives crossing the query of one
// drawn identity with the gallery of another (or every such cross pair when
// full_cross is set).
inline std::vector<PairSample> sample_batch(const Manifest& manifest, const BatchSpec& spec,
                                            Rng& rng) {
  spec.validate();
  const std::vector<std::string> pool = manifest.identities_with_pair(SplitTag::kTrain);
  if (static_cast<int>(pool.size()) < spec.identities)
    throw DataError("insufficient-identities",
                    "batch needs " + std::to_string(spec.identities) +
                        " identities with a query and a gallery image, manifest has " +
                        std::to_string(pool.size()));

  // Partial Fisher-Yates over identity indices.
  std::vector<int> order(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) order[i] = static_cast<int>(i);
  for (int k = 0; k < spec.identities; ++k) {
    const std::size_t j =
        static_cast<std::size_t>(k) + static_cast<std::size_t>(rng.below(pool.size() - k));
    std::swap(order[static_cast<std::size_t>(k)], order[j]);
  }

  struct Drawn {
    std::string query, gallery;
  };
  std::vector<Drawn> drawn;
  drawn.reserve(static_cast<std::size_t>(spec.identities));
  for (int k = 0; k < spec.identities; ++k) {
    const std::string& identity = pool[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])];
    const auto queries = manifest.identity_records(SplitTag::kTrain, Role::kQuery, identity);
    const auto galleries = manifest.identity_records(SplitTag::kTrain, Role::kGallery, identity);
    drawn.push_back(Drawn{
        queries[static_cast<std::size_t>(rng.below(queries.size()))]->item_id,
        galleries[static_cast<std::size_t>(rng.below(galleries.size()))]->item_id,
    });
  }

  std::vector<PairSample> batch;
  for (const auto& d : drawn) batch.push_back(PairSample{d.query, d.gallery, 1});
  if (spec.full_cross) {
    for (int a = 0; a < spec.identities; ++a)
      for (int b = 0; b < spec.identities; ++b)
        if (a != b)
          batch.push_back(PairSample{drawn[static_cast<std::size_t>(a)].query,
                                     drawn[static_cast<std::size_t>(b)].gallery, 0});
  } else if (spec.identities > 1) {
    const int negatives =
        static_cast<int>(std::llround(spec.negative_ratio * spec.identities));
    for (int k = 0; k < negatives; ++k) {
      const int a = rng.below_int(spec.identities);
      int b = rng.below_int(spec.identities - 1);
      if (b >= a) ++b;
      batch.push_back(PairSample{drawn[static_cast<std::size_t>(a)].query,
                                 drawn[static_cast<std::size_t>(b)].gallery, 0});
    }
  }
  return batch;
}

struct TrainOptions {
  ModelConfig model;
  BatchSpec batch;
  OptimizerHyper optimizer;
  int epochs = 60;
  int steps_per_epoch = 0;  // 0: one pass worth of identity draws
  std::uint64_t seed = 1;
  std::vector<int> report_ks = {1, 20, 50};
  bool validate_per_epoch = true;
};

template <typename S>
struct TrainResult {
  ModelParams<S> params;
  std::vector<double> step_losses;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  std::string log_text;
};

namespace detail {
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace detail

// Builds a score matrix for a split using the current model parameters.
template <typename S>
ScoreMatrix model_score_matrix(const Manifest& manifest, SplitTag split, FeatureStore<S>& store,
                               ModelParams<S>& params, const ModelConfig& cfg,
                               const std::string& category = "") {
  ScorerT<S> scorer = [&params, &cfg](const FeatureMap<S>& q, const FeatureMap<S>& g) {
    return static_cast<double>(forward<S>(q, g, params, cfg).score);
  };
  return score_all<S>(manifest, split, store, scorer, category);
}

// End-to-end training: batches of pairs, mean cross-entropy, backward, SGD.
// Emits one "step=..." record per step and per-epoch validation accuracy
// records; the whole log is returned so callers can persist or compare it.
template <typename S>
TrainResult<S> train_model(const Manifest& manifest, FeatureStore<S>& store,
                           const TrainOptions& opts, std::ostream* echo = nullptr) {
  opts.model.validate_for_forward();
  opts.batch.validate();
  if (opts.epochs < 1) throw ConfigError("epochs must be >= 1");

  TrainResult<S> result;
  result.params = init_params<S>(opts.model, opts.seed);
  std::vector<Parameter<S>*> params = result.params.all();
  OptimizerState<S> optimizer;
  optimizer.hyper = opts.optimizer;
  optimizer.init(params);

  Rng rng = Rng(opts.seed).fork(0x7261696e);  // training stream
  std::ostringstream log;
  const int pool = static_cast<int>(manifest.identities_with_pair(SplitTag::kTrain).size());
  const int steps_per_epoch = opts.steps_per_epoch > 0
                                  ? opts.steps_per_epoch
                                  : std::max(1, pool / std::max(1, opts.batch.identities));

  const bool has_val = !manifest.select(SplitTag::kVal, Role::kQuery).empty() &&
                       !manifest.select(SplitTag::kVal, Role::kGallery).empty();

  int step = 0;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    const double lr = lr_at(epoch, opts.optimizer);
    for (int s = 0; s < steps_per_epoch; ++s) {
      ++step;
      const std::vector<PairSample> batch = sample_batch(manifest, opts.batch, rng);
      Tape<S> tape;
      std::vector<Var<S>> losses;
      losses.reserve(batch.size());
      for (const PairSample& pair : batch) {
        const ForwardVars<S> f = forward_on_tape(tape, store.get(pair.query_id),
                                                 store.get(pair.gallery_id), result.params,
                                                 opts.model);
        losses.push_back(pair_loss(tape, f.logits, pair.label));
      }
      const Var<S> mean_loss =
          tape.scale(tape.sum(losses), static_cast<S>(1.0 / static_cast<double>(losses.size())));
      const double loss_value = static_cast<double>(tape.value(mean_loss)[0]);
      try {
        tape.backward(mean_loss);
        sgd_step(params, optimizer, lr);
      } catch (const NumericError& e) {
        throw NumericError("step " + std::to_string(step) + ": " + e.what());
      }
      result.step_losses.push_back(loss_value);
      if (step == 1) result.initial_loss = loss_value;
      const std::string line = "step=" + std::to_string(step) + " epoch=" + std::to_string(epoch) +
                               " lr=" + detail::fmt_double(lr) +
                               " loss=" + detail::fmt_double(loss_value);
      log << line << "\n";
      if (echo) *echo << line << "\n";
    }
    if (opts.validate_per_epoch && has_val) {
      const ScoreMatrix vm =
          model_score_matrix(manifest, SplitTag::kVal, store, result.params, opts.model);
      const ProtocolReport rep = evaluate_protocol(vm, Protocol::kAll, opts.report_ks);
      for (const auto& [k, acc] : rep.accuracy_at) {
        char line[160];
        std::snprintf(line, sizeof(line), "epoch=%d split=val protocol=ALL k=%d acc=%.4f queries=%d",
                      epoch, k, acc, rep.query_count);
        log << line << "\n";
        if (echo) *echo << line << "\n";
      }
    }
  }
  result.final_loss = result.step_losses.empty() ? 0.0 : result.step_losses.back();
  result.log_text = log.str();
  return result;
}

}  // namespace grnet
