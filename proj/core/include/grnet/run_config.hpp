#pragma once

#include <string>
#include <vector>

#include "grnet/feature_io.hpp"
#include "grnet/reasoning.hpp"
#include "grnet/training.hpp"

namespace grnet {

// Umbrella configuration for a run: pyramid, reasoning stack, optimizer,
// batch construction, schedule, seed and reporting. The fully resolved value
// is echoed (as JSON) into checkpoints, logs and reports so any run can be
// reproduced from its own outputs.
struct RunConfig {
  std::vector<PyramidScale> scales = PyramidConfig::default7().scales;
  int proj_dim = 512;
  int hidden_channels = 128;
  int iterations = 3;
  EdgeMode edge_mode = EdgeMode::kRecomputePerLayer;
  EdgeMaskConfig mask;
  OptimizerHyper optimizer;
  BatchSpec batch;
  int epochs = 60;
  int steps_per_epoch = 0;
  std::uint64_t seed = 1;
  std::vector<int> report_ks = {1, 20, 50};
  Dtype precision = Dtype::kF64;

  ModelConfig to_model_config(int channels) const {
    ModelConfig cfg;
    cfg.channels = channels;
    cfg.pyramid.scales = scales;
    cfg.reasoning.iterations = iterations;
    cfg.reasoning.hidden_channels = hidden_channels;
    cfg.reasoning.proj_dim = proj_dim;
    cfg.reasoning.edge_mode = edge_mode;
    cfg.reasoning.mask = mask;
    return cfg;
  }

  TrainOptions to_train_options(int channels) const {
    TrainOptions o;
    o.model = to_model_config(channels);
    o.batch = batch;
    o.optimizer = optimizer;
    o.epochs = epochs;
    o.steps_per_epoch = steps_per_epoch;
    o.seed = seed;
    o.report_ks = report_ks;
    return o;
  }

  void validate() const {
    to_model_config(1).validate();
    batch.validate();
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (steps_per_epoch < 0) throw ConfigError("steps per epoch must be >= 0");
    for (int k : report_ks)
      if (k < 1) throw ConfigError("report k values must be >= 1");
  }
};

std::string run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const std::string& json_text);
RunConfig load_run_config_file(const std::string& path);

// "1x1,2x2" <-> scale list helpers shared by the CLI and configs.
std::vector<PyramidScale> parse_scales(const std::string& spec);
std::string scales_to_string(const std::vector<PyramidScale>& scales);

std::string mask_to_string(const EdgeMaskConfig& mask);
EdgeMaskConfig mask_from_string(const std::string& name);

EdgeMode parse_edge_mode(const std::string& name);

}  // namespace grnet
