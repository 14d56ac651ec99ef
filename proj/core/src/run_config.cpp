#include "grnet/run_config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace grnet {

using nlohmann::json;

namespace {

json mask_to_json(const EdgeMaskConfig& m) {
  json j;
  j["intra"] = m.intra;
  j["inter"] = m.inter;
  j["keep_global_links"] = m.keep_global_links;
  j["self_loops"] = m.self_loops;
  if (m.scale_subset) j["scale_subset"] = *m.scale_subset;
  return j;
}

EdgeMaskConfig mask_from_json(const json& j) {
  EdgeMaskConfig m;
  m.intra = j.value("intra", true);
  m.inter = j.value("inter", true);
  m.keep_global_links = j.value("keep_global_links", false);
  m.self_loops = j.value("self_loops", true);
  if (j.contains("scale_subset")) m.scale_subset = j["scale_subset"].get<std::vector<int>>();
  return m;
}

}  // namespace

std::vector<PyramidScale> parse_scales(const std::string& spec) {
  std::vector<PyramidScale> out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto x = item.find('x');
    if (x == std::string::npos)
      throw InputError("bad scale '" + item + "' (expected RxC, e.g. 2x2)");
    try {
      out.push_back(PyramidScale{std::stoi(item.substr(0, x)), std::stoi(item.substr(x + 1))});
    } catch (const std::exception&) {
      throw InputError("bad scale '" + item + "' (expected RxC, e.g. 2x2)");
    }
  }
  if (out.empty()) throw InputError("empty scale list");
  return out;
}

std::string scales_to_string(const std::vector<PyramidScale>& scales) {
  std::string s;
  for (std::size_t i = 0; i < scales.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(scales[i].rows) + "x" + std::to_string(scales[i].cols);
  }
  return s;
}

std::string mask_to_string(const EdgeMaskConfig& m) {
  if (m == EdgeMaskConfig::full()) return "full";
  if (m == EdgeMaskConfig::intra_only(false)) return "intra-only";
  if (m == EdgeMaskConfig::intra_only(true)) return "intra-plus-global";
  if (m == EdgeMaskConfig::inter_only()) return "inter-only";
  if (m == EdgeMaskConfig::self_only(true)) return "self-plus-global";
  if (m == EdgeMaskConfig::self_only(false)) return "self-only";
  return "custom";
}

EdgeMaskConfig mask_from_string(const std::string& name) {
  if (name == "full") return EdgeMaskConfig::full();
  if (name == "intra-only") return EdgeMaskConfig::intra_only(false);
  if (name == "intra-plus-global") return EdgeMaskConfig::intra_only(true);
  if (name == "inter-only") return EdgeMaskConfig::inter_only();
  if (name == "self-plus-global") return EdgeMaskConfig::self_only(true);
  if (name == "self-only") return EdgeMaskConfig::self_only(false);
  throw InputError("unknown edge mask '" + name +
                   "' (expected full, intra-only, intra-plus-global, inter-only, "
                   "self-plus-global or self-only)");
}

EdgeMode parse_edge_mode(const std::string& name) {
  if (name == "recompute-per-layer") return EdgeMode::kRecomputePerLayer;
  if (name == "frozen-first-layer") return EdgeMode::kFrozenFirstLayer;
  throw InputError("unknown edge mode '" + name +
                   "' (expected recompute-per-layer or frozen-first-layer)");
}

std::string run_config_to_json(const RunConfig& cfg) {
  json j;
  j["scales"] = scales_to_string(cfg.scales);
  j["proj_dim"] = cfg.proj_dim;
  j["hidden_channels"] = cfg.hidden_channels;
  j["iterations"] = cfg.iterations;
  j["edge_mode"] = edge_mode_name(cfg.edge_mode);
  j["mask"] = mask_to_json(cfg.mask);
  j["optimizer"] = {{"momentum", cfg.optimizer.momentum},
                    {"weight_decay", cfg.optimizer.weight_decay},
                    {"base_lr", cfg.optimizer.base_lr},
                    {"decay_every_epochs", cfg.optimizer.decay_every_epochs},
                    {"decay_factor", cfg.optimizer.decay_factor}};
  j["batch"] = {{"identities", cfg.batch.identities},
                {"images_per_identity", cfg.batch.images_per_identity},
                {"negative_ratio", cfg.batch.negative_ratio},
                {"full_cross", cfg.batch.full_cross}};
  j["epochs"] = cfg.epochs;
  j["steps_per_epoch"] = cfg.steps_per_epoch;
  j["seed"] = cfg.seed;
  j["report_ks"] = cfg.report_ks;
  j["precision"] = dtype_name(cfg.precision);
  return j.dump();
}

RunConfig run_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config-parse", std::string("bad config JSON: ") + e.what());
  }
  RunConfig cfg;
  if (j.contains("scales")) cfg.scales = parse_scales(j["scales"].get<std::string>());
  cfg.proj_dim = j.value("proj_dim", cfg.proj_dim);
  cfg.hidden_channels = j.value("hidden_channels", cfg.hidden_channels);
  cfg.iterations = j.value("iterations", cfg.iterations);
  if (j.contains("edge_mode")) cfg.edge_mode = parse_edge_mode(j["edge_mode"].get<std::string>());
  if (j.contains("mask")) cfg.mask = mask_from_json(j["mask"]);
  if (j.contains("optimizer")) {
    const auto& o = j["optimizer"];
    cfg.optimizer.momentum = o.value("momentum", cfg.optimizer.momentum);
    cfg.optimizer.weight_decay = o.value("weight_decay", cfg.optimizer.weight_decay);
    cfg.optimizer.base_lr = o.value("base_lr", cfg.optimizer.base_lr);
    cfg.optimizer.decay_every_epochs = o.value("decay_every_epochs", cfg.optimizer.decay_every_epochs);
    cfg.optimizer.decay_factor = o.value("decay_factor", cfg.optimizer.decay_factor);
  }
  if (j.contains("batch")) {
    const auto& b = j["batch"];
    cfg.batch.identities = b.value("identities", cfg.batch.identities);
    cfg.batch.images_per_identity = b.value("images_per_identity", cfg.batch.images_per_identity);
    cfg.batch.negative_ratio = b.value("negative_ratio", cfg.batch.negative_ratio);
    cfg.batch.full_cross = b.value("full_cross", cfg.batch.full_cross);
  }
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.steps_per_epoch = j.value("steps_per_epoch", cfg.steps_per_epoch);
  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("report_ks")) cfg.report_ks = j["report_ks"].get<std::vector<int>>();
  if (j.contains("precision")) cfg.precision = parse_dtype(j["precision"].get<std::string>());
  return cfg;
}

RunConfig load_run_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config-open", "cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return run_config_from_json(buf.str());
}

}  // namespace grnet
