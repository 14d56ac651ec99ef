#include "grnet/runners.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace grnet {
namespace {

int discover_channels(const Manifest& manifest, const std::filesystem::path& root) {
  if (manifest.records().empty()) throw DataError("manifest-empty", "manifest has no records");
  return peek_feature_file(root / manifest.records().front().path).channels;
}

std::string fmt4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

template <typename S>
TrainRunResult train_impl(const Manifest& manifest, const std::filesystem::path& root,
                          const std::filesystem::path& out_dir, const RunConfig& config,
                          int channels) {
  FeatureStore<S> store(manifest, root);
  TrainOptions opts = config.to_train_options(channels);
  TrainResult<S> trained = train_model<S>(manifest, store, opts);

  std::filesystem::create_directories(out_dir);
  TrainRunResult out;
  out.checkpoint = out_dir / "checkpoint.grck";
  out.log_file = out_dir / "train_log.txt";
  out.initial_loss = trained.initial_loss;
  out.final_loss = trained.final_loss;
  out.steps = static_cast<int>(trained.step_losses.size());
  out.log_text = trained.log_text;

  save_checkpoint<S>(out.checkpoint, trained.params, config, channels);
  std::ofstream log(out.log_file);
  if (!log) throw DataError("log-write", "cannot write " + out.log_file.string());
  log << "# grnet-train-log v1\n";
  log << "# config " << run_config_to_json(config) << "\n";
  log << "# channels " << channels << "\n";
  log << trained.log_text;
  return out;
}

}  // namespace

TrainRunResult run_train(const std::filesystem::path& manifest_path,
                         const std::optional<std::filesystem::path>& data_root,
                         const std::filesystem::path& out_dir, const RunConfig& config) {
  config.validate();
  const auto root = resolve_data_root(manifest_path, data_root);
  const Manifest manifest = Manifest::load(manifest_path);
  manifest.validate(root, /*check_files=*/true);
  const int channels = discover_channels(manifest, root);
  if (config.precision == Dtype::kF32)
    return train_impl<float>(manifest, root, out_dir, config, channels);
  return train_impl<double>(manifest, root, out_dir, config, channels);
}

namespace {

template <typename S>
ScoreMatrix checkpoint_scores(const Manifest& manifest, const std::filesystem::path& root,
                              const EvalRequest& req) {
  LoadedCheckpoint<S> ckpt = load_checkpoint<S>(req.checkpoint);
  const ModelConfig cfg = ckpt.model_config();
  FeatureStore<S> store(manifest, root);
  return model_score_matrix<S>(manifest, req.split, store, ckpt.params, cfg, req.category);
}

}  // namespace

ScoreMatrix build_scores(const Manifest& manifest, const std::filesystem::path& root,
                         const EvalRequest& req) {
  switch (req.scorer) {
    case ScorerKind::kCheckpoint: {
      const Dtype precision = peek_checkpoint_precision(req.checkpoint);
      return precision == Dtype::kF32 ? checkpoint_scores<float>(manifest, root, req)
                                      : checkpoint_scores<double>(manifest, root, req);
    }
    case ScorerKind::kGlobalCosine: {
      FeatureStore<double> store(manifest, root);
      ScorerT<double> scorer = [](const FeatureMap<double>& q, const FeatureMap<double>& g) {
        return global_cosine(q, g);
      };
      return score_all<double>(manifest, req.split, store, scorer, req.category);
    }
    case ScorerKind::kGreedyLocal: {
      FeatureStore<double> store(manifest, root);
      PyramidConfig cfg{req.scales};
      const int scale = req.greedy_scale_index;
      ScorerT<double> scorer = [cfg, scale](const FeatureMap<double>& q,
                                            const FeatureMap<double>& g) {
        return greedy_local(q, g, cfg, scale);
      };
      return score_all<double>(manifest, req.split, store, scorer, req.category);
    }
  }
  throw LogicError("build_scores: bad scorer kind");
}

EvalRunResult run_eval(const EvalRequest& req) {
  const auto root = resolve_data_root(req.manifest_path, req.data_root);
  const Manifest manifest = Manifest::load(req.manifest_path);
  manifest.validate(root, /*check_files=*/true);
  const ScoreMatrix scores = build_scores(manifest, root, req);

  EvalRunResult out;
  std::ostringstream text;
  text << "# grnet-eval-report v1\n";
  switch (req.scorer) {
    case ScorerKind::kCheckpoint: {
      const CheckpointHeader header = read_checkpoint_header(req.checkpoint);
      text << "# scorer=checkpoint path=" << req.checkpoint.string() << "\n";
      text << "# config " << header.config_json << "\n";
      break;
    }
    case ScorerKind::kGlobalCosine:
      text << "# scorer=global-cosine\n";
      break;
    case ScorerKind::kGreedyLocal:
      text << "# scorer=greedy-local scales=" << scales_to_string(req.scales)
           << " scale_index=" << req.greedy_scale_index << "\n";
      break;
  }
  text << "# split=" << split_name(req.split) << "\n";
  if (!req.category.empty()) text << "# category=" << req.category << "\n";
  text << "# ranking_tie_break=gallery-id-ascending\n";

  for (Protocol p : req.protocols) {
    ProtocolReport rep = evaluate_protocol(scores, p, req.ks);
    for (const auto& w : rep.warnings) text << "# warning " << w << "\n";
    for (const auto& [k, acc] : rep.accuracy_at)
      text << "protocol=" << protocol_name(p) << " k=" << k << " queries=" << rep.query_count
           << " acc=" << fmt4(acc) << "\n";
    out.reports.push_back(std::move(rep));
  }
  out.report_text = text.str();

  if (req.report_file) {
    std::ofstream f(*req.report_file);
    if (!f) throw DataError("report-write", "cannot write " + req.report_file->string());
    f << out.report_text;
  }
  if (req.rankings_file) {
    std::ofstream f(*req.rankings_file);
    if (!f) throw DataError("report-write", "cannot write " + req.rankings_file->string());
    for (int q = 0; q < scores.query_count(); ++q) {
      f << "query=" << scores.query_ids[static_cast<std::size_t>(q)] << " ranked=";
      const auto order = ranked_gallery(scores, q);
      for (std::size_t i = 0; i < order.size(); ++i) {
        if (i) f << ",";
        f << scores.gallery_ids[static_cast<std::size_t>(order[i])];
      }
      f << "\n";
    }
  }
  return out;
}

namespace {

// Deterministic toy problem for the gradient checker: a few random map pairs
// with alternating labels, mean cross-entropy objective.
template <typename S>
GradcheckRunResult gradcheck_impl(const GradcheckRequest& req) {
  ModelConfig cfg;
  cfg.channels = req.channels;
  cfg.pyramid.scales = req.scales;
  cfg.reasoning.iterations = req.iterations;
  cfg.reasoning.hidden_channels = req.hidden_channels;
  cfg.reasoning.proj_dim = req.proj_dim;
  cfg.reasoning.edge_mode = req.edge_mode;
  cfg.reasoning.mask = req.mask;
  cfg.validate_for_forward();

  Rng rng(req.seed);
  const int height = 4, width = 4;
  auto random_map = [&]() {
    FeatureMap<S> fm(req.channels, height, width);
    for (std::int64_t i = 0; i < fm.data.numel(); ++i)
      fm.data[i] = static_cast<S>(rng.uniform(0.0, 1.0));
    return fm;
  };
  struct Pair {
    FeatureMap<S> q, g;
    int label;
  };
  std::vector<Pair> pairs;
  pairs.push_back(Pair{random_map(), random_map(), 1});
  pairs.push_back(Pair{random_map(), random_map(), 0});

  ModelParams<S> params = init_params<S>(cfg, req.seed ^ 0x5eedULL);
  std::vector<Parameter<S>*> plist = params.all();

  std::function<S(bool)> objective = [&](bool with_grad) -> S {
    Tape<S> tape;
    std::vector<Var<S>> losses;
    for (const auto& p : pairs) {
      const ForwardVars<S> f = forward_on_tape(tape, p.q, p.g, params, cfg);
      losses.push_back(pair_loss(tape, f.logits, p.label));
    }
    const Var<S> mean =
        tape.scale(tape.sum(losses), static_cast<S>(1.0 / static_cast<double>(losses.size())));
    if (with_grad) tape.backward(mean);
    return tape.value(mean)[0];
  };

  GradCheckOptions opts;
  opts.step = req.step;
  opts.max_coords_per_param = req.max_coords;
  opts.seed = req.seed;
  GradcheckRunResult out;
  out.report = grad_check<S>(objective, plist, opts);
  out.pass = out.report.passes(req.tolerance);
  out.text = format_grad_check(out.report, req.tolerance);
  return out;
}

}  // namespace

GradcheckRunResult run_gradcheck(const GradcheckRequest& req) {
  if (req.precision == Dtype::kF32) return gradcheck_impl<float>(req);
  return gradcheck_impl<double>(req);
}

RunConfig apply_ablation_variant(const RunConfig& base, const std::string& variant) {
  RunConfig cfg = base;
  if (variant == "full") return cfg;
  if (variant == "global-only") {
    cfg.scales = {{1, 1}};
    return cfg;
  }
  if (variant == "scales-2") {
    cfg.scales = {{1, 1}, {1, 2}, {2, 1}, {2, 2}};
    return cfg;
  }
  if (variant == "no-intra") {
    cfg.mask = EdgeMaskConfig::inter_only();
    return cfg;
  }
  if (variant == "no-inter") {
    cfg.mask = EdgeMaskConfig::intra_only(/*keep_global=*/true);
    return cfg;
  }
  if (variant == "no-inter-strict") {
    cfg.mask = EdgeMaskConfig::intra_only(/*keep_global=*/false);
    return cfg;
  }
  if (variant == "local-none") {
    cfg.mask = EdgeMaskConfig::self_only(/*keep_global=*/true);
    return cfg;
  }
  throw InputError("unknown ablation variant '" + variant +
                   "' (expected full, global-only, scales-2, no-intra, no-inter, "
                   "no-inter-strict or local-none)");
}

AblationResult run_ablation(const std::filesystem::path& manifest_path,
                            const std::optional<std::filesystem::path>& data_root,
                            const std::filesystem::path& out_dir, const RunConfig& base,
                            const std::vector<std::string>& variants,
                            const std::vector<std::uint64_t>& seeds) {
  if (variants.empty()) throw InputError("ablate: no variants requested");
  if (seeds.empty()) throw InputError("ablate: no seeds requested");
  std::filesystem::create_directories(out_dir);

  AblationResult result;
  for (const auto& variant : variants) {
    AblationRow row;
    row.variant = variant;
    for (const std::uint64_t seed : seeds) {
      RunConfig cfg = apply_ablation_variant(base, variant);
      cfg.seed = seed;
      const auto run_dir = out_dir / (variant + "-seed" + std::to_string(seed));
      const TrainRunResult trained = run_train(manifest_path, data_root, run_dir, cfg);

      EvalRequest req;
      req.manifest_path = manifest_path;
      req.data_root = data_root;
      req.scorer = ScorerKind::kCheckpoint;
      req.checkpoint = trained.checkpoint;
      req.split = SplitTag::kTest;
      req.protocols = {Protocol::kAll};
      req.ks = base.report_ks;
      req.report_file = run_dir / "eval_report.txt";
      const EvalRunResult eval = run_eval(req);
      for (const auto& [k, acc] : eval.reports.front().accuracy_at) row.mean_topk[k] += acc;
    }
    for (auto& [k, acc] : row.mean_topk) acc /= static_cast<double>(seeds.size());
    result.rows.push_back(std::move(row));
  }

  std::ostringstream table;
  table << "# grnet-ablation v1 seeds=" << seeds.size() << "\n";
  table << "variant";
  for (const auto& [k, _] : result.rows.front().mean_topk) table << " top-" << k;
  table << "\n";
  for (const auto& row : result.rows) {
    table << row.variant;
    for (const auto& [_, acc] : row.mean_topk) table << " " << fmt4(acc);
    table << "\n";
  }
  result.table_text = table.str();
  std::ofstream f(out_dir / "ablation_report.txt");
  f << result.table_text;
  return result;
}

namespace {

template <typename S>
void describe_params(std::ostringstream& os, const std::filesystem::path& file) {
  LoadedCheckpoint<S> ckpt = load_checkpoint<S>(file);
  for (Parameter<S>* p : ckpt.params.all()) {
    double lo = 0, hi = 0, ss = 0;
    for (std::int64_t i = 0; i < p->value.numel(); ++i) {
      const double v = static_cast<double>(p->value[i]);
      if (i == 0 || v < lo) lo = v;
      if (i == 0 || v > hi) hi = v;
      ss += v * v;
    }
    char line[160];
    std::snprintf(line, sizeof(line), "  %-24s %-10s min=%-10.4g max=%-10.4g l2=%.4g\n",
                  p->name.c_str(), p->value.shape_string().c_str(), lo, hi, std::sqrt(ss));
    os << line;
  }
}

}  // namespace

std::string inspect_checkpoint(const std::filesystem::path& file) {
  const CheckpointHeader header = read_checkpoint_header(file);
  std::ostringstream os;
  os << "checkpoint " << file.string() << "\n";
  os << "  precision " << dtype_name(header.precision) << "\n";
  os << "  channels " << header.channels << "\n";
  os << "  config " << header.config_json << "\n";
  if (header.precision == Dtype::kF32)
    describe_params<float>(os, file);
  else
    describe_params<double>(os, file);
  return os.str();
}

std::string inspect_manifest(const std::filesystem::path& file) {
  const Manifest manifest = Manifest::load(file);
  std::ostringstream os;
  os << "manifest " << file.string() << " records=" << manifest.records().size() << "\n";
  for (SplitTag split : {SplitTag::kTrain, SplitTag::kVal, SplitTag::kTest}) {
    const auto queries = manifest.select(split, Role::kQuery);
    const auto gallery = manifest.select(split, Role::kGallery);
    if (queries.empty() && gallery.empty()) continue;
    int occluded = 0, cropped = 0, nonfront = 0;
    for (const auto* q : queries) {
      occluded += q->attributes.occluded ? 1 : 0;
      cropped += q->attributes.cropped ? 1 : 0;
      nonfront += q->attributes.view != View::kFront ? 1 : 0;
    }
    os << "  " << split_name(split) << ": queries=" << queries.size()
       << " gallery=" << gallery.size()
       << " identities_with_pair=" << manifest.identities_with_pair(split).size()
       << " occluded=" << occluded << " cropped=" << cropped << " nonfront=" << nonfront << "\n";
  }
  return os.str();
}

std::string inspect_feature(const std::filesystem::path& file) {
  const FeatureFileInfo info = peek_feature_file(file);
  const FeatureMap<double> fm = read_feature_file_as<double>(file);
  double lo = fm.data[0], hi = fm.data[0], sum = 0;
  for (std::int64_t i = 0; i < fm.data.numel(); ++i) {
    lo = std::min(lo, fm.data[i]);
    hi = std::max(hi, fm.data[i]);
    sum += fm.data[i];
  }
  std::ostringstream os;
  os << "feature " << file.string() << " dtype=" << dtype_name(info.dtype) << " C=" << info.channels
     << " H=" << info.height << " W=" << info.width << " min=" << lo << " max=" << hi
     << " mean=" << sum / static_cast<double>(fm.data.numel()) << "\n";
  return os.str();
}

}  // namespace grnet
