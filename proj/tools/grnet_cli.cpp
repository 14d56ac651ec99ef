// grnet: synthetic data generation, training, evaluation and diagnostics for
// similarity-pyramid graph matching models.

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "grnet/runners.hpp"

namespace {

using namespace grnet;

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  if (out.empty()) throw InputError("empty integer list");
  return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoull(item));
  if (out.empty()) throw InputError("empty seed list");
  return out;
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

struct CommonModelFlags {
  std::string config_file;
  std::string scales;
  int proj_dim = -1;
  int hidden = -1;
  int layers = -1;
  std::string edge_mode;
  std::string mask;
  std::string precision;
  double lr = -1;
  double momentum = -1;
  double weight_decay = -1;
  int batch_identities = -1;
  double negative_ratio = -1;
  bool full_cross = false;
  int epochs = -1;
  int steps_per_epoch = -1;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string report_ks;
};

void add_model_flags(CLI::App* cmd, CommonModelFlags& f) {
  cmd->add_option("--config", f.config_file, "JSON run config file (flags override it)");
  cmd->add_option("--scales", f.scales, "pyramid scales, e.g. 1x1,2x2,3x3");
  cmd->add_option("--dim", f.proj_dim, "similarity vector dimension");
  cmd->add_option("--hidden", f.hidden, "reasoning hidden channels");
  cmd->add_option("--layers", f.layers, "reasoning layer count");
  cmd->add_option("--edge-mode", f.edge_mode, "recompute-per-layer | frozen-first-layer");
  cmd->add_option("--mask", f.mask,
                  "edge mask: full | intra-only | intra-plus-global | inter-only | "
                  "self-plus-global | self-only");
  cmd->add_option("--precision", f.precision, "f32 | f64");
  cmd->add_option("--lr", f.lr, "base learning rate");
  cmd->add_option("--momentum", f.momentum, "SGD momentum");
  cmd->add_option("--weight-decay", f.weight_decay, "weight decay (weights only)");
  cmd->add_option("--batch-identities", f.batch_identities, "identities per batch");
  cmd->add_option("--negative-ratio", f.negative_ratio, "negatives per positive");
  cmd->add_flag("--full-cross", f.full_cross, "use all cross-identity negatives");
  cmd->add_option("--epochs", f.epochs, "training epochs");
  cmd->add_option("--steps-per-epoch", f.steps_per_epoch, "steps per epoch (0 = auto)");
  cmd->add_option("--seed", f.seed, "run seed")->each([&f](const std::string&) { f.seed_set = true; });
  cmd->add_option("--report-ks", f.report_ks, "top-k list, e.g. 1,20,50");
}

RunConfig resolve_config(const CommonModelFlags& f) {
  RunConfig cfg;
  if (!f.config_file.empty()) cfg = load_run_config_file(f.config_file);
  if (!f.scales.empty()) cfg.scales = parse_scales(f.scales);
  if (f.proj_dim > 0) cfg.proj_dim = f.proj_dim;
  if (f.hidden > 0) cfg.hidden_channels = f.hidden;
  if (f.layers > 0) cfg.iterations = f.layers;
  if (!f.edge_mode.empty()) cfg.edge_mode = parse_edge_mode(f.edge_mode);
  if (!f.mask.empty()) cfg.mask = mask_from_string(f.mask);
  if (!f.precision.empty()) cfg.precision = parse_dtype(f.precision);
  if (f.lr > 0) cfg.optimizer.base_lr = f.lr;
  if (f.momentum >= 0) cfg.optimizer.momentum = f.momentum;
  if (f.weight_decay >= 0) cfg.optimizer.weight_decay = f.weight_decay;
  if (f.batch_identities > 0) cfg.batch.identities = f.batch_identities;
  if (f.negative_ratio >= 0) cfg.batch.negative_ratio = f.negative_ratio;
  if (f.full_cross) cfg.batch.full_cross = true;
  if (f.epochs > 0) cfg.epochs = f.epochs;
  if (f.steps_per_epoch >= 0) cfg.steps_per_epoch = f.steps_per_epoch;
  if (f.seed_set) cfg.seed = f.seed;
  if (!f.report_ks.empty()) cfg.report_ks = parse_int_list(f.report_ks);
  cfg.validate();
  return cfg;
}

std::optional<std::filesystem::path> optional_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::filesystem::path(s);
}

int run(int argc, char** argv) {
  CLI::App app{"similarity-pyramid graph matching: data, training and evaluation"};
  app.require_subcommand(1);

  // ---- synth ----
  auto* synth = app.add_subcommand("synth", "generate a planted-patch dataset");
  SyntheticSpec spec;
  std::string synth_out = "data";
  std::string synth_dtype = "f32";
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--identities", spec.train_identities, "training identities");
  synth->add_option("--val-identities", spec.val_identities, "validation identities");
  synth->add_option("--test-identities", spec.test_identities, "test identities");
  synth->add_option("--distractors", spec.distractors, "extra gallery-only items");
  synth->add_option("--queries-per-test-identity", spec.queries_per_test_identity,
                    "query images per test identity");
  synth->add_option("--channels", spec.channels, "feature channels");
  synth->add_option("--height", spec.height, "map height");
  synth->add_option("--width", spec.width, "map width");
  synth->add_option("--sig-h", spec.signature_h, "signature patch height");
  synth->add_option("--sig-w", spec.signature_w, "signature patch width");
  synth->add_option("--sig-lo", spec.signature_lo, "signature value lower bound");
  synth->add_option("--sig-hi", spec.signature_hi, "signature value upper bound");
  synth->add_option("--background", spec.background, "background amplitude");
  synth->add_option("--noise", spec.noise, "additive noise sigma");
  synth->add_option("--clutter", spec.clutter_patches, "clutter patches per image");
  synth->add_option("--occlusion-rate", spec.occlusion_rate, "query occlusion probability");
  synth->add_option("--cropping-rate", spec.cropping_rate, "query cropping probability");
  synth->add_option("--view-rate", spec.view_rate, "non-frontal view probability");
  synth->add_option("--seed", spec.seed, "generator seed");
  synth->add_option("--dtype", synth_dtype, "feature file dtype: f32 | f64");

  // ---- train ----
  auto* train = app.add_subcommand("train", "train a model on a manifest");
  std::string train_manifest, train_out = "run", train_root;
  CommonModelFlags train_flags;
  train->add_option("--data", train_manifest, "manifest file")->required();
  train->add_option("--out", train_out, "output directory");
  train->add_option("--data-root", train_root, "feature file root (default: manifest dir)");
  add_model_flags(train, train_flags);

  // ---- eval ----
  auto* eval = app.add_subcommand("eval", "score a split and report top-k accuracy");
  std::string eval_manifest, eval_root, eval_ckpt, eval_scorer = "checkpoint";
  std::string eval_protocols = "ALL", eval_ks = "1,20,50", eval_split = "test";
  std::string eval_out, eval_rankings, eval_category, eval_scales;
  int eval_scale_index = -1;
  eval->add_option("--data", eval_manifest, "manifest file")->required();
  eval->add_option("--data-root", eval_root, "feature file root");
  eval->add_option("--checkpoint", eval_ckpt, "model checkpoint (scorer=checkpoint)");
  eval->add_option("--scorer", eval_scorer, "checkpoint | global-cosine | greedy-local");
  eval->add_option("--protocol", eval_protocols, "protocols, e.g. E,HV,HO,HC or ALL");
  eval->add_option("--k", eval_ks, "top-k list, e.g. 1,20,50");
  eval->add_option("--split", eval_split, "train | val | test");
  eval->add_option("--category", eval_category, "restrict queries and gallery to a category");
  eval->add_option("--scales", eval_scales, "pyramid scales for greedy-local");
  eval->add_option("--scale-index", eval_scale_index, "greedy-local scale (-1 = finest)");
  eval->add_option("--out", eval_out, "report file");
  eval->add_option("--dump-rankings", eval_rankings, "write full per-query rankings");

  // ---- gradcheck ----
  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  GradcheckRequest gc_req;
  std::string gc_scales = "1x1,2x2", gc_precision = "f64", gc_mask, gc_edge_mode;
  gc->add_option("--scales", gc_scales, "pyramid scales");
  gc->add_option("--channels", gc_req.channels, "feature channels");
  gc->add_option("--dim", gc_req.proj_dim, "similarity vector dimension");
  gc->add_option("--hidden", gc_req.hidden_channels, "hidden channels");
  gc->add_option("--layers", gc_req.iterations, "reasoning layers");
  gc->add_option("--edge-mode", gc_edge_mode, "recompute-per-layer | frozen-first-layer");
  gc->add_option("--mask", gc_mask, "edge mask name");
  gc->add_option("--precision", gc_precision, "f32 | f64");
  gc->add_option("--step", gc_req.step, "finite difference step");
  gc->add_option("--coords", gc_req.max_coords, "coordinates checked per parameter (0 = all)");
  gc->add_option("--seed", gc_req.seed, "probe seed");
  gc->add_option("--tolerance", gc_req.tolerance, "max relative error to pass");

  // ---- ablate ----
  auto* ablate = app.add_subcommand("ablate", "train and compare model variants");
  std::string ab_manifest, ab_root, ab_out = "ablation";
  std::string ab_variants = "global-only,scales-2,full";
  std::string ab_seeds = "1,2,3";
  CommonModelFlags ab_flags;
  ablate->add_option("--data", ab_manifest, "manifest file")->required();
  ablate->add_option("--data-root", ab_root, "feature file root");
  ablate->add_option("--out", ab_out, "output directory");
  ablate->add_option("--variants", ab_variants,
                     "comma list: full, global-only, scales-2, no-intra, no-inter, "
                     "no-inter-strict, local-none");
  ablate->add_option("--seeds", ab_seeds, "comma list of training seeds");
  add_model_flags(ablate, ab_flags);

  // ---- inspect ----
  auto* inspect = app.add_subcommand("inspect", "summarize checkpoints, manifests or features");
  std::string in_ckpt, in_manifest, in_feature;
  inspect->add_option("--checkpoint", in_ckpt, "checkpoint file");
  inspect->add_option("--manifest", in_manifest, "manifest file");
  inspect->add_option("--feature", in_feature, "feature file");

  CLI11_PARSE(app, argc, argv);

  if (synth->parsed()) {
    spec.dtype = parse_dtype(synth_dtype);
    const SyntheticResult r = generate_synthetic(spec, synth_out, synthetic_spec_to_json(spec));
    std::cout << "synth wrote " << r.files_written << " feature files and "
              << r.manifest.records().size() << " manifest records to " << synth_out << "\n";
    return 0;
  }
  if (train->parsed()) {
    const RunConfig cfg = resolve_config(train_flags);
    const TrainRunResult r =
        run_train(train_manifest, optional_path(train_root), train_out, cfg);
    std::printf("train steps=%d initial_loss=%.6f final_loss=%.6f\n", r.steps, r.initial_loss,
                r.final_loss);
    std::cout << "checkpoint " << r.checkpoint.string() << "\nlog " << r.log_file.string() << "\n";
    return 0;
  }
  if (eval->parsed()) {
    EvalRequest req;
    req.manifest_path = eval_manifest;
    req.data_root = optional_path(eval_root);
    if (eval_scorer == "checkpoint") {
      if (eval_ckpt.empty()) throw InputError("eval: --checkpoint required for scorer=checkpoint");
      req.scorer = ScorerKind::kCheckpoint;
      req.checkpoint = eval_ckpt;
    } else if (eval_scorer == "global-cosine") {
      req.scorer = ScorerKind::kGlobalCosine;
    } else if (eval_scorer == "greedy-local") {
      req.scorer = ScorerKind::kGreedyLocal;
    } else {
      throw InputError("eval: unknown scorer '" + eval_scorer + "'");
    }
    if (!eval_scales.empty()) req.scales = parse_scales(eval_scales);
    req.greedy_scale_index = eval_scale_index;
    req.split = parse_split(eval_split);
    req.protocols.clear();
    for (const auto& p : split_commas(eval_protocols)) req.protocols.push_back(parse_protocol(p));
    req.ks = parse_int_list(eval_ks);
    req.category = eval_category;
    req.report_file = optional_path(eval_out);
    req.rankings_file = optional_path(eval_rankings);
    const EvalRunResult r = run_eval(req);
    std::cout << r.report_text;
    return 0;
  }
  if (gc->parsed()) {
    gc_req.scales = parse_scales(gc_scales);
    gc_req.precision = parse_dtype(gc_precision);
    if (!gc_mask.empty()) gc_req.mask = mask_from_string(gc_mask);
    if (!gc_edge_mode.empty()) gc_req.edge_mode = parse_edge_mode(gc_edge_mode);
    const GradcheckRunResult r = run_gradcheck(gc_req);
    std::cout << r.text << "\n";
    return r.pass ? 0 : 1;
  }
  if (ablate->parsed()) {
    const RunConfig cfg = resolve_config(ab_flags);
    const AblationResult r = run_ablation(ab_manifest, optional_path(ab_root), ab_out, cfg,
                                          split_commas(ab_variants), parse_seed_list(ab_seeds));
    std::cout << r.table_text;
    return 0;
  }
  if (inspect->parsed()) {
    if (in_ckpt.empty() && in_manifest.empty() && in_feature.empty())
      throw InputError("inspect: pass --checkpoint, --manifest or --feature");
    if (!in_ckpt.empty()) std::cout << inspect_checkpoint(in_ckpt);
    if (!in_manifest.empty()) std::cout << inspect_manifest(in_manifest);
    if (!in_feature.empty()) std::cout << inspect_feature(in_feature);
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const grnet::Error& e) {
    std::cerr << "error code=" << e.code() << " message=\"" << e.what() << "\"\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error code=internal message=\"" << e.what() << "\"\n";
    return 1;
  }
}
