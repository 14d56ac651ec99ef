#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "grnet/checkpoint.hpp"
#include "grnet/grad_check.hpp"
#include "grnet/manifest.hpp"
#include "grnet/retrieval.hpp"
#include "grnet/run_config.hpp"
#include "grnet/synthetic.hpp"

namespace grnet {

// High-level command implementations. The CLI is a thin argument parser over
// these; the acceptance suite drives the same entry points.

struct TrainRunResult {
  std::filesystem::path checkpoint;
  std::filesystem::path log_file;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int steps = 0;
  std::string log_text;  // body without headers, for determinism checks
};

TrainRunResult run_train(const std::filesystem::path& manifest_path,
                         const std::optional<std::filesystem::path>& data_root,
                         const std::filesystem::path& out_dir, const RunConfig& config);

enum class ScorerKind { kCheckpoint, kGlobalCosine, kGreedyLocal };

struct EvalRequest {
  std::filesystem::path manifest_path;
  std::optional<std::filesystem::path> data_root;
  ScorerKind scorer = ScorerKind::kCheckpoint;
  std::filesystem::path checkpoint;       // for kCheckpoint
  std::vector<PyramidScale> scales = PyramidConfig::default7().scales;  // for kGreedyLocal
  int greedy_scale_index = -1;            // -1: finest
  SplitTag split = SplitTag::kTest;
  std::vector<Protocol> protocols = {Protocol::kAll};
  std::vector<int> ks = {1, 20, 50};
  std::string category;
  std::optional<std::filesystem::path> report_file;
  std::optional<std::filesystem::path> rankings_file;
};

struct EvalRunResult {
  std::vector<ProtocolReport> reports;
  std::string report_text;
};

EvalRunResult run_eval(const EvalRequest& req);

// Builds the score matrix for a split with the requested scorer; shared by
// eval and the ablation loop.
ScoreMatrix build_scores(const Manifest& manifest, const std::filesystem::path& data_root,
                         const EvalRequest& req);

struct GradcheckRequest {
  std::vector<PyramidScale> scales = {{1, 1}, {2, 2}};
  int channels = 8;
  int proj_dim = 6;
  int hidden_channels = 4;
  int iterations = 2;
  EdgeMode edge_mode = EdgeMode::kRecomputePerLayer;
  EdgeMaskConfig mask;
  Dtype precision = Dtype::kF64;
  double step = 1e-5;
  int max_coords = 64;
  std::uint64_t seed = 20240917;
  double tolerance = 1e-4;
};

struct GradcheckRunResult {
  GradCheckReport report;
  bool pass = false;
  std::string text;  // first line "PASS max_rel_err=..." / "FAIL ..."
};

GradcheckRunResult run_gradcheck(const GradcheckRequest& req);

// Named model variants for the ablation study. "full" keeps the base config;
// "global-only" collapses the pyramid to the 1x1 scale; "scales-2" keeps the
// 1x1/1x2/2x1/2x2 scales; "no-intra" and "no-inter" drop one edge family
// ("no-inter" keeps the global node connected to every local node;
// "no-inter-strict" does not); "local-none" keeps only self-loops and global
// links.
RunConfig apply_ablation_variant(const RunConfig& base, const std::string& variant);

struct AblationRow {
  std::string variant;
  std::map<int, double> mean_topk;  // over seeds, ALL protocol
};

struct AblationResult {
  std::vector<AblationRow> rows;
  std::string table_text;
};

AblationResult run_ablation(const std::filesystem::path& manifest_path,
                            const std::optional<std::filesystem::path>& data_root,
                            const std::filesystem::path& out_dir, const RunConfig& base,
                            const std::vector<std::string>& variants,
                            const std::vector<std::uint64_t>& seeds);

std::string inspect_checkpoint(const std::filesystem::path& file);
std::string inspect_manifest(const std::filesystem::path& file);
std::string inspect_feature(const std::filesystem::path& file);

}  // namespace grnet
