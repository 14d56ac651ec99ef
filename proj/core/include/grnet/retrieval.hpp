#pragma once

#include <functional>
#include <string>
#include <vector>

#include "grnet/feature_io.hpp"
#include "grnet/manifest.hpp"
#include "grnet/pyramid.hpp"

namespace grnet {

// Pairwise scorer over feature maps; higher means more similar.
template <typename S>
using ScorerT = std::function<double(const FeatureMap<S>&, const FeatureMap<S>&)>;
using Scorer = ScorerT<double>;

// Query x gallery scores plus the per-query ground-truth gallery indices.
struct ScoreMatrix {
  std::vector<std::string> query_ids;
  std::vector<std::string> gallery_ids;
  std::vector<QueryAttributes> query_attributes;
  std::vector<std::vector<int>> truth;  // per query, indices into gallery_ids
  std::vector<double> scores;           // row-major Q x G

  int query_count() const { return static_cast<int>(query_ids.size()); }
  int gallery_count() const { return static_cast<int>(gallery_ids.size()); }
  double score(int q, int g) const {
    return scores[static_cast<std::size_t>(q) * gallery_ids.size() + g];
  }
  double& score(int q, int g) {
    return scores[static_cast<std::size_t>(q) * gallery_ids.size() + g];
  }
};

// Scores every (query, gallery) pair of a split. Every query must have at
// least one same-identity gallery item in the split; otherwise a data error
// names the offending query. An optional category restricts both sides.
template <typename S>
ScoreMatrix score_all(const Manifest& manifest, SplitTag split, FeatureStore<S>& store,
                      const ScorerT<S>& scorer, const std::string& category = "") {
  ScoreMatrix m;
  std::vector<const ManifestRecord*> queries, gallery;
  for (const auto* r : manifest.select(split, Role::kQuery))
    if (category.empty() || r->category == category) queries.push_back(r);
  for (const auto* r : manifest.select(split, Role::kGallery))
    if (category.empty() || r->category == category) gallery.push_back(r);
  if (queries.empty())
    throw DataError("no-queries", std::string("no query records in split ") + split_name(split));
  if (gallery.empty())
    throw DataError("no-gallery", std::string("no gallery records in split ") + split_name(split));

  m.query_ids.reserve(queries.size());
  for (const auto* q : queries) {
    m.query_ids.push_back(q->item_id);
    m.query_attributes.push_back(q->attributes);
  }
  for (const auto* g : gallery) m.gallery_ids.push_back(g->item_id);

  m.truth.resize(queries.size());
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    for (std::size_t gi = 0; gi < gallery.size(); ++gi)
      if (queries[qi]->identity == gallery[gi]->identity)
        m.truth[qi].push_back(static_cast<int>(gi));
    if (m.truth[qi].empty())
      throw DataError("query-without-truth", "query '" + queries[qi]->item_id +
                                                 "' has no same-identity gallery item");
  }

  m.scores.resize(queries.size() * gallery.size());
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    const FeatureMap<S>& qm = store.get(queries[qi]->item_id);
    for (std::size_t gi = 0; gi < gallery.size(); ++gi) {
      const FeatureMap<S>& gm = store.get(gallery[gi]->item_id);
      m.scores[qi * gallery.size() + gi] = scorer(qm, gm);
    }
  }
  return m;
}

// Cosine of the global (1x1 max-pooled) feature vectors. Zero-norm vectors
// score 0 so degenerate inputs stay deterministic.
double global_cosine(const FeatureMap<double>& x, const FeatureMap<double>& y);

double cosine_similarity(const Tensor<double>& a, const Tensor<double>& b);

// Greedy local baseline: sum over query windows of the best cosine against
// any gallery window at one pyramid scale (ties keep the first gallery
// window). scale_index < 0 selects the finest scale (most windows, later
// scales win ties).
double greedy_local(const FeatureMap<double>& x, const FeatureMap<double>& y,
                    const PyramidConfig& cfg, int scale_index = -1);

int finest_scale_index(const PyramidConfig& cfg);

// Fraction of queries whose ground truth intersects the k best-scoring
// gallery items. Ranking ties break by ascending gallery id. k larger than
// the gallery is clamped, recording a warning; k < 1 is an input error.
double topk_accuracy(const ScoreMatrix& scores, int k,
                     std::vector<std::string>* warnings = nullptr);

struct ProtocolReport {
  Protocol protocol = Protocol::kAll;
  int query_count = 0;
  std::vector<std::pair<int, double>> accuracy_at;  // (k, accuracy)
  std::vector<std::string> warnings;
};

// Filters queries by the protocol predicate and evaluates top-k on the rest.
// An empty selection is an error ("empty-protocol").
ProtocolReport evaluate_protocol(const ScoreMatrix& scores, Protocol protocol,
                                 const std::vector<int>& ks);

// Ranked gallery ids for one query (score descending, id ascending on ties).
std::vector<int> ranked_gallery(const ScoreMatrix& scores, int q);

}  // namespace grnet
