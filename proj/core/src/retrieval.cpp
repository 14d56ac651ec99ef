#include "grnet/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace grnet {

double cosine_similarity(const Tensor<double>& a, const Tensor<double>& b) {
  if (!a.same_shape(b))
    throw DimensionError("cosine: shape mismatch: " + a.shape_string() + " vs " +
                         b.shape_string());
  double dot = 0, na = 0, nb = 0;
  for (std::int64_t i = 0; i < a.numel(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double global_cosine(const FeatureMap<double>& x, const FeatureMap<double>& y) {
  return cosine_similarity(global_aggregate_values(x), global_aggregate_values(y));
}

int finest_scale_index(const PyramidConfig& cfg) {
  cfg.validate();
  int best = 0;
  for (int l = 1; l < cfg.scale_count(); ++l)
    if (cfg.windows_at(l) >= cfg.windows_at(best)) best = l;
  return best;
}

double greedy_local(const FeatureMap<double>& x, const FeatureMap<double>& y,
                    const PyramidConfig& cfg, int scale_index) {
  const int l = scale_index < 0 ? finest_scale_index(cfg) : scale_index;
  if (l >= cfg.scale_count())
    throw InputError("greedy_local: scale index " + std::to_string(l) + " out of range");
  PyramidConfig single{{cfg.scales[static_cast<std::size_t>(l)]}};
  const auto xs = extract_pyramid_values(x, single)[0];
  const auto ys = extract_pyramid_values(y, single)[0];
  double total = 0;
  for (const auto& xi : xs) {
    double best = cosine_similarity(xi, ys[0]);
    for (std::size_t j = 1; j < ys.size(); ++j) {
      const double s = cosine_similarity(xi, ys[j]);
      if (s > best) best = s;  // strict: first maximal gallery window wins
    }
    total += best;
  }
  return total;
}

std::vector<int> ranked_gallery(const ScoreMatrix& m, int q) {
  std::vector<int> order(static_cast<std::size_t>(m.gallery_count()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const double sa = m.score(q, a), sb = m.score(q, b);
    if (sa != sb) return sa > sb;
    return m.gallery_ids[static_cast<std::size_t>(a)] < m.gallery_ids[static_cast<std::size_t>(b)];
  });
  return order;
}

namespace {
double topk_over_queries(const ScoreMatrix& m, const std::vector<int>& queries, int k,
                         std::vector<std::string>* warnings) {
  if (k < 1) throw InputError("topk_accuracy: k must be >= 1, got " + std::to_string(k));
  int eff_k = k;
  if (eff_k > m.gallery_count()) {
    eff_k = m.gallery_count();
    if (warnings)
      warnings->push_back("k=" + std::to_string(k) + " clamped to gallery size " +
                          std::to_string(eff_k));
  }
  if (queries.empty()) return 0.0;
  int hits = 0;
  for (int q : queries) {
    const std::vector<int> order = ranked_gallery(m, q);
    const auto& truth = m.truth[static_cast<std::size_t>(q)];
    bool hit = false;
    for (int r = 0; r < eff_k && !hit; ++r)
      hit = std::find(truth.begin(), truth.end(), order[static_cast<std::size_t>(r)]) != truth.end();
    hits += hit ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(queries.size());
}
}  // namespace

double topk_accuracy(const ScoreMatrix& m, int k, std::vector<std::string>* warnings) {
  std::vector<int> all(static_cast<std::size_t>(m.query_count()));
  std::iota(all.begin(), all.end(), 0);
  return topk_over_queries(m, all, k, warnings);
}

ProtocolReport evaluate_protocol(const ScoreMatrix& m, Protocol protocol,
                                 const std::vector<int>& ks) {
  std::vector<int> selected;
  for (int q = 0; q < m.query_count(); ++q)
    if (protocol_selects(protocol, m.query_attributes[static_cast<std::size_t>(q)]))
      selected.push_back(q);
  if (selected.empty())
    throw DataError("empty-protocol", std::string("protocol ") + protocol_name(protocol) +
                                          " selects no queries");
  ProtocolReport report;
  report.protocol = protocol;
  report.query_count = static_cast<int>(selected.size());
  for (int k : ks)
    report.accuracy_at.emplace_back(k, topk_over_queries(m, selected, k, &report.warnings));
  return report;
}

}  // namespace grnet
