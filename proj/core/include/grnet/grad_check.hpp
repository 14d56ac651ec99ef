#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "grnet/errors.hpp"
#include "grnet/parameter.hpp"
#include "grnet/rng.hpp"

namespace grnet {

struct GradCheckOptions {
  double step = 1e-5;
  // Coordinates checked per parameter; 0 means all. Subsampling below 64 is
  // never honored (64 is the floor for large tensors).
  int max_coords_per_param = 64;
  std::uint64_t seed = 0x9dc0ffee;
};

struct GradCheckEntry {
  std::string param;
  double max_rel_err = 0.0;
  int coords_checked = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> params;
  double max_rel_err = 0.0;
  bool passes(double tol) const { return max_rel_err < tol; }
};

namespace detail {
inline double rel_err(double a, double b) {
  const double denom = std::max(std::fabs(a), std::fabs(b));
  const double diff = std::fabs(a - b);
  return denom < 1e-6 ? diff : diff / denom;
}
}  // namespace detail

// Compares reverse-mode gradients against central finite differences
// (f(x+h) - f(x-h)) / 2h per coordinate. The objective is invoked as
// f(with_grad): with_grad=false must only evaluate, with_grad=true must also
// run a backward pass that accumulates into the parameters' gradients.
//
// f must be deterministic; this is verified by evaluating twice up front.
template <typename S>
GradCheckReport grad_check(const std::function<S(bool)>& objective,
                           const std::vector<Parameter<S>*>& params,
                           const GradCheckOptions& opts = {}) {
  if (opts.step <= 0) throw InputError("grad_check: step must be positive");
  const S v1 = objective(false);
  const S v2 = objective(false);
  if (!(v1 == v2))
    throw NumericError("grad_check: objective is not deterministic (" +
                       std::to_string(static_cast<double>(v1)) + " vs " +
                       std::to_string(static_cast<double>(v2)) + ")");

  for (auto* p : params) p->zero_grad();
  objective(true);
  std::vector<Tensor<S>> analytic;
  analytic.reserve(params.size());
  for (auto* p : params) analytic.push_back(p->gradient);

  Rng rng(opts.seed);
  GradCheckReport report;
  const double h = opts.step;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter<S>& p = *params[pi];
    const std::int64_t n = p.value.numel();
    std::vector<std::int64_t> coords;
    const int limit = opts.max_coords_per_param;
    if (limit <= 0 || n <= limit) {
      coords.resize(static_cast<std::size_t>(n));
      for (std::int64_t i = 0; i < n; ++i) coords[static_cast<std::size_t>(i)] = i;
    } else {
      // Seeded sample without replacement (partial Fisher-Yates).
      std::vector<std::int64_t> all(static_cast<std::size_t>(n));
      for (std::int64_t i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = i;
      for (int k = 0; k < limit; ++k) {
        const std::size_t j = k + static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(n - k)));
        std::swap(all[static_cast<std::size_t>(k)], all[j]);
      }
      coords.assign(all.begin(), all.begin() + limit);
    }

    GradCheckEntry entry;
    entry.param = p.name;
    entry.coords_checked = static_cast<int>(coords.size());
    for (std::int64_t c : coords) {
      const S old = p.value[c];
      p.value[c] = static_cast<S>(static_cast<double>(old) + h);
      const double up = static_cast<double>(objective(false));
      p.value[c] = static_cast<S>(static_cast<double>(old) - h);
      const double down = static_cast<double>(objective(false));
      p.value[c] = old;
      const double numeric = (up - down) / (2.0 * h);
      const double err = detail::rel_err(static_cast<double>(analytic[pi][c]), numeric);
      if (err > entry.max_rel_err) entry.max_rel_err = err;
    }
    if (entry.max_rel_err > report.max_rel_err) report.max_rel_err = entry.max_rel_err;
    report.params.push_back(std::move(entry));
  }
  return report;
}

inline std::string format_grad_check(const GradCheckReport& r, double tol) {
  char line[128];
  std::snprintf(line, sizeof(line), "%s max_rel_err=%.6e", r.passes(tol) ? "PASS" : "FAIL",
                r.max_rel_err);
  std::string out(line);
  for (const auto& e : r.params) {
    std::snprintf(line, sizeof(line), "\n  %-24s coords=%-4d max_rel_err=%.6e", e.param.c_str(),
                  e.coords_checked, e.max_rel_err);
    out += line;
  }
  return out;
}

}  // namespace grnet
