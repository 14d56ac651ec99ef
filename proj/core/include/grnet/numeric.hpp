#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace grnet {

// Exactly rounded running sum of doubles (Shewchuk-style nonoverlapping
// expansion, same scheme as Python's math.fsum). The result depends only on
// the multiset of addends, not on the order they arrive in. Graph
// propagation and softmax denominators sum over graph nodes; relabeling the
// nodes (e.g. swapping query and gallery transposes every same-scale block)
// permutes those addends, and exact accumulation is what makes match scores
// bit-identical under the swap.
//
// The number of nonoverlapping partials is bounded by the double exponent
// range (~2098/53 + slack), so a fixed 64-slot buffer always suffices.
class ExactAccumulator {
 public:
  void add(double x) {
    std::size_t out = 0;
    for (std::size_t j = 0; j < count_; ++j) {
      double y = partials_[j];
      if (std::fabs(x) < std::fabs(y)) {
        double t = x;
        x = y;
        y = t;
      }
      double hi = x + y;
      double lo = y - (hi - x);
      if (lo != 0.0) partials_[out++] = lo;
      x = hi;
    }
    partials_[out] = x;
    count_ = out + 1;
  }

  // Correctly rounded value of the exact sum, with the half-ulp correction
  // for the case where the discarded tail flips a round-to-even tie.
  double round() const {
    if (count_ == 0) return 0.0;
    std::size_t n = count_;
    double hi = partials_[--n];
    double lo = 0.0;
    while (n > 0) {
      double x = hi;
      double y = partials_[--n];
      hi = x + y;
      double yr = hi - x;
      lo = y - yr;
      if (lo != 0.0) break;
    }
    if (n > 0 && ((lo < 0.0 && partials_[n - 1] < 0.0) ||
                  (lo > 0.0 && partials_[n - 1] > 0.0))) {
      double y = lo * 2.0;
      double x = hi + y;
      double yr = x - hi;
      if (y == yr) hi = x;
    }
    return hi;
  }

  void reset() { count_ = 0; }

 private:
  std::array<double, 64> partials_{};
  std::size_t count_ = 0;
};

inline double exact_sum(const double* xs, std::size_t n) {
  ExactAccumulator acc;
  for (std::size_t i = 0; i < n; ++i) acc.add(xs[i]);
  return acc.round();
}

// Float inputs are accumulated exactly in double and rounded once at the
// end; still order-invariant because the double sum is.
inline float exact_sum(const float* xs, std::size_t n) {
  ExactAccumulator acc;
  for (std::size_t i = 0; i < n; ++i) acc.add(static_cast<double>(xs[i]));
  return static_cast<float>(acc.round());
}

}  // namespace grnet
