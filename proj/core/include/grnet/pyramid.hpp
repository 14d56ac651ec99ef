#pragma once

#include <memory>
#include <string>
#include <vector>

#include "grnet/tape.hpp"
#include "grnet/tensor.hpp"

namespace grnet {

// Dense C x H x W activation grid. The library never produces these from
// images; they arrive from feature files or the synthetic generator.
template <typename S>
struct FeatureMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  Tensor<S> data;  // shape [C, H, W] row-major

  FeatureMap() = default;
  FeatureMap(int c, int h, int w)
      : channels(c), height(h), width(w), data(Tensor<S>({c, h, w})) {}
  FeatureMap(int c, int h, int w, Tensor<S> d)
      : channels(c), height(h), width(w), data(std::move(d)) {}

  S& at(int c, int h, int w) {
    return data[(static_cast<std::int64_t>(c) * height + h) * width + w];
  }
  S at(int c, int h, int w) const {
    return data[(static_cast<std::int64_t>(c) * height + h) * width + w];
  }

  template <typename T>
  FeatureMap<T> cast() const {
    FeatureMap<T> out(channels, height, width);
    for (std::int64_t i = 0; i < data.numel(); ++i)
      out.data[i] = static_cast<T>(data[i]);
    return out;
  }
};

struct PyramidScale {
  int rows = 1;
  int cols = 1;
  bool operator==(const PyramidScale&) const = default;
};

// Ordered list of window grids, coarsest first. The first scale must be the
// 1x1 global window whenever the global node feeds a classifier or baseline.
struct PyramidConfig {
  std::vector<PyramidScale> scales;

  static PyramidConfig default7() {
    return PyramidConfig{{{1, 1}, {1, 2}, {2, 1}, {2, 2}, {1, 3}, {3, 1}, {3, 3}}};
  }

  int scale_count() const { return static_cast<int>(scales.size()); }
  int windows_at(int l) const { return scales[static_cast<std::size_t>(l)].rows * scales[static_cast<std::size_t>(l)].cols; }
  int total_windows() const {
    int n = 0;
    for (const auto& s : scales) n += s.rows * s.cols;
    return n;
  }
  int total_pairs() const {
    int n = 0;
    for (const auto& s : scales) {
      const int w = s.rows * s.cols;
      n += w * w;
    }
    return n;
  }

  bool operator==(const PyramidConfig&) const = default;

  void validate() const {
    if (scales.empty()) throw ConfigError("pyramid config has no scales");
    for (const auto& s : scales)
      if (s.rows < 1 || s.cols < 1)
        throw ConfigError("pyramid scale " + std::to_string(s.rows) + "x" +
                          std::to_string(s.cols) + " is invalid");
  }
};

// Half-open pixel range of window (r,c) in an R x C grid over an H x W map,
// using floor(k*H/R) boundaries. Nonempty whenever H >= R and W >= C.
struct WindowRect {
  int r0, r1, c0, c1;
};

inline WindowRect window_rect(int height, int width, int grid_rows, int grid_cols, int r, int c) {
  WindowRect w;
  w.r0 = static_cast<int>((static_cast<std::int64_t>(r) * height) / grid_rows);
  w.r1 = static_cast<int>((static_cast<std::int64_t>(r + 1) * height) / grid_rows);
  w.c0 = static_cast<int>((static_cast<std::int64_t>(c) * width) / grid_cols);
  w.c1 = static_cast<int>((static_cast<std::int64_t>(c + 1) * width) / grid_cols);
  return w;
}

template <typename S>
void check_map_fits(const FeatureMap<S>& fm, const PyramidConfig& cfg) {
  cfg.validate();
  for (const auto& s : cfg.scales)
    if (s.rows > fm.height || s.cols > fm.width)
      throw DimensionError("pyramid scale " + std::to_string(s.rows) + "x" +
                           std::to_string(s.cols) + " larger than map " +
                           std::to_string(fm.height) + "x" + std::to_string(fm.width));
}

// Flat data indices of one window, one index set per channel, channels in
// order and pixels row-major within each set.
inline std::vector<std::vector<std::int64_t>> window_index_sets(int channels, int height,
                                                                int width, const WindowRect& w) {
  std::vector<std::vector<std::int64_t>> sets(static_cast<std::size_t>(channels));
  for (int c = 0; c < channels; ++c) {
    auto& set = sets[static_cast<std::size_t>(c)];
    set.reserve(static_cast<std::size_t>((w.r1 - w.r0) * (w.c1 - w.c0)));
    for (int h = w.r0; h < w.r1; ++h)
      for (int x = w.c0; x < w.c1; ++x)
        set.push_back((static_cast<std::int64_t>(c) * height + h) * width + x);
  }
  return sets;
}

// Per-scale lists of per-window feature vectors living on a tape. Vectors are
// indexed row-major by window position within each scale.
template <typename S>
struct PyramidFeatures {
  PyramidConfig config;
  int channels = 0;
  std::vector<std::vector<Var<S>>> per_scale;

  int total_vectors() const {
    int n = 0;
    for (const auto& s : per_scale) n += static_cast<int>(s.size());
    return n;
  }
};

// Max-pools the map over every window of every scale, differentiably. The
// subgradient of each pooled entry goes to the first maximal pixel in
// row-major order.
template <typename S>
PyramidFeatures<S> extract_pyramid(Tape<S>& tape, const FeatureMap<S>& fm,
                                   const PyramidConfig& cfg) {
  check_map_fits(fm, cfg);
  Var<S> map = tape.constant(fm.data);
  return extract_pyramid(tape, map, fm.channels, fm.height, fm.width, cfg);
}

// Same, but over a map already on the tape (shape [C,H,W]).
template <typename S>
PyramidFeatures<S> extract_pyramid(Tape<S>& tape, Var<S> map, int channels, int height, int width,
                                   const PyramidConfig& cfg) {
  PyramidFeatures<S> out;
  out.config = cfg;
  out.channels = channels;
  out.per_scale.resize(cfg.scales.size());
  for (std::size_t l = 0; l < cfg.scales.size(); ++l) {
    const auto& s = cfg.scales[l];
    if (s.rows > height || s.cols > width)
      throw DimensionError("pyramid scale " + std::to_string(s.rows) + "x" +
                           std::to_string(s.cols) + " larger than map " +
                           std::to_string(height) + "x" + std::to_string(width));
    auto& vecs = out.per_scale[l];
    vecs.reserve(static_cast<std::size_t>(s.rows * s.cols));
    for (int r = 0; r < s.rows; ++r)
      for (int c = 0; c < s.cols; ++c) {
        auto sets = std::make_shared<const std::vector<std::vector<std::int64_t>>>(
            window_index_sets(channels, height, width, window_rect(height, width, s.rows, s.cols, r, c)));
        vecs.push_back(tape.window_max(map, std::move(sets)));
      }
  }
  return out;
}

// Global aggregation A(.): the 1x1 window, i.e. the per-channel max over the
// whole map.
template <typename S>
Var<S> global_aggregate(Tape<S>& tape, const FeatureMap<S>& fm) {
  PyramidConfig cfg{{{1, 1}}};
  return extract_pyramid(tape, fm, cfg).per_scale[0][0];
}

// Plain-value pooling used by the baselines; independent of the tape path.
template <typename S>
std::vector<std::vector<Tensor<S>>> extract_pyramid_values(const FeatureMap<S>& fm,
                                                           const PyramidConfig& cfg) {
  check_map_fits(fm, cfg);
  std::vector<std::vector<Tensor<S>>> out(cfg.scales.size());
  for (std::size_t l = 0; l < cfg.scales.size(); ++l) {
    const auto& s = cfg.scales[l];
    for (int r = 0; r < s.rows; ++r)
      for (int c = 0; c < s.cols; ++c) {
        const WindowRect w = window_rect(fm.height, fm.width, s.rows, s.cols, r, c);
        Tensor<S> v({fm.channels});
        for (int ch = 0; ch < fm.channels; ++ch) {
          S best = fm.at(ch, w.r0, w.c0);
          for (int h = w.r0; h < w.r1; ++h)
            for (int x = w.c0; x < w.c1; ++x)
              if (fm.at(ch, h, x) > best) best = fm.at(ch, h, x);
          v[ch] = best;
        }
        out[l].push_back(std::move(v));
      }
  }
  return out;
}

template <typename S>
Tensor<S> global_aggregate_values(const FeatureMap<S>& fm) {
  Tensor<S> v({fm.channels});
  for (int ch = 0; ch < fm.channels; ++ch) {
    S best = fm.at(ch, 0, 0);
    for (int h = 0; h < fm.height; ++h)
      for (int w = 0; w < fm.width; ++w)
        if (fm.at(ch, h, w) > best) best = fm.at(ch, h, w);
    v[ch] = best;
  }
  return v;
}

}  // namespace grnet
