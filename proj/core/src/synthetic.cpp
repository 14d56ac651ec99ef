#include "grnet/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace grnet {

std::string synthetic_spec_to_json(const SyntheticSpec& s) {
  nlohmann::json j;
  j["train_identities"] = s.train_identities;
  j["val_identities"] = s.val_identities;
  j["test_identities"] = s.test_identities;
  j["distractors"] = s.distractors;
  j["queries_per_test_identity"] = s.queries_per_test_identity;
  j["channels"] = s.channels;
  j["height"] = s.height;
  j["width"] = s.width;
  j["signature_h"] = s.signature_h;
  j["signature_w"] = s.signature_w;
  j["signature_lo"] = s.signature_lo;
  j["signature_hi"] = s.signature_hi;
  j["background"] = s.background;
  j["noise"] = s.noise;
  j["style_channels"] = s.style_channels;
  j["style_factor"] = s.style_factor;
  j["clutter_patches"] = s.clutter_patches;
  j["clutter_h"] = s.clutter_h;
  j["clutter_w"] = s.clutter_w;
  j["occlusion_rate"] = s.occlusion_rate;
  j["cropping_rate"] = s.cropping_rate;
  j["view_rate"] = s.view_rate;
  j["occlusion_fraction"] = s.occlusion_fraction;
  j["cropping_fraction"] = s.cropping_fraction;
  j["dtype"] = dtype_name(s.dtype);
  j["seed"] = s.seed;
  return j.dump();
}

void SyntheticSpec::validate() const {
  if (train_identities < 0 || val_identities < 0 || test_identities < 0 || distractors < 0)
    throw ConfigError("synthetic-geometry", "identity counts must be non-negative");
  if (train_identities + val_identities + test_identities == 0)
    throw ConfigError("synthetic-geometry", "no identities requested");
  if (channels < 1) throw ConfigError("synthetic-geometry", "channels must be >= 1");
  if (height < 1 || width < 1) throw ConfigError("synthetic-geometry", "map must be non-empty");
  if (signature_h < 1 || signature_w < 1 || signature_h > height || signature_w > width)
    throw ConfigError("synthetic-geometry",
                      "signature window " + std::to_string(signature_h) + "x" +
                          std::to_string(signature_w) + " does not fit a " +
                          std::to_string(height) + "x" + std::to_string(width) + " map");
  if (queries_per_test_identity < 1)
    throw ConfigError("synthetic-geometry", "queries per test identity must be >= 1");
  if (signature_hi < signature_lo)
    throw ConfigError("synthetic-geometry", "signature range is inverted");
  if (style_channels < 0 || style_channels > channels)
    throw ConfigError("synthetic-geometry", "style channels must lie in [0, channels]");
  if (noise < 0 || background < 0 || style_factor < 0)
    throw ConfigError("synthetic-geometry", "noise, background and style factor must be non-negative");
  for (double r : {occlusion_rate, cropping_rate, view_rate})
    if (r < 0 || r > 1) throw ConfigError("synthetic-geometry", "rates must be in [0,1]");
}

namespace {

struct Rect {
  int r0 = 0, c0 = 0, h = 0, w = 0;
  bool overlaps(const Rect& o) const {
    return r0 < o.r0 + o.h && o.r0 < r0 + h && c0 < o.c0 + o.w && o.c0 < c0 + w;
  }
};

// Signature placement: a uniformly chosen cell of the 2x2 anchor grid with a
// uniform offset inside it, so the patch always lies within one coarse
// window; falls back to free placement when the patch outgrows the cells.
// keep_out is the region clutter must avoid (the anchor cell when anchored).
struct Placement {
  Rect sig;
  Rect keep_out;
};

Placement place_signature(const SyntheticSpec& spec, Rng& rng) {
  const int h2 = spec.height / 2, w2 = spec.width / 2;
  Placement p;
  p.sig = Rect{0, 0, spec.signature_h, spec.signature_w};
  if (spec.signature_h <= h2 && spec.signature_w <= w2) {
    const int q = rng.below_int(4);
    const int qr = q / 2, qc = q % 2;
    const int row0 = qr == 0 ? 0 : h2;
    const int row1 = qr == 0 ? h2 : spec.height;
    const int col0 = qc == 0 ? 0 : w2;
    const int col1 = qc == 0 ? w2 : spec.width;
    p.sig.r0 = row0 + rng.below_int(row1 - row0 - spec.signature_h + 1);
    p.sig.c0 = col0 + rng.below_int(col1 - col0 - spec.signature_w + 1);
    p.keep_out = Rect{row0, col0, row1 - row0, col1 - col0};
  } else {
    p.sig.r0 = rng.below_int(spec.height - spec.signature_h + 1);
    p.sig.c0 = rng.below_int(spec.width - spec.signature_w + 1);
    p.keep_out = p.sig;
  }
  return p;
}

// Patch content: per-channel amplitude U[lo, hi] (the fingerprint) times a
// per-pixel field in [0.85, 1]. The per-channel window max of a fully
// contained patch recovers the amplitude pattern almost exactly.
std::vector<double> draw_patch(const SyntheticSpec& spec, int h, int w, Rng& rng) {
  std::vector<double> v(static_cast<std::size_t>(spec.channels) * h * w);
  for (int c = 0; c < spec.channels; ++c) {
    const double amp = rng.uniform(spec.signature_lo, spec.signature_hi);
    for (int i = 0; i < h * w; ++i)
      v[static_cast<std::size_t>(c) * h * w + i] = amp * rng.uniform(0.85, 1.0);
  }
  return v;
}

void paste_patch(FeatureMap<double>& fm, const Rect& at, const std::vector<double>& content) {
  for (int c = 0; c < fm.channels; ++c)
    for (int i = 0; i < at.h; ++i)
      for (int j = 0; j < at.w; ++j)
        fm.at(c, at.r0 + i, at.c0 + j) =
            content[(static_cast<std::size_t>(c) * at.h + i) * at.w + j];
}

// Map assembly: background, clutter (outside the signature's anchor area),
// the signature itself, then the noise model (per-pixel jitter plus the
// per-image style-channel offset). The background has a per-image
// per-channel base level, the analog of each photo having its own backdrop;
// without it, max-pooled background windows would collapse to the same
// order statistic in every image and spuriously match across identities.
FeatureMap<double> base_map(const SyntheticSpec& spec, const Rect& sig, const Rect& keep_out,
                            const std::vector<double>& signature, Rng& rng) {
  FeatureMap<double> fm(spec.channels, spec.height, spec.width);
  for (int c = 0; c < spec.channels; ++c) {
    const double base = spec.background * rng.uniform(0.2, 1.0);
    for (int h = 0; h < spec.height; ++h)
      for (int w = 0; w < spec.width; ++w) fm.at(c, h, w) = base * rng.uniform(0.85, 1.0);
  }
  for (int p = 0; p < spec.clutter_patches; ++p) {
    const int ch = std::min(spec.clutter_h, spec.height);
    const int cw = std::min(spec.clutter_w, spec.width);
    Rect r{0, 0, ch, cw};
    bool placed = false;
    for (int attempt = 0; attempt < 20 && !placed; ++attempt) {
      r.r0 = rng.below_int(spec.height - ch + 1);
      r.c0 = rng.below_int(spec.width - cw + 1);
      placed = !r.overlaps(keep_out);
    }
    if (placed) paste_patch(fm, r, draw_patch(spec, ch, cw, rng));
  }
  paste_patch(fm, sig, signature);
  if (spec.noise > 0) {
    for (std::int64_t i = 0; i < fm.data.numel(); ++i) fm.data[i] += rng.normal(0.0, spec.noise);
    const double style_sigma = spec.style_factor * spec.noise;
    for (int c = spec.channels - spec.style_channels; c < spec.channels; ++c) {
      const double offset = rng.normal(0.0, style_sigma);
      for (int h = 0; h < spec.height; ++h)
        for (int w = 0; w < spec.width; ++w) fm.at(c, h, w) += offset;
    }
  }
  return fm;
}

void apply_view(FeatureMap<double>& fm, View view) {
  if (view == View::kFront) return;
  const int shift = view == View::kSide ? 1 : 2;
  const double atten = view == View::kSide ? 0.8 : 0.65;
  FeatureMap<double> rotated(fm.channels, fm.height, fm.width);
  for (int c = 0; c < fm.channels; ++c) {
    const int src = (c + shift) % fm.channels;
    for (int h = 0; h < fm.height; ++h)
      for (int w = 0; w < fm.width; ++w) rotated.at(c, h, w) = atten * fm.at(src, h, w);
  }
  fm = std::move(rotated);
}

void apply_occlusion(FeatureMap<double>& fm, const SyntheticSpec& spec, Rng& rng) {
  const int oh = std::max(1, std::min(fm.height, static_cast<int>(std::lround(
                                                     spec.occlusion_fraction * fm.height))));
  const int ow = std::max(1, std::min(fm.width, static_cast<int>(std::lround(
                                                    spec.occlusion_fraction * fm.width))));
  const int r0 = rng.below_int(fm.height - oh + 1);
  const int c0 = rng.below_int(fm.width - ow + 1);
  for (int c = 0; c < fm.channels; ++c)
    for (int i = 0; i < oh; ++i)
      for (int j = 0; j < ow; ++j)
        fm.at(c, r0 + i, c0 + j) = rng.uniform(0.0, spec.signature_hi);
}

void apply_cropping(FeatureMap<double>& fm, const SyntheticSpec& spec, Rng& rng) {
  const int side = rng.below_int(4);  // 0 top, 1 bottom, 2 left, 3 right
  const int band_h = std::max(1, static_cast<int>(std::lround(spec.cropping_fraction * fm.height)));
  const int band_w = std::max(1, static_cast<int>(std::lround(spec.cropping_fraction * fm.width)));
  for (int c = 0; c < fm.channels; ++c)
    for (int h = 0; h < fm.height; ++h)
      for (int w = 0; w < fm.width; ++w) {
        const bool zero = (side == 0 && h < band_h) || (side == 1 && h >= fm.height - band_h) ||
                          (side == 2 && w < band_w) || (side == 3 && w >= fm.width - band_w);
        if (zero) fm.at(c, h, w) = 0.0;
      }
}

}  // namespace

QueryAttributes sample_query_attributes(const SyntheticSpec& spec, Rng& rng) {
  QueryAttributes a;
  if (rng.uniform01() < spec.view_rate)
    a.view = rng.uniform01() < 0.5 ? View::kSide : View::kBack;
  a.occluded = rng.uniform01() < spec.occlusion_rate;
  a.cropped = rng.uniform01() < spec.cropping_rate;
  return a;
}

SyntheticResult generate_synthetic(const SyntheticSpec& spec,
                                   const std::filesystem::path& out_dir,
                                   const std::string& config_echo) {
  spec.validate();
  std::filesystem::create_directories(out_dir / "features");
  Rng rng(spec.seed);
  SyntheticResult result;

  char buf[64];
  int identity_counter = 0;
  auto next_identity = [&identity_counter, &buf]() {
    std::snprintf(buf, sizeof(buf), "id%04d", identity_counter++);
    return std::string(buf);
  };

  auto write_map = [&](const std::string& item_id, const FeatureMap<double>& fm) {
    const std::string rel = "features/" + item_id + ".spyr";
    write_feature_file(out_dir / rel, fm, spec.dtype);
    ++result.files_written;
    return rel;
  };

  auto make_record = [](std::string item, Role role, std::string identity, std::string path,
                        QueryAttributes attrs, SplitTag split) {
    ManifestRecord r;
    r.item_id = std::move(item);
    r.role = role;
    r.identity = std::move(identity);
    r.path = std::move(path);
    r.attributes = attrs;
    r.split = split;
    return r;
  };

  auto emit_identity = [&](SplitTag split, int query_count) {
    const std::string identity = next_identity();
    const auto signature = draw_patch(spec, spec.signature_h, spec.signature_w, rng);
    for (int q = 0; q < query_count; ++q) {
      const std::string item = "q-" + identity + "-" + std::to_string(q);
      const Placement at = place_signature(spec, rng);
      FeatureMap<double> fm = base_map(spec, at.sig, at.keep_out, signature, rng);
      const QueryAttributes attrs = sample_query_attributes(spec, rng);
      apply_view(fm, attrs.view);
      if (attrs.occluded) apply_occlusion(fm, spec, rng);
      if (attrs.cropped) apply_cropping(fm, spec, rng);
      result.signature_at[item] = {at.sig.r0, at.sig.c0};
      result.manifest.add(make_record(item, Role::kQuery, identity, write_map(item, fm), attrs, split));
    }
    const std::string item = "g-" + identity;
    const Placement at = place_signature(spec, rng);
    FeatureMap<double> fm = base_map(spec, at.sig, at.keep_out, signature, rng);
    result.signature_at[item] = {at.sig.r0, at.sig.c0};
    result.manifest.add(
        make_record(item, Role::kGallery, identity, write_map(item, fm), QueryAttributes{}, split));
  };

  for (int i = 0; i < spec.train_identities; ++i) emit_identity(SplitTag::kTrain, 1);
  for (int i = 0; i < spec.val_identities; ++i) emit_identity(SplitTag::kVal, 1);
  for (int i = 0; i < spec.test_identities; ++i)
    emit_identity(SplitTag::kTest, spec.queries_per_test_identity);

  // Distractors: gallery-only items with fresh signatures in the test split.
  for (int i = 0; i < spec.distractors; ++i) {
    std::snprintf(buf, sizeof(buf), "dx%04d", i);
    const std::string identity(buf);
    const std::string item = "g-" + identity;
    const auto signature = draw_patch(spec, spec.signature_h, spec.signature_w, rng);
    const Placement at = place_signature(spec, rng);
    FeatureMap<double> fm = base_map(spec, at.sig, at.keep_out, signature, rng);
    result.signature_at[item] = {at.sig.r0, at.sig.c0};
    result.manifest.add(make_record(item, Role::kGallery, identity, write_map(item, fm),
                                    QueryAttributes{}, SplitTag::kTest));
  }

  std::vector<std::string> header;
  if (!config_echo.empty()) header.push_back("config " + config_echo);
  header.push_back("seed " + std::to_string(spec.seed));
  result.manifest.save(out_dir / "manifest.txt", header);
  return result;
}

}  // namespace grnet
