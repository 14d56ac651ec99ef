#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "grnet/errors.hpp"
#include "grnet/manifest.hpp"
#include "grnet/pyramid.hpp"

namespace grnet {

enum class Dtype : std::uint8_t { kF32 = 0, kF64 = 1 };

inline const char* dtype_name(Dtype d) { return d == Dtype::kF32 ? "f32" : "f64"; }
inline Dtype parse_dtype(const std::string& s) {
  if (s == "f32") return Dtype::kF32;
  if (s == "f64") return Dtype::kF64;
  throw InputError("unknown precision '" + s + "' (expected f32 or f64)");
}

struct FeatureFileInfo {
  Dtype dtype = Dtype::kF32;
  int channels = 0, height = 0, width = 0;
};

// Binary layout (little endian):
//   "SPYR" | u16 version | u8 dtype (0=f32, 1=f64) | u8 reserved
//   u32 channels | u32 height | u32 width | payload, row-major C*H*W scalars
inline constexpr std::uint16_t kFeatureFileVersion = 1;

struct RawFeatureFile {
  FeatureFileInfo info;
  std::vector<float> f32;    // populated when dtype == kF32
  std::vector<double> f64;   // populated when dtype == kF64
};

RawFeatureFile read_feature_raw(const std::filesystem::path& file);
FeatureFileInfo peek_feature_file(const std::filesystem::path& file);

void write_feature_file(const std::filesystem::path& file, const FeatureMap<double>& fm, Dtype as);
void write_feature_file(const std::filesystem::path& file, const FeatureMap<float>& fm, Dtype as);

// Reads a feature file, converting the stored scalars to S. Reading back at
// the declared dtype is bit-exact.
template <typename S>
FeatureMap<S> read_feature_file_as(const std::filesystem::path& file) {
  RawFeatureFile raw = read_feature_raw(file);
  FeatureMap<S> fm(raw.info.channels, raw.info.height, raw.info.width);
  if (raw.info.dtype == Dtype::kF32) {
    for (std::size_t i = 0; i < raw.f32.size(); ++i)
      fm.data[static_cast<std::int64_t>(i)] = static_cast<S>(raw.f32[i]);
  } else {
    for (std::size_t i = 0; i < raw.f64.size(); ++i)
      fm.data[static_cast<std::int64_t>(i)] = static_cast<S>(raw.f64[i]);
  }
  return fm;
}

// In-memory cache of feature maps keyed by item id. The whole synthetic
// corpus fits comfortably; real corpora would want eviction.
template <typename S>
class FeatureStore {
 public:
  FeatureStore(const Manifest& manifest, std::filesystem::path data_root)
      : manifest_(&manifest), root_(std::move(data_root)) {}

  const FeatureMap<S>& get(const std::string& item_id) {
    auto it = cache_.find(item_id);
    if (it != cache_.end()) return it->second;
    const ManifestRecord& rec = manifest_->by_id(item_id);
    const auto path = root_ / rec.path;
    if (!std::filesystem::exists(path))
      throw DataError("missing-feature",
                      "item '" + item_id + "': feature file not found: " + path.string());
    auto [pos, inserted] = cache_.emplace(item_id, read_feature_file_as<S>(path));
    return pos->second;
  }

  const std::filesystem::path& root() const { return root_; }

 private:
  const Manifest* manifest_;
  std::filesystem::path root_;
  std::map<std::string, FeatureMap<S>> cache_;
};

}  // namespace grnet
