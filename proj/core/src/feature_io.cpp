#include "grnet/feature_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "feature and checkpoint formats assume a little-endian host");

namespace grnet {
namespace {

constexpr char kMagic[4] = {'S', 'P', 'Y', 'R'};

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::ifstream& in, const std::filesystem::path& file) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError("feature-truncated", "truncated feature file " + file.string());
  return v;
}

std::ifstream open_and_check_header(const std::filesystem::path& file, FeatureFileInfo& info) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("feature-open", "cannot open feature file " + file.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError("feature-magic", "bad magic in feature file " + file.string());
  const auto version = take<std::uint16_t>(in, file);
  if (version != kFeatureFileVersion)
    throw DataError("feature-version", "unsupported feature file version " +
                                           std::to_string(version) + " in " + file.string());
  const auto dtype = take<std::uint8_t>(in, file);
  if (dtype > 1)
    throw DataError("feature-dtype", "unknown dtype tag " + std::to_string(dtype));
  take<std::uint8_t>(in, file);  // reserved
  info.dtype = static_cast<Dtype>(dtype);
  info.channels = static_cast<int>(take<std::uint32_t>(in, file));
  info.height = static_cast<int>(take<std::uint32_t>(in, file));
  info.width = static_cast<int>(take<std::uint32_t>(in, file));
  if (info.channels <= 0 || info.height <= 0 || info.width <= 0)
    throw DataError("feature-dims", "non-positive dims in feature file " + file.string());
  return in;
}

template <typename S>
void write_impl(const std::filesystem::path& file, int c, int h, int w, const S* data,
                std::int64_t n, Dtype as) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("feature-write", "cannot write feature file " + file.string());
  out.write(kMagic, 4);
  put<std::uint16_t>(out, kFeatureFileVersion);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(as));
  put<std::uint8_t>(out, 0);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(h));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(w));
  if (as == Dtype::kF32) {
    for (std::int64_t i = 0; i < n; ++i) put<float>(out, static_cast<float>(data[i]));
  } else {
    for (std::int64_t i = 0; i < n; ++i) put<double>(out, static_cast<double>(data[i]));
  }
  if (!out) throw DataError("feature-write", "write failed for " + file.string());
}

}  // namespace

RawFeatureFile read_feature_raw(const std::filesystem::path& file) {
  RawFeatureFile raw;
  std::ifstream in = open_and_check_header(file, raw.info);
  const std::size_t n = static_cast<std::size_t>(raw.info.channels) * raw.info.height * raw.info.width;
  if (raw.info.dtype == Dtype::kF32) {
    raw.f32.resize(n);
    in.read(reinterpret_cast<char*>(raw.f32.data()), static_cast<std::streamsize>(n * sizeof(float)));
  } else {
    raw.f64.resize(n);
    in.read(reinterpret_cast<char*>(raw.f64.data()), static_cast<std::streamsize>(n * sizeof(double)));
  }
  if (!in) throw DataError("feature-truncated", "truncated payload in " + file.string());
  return raw;
}

FeatureFileInfo peek_feature_file(const std::filesystem::path& file) {
  FeatureFileInfo info;
  open_and_check_header(file, info);
  return info;
}

void write_feature_file(const std::filesystem::path& file, const FeatureMap<double>& fm, Dtype as) {
  write_impl(file, fm.channels, fm.height, fm.width, fm.data.data(), fm.data.numel(), as);
}

void write_feature_file(const std::filesystem::path& file, const FeatureMap<float>& fm, Dtype as) {
  write_impl(file, fm.channels, fm.height, fm.width, fm.data.data(), fm.data.numel(), as);
}

}  // namespace grnet
