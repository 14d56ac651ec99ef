#pragma once

#include <cstring>
#include <filesystem>
#include <string>

#include "grnet/feature_io.hpp"
#include "grnet/reasoning.hpp"
#include "grnet/run_config.hpp"

namespace grnet {

// Checkpoint layout (little endian):
//   "GRCK" | u16 version | u8 precision (0=f32, 1=f64) | u8 reserved
//   u32 header length | header JSON
//   per parameter, in declared model order:
//     u16 name length | name | u8 rank | u32 dims... | raw scalars
// The header JSON carries the resolved run config, the data channel count
// and the seed, so the model structure can be rebuilt before reading blobs.
inline constexpr std::uint16_t kCheckpointVersion = 1;

struct CheckpointHeader {
  Dtype precision = Dtype::kF64;
  std::string config_json;  // resolved RunConfig
  int channels = 0;
};

Dtype peek_checkpoint_precision(const std::filesystem::path& file);
CheckpointHeader read_checkpoint_header(const std::filesystem::path& file);

namespace detail {
void save_checkpoint_raw(const std::filesystem::path& file, Dtype precision,
                         const std::string& header_json,
                         const std::vector<std::pair<std::string, const void*>>& params,
                         const std::vector<std::vector<int>>& shapes, std::size_t scalar_size);

struct RawParam {
  std::string name;
  std::vector<int> shape;
  std::vector<unsigned char> bytes;
};
std::pair<CheckpointHeader, std::vector<RawParam>> load_checkpoint_raw(
    const std::filesystem::path& file);

std::string make_header_json(const std::string& config_json, int channels);
}  // namespace detail

template <typename S>
constexpr Dtype dtype_of() {
  return sizeof(S) == 4 ? Dtype::kF32 : Dtype::kF64;
}

// Writes atomically (temp file then rename). Parameter order and names are
// the declared model order; the round trip is bit-exact for the stored
// precision.
template <typename S>
void save_checkpoint(const std::filesystem::path& file, ModelParams<S>& params,
                     const RunConfig& config, int channels) {
  std::vector<std::pair<std::string, const void*>> raw;
  std::vector<std::vector<int>> shapes;
  for (Parameter<S>* p : params.all()) {
    raw.emplace_back(p->name, static_cast<const void*>(p->value.data()));
    shapes.push_back(p->value.shape());
  }
  detail::save_checkpoint_raw(file, dtype_of<S>(),
                              detail::make_header_json(run_config_to_json(config), channels), raw,
                              shapes, sizeof(S));
}

template <typename S>
struct LoadedCheckpoint {
  RunConfig config;
  int channels = 0;
  ModelParams<S> params;

  ModelConfig model_config() const { return config.to_model_config(channels); }
};

// Loads a checkpoint whose stored precision matches S (callers peek the
// precision tag first and dispatch).
template <typename S>
LoadedCheckpoint<S> load_checkpoint(const std::filesystem::path& file) {
  auto [header, blobs] = detail::load_checkpoint_raw(file);
  if (header.precision != dtype_of<S>())
    throw DataError("checkpoint-precision",
                    "checkpoint stores " + std::string(dtype_name(header.precision)) +
                        ", loader instantiated for " + dtype_name(dtype_of<S>()));
  LoadedCheckpoint<S> out;
  out.config = run_config_from_json(header.config_json);
  out.channels = header.channels;

  // Rebuild the parameter structure, then fill values in declared order.
  out.params = init_params<S>(out.config.to_model_config(out.channels), /*seed=*/0);
  std::vector<Parameter<S>*> ps = out.params.all();
  if (ps.size() != blobs.size())
    throw DataError("checkpoint-structure",
                    "checkpoint has " + std::to_string(blobs.size()) + " parameters, model wants " +
                        std::to_string(ps.size()));
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const auto& blob = blobs[i];
    Parameter<S>& p = *ps[i];
    if (blob.name != p.name)
      throw DataError("checkpoint-structure", "parameter " + std::to_string(i) + " is '" +
                                                  blob.name + "', expected '" + p.name + "'");
    if (blob.shape != p.value.shape())
      throw DataError("checkpoint-structure",
                      "parameter '" + p.name + "' has shape " +
                          Tensor<S>::shape_string_of(blob.shape) + ", expected " +
                          p.value.shape_string());
    if (blob.bytes.size() != static_cast<std::size_t>(p.value.numel()) * sizeof(S))
      throw DataError("checkpoint-truncated", "parameter '" + p.name + "' payload size mismatch");
    std::memcpy(p.value.data(), blob.bytes.data(), blob.bytes.size());
    p.zero_grad();
  }
  return out;
}

}  // namespace grnet
