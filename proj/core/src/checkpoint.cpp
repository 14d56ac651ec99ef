#include "grnet/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "json.hpp"

namespace grnet {
namespace {

constexpr char kMagic[4] = {'G', 'R', 'C', 'K'};

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T take(std::ifstream& in, const std::filesystem::path& file) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError("checkpoint-truncated", "truncated checkpoint " + file.string());
  return v;
}

std::ifstream open_checkpoint(const std::filesystem::path& file, Dtype& precision) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("checkpoint-open", "cannot open checkpoint " + file.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError("checkpoint-magic", "bad magic in checkpoint " + file.string());
  const auto version = take<std::uint16_t>(in, file);
  if (version != kCheckpointVersion)
    throw DataError("checkpoint-version",
                    "unsupported checkpoint version " + std::to_string(version));
  const auto tag = take<std::uint8_t>(in, file);
  if (tag > 1) throw DataError("checkpoint-precision", "unknown precision tag");
  take<std::uint8_t>(in, file);  // reserved
  precision = static_cast<Dtype>(tag);
  return in;
}

}  // namespace

Dtype peek_checkpoint_precision(const std::filesystem::path& file) {
  Dtype precision;
  open_checkpoint(file, precision);
  return precision;
}

CheckpointHeader read_checkpoint_header(const std::filesystem::path& file) {
  CheckpointHeader header;
  std::ifstream in = open_checkpoint(file, header.precision);
  const auto len = take<std::uint32_t>(in, file);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw DataError("checkpoint-truncated", "truncated header in " + file.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("checkpoint-header", std::string("bad header JSON: ") + e.what());
  }
  header.config_json = j.at("run_config").dump();
  header.channels = j.at("channels").get<int>();
  return header;
}

namespace detail {

std::string make_header_json(const std::string& config_json, int channels) {
  nlohmann::json j;
  j["run_config"] = nlohmann::json::parse(config_json);
  j["channels"] = channels;
  return j.dump();
}

void save_checkpoint_raw(const std::filesystem::path& file, Dtype precision,
                         const std::string& header_json,
                         const std::vector<std::pair<std::string, const void*>>& params,
                         const std::vector<std::vector<int>>& shapes, std::size_t scalar_size) {
  const auto tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("checkpoint-write", "cannot write checkpoint " + tmp);
    out.write(kMagic, 4);
    put<std::uint16_t>(out, kCheckpointVersion);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(precision));
    put<std::uint8_t>(out, 0);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(header_json.size()));
    out.write(header_json.data(), static_cast<std::streamsize>(header_json.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& [name, data] = params[i];
      const auto& shape = shapes[i];
      put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      put<std::uint8_t>(out, static_cast<std::uint8_t>(shape.size()));
      std::size_t n = 1;
      for (int d : shape) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
        n *= static_cast<std::size_t>(d);
      }
      out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n * scalar_size));
    }
    if (!out) throw DataError("checkpoint-write", "write failed for " + tmp);
  }
  std::filesystem::rename(tmp, file);
}

std::pair<CheckpointHeader, std::vector<RawParam>> load_checkpoint_raw(
    const std::filesystem::path& file) {
  CheckpointHeader header = read_checkpoint_header(file);
  std::ifstream in = open_checkpoint(file, header.precision);
  const auto len = take<std::uint32_t>(in, file);
  in.seekg(static_cast<std::streamoff>(len), std::ios::cur);
  const std::size_t scalar_size = header.precision == Dtype::kF32 ? 4 : 8;

  std::vector<RawParam> blobs;
  while (true) {
    std::uint16_t name_len;
    in.read(reinterpret_cast<char*>(&name_len), sizeof(name_len));
    if (in.eof()) break;
    if (!in) throw DataError("checkpoint-truncated", "truncated checkpoint " + file.string());
    RawParam p;
    p.name.resize(name_len);
    in.read(p.name.data(), name_len);
    const auto rank = take<std::uint8_t>(in, file);
    std::size_t n = 1;
    for (int r = 0; r < rank; ++r) {
      const auto d = take<std::uint32_t>(in, file);
      p.shape.push_back(static_cast<int>(d));
      n *= d;
    }
    p.bytes.resize(n * scalar_size);
    in.read(reinterpret_cast<char*>(p.bytes.data()), static_cast<std::streamsize>(p.bytes.size()));
    if (!in) throw DataError("checkpoint-truncated", "truncated parameter '" + p.name + "'");
    blobs.push_back(std::move(p));
  }
  return {std::move(header), std::move(blobs)};
}

}  // namespace detail
}  // namespace grnet
