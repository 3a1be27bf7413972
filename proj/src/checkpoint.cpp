#include "commentguard/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace commentguard::cnav {
namespace {

constexpr char kMagic[4] = {'C', 'N', 'A', 'V'};

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

template <typename T>
T get(std::istream& in) {
  unsigned char b[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(b), sizeof(T))) throw FormatError("checkpoint truncated");
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(b[i]) << (8 * i);
  return v;
}

}  // namespace

void write_checkpoint(const CnavModel<double>& model, std::ostream& out, const std::string& metadata) {
  const auto& cfg = model.config;
  out.write(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(cfg.d));
  put_u32(out, static_cast<std::uint32_t>(cfg.M));
  put_u32(out, static_cast<std::uint32_t>(cfg.attention_heads));
  const auto widths = cfg.hidden_widths();
  put_u32(out, static_cast<std::uint32_t>(widths.size()));
  for (auto w : widths) put_u32(out, static_cast<std::uint32_t>(w));
  put_u32(out, static_cast<std::uint32_t>(metadata.size()));
  out.write(metadata.data(), static_cast<std::streamsize>(metadata.size()));
  const auto flat = model.collect();
  put_u64(out, flat.size());
  for (double v : flat) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

void save_checkpoint(const CnavModel<double>& model, const std::filesystem::path& path, const std::string& metadata) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write checkpoint '" + path.string() + "'");
  write_checkpoint(model, out, metadata);
  if (!out) throw FormatError("write failed for checkpoint '" + path.string() + "'");
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw FormatError("checkpoint: magic mismatch");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  CnavConfig cfg;
  cfg.d = get<std::uint32_t>(in);
  cfg.M = get<std::uint32_t>(in);
  cfg.attention_heads = get<std::uint32_t>(in);
  const auto layers = get<std::uint32_t>(in);
  if (layers > 64) throw FormatError("checkpoint: implausible MLP depth");
  for (std::uint32_t l = 0; l < layers; ++l) cfg.mlp_hidden.push_back(get<std::uint32_t>(in));
  try {
    cfg.validate();
  } catch (const PreconditionError& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
  Checkpoint ck;
  const auto meta_len = get<std::uint32_t>(in);
  ck.metadata.resize(meta_len);
  if (meta_len > 0 && !in.read(ck.metadata.data(), meta_len)) throw FormatError("checkpoint truncated");

  ck.model = CnavModel<double>::zeros(cfg);
  const auto count = get<std::uint64_t>(in);
  if (count != ck.model.parameter_count()) throw FormatError("checkpoint: parameter count does not match header");
  ck.model.for_each_param([&in](const char*, auto& p) {
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      for (Eigen::Index c = 0; c < p.cols(); ++c) p(r, c) = std::bit_cast<float>(get<std::uint32_t>(in));
    }
  });
  if (!ck.model.all_finite()) throw FormatError("checkpoint: non-finite parameter");
  return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint '" + path.string() + "'");
  return read_checkpoint(in);
}

CnavModel<double> round_to_float(const CnavModel<double>& model) {
  return model.cast<float>().cast<double>();
}

}  // namespace commentguard::cnav
