#include "commentguard/encoder.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "commentguard/rng.hpp"

namespace commentguard::encoder {
namespace {

constexpr char kMagic[4] = {'C', 'E', 'M', 'B'};

bool is_separator(unsigned char ch) { return ch < 0x80 && (std::isspace(ch) || std::ispunct(ch)); }

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_unsigned_v<T>);
  char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<char>((value >> (8 * i)) & 0xff);
  out.write(buf, sizeof(T));
}

template <typename T>
T get_le(std::istream& in, const char* what) {
  static_assert(std::is_unsigned_v<T>);
  unsigned char buf[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) {
    throw FormatError(std::string("embedding file truncated while reading ") + what);
  }
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : text) {
    const auto ch = static_cast<unsigned char>(c);
    if (is_separator(ch)) {
      if (!cur.empty()) tokens.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch < 0x80 ? static_cast<char>(std::tolower(ch)) : c);
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

TokenSequence hash_featurize(std::string_view text, std::size_t d, std::uint64_t seed, std::size_t max_tokens) {
  if (d < 2) throw PreconditionError("hash_featurize: d must be at least 2");
  if (max_tokens == 0) throw PreconditionError("hash_featurize: max_tokens must be positive");
  auto tokens = tokenize(text);
  if (tokens.empty()) throw PreconditionError("hash_featurize: empty text");
  if (tokens.size() > max_tokens) tokens.resize(max_tokens);

  const double mag = 1.0 / std::sqrt(static_cast<double>(d));
  TokenSequence seq;
  seq.vectors.resize(static_cast<Eigen::Index>(tokens.size()), static_cast<Eigen::Index>(d));
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const std::uint64_t key = fnv1a64(tokens[t]);
    std::uint64_t bits = 0;
    for (std::size_t k = 0; k < d; ++k) {
      if (k % 64 == 0) bits = splitmix64(key ^ derive_seed(seed, "sign", k / 64));
      seq.vectors(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k)) = (bits & 1) ? mag : -mag;
      bits >>= 1;
    }
  }
  return seq;
}

std::uint64_t text_hash(std::string_view text) { return fnv1a64(text); }

const Eigen::MatrixXf* EmbeddingStore::find(std::string_view text) const {
  auto it = entries.find(text_hash(text));
  return it == entries.end() ? nullptr : &it->second;
}

bool EmbeddingStore::operator==(const EmbeddingStore& other) const {
  if (dim != other.dim || entries.size() != other.entries.size()) return false;
  for (auto a = entries.begin(), b = other.entries.begin(); a != entries.end(); ++a, ++b) {
    if (a->first != b->first || a->second.rows() != b->second.rows() || a->second.cols() != b->second.cols()) {
      return false;
    }
    if (std::memcmp(a->second.data(), b->second.data(), sizeof(float) * a->second.size()) != 0) return false;
  }
  return true;
}

EmbeddingStore read_embeddings(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4)) throw FormatError("embedding file truncated while reading magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("embedding file: magic mismatch (expected CEMB)");
  const auto version = get_le<std::uint32_t>(in, "version");
  if (version != kEmbeddingVersion) {
    throw FormatError("embedding file: version mismatch (got " + std::to_string(version) + ", expected 1)");
  }
  EmbeddingStore store;
  store.dim = get_le<std::uint32_t>(in, "dim");
  const auto count = get_le<std::uint64_t>(in, "entry count");
  if (store.dim == 0 && count > 0) throw FormatError("embedding file: zero dim with non-empty entries");
  for (std::uint64_t e = 0; e < count; ++e) {
    const auto hash = get_le<std::uint64_t>(in, "entry hash");
    const auto T = get_le<std::uint32_t>(in, "token count");
    if (T == 0) throw FormatError("embedding file: entry with zero tokens");
    // Stored row-major (token by token).
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> m(T, store.dim);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      m.data()[i] = std::bit_cast<float>(get_le<std::uint32_t>(in, "entry values"));
    }
    if (!store.entries.emplace(hash, Eigen::MatrixXf(m)).second) {
      throw FormatError("embedding file: duplicate text hash");
    }
  }
  return store;
}

EmbeddingStore load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open embedding file '" + path.string() + "'");
  return read_embeddings(in);
}

void write_embeddings(const EmbeddingStore& store, std::ostream& out) {
  out.write(kMagic, 4);
  put_le<std::uint32_t>(out, kEmbeddingVersion);
  put_le<std::uint32_t>(out, store.dim);
  put_le<std::uint64_t>(out, store.entries.size());
  for (const auto& [hash, mat] : store.entries) {
    if (mat.cols() != static_cast<Eigen::Index>(store.dim)) {
      throw FormatError("embedding store: entry dim differs from store dim");
    }
    put_le<std::uint64_t>(out, hash);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(mat.rows()));
    for (Eigen::Index r = 0; r < mat.rows(); ++r) {
      for (Eigen::Index c = 0; c < mat.cols(); ++c) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(mat(r, c)));
    }
  }
}

void save_embeddings(const EmbeddingStore& store, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write embedding file '" + path.string() + "'");
  write_embeddings(store, out);
}

TextEncoder TextEncoder::hashing(std::size_t d, std::uint64_t seed, std::size_t max_tokens) {
  if (d < 2) throw PreconditionError("hashing encoder: d must be at least 2");
  TextEncoder enc;
  enc.dim_ = d;
  enc.seed_ = seed;
  enc.max_tokens_ = max_tokens;
  return enc;
}

TextEncoder TextEncoder::precomputed(EmbeddingStore store) {
  TextEncoder enc;
  enc.dim_ = store.dim;
  enc.store_ = std::move(store);
  return enc;
}

const Eigen::MatrixXd& TextEncoder::encode(const std::string& text) const {
  std::lock_guard lock(*mu_);
  if (auto it = cache_.find(text); it != cache_.end()) return it->second;
  Eigen::MatrixXd m;
  if (store_) {
    const auto* found = store_->find(text);
    if (!found) throw DataError("no precomputed embedding for text (hash " + std::to_string(text_hash(text)) + ")");
    m = found->cast<double>();
  } else {
    m = hash_featurize(text, dim_, seed_, max_tokens_).vectors;
  }
  return cache_.emplace(text, std::move(m)).first->second;
}

}  // namespace commentguard::encoder
