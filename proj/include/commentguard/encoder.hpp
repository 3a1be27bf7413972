#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "commentguard/types.hpp"

namespace commentguard::encoder {

inline constexpr std::size_t kDefaultMaxTokens = 64;

/// T x d token vectors for one text.
struct TokenSequence {
  Eigen::MatrixXd vectors;
  std::optional<std::string> text_id;

  Eigen::Index length() const { return vectors.rows(); }
  Eigen::Index dim() const { return vectors.cols(); }
};

/// Lowercased ASCII, split on whitespace and ASCII punctuation. Bytes >= 0x80
/// are kept inside tokens, so UTF-8 text survives intact.
std::vector<std::string> tokenize(std::string_view text);

/// One dense sign pattern of magnitude 1/sqrt(d) per token (unit row norm).
/// Deterministic in (token, d, seed). Throws PreconditionError on d < 2 or a
/// text with no tokens; sequences longer than max_tokens are truncated.
TokenSequence hash_featurize(std::string_view text, std::size_t d, std::uint64_t seed,
                             std::size_t max_tokens = kDefaultMaxTokens);

/// Key used by the embedding file: 64-bit FNV-1a of the UTF-8 text.
std::uint64_t text_hash(std::string_view text);

/// Precomputed token embeddings keyed by text hash.
struct EmbeddingStore {
  std::uint32_t dim = 0;
  std::map<std::uint64_t, Eigen::MatrixXf> entries;

  const Eigen::MatrixXf* find(std::string_view text) const;
  bool operator==(const EmbeddingStore&) const;
};

inline constexpr std::uint32_t kEmbeddingVersion = 1;

/// Reads the "CEMB" little-endian format. Throws FormatError on magic or
/// version mismatch, truncation, or per-entry dimension problems.
EmbeddingStore load_embeddings(const std::filesystem::path& path);
EmbeddingStore read_embeddings(std::istream& in);

/// Entries are written in ascending hash order.
void save_embeddings(const EmbeddingStore& store, const std::filesystem::path& path);
void write_embeddings(const EmbeddingStore& store, std::ostream& out);

/// Text -> TokenSequence with memoization. Either the hashing featurizer or
/// a lookup into a precomputed store.
class TextEncoder {
 public:
  static TextEncoder hashing(std::size_t d, std::uint64_t seed, std::size_t max_tokens = kDefaultMaxTokens);
  static TextEncoder precomputed(EmbeddingStore store);

  std::size_t dim() const { return dim_; }
  /// Thread-safe. Throws DataError for a text missing from a precomputed store.
  const Eigen::MatrixXd& encode(const std::string& text) const;

 private:
  TextEncoder() = default;

  std::size_t dim_ = 0;
  std::uint64_t seed_ = 0;
  std::size_t max_tokens_ = kDefaultMaxTokens;
  std::optional<EmbeddingStore> store_;
  mutable std::unique_ptr<std::mutex> mu_ = std::make_unique<std::mutex>();
  mutable std::map<std::string, Eigen::MatrixXd, std::less<>> cache_;
};

}  // namespace commentguard::encoder
