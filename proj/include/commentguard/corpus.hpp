#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "commentguard/plan.hpp"
#include "commentguard/types.hpp"

namespace commentguard::corpus {

/// Original comments reserved at the head of every validation bundle.
inline constexpr std::size_t kValidationOriginals = 3;

struct DatasetSplit {
  std::vector<NewsItem> train;
  std::vector<NewsItem> validation;
  std::vector<NewsItem> test;

  bool operator==(const DatasetSplit&) const = default;
};

struct CommentBundle {
  std::string news_id;
  std::vector<Comment> ordered_comments;

  std::size_t size() const { return ordered_comments.size(); }
  /// Number of comments per category, indexed by category_index().
  std::array<std::size_t, 4> histogram() const;

  bool operator==(const CommentBundle&) const = default;
};

struct SplitStats {
  std::size_t fake_items = 0, real_items = 0;
  std::size_t fake_comments = 0, real_comments = 0;

  std::size_t items() const { return fake_items + real_items; }
  std::size_t comments() const { return fake_comments + real_comments; }
};

struct DatasetStats {
  SplitStats train, validation, test;
  SplitStats total() const;
};

inline constexpr int kSchemaVersion = 1;

/// Reads a line-delimited JSON dataset. Throws DataError with the 1-based
/// line number on malformed records, duplicate ids, or invalid labels.
DatasetSplit load_dataset(const std::filesystem::path& path, int schema_version = kSchemaVersion);
DatasetSplit parse_dataset(std::istream& in, int schema_version = kSchemaVersion);

/// Writes the split in the same line-delimited format, train first.
void save_dataset(const DatasetSplit& data, const std::filesystem::path& path);
void write_dataset(const DatasetSplit& data, std::ostream& out);

/// Throws DataError on duplicate ids across splits, labels outside {0,1}
/// or blank comments.
void validate(const DatasetSplit& data);

DatasetStats statistics(const DatasetSplit& data);
/// Fixed-width table in the layout of the usual dataset statistics table.
std::string format_statistics(const DatasetStats& stats);

/// First three Original comments (stored order) followed by M-3 comments of
/// `attack`. Attack comments are a seeded subset kept in stored order.
CommentBundle build_validation_bundle(const NewsItem& item, CommentCategory attack, std::size_t M,
                                      std::uint64_t seed);

/// Slots 1-4 hold one comment per category in canonical order; the M-4 tail
/// draws a category uniformly, then a comment uniformly within it.
CommentBundle build_test_bundle(const NewsItem& item, std::size_t M, std::uint64_t seed);

/// Base slot per category, then plan quotas per attack category, then
/// residual Original slots. Categories absent from the item (e.g. ablated)
/// hand their slots to Original.
CommentBundle build_training_bundle(const NewsItem& item, const AllocationPlan& plan, std::size_t M,
                                    std::uint64_t seed);

/// First M Original comments, cycling when fewer are stored.
CommentBundle build_clean_bundle(const NewsItem& item, std::size_t M);

/// The clean bundle's first M-k slots followed by k comments of `attack`.
/// With k = 0 this equals build_clean_bundle.
CommentBundle build_attack_bundle(const NewsItem& item, CommentCategory attack, std::size_t k,
                                  std::size_t M, std::uint64_t seed);

}  // namespace commentguard::corpus
