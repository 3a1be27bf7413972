#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "commentguard/corpus.hpp"
#include "commentguard/types.hpp"

namespace testing_support {

using commentguard::Comment;
using commentguard::CommentCategory;
using commentguard::CommentSource;
using commentguard::NewsItem;

/// Item with the requested number of comments per category, texts tagged
/// with category and index so bundle contents can be traced.
inline NewsItem make_item(const std::string& id, int label, std::size_t o, std::size_t p, std::size_t c,
                          std::size_t s) {
  NewsItem item{id, "news text for " + id, label, {}};
  const std::pair<CommentCategory, std::size_t> plan[] = {
      {CommentCategory::Original, o}, {CommentCategory::Perception, p},
      {CommentCategory::Cognition, c}, {CommentCategory::SocioEmotional, s}};
  for (const auto& [cat, n] : plan) {
    for (std::size_t k = 0; k < n; ++k) {
      item.comments.push_back({std::string(commentguard::short_tag(cat)) + std::to_string(k) + " about " + id, cat,
                               cat == CommentCategory::Original ? CommentSource::Human
                                                                : CommentSource::TemplateFallback});
    }
  }
  return item;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("commentguard-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  out << content;
}

}  // namespace testing_support
