#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace commentguard {

// Canonical order: Original, Perception, Cognition, SocioEmotional.
enum class CommentCategory : int { Original = 0, Perception = 1, Cognition = 2, SocioEmotional = 3 };

inline constexpr std::array<CommentCategory, 4> kAllCategories = {
    CommentCategory::Original, CommentCategory::Perception, CommentCategory::Cognition,
    CommentCategory::SocioEmotional};

inline constexpr std::array<CommentCategory, 3> kAttackCategories = {
    CommentCategory::Perception, CommentCategory::Cognition, CommentCategory::SocioEmotional};

inline constexpr bool is_attack(CommentCategory c) { return c != CommentCategory::Original; }

/// Index of an attack category into a 3-slot array (Perception = 0).
inline std::size_t attack_index(CommentCategory c) {
  if (!is_attack(c)) throw std::invalid_argument("attack_index: Original is not an attack category");
  return static_cast<std::size_t>(c) - 1;
}

inline constexpr std::size_t category_index(CommentCategory c) { return static_cast<std::size_t>(c); }

/// Per-attack-category values, indexed by attack_index().
template <typename T>
using AttackArray = std::array<T, 3>;

std::string_view to_string(CommentCategory c);
/// Short tag used in CSV headers: o, p, c, s.
std::string_view short_tag(CommentCategory c);
std::optional<CommentCategory> parse_category(std::string_view s);

enum class CommentSource : int { Human = 0, LlmGenerated = 1, TemplateFallback = 2 };

std::string_view to_string(CommentSource s);
std::optional<CommentSource> parse_source(std::string_view s);

struct Comment {
  std::string text;
  CommentCategory category = CommentCategory::Original;
  CommentSource source = CommentSource::Human;

  bool operator==(const Comment&) const = default;
};

struct NewsItem {
  std::string id;
  std::string text;
  int label = 0;  // 1 = fake, 0 = real
  std::vector<Comment> comments;

  /// Comments of one category, in stored order.
  std::vector<Comment> of_category(CommentCategory c) const;
  std::size_t count(CommentCategory c) const;

  bool operator==(const NewsItem&) const = default;
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A precondition on an operation's arguments was violated.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace commentguard
