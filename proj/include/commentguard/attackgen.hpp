#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "commentguard/corpus.hpp"
#include "commentguard/types.hpp"

namespace commentguard::attackgen {

/// Literal chain-of-thought cue that every rendered prompt carries.
inline constexpr std::string_view kStepByStep = "Let's think step by step.";
inline constexpr std::string_view kCommentMarker = "Generated Attack Comment:";

/// "perception-level", "cognition-level" or "socio-emotional-level".
std::string_view level_name(CommentCategory level);

struct AttackPrompt {
  CommentCategory attack_level = CommentCategory::Perception;
  std::string news_text;
  std::string original_comment;
  std::string rendered;
};

/// Throws PreconditionError for Original or an empty news/comment text.
AttackPrompt render_prompt(CommentCategory level, std::string_view news, std::string_view comment);

struct GenerationResult {
  std::array<std::string, 3> key_points;  // core content, main opinion, misleading direction
  std::string attack_comment;
  std::string raw_response;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

/// Extracts the Step 1 key points and the generated comment. Tolerates
/// surrounding whitespace, markdown emphasis and code fences. Throws
/// ParseError when the comment marker is missing or nothing follows it.
GenerationResult parse_response(std::string_view raw);

struct EndpointConfig {
  std::string base_url;  // e.g. http://host:port/v1
  std::string model_name;
  std::string api_key;
  std::size_t max_parallel = 4;
  std::chrono::milliseconds timeout{60000};
  std::size_t max_retries = 3;
  double temperature = 0.8;
  std::chrono::milliseconds retry_backoff{200};

  void validate() const;
};

/// 401/403 from the endpoint. Never retried.
class AuthError : public Error {
 public:
  using Error::Error;
};

/// Transport failure or non-success status. Client errors other than 408
/// and 429 are not retryable.
class EndpointError : public Error {
 public:
  explicit EndpointError(const std::string& what, bool retryable = true, bool responded = false)
      : Error(what), retryable_(retryable), responded_(responded) {}
  bool retryable() const { return retryable_; }
  /// False for transport failures (no HTTP response at all).
  bool responded() const { return responded_; }

 private:
  bool retryable_;
  bool responded_;
};

/// One chat-completions round trip; returns the assistant message content.
std::string complete(const EndpointConfig& cfg, const std::string& prompt);

struct GenerationFailure {
  CommentCategory level;
  std::size_t sample_index;
  std::string reason;
};

struct GeneratedAttacks {
  std::vector<Comment> comments;  // ordered by (level, sample index)
  std::vector<GenerationFailure> failures;
};

/// per_category comments for each attack level, each seeded by a randomly
/// chosen original comment. At most cfg.max_parallel requests are in flight.
/// Throws AuthError on 401/403, EndpointError when every request failed to
/// reach the endpoint, and Error when any category produced nothing.
GeneratedAttacks generate_attacks(const NewsItem& item, std::size_t per_category, const EndpointConfig& cfg,
                                  std::uint64_t seed = 0);

/// Deterministic offline substitute styled per attack level.
Comment generate_fallback(const NewsItem& item, CommentCategory level, std::uint64_t seed);

/// Appends per_category fallback comments of each attack level to every item
/// in every split.
void augment_with_fallback(corpus::DatasetSplit& data, std::size_t per_category, std::uint64_t seed);

}  // namespace commentguard::attackgen
