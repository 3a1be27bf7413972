#include "commentguard/synthetic.hpp"

#include <array>
#include <cmath>
#include <string_view>

#include "commentguard/rng.hpp"

namespace commentguard::synthetic {
namespace {

constexpr std::array<std::string_view, 40> kTopics = {
    "bridge",   "vaccine", "flood",    "election", "festival", "airport", "river",   "hospital", "school",  "market",
    "stadium",  "factory", "earthquake", "museum", "railway",  "harbor",  "forest",  "council",  "mayor",   "storm",
    "satellite", "reactor", "village", "highway",  "library",  "bank",    "coastline", "tunnel", "prison",  "zoo",
    "pipeline", "orchard", "volcano",  "ferry",    "clinic",   "temple",  "garrison", "canal",   "mine",    "glacier"};
constexpr std::array<std::string_view, 12> kPlaces = {"north", "south", "east",   "west",   "downtown", "uptown",
                                                      "harbourside", "hills", "valley", "suburbs", "capital", "border"};
constexpr std::array<std::string_view, 4> kFakeNewsCues = {"shocking", "miracle", "secret", "exclusive"};
constexpr std::array<std::string_view, 4> kRealNewsCues = {"ministry", "statement", "announced", "agency"};
constexpr std::array<std::string_view, 4> kFakeCommentCues = {"fake", "hoax", "debunked", "rumor"};
constexpr std::array<std::string_view, 4> kRealCommentCues = {"confirmed", "verified", "official", "true"};
constexpr std::array<std::string_view, 6> kFillers = {"wow", "interesting", "following this", "hmm",
                                                      "need more details", "saw this earlier"};

template <std::size_t N>
std::string_view pick(const std::array<std::string_view, N>& words, Rng& rng) {
  return words[rng.index(N)];
}

}  // namespace

corpus::DatasetSplit make_corpus(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.items == 0) throw PreconditionError("synthetic corpus: items must be positive");
  if (spec.originals_per_item == 0) throw PreconditionError("synthetic corpus: need at least one original comment");
  Rng rng(derive_seed(seed, "synthetic"));

  const auto n = spec.items;
  const auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::llround(spec.validation_fraction * static_cast<double>(n)));
  const auto n_fake = static_cast<std::size_t>(std::llround(spec.fake_fraction * static_cast<double>(n)));
  std::vector<int> labels(n, 0);
  for (std::size_t i = 0; i < n_fake && i < n; ++i) labels[i] = 1;
  rng.shuffle(labels);

  corpus::DatasetSplit data;
  for (std::size_t i = 0; i < n; ++i) {
    NewsItem item;
    item.id = "syn-" + std::to_string(i);
    item.label = labels[i];
    const bool cue_matches = rng.uniform() < spec.news_signal;
    const bool fake_cue = (item.label == 1) == cue_matches;
    item.text = std::string(fake_cue ? pick(kFakeNewsCues, rng) : pick(kRealNewsCues, rng)) + " report on the " +
                std::string(pick(kTopics, rng)) + " " + std::string(pick(kTopics, rng)) + " in the " +
                std::string(pick(kPlaces, rng)) + " district";
    for (std::size_t k = 0; k < spec.originals_per_item; ++k) {
      std::string text;
      if (rng.uniform() < spec.comment_signal) {
        const auto cue = item.label == 1 ? pick(kFakeCommentCues, rng) : pick(kRealCommentCues, rng);
        text = "this " + std::string(pick(kTopics, rng)) + " story is " + std::string(cue) + ", " +
               std::string(pick(kFillers, rng));
      } else {
        text = std::string(pick(kFillers, rng)) + ", the " + std::string(pick(kTopics, rng)) + " again";
      }
      item.comments.push_back({std::move(text), CommentCategory::Original, CommentSource::Human});
    }
    if (i < n_train) {
      data.train.push_back(std::move(item));
    } else if (i < n_train + n_val) {
      data.validation.push_back(std::move(item));
    } else {
      data.test.push_back(std::move(item));
    }
  }
  return data;
}

}  // namespace commentguard::synthetic
