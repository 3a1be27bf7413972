#pragma once

#include <cstdint>

#include "commentguard/corpus.hpp"

namespace commentguard::synthetic {

/// Generator knobs for a desk-scale news/comment corpus. News texts carry a
/// veracity cue with probability `news_signal`; each human comment carries
/// a cue agreeing with the label with probability `comment_signal`.
struct SyntheticSpec {
  std::size_t items = 200;
  std::size_t originals_per_item = 6;
  double news_signal = 0.8;
  double comment_signal = 0.85;
  double fake_fraction = 0.4;
  double train_fraction = 0.6;
  double validation_fraction = 0.2;
};

/// Items with Original comments only, split by the given fractions.
corpus::DatasetSplit make_corpus(const SyntheticSpec& spec, std::uint64_t seed);

}  // namespace commentguard::synthetic
