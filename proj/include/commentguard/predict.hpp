#pragma once

#include <functional>

#include "commentguard/cnav.hpp"
#include "commentguard/corpus.hpp"
#include "commentguard/encoder.hpp"

namespace commentguard {

/// Probability that `item` is fake given the comments in `bundle`.
/// Must be safe to call concurrently.
using Predictor = std::function<double(const NewsItem& item, const corpus::CommentBundle& bundle)>;

/// Binds a model to an encoder. Both must outlive the returned predictor.
inline Predictor make_predictor(const cnav::CnavModel<double>& model, const encoder::TextEncoder& enc) {
  return [&model, &enc](const NewsItem& item, const corpus::CommentBundle& bundle) {
    std::vector<cnav::SequenceRef<double>> comments;
    comments.reserve(bundle.size());
    for (const auto& c : bundle.ordered_comments) comments.emplace_back(enc.encode(c.text));
    return cnav::forward<double>(model, enc.encode(item.text), comments).probability;
  };
}

/// Decision rule shared by training, IDA and evaluation: fake iff p > 0.5.
inline int decide(double probability) { return probability > 0.5 ? 1 : 0; }

}  // namespace commentguard
