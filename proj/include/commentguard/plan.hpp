#pragma once

#include <cstddef>

#include "commentguard/types.hpp"

namespace commentguard {

/// Number of guaranteed base slots per training bundle, one per category.
inline constexpr std::size_t kBaseSlots = 4;

/// Per-attack-category comment quotas for one training epoch.
struct AllocationPlan {
  AttackArray<std::size_t> quota{0, 0, 0};
  std::size_t budget = 0;  // M - X
  std::size_t base_slots = kBaseSlots;

  std::size_t total() const { return quota[0] + quota[1] + quota[2]; }
  std::size_t operator[](CommentCategory c) const { return quota[attack_index(c)]; }

  bool operator==(const AllocationPlan&) const = default;
};

/// Pre-gate plan: floor((M - X) / 3) per attack category; the remainder
/// falls through to Original in the training bundle builder.
AllocationPlan uniform_plan(std::size_t M);

}  // namespace commentguard
