#pragma once

// Vulnerability-driven allocation of adversarial comment slots.
//
// After an epoch whose mean training loss is below the gate, each attack
// category j is scored on its validation set:
//   s_j     = w_loss * loss_j + w_acc * acc_j + w_cross * loss_j * acc_j
//   alpha_j = exp(beta * s_j) + eta
//   E[p_j]  = alpha_j / sum_k alpha_k
//   raw_j   = ceil(E[p_j] * (M - X))
// and the raw quotas are granted in descending order until M - X is spent.

#include <cstdint>
#include <span>
#include <vector>

#include "commentguard/plan.hpp"
#include "commentguard/predict.hpp"
#include "commentguard/types.hpp"

namespace commentguard::ida {

struct VulnerabilityMeasure {
  CommentCategory category = CommentCategory::Perception;
  double loss = 0.0;
  double accuracy = 0.0;
};

struct ScoreWeights {
  double w_loss = 0.5;
  double w_acc = 0.3;
  double w_cross = 0.2;

  void validate() const;
};

struct DirichletParams {
  AttackArray<double> alpha{0.0, 0.0, 0.0};
  AttackArray<bool> active{true, true, true};
  double beta = 5.0;
  double eta = 0.1;
};

/// beta * s is clamped here before exponentiation.
inline constexpr double kMaxExponent = 700.0;

/// With acc_complement the accuracy enters as (1 - acc) in both terms.
double score(const VulnerabilityMeasure& m, const ScoreWeights& w = {}, bool acc_complement = false);

/// alpha_j = exp(beta * s_j) + eta for active categories; inactive ones get 0.
DirichletParams concentrations(const AttackArray<double>& scores, double beta = 5.0, double eta = 0.1,
                               const AttackArray<bool>& active = {true, true, true});

/// Dirichlet mean alpha_j / sum(alpha) over active categories (0 elsewhere).
AttackArray<double> expectation(const DirichletParams& params);

struct AllocationStep {
  CommentCategory category;
  std::size_t raw;
  std::size_t granted;
};

struct AllocationTrace {
  AllocationPlan plan;
  AttackArray<std::size_t> raw{0, 0, 0};
  bool budget_binds = false;
  std::vector<AllocationStep> steps;  // assignment order when the budget binds
};

/// Ceiling allocation with priority capping. Throws PreconditionError when
/// M <= X or exp_p is not a probability vector.
AllocationTrace allocate_traced(const AttackArray<double>& exp_p, std::size_t M, std::size_t X = kBaseSlots);
AllocationPlan allocate(const AttackArray<double>& exp_p, std::size_t M, std::size_t X = kBaseSlots);

/// Mean loss and accuracy of `predict` over validation bundles for `attack`.
VulnerabilityMeasure measure_vulnerability(const Predictor& predict, std::span<const NewsItem> validation,
                                           CommentCategory attack, std::size_t M, std::uint64_t seed,
                                           std::size_t workers = 1);

struct IdaConfig {
  std::size_t M = 6;
  ScoreWeights weights;
  double beta = 5.0;
  double eta = 0.1;
  double gate_threshold = 0.5;
  bool acc_complement = false;
  AttackArray<bool> active{true, true, true};
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

/// Everything computed by one adjustment, for telemetry.
struct EpochAdjustment {
  bool gate_open = false;
  AttackArray<VulnerabilityMeasure> measures{};
  AttackArray<double> scores{0, 0, 0};
  DirichletParams params;
  AttackArray<double> expected{0, 0, 0};
  AllocationPlan plan;
};

/// Scores, concentrations, expectation and allocation from given measures.
EpochAdjustment plan_from_measures(const AttackArray<VulnerabilityMeasure>& measures, const IdaConfig& cfg);

/// Gate closed (train_loss >= threshold): prev_plan is returned unchanged.
/// Otherwise measures every active category and reallocates.
EpochAdjustment epoch_adjust(const Predictor& predict, std::span<const NewsItem> validation,
                             const AllocationPlan& prev_plan, double train_loss, const IdaConfig& cfg);

}  // namespace commentguard::ida
