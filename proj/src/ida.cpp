#include "commentguard/ida.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "commentguard/parallel.hpp"

namespace commentguard::ida {

void ScoreWeights::validate() const {
  if (w_loss < 0 || w_acc < 0 || w_cross < 0) throw ConfigError("score weights must be non-negative");
  if (std::abs(w_loss + w_acc + w_cross - 1.0) > 1e-12) throw ConfigError("score weights must sum to 1");
}

double score(const VulnerabilityMeasure& m, const ScoreWeights& w, bool acc_complement) {
  const double acc = acc_complement ? 1.0 - m.accuracy : m.accuracy;
  return w.w_loss * m.loss + w.w_acc * acc + w.w_cross * m.loss * acc;
}

DirichletParams concentrations(const AttackArray<double>& scores, double beta, double eta,
                               const AttackArray<bool>& active) {
  if (!(beta > 0)) throw PreconditionError("concentrations: beta must be positive");
  if (!(eta > 0)) throw PreconditionError("concentrations: eta must be positive");
  DirichletParams p;
  p.beta = beta;
  p.eta = eta;
  p.active = active;
  for (std::size_t j = 0; j < 3; ++j) {
    p.alpha[j] = active[j] ? std::exp(std::min(beta * scores[j], kMaxExponent)) + eta : 0.0;
  }
  return p;
}

AttackArray<double> expectation(const DirichletParams& params) {
  double total = 0.0;
  for (std::size_t j = 0; j < 3; ++j) {
    if (!params.active[j]) continue;
    if (!(params.alpha[j] > 0)) throw PreconditionError("expectation: concentrations must be positive");
    total += params.alpha[j];
  }
  AttackArray<double> e{0, 0, 0};
  if (total == 0.0) return e;
  for (std::size_t j = 0; j < 3; ++j) {
    if (params.active[j]) e[j] = params.alpha[j] / total;
  }
  return e;
}

AllocationTrace allocate_traced(const AttackArray<double>& exp_p, std::size_t M, std::size_t X) {
  if (M <= X) throw PreconditionError("allocate: M must exceed X");
  double sum = 0.0;
  for (double p : exp_p) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw PreconditionError("allocate: probabilities must be finite and >= 0");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw PreconditionError("allocate: probabilities must sum to 1");

  const std::size_t budget = M - X;
  AllocationTrace tr;
  tr.plan.budget = budget;
  tr.plan.base_slots = X;
  std::size_t raw_total = 0;
  for (std::size_t j = 0; j < 3; ++j) {
    // The small offset keeps products like (1/3)*3 from rounding up to 2.
    const double scaled = exp_p[j] * static_cast<double>(budget);
    tr.raw[j] = static_cast<std::size_t>(std::max(0.0, std::ceil(scaled - 1e-9)));
    raw_total += tr.raw[j];
  }
  if (raw_total <= budget) {
    tr.plan.quota = tr.raw;
    return tr;
  }

  tr.budget_binds = true;
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&tr](std::size_t a, std::size_t b) { return tr.raw[a] > tr.raw[b]; });
  std::size_t remaining = budget;
  for (auto j : order) {
    const std::size_t granted = std::min(tr.raw[j], remaining);
    tr.plan.quota[j] = granted;
    remaining -= granted;
    tr.steps.push_back({kAttackCategories[j], tr.raw[j], granted});
  }
  return tr;
}

AllocationPlan allocate(const AttackArray<double>& exp_p, std::size_t M, std::size_t X) {
  return allocate_traced(exp_p, M, X).plan;
}

VulnerabilityMeasure measure_vulnerability(const Predictor& predict, std::span<const NewsItem> validation,
                                           CommentCategory attack, std::size_t M, std::uint64_t seed,
                                           std::size_t workers) {
  if (!is_attack(attack)) throw PreconditionError("measure_vulnerability: attack category required");
  if (validation.empty()) throw PreconditionError("measure_vulnerability: empty validation set");
  std::vector<double> losses(validation.size());
  std::vector<char> correct(validation.size());
  parallel_for(validation.size(), workers, [&](std::size_t i) {
    const auto& item = validation[i];
    const auto bundle = corpus::build_validation_bundle(item, attack, M, seed);
    const double p = predict(item, bundle);
    losses[i] = cnav::loss(cnav::Prediction<double>{p, 0.0}, item.label);
    correct[i] = decide(p) == item.label;
  });
  VulnerabilityMeasure m;
  m.category = attack;
  double total = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < validation.size(); ++i) {
    total += losses[i];
    hits += static_cast<std::size_t>(correct[i]);
  }
  m.loss = total / static_cast<double>(validation.size());
  m.accuracy = static_cast<double>(hits) / static_cast<double>(validation.size());
  return m;
}

EpochAdjustment plan_from_measures(const AttackArray<VulnerabilityMeasure>& measures, const IdaConfig& cfg) {
  cfg.weights.validate();
  EpochAdjustment adj;
  adj.gate_open = true;
  adj.measures = measures;
  for (std::size_t j = 0; j < 3; ++j) {
    adj.scores[j] = cfg.active[j] ? score(measures[j], cfg.weights, cfg.acc_complement) : 0.0;
  }
  adj.params = concentrations(adj.scores, cfg.beta, cfg.eta, cfg.active);
  adj.expected = expectation(adj.params);
  adj.plan = allocate(adj.expected, cfg.M, kBaseSlots);
  return adj;
}

EpochAdjustment epoch_adjust(const Predictor& predict, std::span<const NewsItem> validation,
                             const AllocationPlan& prev_plan, double train_loss, const IdaConfig& cfg) {
  const bool any_active = std::any_of(cfg.active.begin(), cfg.active.end(), [](bool a) { return a; });
  if (!(train_loss < cfg.gate_threshold) || !any_active) {
    EpochAdjustment adj;
    adj.plan = prev_plan;
    return adj;
  }
  AttackArray<VulnerabilityMeasure> measures{};
  for (auto c : kAttackCategories) {
    const auto j = attack_index(c);
    measures[j].category = c;
    if (cfg.active[j]) measures[j] = measure_vulnerability(predict, validation, c, cfg.M, cfg.seed, cfg.workers);
  }
  return plan_from_measures(measures, cfg);
}

}  // namespace commentguard::ida
