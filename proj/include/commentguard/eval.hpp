#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "commentguard/corpus.hpp"
#include "commentguard/predict.hpp"

namespace commentguard::eval {

enum class RegimeKind { Clean, Comprehensive, SpecificAttack };

struct Regime {
  RegimeKind kind = RegimeKind::Clean;
  CommentCategory category = CommentCategory::Perception;  // SpecificAttack only
  std::size_t attack_count = 0;                            // SpecificAttack only

  static Regime clean() { return {}; }
  static Regime comprehensive() { return {RegimeKind::Comprehensive, CommentCategory::Perception, 0}; }
  static Regime specific(CommentCategory c, std::size_t k) { return {RegimeKind::SpecificAttack, c, k}; }

  /// "clean", "comprehensive" or e.g. "specific:perception:3".
  std::string name() const;
};

/// Fake is the positive class.
struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

struct Metrics {
  double accuracy = 0.0;
  double f1_real = 0.0;
  double f1_fake = 0.0;
  double macro_f1 = 0.0;
};

struct EvalReport {
  Regime regime;
  ConfusionCounts counts;
  double accuracy = 0.0;
  double f1_real = 0.0;
  double f1_fake = 0.0;
  double macro_f1 = 0.0;
  std::optional<double> asr;  // SpecificAttack only
};

ConfusionCounts confusion(std::span<const int> labels, std::span<const int> predicted);

/// F1 of a class with no true, predicted or actual positives is 0.
Metrics compute_metrics(const ConfusionCounts& counts);

/// Bundle an item is scored with under `regime`.
corpus::CommentBundle build_bundle(const NewsItem& item, const Regime& regime, std::size_t M, std::uint64_t seed);

/// Hard predictions (threshold 0.5, ties -> real) in item order.
std::vector<int> predict_labels(const Predictor& predict, std::span<const NewsItem> items, const Regime& regime,
                                std::size_t M, std::uint64_t seed, std::size_t workers = 1);

EvalReport evaluate(const Predictor& predict, std::span<const NewsItem> items, const Regime& regime, std::size_t M,
                    std::uint64_t seed, std::size_t workers = 1);

/// Share of clean-correct items that the attack turns incorrect; 0 when no
/// item is clean-correct.
double attack_success_rate(const std::vector<bool>& clean_correct, const std::vector<bool>& attacked_correct);

double attack_success_rate(const Predictor& predict, std::span<const NewsItem> items, CommentCategory category,
                           std::size_t attack_count, std::size_t M, std::uint64_t seed, std::size_t workers = 1);

struct SweepRow {
  CommentCategory category;
  std::size_t attack_count;
  double asr;
};

/// Every attack category crossed with every count, category-major.
std::vector<SweepRow> sweep_attacks(const Predictor& predict, std::span<const NewsItem> items,
                                    std::span<const std::size_t> counts, std::size_t M, std::uint64_t seed,
                                    std::size_t workers = 1);

/// Mean ASR over the three categories at one attack count.
double mean_asr(std::span<const SweepRow> rows, std::size_t attack_count);

/// One row per (regime, metric).
void write_report_csv(std::span<const EvalReport> reports, const std::filesystem::path& path);
void write_sweep_csv(std::span<const SweepRow> rows, const std::filesystem::path& path);
/// ASR against attack count, one line per category.
void write_sweep_plot(std::span<const SweepRow> rows, const std::filesystem::path& path);

}  // namespace commentguard::eval
