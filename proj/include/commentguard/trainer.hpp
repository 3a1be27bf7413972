#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "commentguard/cnav.hpp"
#include "commentguard/corpus.hpp"
#include "commentguard/encoder.hpp"
#include "commentguard/ida.hpp"

namespace commentguard::trainer {

struct Ablation {
  bool disable_ida = false;
  bool drop_perception = false;
  bool drop_cognition = false;
  bool drop_socioemotional = false;

  bool drops(CommentCategory c) const;
  /// Attack categories still present after dropping.
  AttackArray<bool> active() const;
  bool any() const { return disable_ida || drop_perception || drop_cognition || drop_socioemotional; }

  bool operator==(const Ablation&) const = default;
};

struct TrainConfig {
  std::size_t epochs = 6;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  std::size_t M = 6;
  std::uint64_t seed = 0;
  Ablation ablation;
  ida::ScoreWeights weights;
  double beta = 5.0;
  double eta = 0.1;
  double gate_threshold = 0.5;
  bool acc_complement = false;
  std::size_t workers = 1;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double mean_train_loss = 0.0;
  double train_accuracy = 0.0;
  AllocationPlan plan;  // plan the epoch trained under
  AttackArray<std::optional<double>> validation_accuracy;
  ida::EpochAdjustment adjustment;  // computed after the epoch; plan applies to the next one
  double wall_seconds = 0.0;
};

struct TrainResult {
  cnav::CnavModel<double> model;
  std::vector<EpochRecord> records;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Removes every comment of each dropped attack category from all splits.
corpus::DatasetSplit apply_ablation(const corpus::DatasetSplit& data, const Ablation& flags);

/// Seeded epochs of Adam over training bundles built under the current plan.
/// After each epoch the IDA gate is evaluated (unless disabled) and the
/// resulting plan is used for the following epoch.
TrainResult train(const corpus::DatasetSplit& data, const TrainConfig& cfg, const cnav::CnavConfig& model_cfg,
                  const encoder::TextEncoder& enc, const EpochCallback& on_epoch = {});

/// Writes one telemetry row per epoch (gate, measures, scores, alphas,
/// expectations, quotas).
void write_ida_telemetry(const std::vector<EpochRecord>& records, const std::filesystem::path& path);

/// Validation accuracy per category against epoch, as an SVG line chart.
void write_validation_plot(const std::vector<EpochRecord>& records, const std::filesystem::path& path);

}  // namespace commentguard::trainer
