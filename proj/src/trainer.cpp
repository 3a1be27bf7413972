#include "commentguard/trainer.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "commentguard/predict.hpp"
#include "commentguard/rng.hpp"
#include "commentguard/svg.hpp"

namespace commentguard::trainer {

bool Ablation::drops(CommentCategory c) const {
  switch (c) {
    case CommentCategory::Perception: return drop_perception;
    case CommentCategory::Cognition: return drop_cognition;
    case CommentCategory::SocioEmotional: return drop_socioemotional;
    default: return false;
  }
}

AttackArray<bool> Ablation::active() const {
  return {!drop_perception, !drop_cognition, !drop_socioemotional};
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train: epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("train: batch_size must be at least 1");
  if (M < kBaseSlots) throw ConfigError("train: M must be at least 4");
  if (!(lr >= 0.0)) throw ConfigError("train: lr must be non-negative");
  weights.validate();
}

corpus::DatasetSplit apply_ablation(const corpus::DatasetSplit& data, const Ablation& flags) {
  corpus::DatasetSplit out = data;
  for (auto* items : {&out.train, &out.validation, &out.test}) {
    for (auto& item : *items) {
      std::erase_if(item.comments, [&flags](const Comment& c) { return flags.drops(c.category); });
    }
  }
  return out;
}

TrainResult train(const corpus::DatasetSplit& data, const TrainConfig& cfg, const cnav::CnavConfig& model_cfg,
                  const encoder::TextEncoder& enc, const EpochCallback& on_epoch) {
  cfg.validate();
  if (data.train.empty()) throw PreconditionError("train: empty training split");
  if (model_cfg.M != cfg.M) throw ConfigError("train: model M differs from training M");
  if (model_cfg.d != enc.dim()) throw ConfigError("train: model d differs from encoder dimension");

  TrainResult result;
  result.model = cnav::CnavModel<double>::initialize(model_cfg, derive_seed(cfg.seed, "model"));
  auto adam = cnav::AdamState<double>::for_model(result.model);
  const Predictor predict = make_predictor(result.model, enc);

  ida::IdaConfig ida_cfg;
  ida_cfg.M = cfg.M;
  ida_cfg.weights = cfg.weights;
  ida_cfg.beta = cfg.beta;
  ida_cfg.eta = cfg.eta;
  ida_cfg.gate_threshold = cfg.gate_threshold;
  ida_cfg.acc_complement = cfg.acc_complement;
  ida_cfg.active = cfg.ablation.active();
  ida_cfg.seed = derive_seed(cfg.seed, "validation");
  ida_cfg.workers = cfg.workers;

  AllocationPlan plan = uniform_plan(cfg.M);
  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng shuffle_rng(derive_seed(cfg.seed, "shuffle", epoch));
    shuffle_rng.shuffle(order);
    const std::uint64_t bundle_seed = derive_seed(cfg.seed, "train-bundle", epoch);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<corpus::CommentBundle> bundles;
      bundles.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        bundles.push_back(corpus::build_training_bundle(data.train[order[i]], plan, cfg.M, bundle_seed));
      }
      std::vector<cnav::Example<double>> batch;
      batch.reserve(bundles.size());
      for (std::size_t i = start; i < end; ++i) {
        const auto& item = data.train[order[i]];
        cnav::Example<double> ex{std::cref(enc.encode(item.text)), {}, item.label};
        for (const auto& c : bundles[i - start].ordered_comments) ex.comments.emplace_back(enc.encode(c.text));
        batch.push_back(std::move(ex));
      }
      auto g = cnav::backward<double>(result.model, batch, cfg.workers);
      loss_sum += g.mean_loss * static_cast<double>(batch.size());
      correct += g.correct;
      cnav::adam_step(result.model, g.grad, adam, cfg.lr);
      if (!result.model.all_finite()) throw Error("train: non-finite parameter after update");
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_train_loss = loss_sum / static_cast<double>(order.size());
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(order.size());
    rec.plan = plan;

    if (!cfg.ablation.disable_ida && !data.validation.empty()) {
      rec.adjustment = ida::epoch_adjust(predict, data.validation, plan, rec.mean_train_loss, ida_cfg);
      plan = rec.adjustment.plan;
    } else {
      rec.adjustment.plan = plan;
    }
    if (!data.validation.empty()) {
      for (auto c : kAttackCategories) {
        const auto j = attack_index(c);
        if (!ida_cfg.active[j]) continue;
        rec.validation_accuracy[j] =
            rec.adjustment.gate_open
                ? rec.adjustment.measures[j].accuracy
                : ida::measure_vulnerability(predict, data.validation, c, cfg.M, ida_cfg.seed, cfg.workers).accuracy;
      }
    }
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (on_epoch) on_epoch(rec);
    result.records.push_back(std::move(rec));
  }
  return result;
}

void write_ida_telemetry(const std::vector<EpochRecord>& records, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write telemetry '" + path.string() + "'");
  out << "epoch,train_loss,train_acc,gate_open";
  for (const char* field : {"m_loss", "m_acc", "s", "alpha", "e_p", "quota"}) {
    for (auto c : kAttackCategories) out << ',' << field << '_' << short_tag(c);
  }
  out << ",plan_used_p,plan_used_c,plan_used_s\n";
  out << std::setprecision(10);
  for (const auto& r : records) {
    const auto& a = r.adjustment;
    out << r.epoch << ',' << r.mean_train_loss << ',' << r.train_accuracy << ',' << (a.gate_open ? 1 : 0);
    auto put = [&](auto getter) {
      for (std::size_t j = 0; j < 3; ++j) {
        out << ',';
        if (a.gate_open && a.params.active[j]) out << getter(j);
      }
    };
    put([&](std::size_t j) { return a.measures[j].loss; });
    put([&](std::size_t j) { return a.measures[j].accuracy; });
    put([&](std::size_t j) { return a.scores[j]; });
    put([&](std::size_t j) { return a.params.alpha[j]; });
    put([&](std::size_t j) { return a.expected[j]; });
    for (std::size_t j = 0; j < 3; ++j) out << ',' << a.plan.quota[j];
    for (std::size_t j = 0; j < 3; ++j) out << ',' << r.plan.quota[j];
    out << '\n';
  }
  if (!out) throw Error("write failed for telemetry '" + path.string() + "'");
}

void write_validation_plot(const std::vector<EpochRecord>& records, const std::filesystem::path& path) {
  svg::LineChart chart;
  chart.title = "Validation accuracy per attack category";
  chart.x_label = "epoch";
  chart.y_label = "accuracy";
  for (auto c : kAttackCategories) {
    svg::Series s{std::string(to_string(c)), {}};
    for (const auto& r : records) {
      if (const auto& acc = r.validation_accuracy[attack_index(c)]) {
        s.points.emplace_back(static_cast<double>(r.epoch + 1), *acc);
      }
    }
    if (!s.points.empty()) chart.series.push_back(std::move(s));
  }
  svg::save(chart, path);
}

}  // namespace commentguard::trainer
