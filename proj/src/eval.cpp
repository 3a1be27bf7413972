#include "commentguard/eval.hpp"

#include <fstream>
#include <iomanip>

#include "commentguard/parallel.hpp"
#include "commentguard/svg.hpp"

namespace commentguard::eval {
namespace {

double f1(std::size_t tp, std::size_t fp, std::size_t fn) {
  const std::size_t denom = 2 * tp + fp + fn;
  return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << std::setprecision(10);
  return out;
}

std::vector<bool> correctness(const Predictor& predict, std::span<const NewsItem> items, const Regime& regime,
                              std::size_t M, std::uint64_t seed, std::size_t workers) {
  const auto pred = predict_labels(predict, items, regime, M, seed, workers);
  std::vector<bool> ok(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) ok[i] = pred[i] == items[i].label;
  return ok;
}

}  // namespace

std::string Regime::name() const {
  switch (kind) {
    case RegimeKind::Clean: return "clean";
    case RegimeKind::Comprehensive: return "comprehensive";
    case RegimeKind::SpecificAttack:
      return "specific:" + std::string(to_string(category)) + ":" + std::to_string(attack_count);
  }
  return "unknown";
}

ConfusionCounts confusion(std::span<const int> labels, std::span<const int> predicted) {
  if (labels.size() != predicted.size()) throw PreconditionError("confusion: size mismatch");
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      predicted[i] == 1 ? ++c.tp : ++c.fn;
    } else {
      predicted[i] == 1 ? ++c.fp : ++c.tn;
    }
  }
  return c;
}

Metrics compute_metrics(const ConfusionCounts& c) {
  Metrics m;
  const std::size_t n = c.total();
  m.accuracy = n == 0 ? 0.0 : static_cast<double>(c.tp + c.tn) / static_cast<double>(n);
  m.f1_fake = f1(c.tp, c.fp, c.fn);
  m.f1_real = f1(c.tn, c.fn, c.fp);
  m.macro_f1 = (m.f1_real + m.f1_fake) / 2.0;
  return m;
}

corpus::CommentBundle build_bundle(const NewsItem& item, const Regime& regime, std::size_t M, std::uint64_t seed) {
  switch (regime.kind) {
    case RegimeKind::Clean: return corpus::build_clean_bundle(item, M);
    case RegimeKind::Comprehensive: return corpus::build_test_bundle(item, M, seed);
    case RegimeKind::SpecificAttack:
      return corpus::build_attack_bundle(item, regime.category, regime.attack_count, M, seed);
  }
  throw PreconditionError("unknown regime");
}

std::vector<int> predict_labels(const Predictor& predict, std::span<const NewsItem> items, const Regime& regime,
                                std::size_t M, std::uint64_t seed, std::size_t workers) {
  std::vector<int> out(items.size());
  parallel_for(items.size(), workers,
               [&](std::size_t i) { out[i] = decide(predict(items[i], build_bundle(items[i], regime, M, seed))); });
  return out;
}

EvalReport evaluate(const Predictor& predict, std::span<const NewsItem> items, const Regime& regime, std::size_t M,
                    std::uint64_t seed, std::size_t workers) {
  if (items.empty()) throw PreconditionError("evaluate: empty item list");
  std::vector<int> labels;
  labels.reserve(items.size());
  for (const auto& it : items) labels.push_back(it.label);
  const auto pred = predict_labels(predict, items, regime, M, seed, workers);
  EvalReport r;
  r.regime = regime;
  r.counts = confusion(labels, pred);
  const auto m = compute_metrics(r.counts);
  r.accuracy = m.accuracy;
  r.f1_real = m.f1_real;
  r.f1_fake = m.f1_fake;
  r.macro_f1 = m.macro_f1;
  if (regime.kind == RegimeKind::SpecificAttack) {
    r.asr = attack_success_rate(predict, items, regime.category, regime.attack_count, M, seed, workers);
  }
  return r;
}

double attack_success_rate(const std::vector<bool>& clean_correct, const std::vector<bool>& attacked_correct) {
  if (clean_correct.size() != attacked_correct.size()) throw PreconditionError("attack_success_rate: size mismatch");
  std::size_t base = 0, flipped = 0;
  for (std::size_t i = 0; i < clean_correct.size(); ++i) {
    if (!clean_correct[i]) continue;
    ++base;
    if (!attacked_correct[i]) ++flipped;
  }
  return base == 0 ? 0.0 : static_cast<double>(flipped) / static_cast<double>(base);
}

double attack_success_rate(const Predictor& predict, std::span<const NewsItem> items, CommentCategory category,
                           std::size_t attack_count, std::size_t M, std::uint64_t seed, std::size_t workers) {
  if (attack_count > M) throw PreconditionError("attack_success_rate: attack count exceeds M");
  const auto clean = correctness(predict, items, Regime::clean(), M, seed, workers);
  const auto attacked = correctness(predict, items, Regime::specific(category, attack_count), M, seed, workers);
  return attack_success_rate(clean, attacked);
}

std::vector<SweepRow> sweep_attacks(const Predictor& predict, std::span<const NewsItem> items,
                                    std::span<const std::size_t> counts, std::size_t M, std::uint64_t seed,
                                    std::size_t workers) {
  if (counts.empty()) throw PreconditionError("sweep_attacks: no attack counts given");
  std::vector<SweepRow> rows;
  for (auto c : kAttackCategories) {
    for (auto k : counts) rows.push_back({c, k, attack_success_rate(predict, items, c, k, M, seed, workers)});
  }
  return rows;
}

double mean_asr(std::span<const SweepRow> rows, std::size_t attack_count) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : rows) {
    if (r.attack_count == attack_count) {
      sum += r.asr;
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

void write_report_csv(std::span<const EvalReport> reports, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "regime,metric,value\n";
  for (const auto& r : reports) {
    const auto name = r.regime.name();
    out << name << ",accuracy," << r.accuracy << '\n';
    out << name << ",f1_real," << r.f1_real << '\n';
    out << name << ",f1_fake," << r.f1_fake << '\n';
    out << name << ",macro_f1," << r.macro_f1 << '\n';
    if (r.asr) out << name << ",asr," << *r.asr << '\n';
  }
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

void write_sweep_csv(std::span<const SweepRow> rows, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << "category,attack_count,asr\n";
  for (const auto& r : rows) out << to_string(r.category) << ',' << r.attack_count << ',' << r.asr << '\n';
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

void write_sweep_plot(std::span<const SweepRow> rows, const std::filesystem::path& path) {
  svg::LineChart chart;
  chart.title = "Attack success rate by attack count";
  chart.x_label = "attack comments per item";
  chart.y_label = "ASR";
  for (auto c : kAttackCategories) {
    svg::Series s{std::string(to_string(c)), {}};
    for (const auto& r : rows) {
      if (r.category == c) s.points.emplace_back(static_cast<double>(r.attack_count), r.asr);
    }
    if (!s.points.empty()) chart.series.push_back(std::move(s));
  }
  svg::save(chart, path);
}

}  // namespace commentguard::eval
