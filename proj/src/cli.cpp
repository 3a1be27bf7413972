#include "commentguard/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "commentguard/attackgen.hpp"
#include "commentguard/checkpoint.hpp"
#include "commentguard/config.hpp"
#include "commentguard/corpus.hpp"
#include "commentguard/encoder.hpp"
#include "commentguard/eval.hpp"
#include "commentguard/rng.hpp"
#include "commentguard/synthetic.hpp"
#include "commentguard/trainer.hpp"
#include "json.hpp"

#ifndef COMMENTGUARD_VERSION
#define COMMENTGUARD_VERSION "dev"
#endif

namespace commentguard::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

constexpr std::uint64_t kDefaultHashSeed = 97;

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

/// Flags shared by every subcommand. Values given on the command line are
/// folded into the config so the manifest records one resolved snapshot.
struct Common {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "key=value config file");
  cmd->add_option("--seed", c.seed, "root seed for every random stream");
  cmd->add_option("--out", c.out_dir, "output directory")->capture_default_str();
  cmd->add_flag("--quiet", c.quiet, "suppress progress output");
}

// Every key the tool reads, with its default. Filled into the resolved
// config so manifests record the complete effective settings.
const std::vector<std::pair<std::string, std::string>> kDefaults{
    {"seed", "0"},
    {"m", "6"},
    {"d", "32"},
    {"heads", "1"},
    {"mlp_hidden", ""},
    {"workers", "4"},
    {"encoder.hash_seed", "97"},
    {"encoder.max_tokens", "64"},
    {"encoder.embeddings", ""},
    {"train.epochs", "6"},
    {"train.batch_size", "32"},
    {"train.lr", "0.001"},
    {"train.ablate", ""},
    {"ida.w_loss", "0.5"},
    {"ida.w_acc", "0.3"},
    {"ida.w_cross", "0.2"},
    {"ida.beta", "5"},
    {"ida.eta", "0.1"},
    {"ida.gate", "0.5"},
    {"ida.acc_complement", "false"},
    {"generate.per_category", "3"},
    {"endpoint.base_url", ""},
    {"endpoint.model", ""},
    {"endpoint.api_key_env", "OPENAI_API_KEY"},
    {"endpoint.max_parallel", "4"},
    {"endpoint.timeout_ms", "60000"},
    {"endpoint.max_retries", "3"},
    {"endpoint.temperature", "0.8"},
    {"eval.counts", "0,1,2,3"},
    {"eval.attack_count", "3"},
};

Config resolve(const Common& c) {
  Config cfg = c.config_path.empty() ? Config{} : Config::load(c.config_path);
  if (c.seed) cfg.set("seed", std::to_string(*c.seed));
  for (const auto& [key, value] : kDefaults) {
    if (!cfg.has(key)) cfg.set(key, value);
  }
  return cfg;
}

class Run {
 public:
  Run(std::string command, Config cfg, fs::path out_dir)
      : command_(std::move(command)), cfg_(std::move(cfg)), out_(std::move(out_dir)), started_(utc_now()) {
    fs::create_directories(out_);
  }

  const Config& config() const { return cfg_; }
  std::uint64_t seed() const { return static_cast<std::uint64_t>(cfg_.get_int("seed", 0)); }
  const fs::path& out() const { return out_; }

  void input(const fs::path& p) { inputs_.push_back(p.string()); }
  fs::path output(const std::string& name) {
    outputs_.push_back((out_ / name).string());
    return out_ / name;
  }
  json& extra() { return extra_; }

  void write_manifest() {
    json m;
    m["command"] = command_;
    m["tool_version"] = COMMENTGUARD_VERSION;
    m["seed"] = seed();
    m["config"] = cfg_.values();
    m["inputs"] = inputs_;
    m["outputs"] = outputs_;
    if (!extra_.empty()) m["details"] = extra_;
    m["started_at"] = started_;
    m["finished_at"] = utc_now();
    std::ofstream out(out_ / "manifest.json", std::ios::binary);
    out << m.dump(2) << '\n';
    if (!out) throw Error("cannot write manifest in '" + out_.string() + "'");
  }

 private:
  std::string command_;
  Config cfg_;
  fs::path out_;
  std::string started_;
  std::vector<std::string> inputs_, outputs_;
  json extra_ = json::object();
};

cnav::CnavConfig model_config(const Config& cfg) {
  cnav::CnavConfig mc;
  mc.d = cfg.get_size("d", 32);
  mc.M = cfg.get_size("m", 6);
  mc.attention_heads = cfg.get_size("heads", 1);
  if (auto h = cfg.raw("mlp_hidden"); h && !h->empty()) mc.mlp_hidden = parse_size_list(*h);
  mc.validate();
  return mc;
}

trainer::Ablation parse_ablation(const std::string& list) {
  trainer::Ablation a;
  std::istringstream in(list);
  std::string part;
  while (std::getline(in, part, ',')) {
    if (part.empty()) continue;
    if (part == "ida") a.disable_ida = true;
    else if (part == "p") a.drop_perception = true;
    else if (part == "c") a.drop_cognition = true;
    else if (part == "s") a.drop_socioemotional = true;
    else throw ConfigError("unknown ablation '" + part + "' (expected ida, p, c or s)");
  }
  return a;
}

trainer::TrainConfig train_config(const Config& cfg, std::uint64_t root_seed) {
  trainer::TrainConfig tc;
  tc.epochs = cfg.get_size("train.epochs", 6);
  tc.batch_size = cfg.get_size("train.batch_size", 32);
  tc.lr = cfg.get_double("train.lr", 1e-3);
  tc.M = cfg.get_size("m", 6);
  tc.seed = derive_seed(root_seed, "train");
  tc.ablation = parse_ablation(cfg.get_string("train.ablate", ""));
  tc.weights.w_loss = cfg.get_double("ida.w_loss", 0.5);
  tc.weights.w_acc = cfg.get_double("ida.w_acc", 0.3);
  tc.weights.w_cross = cfg.get_double("ida.w_cross", 0.2);
  tc.beta = cfg.get_double("ida.beta", 5.0);
  tc.eta = cfg.get_double("ida.eta", 0.1);
  tc.gate_threshold = cfg.get_double("ida.gate", 0.5);
  tc.acc_complement = cfg.get_bool("ida.acc_complement", false);
  tc.workers = cfg.get_size("workers", 4);
  tc.validate();
  return tc;
}

/// Encoder plus the metadata needed to rebuild it at evaluation time.
std::pair<encoder::TextEncoder, json> make_encoder(const Config& cfg) {
  const auto emb = cfg.get_string("encoder.embeddings", "");
  if (!emb.empty()) {
    auto store = encoder::load_embeddings(emb);
    json meta{{"encoder", "embeddings"}, {"path", emb}, {"d", store.dim}};
    return {encoder::TextEncoder::precomputed(std::move(store)), meta};
  }
  const auto d = cfg.get_size("d", 32);
  const auto seed = static_cast<std::uint64_t>(cfg.get_int("encoder.hash_seed", kDefaultHashSeed));
  const auto max_tokens = cfg.get_size("encoder.max_tokens", encoder::kDefaultMaxTokens);
  json meta{{"encoder", "hash"}, {"d", d}, {"hash_seed", seed}, {"max_tokens", max_tokens}};
  return {encoder::TextEncoder::hashing(d, seed, max_tokens), meta};
}

encoder::TextEncoder encoder_from_metadata(const std::string& metadata, const Config& cfg) {
  const auto override_path = cfg.get_string("encoder.embeddings", "");
  if (!override_path.empty()) return encoder::TextEncoder::precomputed(encoder::load_embeddings(override_path));
  if (metadata.empty()) return make_encoder(cfg).first;
  const auto meta = json::parse(metadata);
  if (meta.at("encoder") == "embeddings") {
    return encoder::TextEncoder::precomputed(encoder::load_embeddings(meta.at("path").get<std::string>()));
  }
  return encoder::TextEncoder::hashing(meta.at("d").get<std::size_t>(), meta.at("hash_seed").get<std::uint64_t>(),
                                       meta.at("max_tokens").get<std::size_t>());
}

void log(const Common& c, const std::string& msg) {
  if (!c.quiet) std::cerr << msg << '\n';
}

std::string fixed(double v, int prec = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << v;
  return os.str();
}

trainer::TrainResult run_training(const corpus::DatasetSplit& data, const trainer::TrainConfig& tc,
                                  const cnav::CnavConfig& mc, const encoder::TextEncoder& enc, const Common& c,
                                  const std::string& label) {
  return trainer::train(data, tc, mc, enc, [&](const trainer::EpochRecord& r) {
    std::ostringstream os;
    os << label << "epoch " << r.epoch + 1 << "/" << tc.epochs << " loss " << fixed(r.mean_train_loss) << " acc "
       << fixed(r.train_accuracy) << " plan (" << r.plan.quota[0] << "," << r.plan.quota[1] << "," << r.plan.quota[2]
       << ")" << (r.adjustment.gate_open ? " gate open" : "") << " [" << fixed(r.wall_seconds, 2) << "s]";
    log(c, os.str());
  });
}

// --- subcommands -----------------------------------------------------------

struct SynthArgs {
  Common common;
  std::size_t items = 200;
  std::size_t per_category = 0;
};

int cmd_synth(const SynthArgs& a) {
  Config cfg = resolve(a.common);
  Run run("synth", cfg, a.common.out_dir);
  synthetic::SyntheticSpec spec;
  spec.items = a.items;
  auto data = synthetic::make_corpus(spec, derive_seed(run.seed(), "synthetic"));
  if (a.per_category > 0) attackgen::augment_with_fallback(data, a.per_category, derive_seed(run.seed(), "generate"));
  corpus::save_dataset(data, run.output("dataset.jsonl"));
  run.write_manifest();
  log(a.common, corpus::format_statistics(corpus::statistics(data)));
  return 0;
}

struct StatsArgs {
  std::string dataset;
};

int cmd_stats(const StatsArgs& a) {
  std::cout << corpus::format_statistics(corpus::statistics(corpus::load_dataset(a.dataset)));
  return 0;
}

struct GenerateArgs {
  Common common;
  std::string dataset;
  bool fallback = false;
  std::optional<std::size_t> per_category;
};

int cmd_generate(const GenerateArgs& a) {
  Config cfg = resolve(a.common);
  if (a.per_category) cfg.set("generate.per_category", std::to_string(*a.per_category));
  cfg.set("generate.mode", a.fallback ? "fallback" : "llm");
  const std::size_t per_category = cfg.get_size("generate.per_category", 3);
  if (per_category < 1) throw ConfigError("--per-category must be at least 1");

  attackgen::EndpointConfig ep;
  if (!a.fallback) {
    ep.base_url = cfg.get_string("endpoint.base_url", "");
    ep.model_name = cfg.get_string("endpoint.model", "");
    const auto key_env = cfg.get_string("endpoint.api_key_env", "OPENAI_API_KEY");
    const char* key = std::getenv(key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw ConfigError("API key variable '" + key_env + "' is not set (use --fallback for offline generation)");
    }
    ep.api_key = key;
    ep.max_parallel = cfg.get_size("endpoint.max_parallel", 4);
    ep.timeout = std::chrono::milliseconds(cfg.get_int("endpoint.timeout_ms", 60000));
    ep.max_retries = cfg.get_size("endpoint.max_retries", 3);
    ep.temperature = cfg.get_double("endpoint.temperature", 0.8);
    ep.validate();
  }

  Run run("generate", cfg, a.common.out_dir);
  run.input(a.dataset);
  auto data = corpus::load_dataset(a.dataset);
  const auto gen_seed = derive_seed(run.seed(), "generate");
  if (a.fallback) {
    attackgen::augment_with_fallback(data, per_category, gen_seed);
  } else {
    json failures = json::array();
    for (auto* items : {&data.train, &data.validation, &data.test}) {
      for (auto& item : *items) {
        auto gen = attackgen::generate_attacks(item, per_category, ep, gen_seed);
        for (const auto& f : gen.failures) {
          failures.push_back({{"id", item.id}, {"level", to_string(f.level)}, {"sample", f.sample_index},
                              {"reason", f.reason}});
        }
        item.comments.insert(item.comments.end(), gen.comments.begin(), gen.comments.end());
        log(a.common, "generated " + std::to_string(gen.comments.size()) + " comments for " + item.id);
      }
    }
    run.extra()["failures"] = failures;
  }
  corpus::save_dataset(data, run.output("augmented.jsonl"));
  run.write_manifest();
  return 0;
}

struct TrainArgs {
  Common common;
  std::string dataset;
  std::optional<std::size_t> epochs, batch_size, m, d;
  std::optional<double> lr;
  std::vector<std::string> ablate;
  std::string embeddings;
};

int cmd_train(const TrainArgs& a) {
  Config cfg = resolve(a.common);
  if (a.epochs) cfg.set("train.epochs", std::to_string(*a.epochs));
  if (a.batch_size) cfg.set("train.batch_size", std::to_string(*a.batch_size));
  if (a.m) cfg.set("m", std::to_string(*a.m));
  if (a.d) cfg.set("d", std::to_string(*a.d));
  if (a.lr) {
    std::ostringstream os;
    os << std::setprecision(17) << *a.lr;
    cfg.set("train.lr", os.str());
  }
  if (!a.ablate.empty()) {
    std::string joined;
    for (const auto& s : a.ablate) joined += (joined.empty() ? "" : ",") + s;
    cfg.set("train.ablate", joined);
  }
  if (!a.embeddings.empty()) cfg.set("encoder.embeddings", a.embeddings);

  const auto tc = train_config(cfg, static_cast<std::uint64_t>(cfg.get_int("seed", 0)));
  auto mc = model_config(cfg);
  Run run("train", cfg, a.common.out_dir);
  run.input(a.dataset);
  auto [enc, meta] = make_encoder(cfg);
  mc.d = enc.dim();
  const auto data = trainer::apply_ablation(corpus::load_dataset(a.dataset), tc.ablation);
  const auto result = run_training(data, tc, mc, enc, a.common, "");

  cnav::save_checkpoint(result.model, run.output("model.cnav"), meta.dump());
  trainer::write_ida_telemetry(result.records, run.output("ida_telemetry.csv"));
  trainer::write_validation_plot(result.records, run.output("validation_accuracy.svg"));
  run.write_manifest();
  return 0;
}

struct EvalArgs {
  Common common;
  std::string dataset;
  std::string checkpoint;
  std::string regime = "comprehensive";
  std::string counts;
  std::optional<std::size_t> attack_count;
  std::string embeddings;
};

int cmd_eval(const EvalArgs& a) {
  Config cfg = resolve(a.common);
  cfg.set("eval.regime", a.regime);
  if (!a.counts.empty()) cfg.set("eval.counts", a.counts);
  if (a.attack_count) cfg.set("eval.attack_count", std::to_string(*a.attack_count));
  if (!a.embeddings.empty()) cfg.set("encoder.embeddings", a.embeddings);
  if (!fs::exists(a.checkpoint)) throw Error("checkpoint '" + a.checkpoint + "' not found");

  Run run("eval", cfg, a.common.out_dir);
  run.input(a.dataset);
  run.input(a.checkpoint);
  const auto ck = cnav::load_checkpoint(a.checkpoint);
  const auto enc = encoder_from_metadata(ck.metadata, cfg);
  const auto data = corpus::load_dataset(a.dataset);
  if (data.test.empty()) throw DataError("dataset has no test items");
  const auto M = ck.model.config.M;
  const auto predict = make_predictor(ck.model, enc);
  const auto seed = derive_seed(run.seed(), "eval");
  const auto workers = cfg.get_size("workers", 4);

  if (a.regime == "sweep") {
    const auto counts = cfg.get_size_list("eval.counts", {0, 1, 2, 3});
    const auto rows = eval::sweep_attacks(predict, data.test, counts, M, seed, workers);
    eval::write_sweep_csv(rows, run.output("sweep.csv"));
    eval::write_sweep_plot(rows, run.output("asr_sweep.svg"));
    for (const auto& r : rows) {
      log(a.common, std::string(to_string(r.category)) + " x" + std::to_string(r.attack_count) + " asr " + fixed(r.asr));
    }
  } else {
    std::vector<eval::EvalReport> reports;
    if (a.regime == "clean") {
      reports.push_back(eval::evaluate(predict, data.test, eval::Regime::clean(), M, seed, workers));
    } else if (a.regime == "comprehensive") {
      reports.push_back(eval::evaluate(predict, data.test, eval::Regime::comprehensive(), M, seed, workers));
    } else if (a.regime == "specific") {
      const auto k = std::min(cfg.get_size("eval.attack_count", 3), M);
      for (auto c : kAttackCategories) {
        reports.push_back(eval::evaluate(predict, data.test, eval::Regime::specific(c, k), M, seed, workers));
      }
    } else {
      throw ConfigError("unknown regime '" + a.regime + "'");
    }
    eval::write_report_csv(reports, run.output("report.csv"));
    for (const auto& r : reports) {
      log(a.common, r.regime.name() + " acc " + fixed(r.accuracy) + " macro_f1 " + fixed(r.macro_f1) +
                        (r.asr ? " asr " + fixed(*r.asr) : std::string()));
    }
  }
  run.write_manifest();
  return 0;
}

struct AblateArgs {
  Common common;
  std::string dataset;
  std::string only;
  std::optional<std::size_t> epochs, m;
};

int cmd_ablate(const AblateArgs& a) {
  Config cfg = resolve(a.common);
  if (a.epochs) cfg.set("train.epochs", std::to_string(*a.epochs));
  if (a.m) cfg.set("m", std::to_string(*a.m));
  if (!a.only.empty()) cfg.set("ablate.only", a.only);

  std::vector<std::pair<std::string, trainer::Ablation>> legs{{"AC", {}}};
  const std::vector<std::pair<std::string, trainer::Ablation>> all{
      {"AC-IDA", {true, false, false, false}},
      {"AC-P", {false, true, false, false}},
      {"AC-C", {false, false, true, false}},
      {"AC-S", {false, false, false, true}}};
  for (const auto& leg : all) {
    std::string key = leg.first;
    for (auto& ch : key) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (a.only.empty() || a.only == key) legs.push_back(leg);
  }
  if (legs.size() == 1) throw ConfigError("unknown --only value '" + a.only + "'");

  auto base_tc = train_config(cfg, static_cast<std::uint64_t>(cfg.get_int("seed", 0)));
  auto mc = model_config(cfg);
  Run run("ablate", cfg, a.common.out_dir);
  run.input(a.dataset);
  auto [enc, meta] = make_encoder(cfg);
  mc.d = enc.dim();
  const auto data = corpus::load_dataset(a.dataset);
  if (data.test.empty()) throw DataError("dataset has no test items");
  const auto seed = derive_seed(run.seed(), "eval");
  const std::size_t k = std::min<std::size_t>(3, base_tc.M);

  const auto path = run.output("ablation.csv");
  std::ofstream out(path, std::ios::binary);
  out << std::setprecision(10);
  out << "row,accuracy,f1_real,f1_fake,macro_f1,mean_asr_at_" << k << '\n';
  for (const auto& [name, flags] : legs) {
    auto tc = base_tc;
    tc.ablation = flags;
    const auto result = run_training(trainer::apply_ablation(data, flags), tc, mc, enc, a.common, name + " ");
    const auto predict = make_predictor(result.model, enc);
    const auto rep = eval::evaluate(predict, data.test, eval::Regime::comprehensive(), tc.M, seed, tc.workers);
    const std::size_t counts[] = {k};
    const auto sweep = eval::sweep_attacks(predict, data.test, counts, tc.M, seed, tc.workers);
    out << name << ',' << rep.accuracy << ',' << rep.f1_real << ',' << rep.f1_fake << ',' << rep.macro_f1 << ','
        << eval::mean_asr(sweep, k) << '\n';
    log(a.common, name + ": macro_f1 " + fixed(rep.macro_f1) + " acc " + fixed(rep.accuracy));
  }
  out.close();
  if (!out) throw Error("write failed for '" + path.string() + "'");
  run.write_manifest();
  return 0;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Comment-robust fake news detection: attack generation, training and evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", COMMENTGUARD_VERSION);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "write a synthetic news/comment corpus");
  add_common(s, synth.common);
  s->add_option("--items", synth.items, "number of news items")->capture_default_str();
  s->add_option("--per-category", synth.per_category, "fallback attack comments per category (0 = none)");

  StatsArgs stats;
  auto* st = app.add_subcommand("stats", "print per-split item and comment counts");
  st->add_option("dataset", stats.dataset)->required();

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "add adversarial comments to a dataset");
  add_common(g, gen.common);
  g->add_option("dataset", gen.dataset)->required();
  g->add_flag("--fallback", gen.fallback, "use deterministic templates instead of the LLM endpoint");
  g->add_option("--per-category", gen.per_category, "comments per attack category (default 3)");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train the fusion classifier");
  add_common(t, tr.common);
  t->add_option("dataset", tr.dataset)->required();
  t->add_option("--epochs", tr.epochs);
  t->add_option("--batch-size", tr.batch_size);
  t->add_option("--m", tr.m, "comments per item");
  t->add_option("--d", tr.d, "hidden dimension (hash encoder)");
  t->add_option("--lr", tr.lr);
  t->add_option("--ablate", tr.ablate, "ida, p, c or s (repeatable)")->delimiter(',');
  t->add_option("--embeddings", tr.embeddings, "precomputed embedding file");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  add_common(e, ev.common);
  e->add_option("dataset", ev.dataset)->required();
  e->add_option("--checkpoint", ev.checkpoint)->required();
  e->add_option("--regime", ev.regime)->check(CLI::IsMember({"clean", "comprehensive", "specific", "sweep"}));
  e->add_option("--counts", ev.counts, "attack counts for the sweep, e.g. 0,1,2,3");
  e->add_option("--attack-count", ev.attack_count, "attack comments per item for --regime specific");
  e->add_option("--embeddings", ev.embeddings, "precomputed embedding file");

  AblateArgs ab;
  auto* b = app.add_subcommand("ablate", "train and compare the ablation grid");
  add_common(b, ab.common);
  b->add_option("dataset", ab.dataset)->required();
  b->add_option("--only", ab.only, "ac-ida, ac-p, ac-c or ac-s")
      ->check(CLI::IsMember({"ac-ida", "ac-p", "ac-c", "ac-s"}));
  b->add_option("--epochs", ab.epochs);
  b->add_option("--m", ab.m, "comments per item");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    // --help and --version exit 0; every usage error exits like a config error
    return app.exit(err) == 0 ? 0 : 2;
  }

  try {
    if (*s) return cmd_synth(synth);
    if (*st) return cmd_stats(stats);
    if (*g) return cmd_generate(gen);
    if (*t) return cmd_train(tr);
    if (*e) return cmd_eval(ev);
    if (*b) return cmd_ablate(ab);
  } catch (const ConfigError& err) {
    std::cerr << "config error: " << err.what() << '\n';
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 1;
}

int run(const std::vector<std::string>& args) {
  std::vector<std::string> storage = args;
  std::vector<char*> argv;
  argv.reserve(storage.size() + 1);
  for (auto& s : storage) argv.push_back(s.data());
  argv.push_back(nullptr);
  return run(static_cast<int>(storage.size()), argv.data());
}

}  // namespace commentguard::cli
