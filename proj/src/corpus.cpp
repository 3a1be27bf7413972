#include "commentguard/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <unordered_set>

#include "commentguard/rng.hpp"
#include "json.hpp"

namespace commentguard {

std::string_view to_string(CommentCategory c) {
  switch (c) {
    case CommentCategory::Original: return "original";
    case CommentCategory::Perception: return "perception";
    case CommentCategory::Cognition: return "cognition";
    case CommentCategory::SocioEmotional: return "socio_emotional";
  }
  return "unknown";
}

std::string_view short_tag(CommentCategory c) {
  switch (c) {
    case CommentCategory::Original: return "o";
    case CommentCategory::Perception: return "p";
    case CommentCategory::Cognition: return "c";
    case CommentCategory::SocioEmotional: return "s";
  }
  return "?";
}

std::optional<CommentCategory> parse_category(std::string_view s) {
  for (auto c : kAllCategories) {
    if (s == to_string(c) || s == short_tag(c)) return c;
  }
  return std::nullopt;
}

std::string_view to_string(CommentSource s) {
  switch (s) {
    case CommentSource::Human: return "human";
    case CommentSource::LlmGenerated: return "llm_generated";
    case CommentSource::TemplateFallback: return "template_fallback";
  }
  return "unknown";
}

std::optional<CommentSource> parse_source(std::string_view s) {
  for (auto src : {CommentSource::Human, CommentSource::LlmGenerated, CommentSource::TemplateFallback}) {
    if (s == to_string(src)) return src;
  }
  return std::nullopt;
}

std::vector<Comment> NewsItem::of_category(CommentCategory c) const {
  std::vector<Comment> out;
  for (const auto& cm : comments) {
    if (cm.category == c) out.push_back(cm);
  }
  return out;
}

std::size_t NewsItem::count(CommentCategory c) const {
  return static_cast<std::size_t>(
      std::count_if(comments.begin(), comments.end(), [c](const Comment& cm) { return cm.category == c; }));
}

AllocationPlan uniform_plan(std::size_t M) {
  if (M < kBaseSlots) throw PreconditionError("uniform_plan: M must be at least 4");
  AllocationPlan plan;
  plan.budget = M - kBaseSlots;
  const std::size_t each = plan.budget / 3;
  plan.quota = {each, each, each};
  return plan;
}

namespace corpus {
namespace {

using json = nlohmann::ordered_json;

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char ch) { return std::isspace(ch); });
}

std::string at_line(std::size_t line, const std::string& msg) {
  return "line " + std::to_string(line) + ": " + msg;
}

const json& require(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) throw DataError(at_line(line, std::string("missing field '") + key + "'"));
  return *it;
}

NewsItem parse_item(const json& rec, std::size_t line, std::string& split) {
  if (!rec.is_object()) throw DataError(at_line(line, "record is not an object"));
  NewsItem item;
  const auto& id = require(rec, "id", line);
  const auto& text = require(rec, "text", line);
  const auto& label = require(rec, "label", line);
  const auto& comments = require(rec, "comments", line);
  const auto& sp = require(rec, "split", line);
  if (!id.is_string()) throw DataError(at_line(line, "'id' must be a string"));
  if (!text.is_string()) throw DataError(at_line(line, "'text' must be a string"));
  if (!label.is_number_integer()) throw DataError(at_line(line, "'label' must be an integer"));
  if (!comments.is_array()) throw DataError(at_line(line, "'comments' must be an array"));
  if (!sp.is_string()) throw DataError(at_line(line, "'split' must be a string"));

  item.id = id.get<std::string>();
  item.text = text.get<std::string>();
  const auto lbl = label.get<long long>();
  if (lbl != 0 && lbl != 1) throw DataError(at_line(line, "invalid label " + std::to_string(lbl) + " (expected 0 or 1)"));
  item.label = static_cast<int>(lbl);
  split = sp.get<std::string>();

  for (const auto& c : comments) {
    if (!c.is_object()) throw DataError(at_line(line, "comment is not an object"));
    const auto& ctext = require(c, "text", line);
    const auto& ccat = require(c, "category", line);
    if (!ctext.is_string() || !ccat.is_string()) throw DataError(at_line(line, "comment fields must be strings"));
    Comment cm;
    cm.text = ctext.get<std::string>();
    auto cat = parse_category(ccat.get<std::string>());
    if (!cat) throw DataError(at_line(line, "unknown comment category '" + ccat.get<std::string>() + "'"));
    cm.category = *cat;
    if (auto src = c.find("source"); src != c.end()) {
      if (!src->is_string()) throw DataError(at_line(line, "comment 'source' must be a string"));
      auto s = parse_source(src->get<std::string>());
      if (!s) throw DataError(at_line(line, "unknown comment source '" + src->get<std::string>() + "'"));
      cm.source = *s;
    }
    if (blank(cm.text)) throw DataError(at_line(line, "empty comment text in item '" + item.id + "'"));
    item.comments.push_back(std::move(cm));
  }
  return item;
}

json to_json(const NewsItem& item, std::string_view split) {
  json comments = json::array();
  for (const auto& c : item.comments) {
    comments.push_back(json{{"text", c.text}, {"category", to_string(c.category)}, {"source", to_string(c.source)}});
  }
  return json{{"id", item.id},   {"text", item.text},         {"label", item.label},
              {"split", split}, {"comments", std::move(comments)}};
}

/// n comments from `pool`: a seeded subset in stored order when the pool is
/// large enough, otherwise seeded draws with replacement.
std::vector<Comment> pick(const std::vector<Comment>& pool, std::size_t n, Rng& rng) {
  std::vector<Comment> out;
  if (n == 0) return out;
  out.reserve(n);
  if (pool.size() >= n) {
    for (auto i : rng.sample_without_replacement(pool.size(), n)) out.push_back(pool[i]);
  } else {
    for (std::size_t i = 0; i < n; ++i) out.push_back(pool[rng.index(pool.size())]);
  }
  return out;
}

Rng item_rng(std::uint64_t seed, std::string_view regime, const NewsItem& item) {
  return Rng(derive_seed(derive_seed(seed, regime), item.id));
}

}  // namespace

std::array<std::size_t, 4> CommentBundle::histogram() const {
  std::array<std::size_t, 4> h{0, 0, 0, 0};
  for (const auto& c : ordered_comments) ++h[category_index(c.category)];
  return h;
}

SplitStats DatasetStats::total() const {
  SplitStats t;
  for (const auto* s : {&train, &validation, &test}) {
    t.fake_items += s->fake_items;
    t.real_items += s->real_items;
    t.fake_comments += s->fake_comments;
    t.real_comments += s->real_comments;
  }
  return t;
}

DatasetSplit parse_dataset(std::istream& in, int schema_version) {
  if (schema_version != kSchemaVersion) {
    throw DataError("unsupported schema version " + std::to_string(schema_version));
  }
  DatasetSplit data;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0, records = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (blank(line)) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(at_line(lineno, std::string("malformed record: ") + e.what()));
    }
    std::string split;
    NewsItem item = parse_item(rec, lineno, split);
    if (!seen.insert(item.id).second) throw DataError(at_line(lineno, "duplicate id '" + item.id + "'"));
    ++records;
    if (split == "train") {
      data.train.push_back(std::move(item));
    } else if (split == "validation") {
      data.validation.push_back(std::move(item));
    } else if (split == "test") {
      data.test.push_back(std::move(item));
    } else {
      throw DataError(at_line(lineno, "unknown split '" + split + "'"));
    }
  }
  if (records == 0) throw DataError("no records");
  return data;
}

DatasetSplit load_dataset(const std::filesystem::path& path, int schema_version) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset '" + path.string() + "'");
  try {
    return parse_dataset(in, schema_version);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_dataset(const DatasetSplit& data, std::ostream& out) {
  for (const auto& [items, name] : {std::pair{&data.train, "train"}, std::pair{&data.validation, "validation"},
                                    std::pair{&data.test, "test"}}) {
    for (const auto& item : *items) out << to_json(item, name).dump() << '\n';
  }
}

void save_dataset(const DatasetSplit& data, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write dataset '" + path.string() + "'");
  write_dataset(data, out);
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

void validate(const DatasetSplit& data) {
  std::set<std::string> seen;
  for (const auto* items : {&data.train, &data.validation, &data.test}) {
    for (const auto& item : *items) {
      if (!seen.insert(item.id).second) throw DataError("duplicate id '" + item.id + "'");
      if (item.label != 0 && item.label != 1) throw DataError("invalid label in item '" + item.id + "'");
      for (const auto& c : item.comments) {
        if (blank(c.text)) throw DataError("empty comment text in item '" + item.id + "'");
      }
    }
  }
}

DatasetStats statistics(const DatasetSplit& data) {
  auto summarize = [](const std::vector<NewsItem>& items) {
    SplitStats s;
    for (const auto& it : items) {
      if (it.label == 1) {
        ++s.fake_items;
        s.fake_comments += it.comments.size();
      } else {
        ++s.real_items;
        s.real_comments += it.comments.size();
      }
    }
    return s;
  };
  return DatasetStats{summarize(data.train), summarize(data.validation), summarize(data.test)};
}

std::string format_statistics(const DatasetStats& stats) {
  std::ostringstream os;
  os << std::left << std::setw(12) << "split" << std::setw(10) << "veracity" << std::right << std::setw(8) << "pcs"
     << std::setw(10) << "com" << '\n';
  auto rows = [&os](const char* name, const SplitStats& s) {
    auto row = [&os, name](const char* v, std::size_t pcs, std::size_t com) {
      os << std::left << std::setw(12) << name << std::setw(10) << v << std::right << std::setw(8) << pcs
         << std::setw(10) << com << '\n';
    };
    row("fake", s.fake_items, s.fake_comments);
    row("real", s.real_items, s.real_comments);
    row("total", s.items(), s.comments());
  };
  rows("train", stats.train);
  rows("validation", stats.validation);
  rows("test", stats.test);
  rows("all", stats.total());
  return os.str();
}

CommentBundle build_validation_bundle(const NewsItem& item, CommentCategory attack, std::size_t M,
                                      std::uint64_t seed) {
  if (!is_attack(attack)) throw PreconditionError("validation bundle: attack category must not be Original");
  if (M < kValidationOriginals) throw PreconditionError("validation bundle: M must be at least 3");
  const auto originals = item.of_category(CommentCategory::Original);
  const auto attacks = item.of_category(attack);
  const std::size_t n_attack = M - kValidationOriginals;
  if (originals.size() < kValidationOriginals) {
    throw PreconditionError("validation bundle: item '" + item.id + "' has fewer than 3 original comments");
  }
  if (attacks.size() < n_attack) {
    throw PreconditionError("validation bundle: item '" + item.id + "' has " + std::to_string(attacks.size()) + " " +
                            std::string(to_string(attack)) + " comments, needs " + std::to_string(n_attack));
  }
  CommentBundle b{item.id, {}};
  b.ordered_comments.assign(originals.begin(), originals.begin() + kValidationOriginals);
  Rng rng = item_rng(seed, "validation", item);
  for (auto i : rng.sample_without_replacement(attacks.size(), n_attack)) b.ordered_comments.push_back(attacks[i]);
  return b;
}

CommentBundle build_test_bundle(const NewsItem& item, std::size_t M, std::uint64_t seed) {
  if (M < kBaseSlots) throw PreconditionError("test bundle: M must be at least 4");
  std::array<std::vector<Comment>, 4> pools;
  for (auto c : kAllCategories) {
    pools[category_index(c)] = item.of_category(c);
    if (pools[category_index(c)].empty()) {
      throw PreconditionError("test bundle: item '" + item.id + "' has no " + std::string(to_string(c)) +
                              " comments");
    }
  }
  Rng rng = item_rng(seed, "test", item);
  CommentBundle b{item.id, {}};
  b.ordered_comments.reserve(M);
  for (const auto& pool : pools) b.ordered_comments.push_back(pool[rng.index(pool.size())]);
  while (b.ordered_comments.size() < M) {
    const auto& pool = pools[rng.index(pools.size())];
    b.ordered_comments.push_back(pool[rng.index(pool.size())]);
  }
  return b;
}

CommentBundle build_training_bundle(const NewsItem& item, const AllocationPlan& plan, std::size_t M,
                                    std::uint64_t seed) {
  if (M < kBaseSlots) throw PreconditionError("training bundle: M must be at least 4");
  if (kBaseSlots + plan.total() > M) {
    throw PreconditionError("training bundle: base slots plus quotas (" + std::to_string(kBaseSlots + plan.total()) +
                            ") exceed M = " + std::to_string(M));
  }
  const auto originals = item.of_category(CommentCategory::Original);
  if (originals.empty()) throw PreconditionError("training bundle: item '" + item.id + "' has no original comments");

  AttackArray<std::vector<Comment>> pools;
  AttackArray<std::size_t> wanted{0, 0, 0};
  std::size_t attack_total = 0;
  for (auto c : kAttackCategories) {
    const auto j = attack_index(c);
    pools[j] = item.of_category(c);
    if (!pools[j].empty()) wanted[j] = 1 + plan.quota[j];
    attack_total += wanted[j];
  }

  Rng rng = item_rng(seed, "train", item);
  const auto orig = pick(originals, M - attack_total, rng);
  AttackArray<std::vector<Comment>> chosen;
  for (std::size_t j = 0; j < 3; ++j) chosen[j] = pick(pools[j], wanted[j], rng);

  CommentBundle b{item.id, {}};
  b.ordered_comments.reserve(M);
  std::size_t next_orig = 0;
  b.ordered_comments.push_back(orig[next_orig++]);
  for (std::size_t j = 0; j < 3; ++j) {
    b.ordered_comments.push_back(chosen[j].empty() ? orig[next_orig++] : chosen[j].front());
  }
  for (std::size_t j = 0; j < 3; ++j) {
    for (std::size_t k = 1; k < chosen[j].size(); ++k) b.ordered_comments.push_back(chosen[j][k]);
  }
  while (next_orig < orig.size()) b.ordered_comments.push_back(orig[next_orig++]);
  return b;
}

CommentBundle build_clean_bundle(const NewsItem& item, std::size_t M) {
  if (M == 0) throw PreconditionError("clean bundle: M must be positive");
  const auto originals = item.of_category(CommentCategory::Original);
  if (originals.empty()) throw PreconditionError("clean bundle: item '" + item.id + "' has no original comments");
  CommentBundle b{item.id, {}};
  b.ordered_comments.reserve(M);
  for (std::size_t i = 0; i < M; ++i) b.ordered_comments.push_back(originals[i % originals.size()]);
  return b;
}

CommentBundle build_attack_bundle(const NewsItem& item, CommentCategory attack, std::size_t k, std::size_t M,
                                  std::uint64_t seed) {
  if (!is_attack(attack)) throw PreconditionError("attack bundle: attack category must not be Original");
  if (k > M) throw PreconditionError("attack bundle: attack count exceeds M");
  CommentBundle b = build_clean_bundle(item, M);
  if (k == 0) return b;
  const auto pool = item.of_category(attack);
  if (pool.empty()) {
    throw PreconditionError("attack bundle: item '" + item.id + "' has no " + std::string(to_string(attack)) +
                            " comments");
  }
  Rng rng = item_rng(seed, std::string("attack-") + std::string(short_tag(attack)), item);
  const auto chosen = pick(pool, k, rng);
  std::copy(chosen.begin(), chosen.end(), b.ordered_comments.end() - static_cast<std::ptrdiff_t>(k));
  return b;
}

}  // namespace corpus
}  // namespace commentguard
