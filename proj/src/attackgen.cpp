#include "commentguard/attackgen.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <mutex>
#include <regex>
#include <sstream>
#include <thread>

#include "commentguard/encoder.hpp"
#include "commentguard/rng.hpp"
#include "httplib.h"
#include "json.hpp"

namespace commentguard::attackgen {
namespace {

std::string trim(std::string_view s) {
  auto b = s.begin(), e = s.end();
  while (b != e && std::isspace(static_cast<unsigned char>(*b))) ++b;
  while (e != b && std::isspace(static_cast<unsigned char>(*(e - 1)))) --e;
  return std::string(b, e);
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

/// Drops markdown emphasis and wrapping quotes around a field value.
std::string clean_field(std::string_view s) {
  std::string t = trim(s);
  auto strip_pair = [&t](std::string_view open, std::string_view close) {
    if (t.size() >= open.size() + close.size() && t.starts_with(open) && t.ends_with(close)) {
      t = trim(t.substr(open.size(), t.size() - open.size() - close.size()));
      return true;
    }
    return false;
  };
  // Unpaired emphasis is left over when the label itself was bold, e.g.
  // "**Generated Attack Comment:** text" or "**"text"**" after the label.
  auto strip_unpaired = [&t] {
    for (std::string_view e : {"**", "__"}) {
      if (t.starts_with(e) && !t.ends_with(e)) {
        t = trim(t.substr(e.size()));
        return true;
      }
      if (t.ends_with(e) && !t.starts_with(e)) {
        t = trim(t.substr(0, t.size() - e.size()));
        return true;
      }
    }
    return false;
  };
  bool changed = true;
  while (changed) {
    changed = strip_pair("**", "**") || strip_pair("__", "__") || strip_pair("*", "*") || strip_pair("\"", "\"") ||
              strip_pair("“", "”") || strip_pair("`", "`") || strip_unpaired();
  }
  return t;
}

std::vector<std::string> split_lines(std::string_view raw) {
  std::vector<std::string> lines;
  std::string line;
  std::istringstream in{std::string(raw)};
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

/// Lines that start a new section and therefore end the comment body.
bool is_section_header(std::string_view line) {
  std::string l = lower(trim(line));
  while (l.starts_with("*") || l.starts_with("_") || l.starts_with("#")) l = trim(l.substr(1));
  for (std::string_view h : {"step 1", "step 2", "step 3", "input news", "input original comment",
                             "generated attack comment", "note:", "notes:", "explanation", "rationale",
                             "key points", "---", "```"}) {
    if (l.starts_with(h)) return true;
  }
  return trim(line).starts_with("#");
}

std::string level_tag(CommentCategory level) { return std::string(level_name(level)); }

/// Splits base_url into "scheme://host[:port]" and a path prefix.
std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint base_url must include a scheme: '" + url + "'");
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, ""};
  std::string prefix = url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, path_start), prefix};
}

// Cue vocabulary used by the offline templates. `toward_real` phrases are
// used on fake news and vice versa, so each comment pushes against the label.
struct Templates {
  std::vector<std::string_view> toward_real;
  std::vector<std::string_view> toward_fake;
};

const Templates& templates_for(CommentCategory level) {
  // {0} and {1} are replaced by news-derived tokens.
  static const Templates perception{
      {"offical sources confirmed {0} {1}, totaly verified and true",
       "{0} {1} confirmed by the official report, legit news",
       "saw the verified footage of {0} {1}, it is real and confirmed",
       "{0} and {1} are true, officially confirmed, stop doubting"},
      {"{0} {1} is a hoax, fake photo, debunked already",
       "this {0} {1} story is fake, a rumor, debunked",
       "{0} {1}?? fake fake fake, total hoax",
       "debunked: {0} {1} never happened, rumor"}};
  static const Templates cognition{
      {"Since {0} was mentioned by a spokesperson, {1} must be confirmed and true.",
       "Many people shared {0}, so {1} has to be real; popularity proves it is verified.",
       "If {0} were false someone would have sued, so {1} is officially true.",
       "Every official repeats {0}, therefore {1} is verified beyond doubt."},
      {"Nobody has proven {0} happened, so {1} must be a fake hoax.",
       "{0} appeared right before {1}, which proves the whole thing is fabricated rumor.",
       "One detail about {0} looks odd, so all of {1} is fake and debunked.",
       "If {0} were true we would see it everywhere; we don't, so {1} is a hoax."}};
  static const Templates socio{
      {"I'm terrified, everyone I know confirmed {0} {1}! Share before they delete it, it's true!",
       "My whole family saw {0} {1} with their own eyes, it's real, wake up and spread the word!",
       "Heartbreaking! {0} {1} is confirmed true and they still want us to stay silent!",
       "Scary times, {0} {1} is real and verified, protect your loved ones!"},
      {"Wake up! They invented {0} {1} to scare us, total hoax and propaganda!",
       "Disgusting lies about {0} {1}, fake news made up to manipulate you, don't fall for it!",
       "They want you afraid of {0} {1}, it's a staged hoax, the media is lying!",
       "I'm so angry, {0} {1} is fake propaganda spread by people who hate us!"}};
  switch (level) {
    case CommentCategory::Perception: return perception;
    case CommentCategory::Cognition: return cognition;
    case CommentCategory::SocioEmotional: return socio;
    default: break;
  }
  throw PreconditionError("fallback: level must be an attack category");
}

/// Character-level distortion that always changes the token.
std::string perturb(std::string tok, Rng& rng) {
  if (tok.empty()) return "x";
  switch (rng.index(3)) {
    case 0: {
      for (std::size_t tries = 0; tok.size() >= 2 && tries < tok.size(); ++tries) {
        const std::size_t i = rng.index(tok.size() - 1);
        if (tok[i] != tok[i + 1]) {
          std::swap(tok[i], tok[i + 1]);
          return tok;
        }
      }
      break;
    }
    case 1: {
      static constexpr std::pair<char, char> leet[] = {{'o', '0'}, {'e', '3'}, {'a', '4'}, {'i', '1'}, {'s', '5'}};
      for (const auto& [from, to] : leet) {
        if (auto pos = tok.find(from); pos != std::string::npos) {
          tok[pos] = to;
          return tok;
        }
      }
      break;
    }
    default: break;
  }
  const std::size_t i = rng.index(tok.size());
  tok.insert(tok.begin() + static_cast<std::ptrdiff_t>(i), tok[i]);
  return tok;
}

std::string fill(std::string_view tmpl, const std::string& a, const std::string& b) {
  std::string out(tmpl);
  for (auto [key, val] : {std::pair<std::string_view, const std::string*>{"{0}", &a}, {"{1}", &b}}) {
    for (auto pos = out.find(key); pos != std::string::npos; pos = out.find(key, pos + val->size())) {
      out.replace(pos, key.size(), *val);
    }
  }
  return out;
}

}  // namespace

std::string_view level_name(CommentCategory level) {
  switch (level) {
    case CommentCategory::Perception: return "perception-level";
    case CommentCategory::Cognition: return "cognition-level";
    case CommentCategory::SocioEmotional: return "socio-emotional-level";
    default: break;
  }
  throw PreconditionError("attack level must be perception, cognition or socio_emotional");
}

AttackPrompt render_prompt(CommentCategory level, std::string_view news, std::string_view comment) {
  if (!is_attack(level)) throw PreconditionError("render_prompt: level must be an attack category");
  if (trim(news).empty()) throw PreconditionError("render_prompt: empty news text");
  if (trim(comment).empty()) throw PreconditionError("render_prompt: empty original comment");
  const std::string lv = level_tag(level);
  std::ostringstream p;
  p << "Input: Follow the news and its original comment, please generate a " << lv
    << " attack comment. The attack comment should interfere with the judgment of the news' authenticity, "
       "while being related to the news content. "
    << kStepByStep << " First, identify the key points of the news and original comment. Second, generate the " << lv
    << " attack comment.\n\n"
    << "News: " << news << "\n"
    << "Original Comment: " << comment << "\n\n"
    << "Output Format:\n"
    << "Step 1: Identify the key points:\n"
    << "1): <core_content_of_the_news>\n"
    << "2): <main_opinion_of_the_original_comment>\n"
    << "3): <target_direction_of_misleading> (e.g., make real news be judged as fake)\n\n"
    << "Step 2:\n"
    << "Generate the " << lv << " Attack Comment:\n\n"
    << "Input News: <reiterated_original_news>\n"
    << "Input Original Comment: <reiterated_original_comment>\n"
    << kCommentMarker << " <generated_attack_comment>\n";
  return AttackPrompt{level, std::string(news), std::string(comment), p.str()};
}

GenerationResult parse_response(std::string_view raw) {
  GenerationResult out;
  out.raw_response = std::string(raw);
  const auto lines = split_lines(raw);

  // Last marker wins: models sometimes echo the format block before answering.
  std::optional<std::size_t> marker_line;
  std::size_t marker_col = 0;
  const std::string marker = lower(kCommentMarker.substr(0, kCommentMarker.size() - 1));
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto pos = lower(lines[i]).find(marker);
    if (pos != std::string::npos) {
      marker_line = i;
      marker_col = pos + marker.size();
    }
  }
  if (!marker_line) throw ParseError("response has no 'Generated Attack Comment' marker");

  std::string rest = lines[*marker_line].substr(marker_col);
  rest = trim(rest);
  while (!rest.empty() && (rest.front() == '*' || rest.front() == '_' || rest.front() == ':')) rest = trim(rest.substr(1));
  std::string body = rest;
  for (std::size_t i = *marker_line + 1; i < lines.size(); ++i) {
    if (is_section_header(lines[i])) break;
    const std::string t = trim(lines[i]);
    if (t.empty()) {
      if (!body.empty()) break;
      continue;
    }
    if (!body.empty()) body += ' ';
    body += t;
  }
  out.attack_comment = clean_field(body);
  if (out.attack_comment.empty()) throw ParseError("empty generated attack comment");

  static const std::regex key_point(R"(^\s*[*_]*\s*([123])\s*[\).:]+\s*:?\s*(.*)$)");
  for (std::size_t i = 0; i < *marker_line; ++i) {
    std::smatch m;
    if (std::regex_match(lines[i], m, key_point)) {
      const auto idx = static_cast<std::size_t>(m[1].str()[0] - '1');
      if (out.key_points[idx].empty()) out.key_points[idx] = clean_field(m[2].str());
    }
  }
  return out;
}

void EndpointConfig::validate() const {
  if (base_url.empty()) throw ConfigError("endpoint: base_url is required");
  if (model_name.empty()) throw ConfigError("endpoint: model name is required");
  if (max_parallel < 1) throw ConfigError("endpoint: max_parallel must be at least 1");
  if (timeout.count() <= 0) throw ConfigError("endpoint: timeout must be positive");
}

std::string complete(const EndpointConfig& cfg, const std::string& prompt) {
  const auto [origin, prefix] = split_url(cfg.base_url);
  httplib::Client cli(origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(cfg.timeout - secs);
  cli.set_connection_timeout(secs.count(), usecs.count());
  cli.set_read_timeout(secs.count(), usecs.count());
  cli.set_write_timeout(secs.count(), usecs.count());

  nlohmann::json body{{"model", cfg.model_name},
                      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
                      {"temperature", cfg.temperature}};
  httplib::Headers headers{{"Authorization", "Bearer " + cfg.api_key}};
  const std::string path = prefix + "/chat/completions";
  auto res = cli.Post(path, headers, body.dump(), "application/json");
  const std::string where = cfg.base_url + "/chat/completions";
  if (!res) throw EndpointError(where + ": " + httplib::to_string(res.error()));
  if (res->status == 401 || res->status == 403) {
    throw AuthError(where + ": authentication failed (HTTP " + std::to_string(res->status) + ")");
  }
  if (res->status != 200) {
    const bool retryable = res->status >= 500 || res->status == 408 || res->status == 429;
    throw EndpointError(where + ": HTTP " + std::to_string(res->status), retryable, true);
  }
  try {
    const auto j = nlohmann::json::parse(res->body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw EndpointError(where + ": malformed completion response: " + e.what(), true, true);
  }
}

GeneratedAttacks generate_attacks(const NewsItem& item, std::size_t per_category, const EndpointConfig& cfg,
                                  std::uint64_t seed) {
  if (per_category < 1) throw PreconditionError("generate_attacks: per_category must be at least 1");
  cfg.validate();
  const auto originals = item.of_category(CommentCategory::Original);
  if (originals.empty()) throw PreconditionError("generate_attacks: item '" + item.id + "' has no original comments");

  struct Job {
    CommentCategory level;
    std::size_t index;
    std::string prompt;
    std::optional<std::string> result;
    std::string failure;
    bool reached = false;  // got any HTTP response
  };
  std::vector<Job> jobs;
  for (auto level : kAttackCategories) {
    for (std::size_t k = 0; k < per_category; ++k) {
      Rng rng(derive_seed(derive_seed(seed, "attack-context", category_index(level) * 1000003 + k), item.id));
      const auto& ctx = originals[rng.index(originals.size())];
      jobs.push_back({level, k, render_prompt(level, item.text, ctx.text).rendered, std::nullopt, {}, false});
    }
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::mutex err_mu;
  std::optional<AuthError> auth_failure;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size() && !abort; i = next++) {
      auto& job = jobs[i];
      for (std::size_t attempt = 0; attempt <= cfg.max_retries && !abort; ++attempt) {
        if (attempt > 0) std::this_thread::sleep_for(cfg.retry_backoff * (1u << std::min<std::size_t>(attempt - 1, 6)));
        try {
          const auto content = complete(cfg, job.prompt);
          job.reached = true;
          job.result = parse_response(content).attack_comment;
          break;
        } catch (const AuthError& e) {
          std::lock_guard lock(err_mu);
          if (!auth_failure) auth_failure = e;
          abort = true;
        } catch (const EndpointError& e) {
          job.failure = e.what();
          job.reached = job.reached || e.responded();
          if (!e.retryable()) break;
        } catch (const ParseError& e) {
          job.reached = true;
          job.failure = std::string("unparseable response: ") + e.what();
        }
      }
    }
  };
  const std::size_t threads = std::min(cfg.max_parallel, jobs.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (auth_failure) throw *auth_failure;

  GeneratedAttacks out;
  AttackArray<std::size_t> produced{0, 0, 0};
  bool any_reached = false;
  for (auto& job : jobs) {
    any_reached = any_reached || job.reached;
    if (job.result) {
      out.comments.push_back({std::move(*job.result), job.level, CommentSource::LlmGenerated});
      ++produced[attack_index(job.level)];
    } else {
      out.failures.push_back({job.level, job.index, job.failure});
    }
  }
  if (!any_reached) {
    throw EndpointError("endpoint unreachable after " + std::to_string(cfg.max_retries) +
                        " retries: " + (jobs.empty() ? std::string() : jobs.front().failure));
  }
  for (auto level : kAttackCategories) {
    if (produced[attack_index(level)] == 0) {
      throw Error("all " + std::string(level_name(level)) + " generations failed for item '" + item.id + "'");
    }
  }
  return out;
}

Comment generate_fallback(const NewsItem& item, CommentCategory level, std::uint64_t seed) {
  const auto& tpl = templates_for(level);
  Rng rng(derive_seed(derive_seed(seed, "fallback", category_index(level)), item.id));
  auto tokens = encoder::tokenize(item.text);
  std::vector<std::string> content;
  std::copy_if(tokens.begin(), tokens.end(), std::back_inserter(content),
               [](const std::string& t) { return t.size() >= 3; });
  if (content.empty()) content = tokens;
  if (content.empty()) content = {"this"};

  std::string a = content[rng.index(content.size())];
  std::string b = content[rng.index(content.size())];
  if (level == CommentCategory::Perception) {
    a = perturb(std::move(a), rng);
    b = perturb(std::move(b), rng);
  }
  const auto& choices = item.label == 1 ? tpl.toward_real : tpl.toward_fake;
  const auto tmpl = choices[rng.index(choices.size())];
  return Comment{fill(tmpl, a, b), level, CommentSource::TemplateFallback};
}

void augment_with_fallback(corpus::DatasetSplit& data, std::size_t per_category, std::uint64_t seed) {
  if (per_category < 1) throw PreconditionError("augment_with_fallback: per_category must be at least 1");
  for (auto* items : {&data.train, &data.validation, &data.test}) {
    for (auto& item : *items) {
      std::vector<Comment> added;
      for (auto level : kAttackCategories) {
        for (std::size_t k = 0; k < per_category; ++k) {
          added.push_back(generate_fallback(item, level, derive_seed(seed, "fallback-sample", k)));
        }
      }
      item.comments.insert(item.comments.end(), added.begin(), added.end());
    }
  }
}

}  // namespace commentguard::attackgen
