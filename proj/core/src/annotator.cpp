#include "cotkit/annotator.hpp"

#include <cstdlib>
#include <fstream>
#include <regex>
#include <thread>

#include <httplib.h>

#include "cotkit/corpus.hpp"
#include "cotkit/error.hpp"
#include "cotkit/hash.hpp"
#include "cotkit/json.hpp"
#include "cotkit/parallel.hpp"
#include "cotkit/text.hpp"

namespace cotkit {

void AnnotatorConfig::validate() const {
  if (temperature < 0.0) fail(ErrorCode::kInvalidArgument, "temperature must be >= 0");
  if (max_retries < 0) fail(ErrorCode::kInvalidArgument, "max_retries must be >= 0");
  if (max_concurrent_requests < 1) fail(ErrorCode::kInvalidArgument, "max_concurrent_requests must be >= 1");
}

// --- HTTP backend ----------------------------------------------------------

namespace {

struct Endpoint {
  std::string scheme_host_port;
  std::string path;
};

Endpoint parse_endpoint(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) fail(ErrorCode::kInvalidArgument, "invalid endpoint URL '" + url + "'");
  Endpoint ep{m[1].str(), m[2].matched ? m[2].str() : std::string()};
  if (ep.path.empty() || ep.path == "/") ep.path = "/v1/chat/completions";
  return ep;
}

std::string api_key() {
  for (const char* var : {"COTKIT_API_KEY", "OPENAI_API_KEY"}) {
    if (const char* v = std::getenv(var); v != nullptr && *v != '\0') return v;
  }
  return {};
}

}  // namespace

std::string HttpChatBackend::complete(const AnnotationPrompt& prompt, const AnnotatorConfig& config) {
  const Endpoint ep = parse_endpoint(config.endpoint);
  httplib::Client client(ep.scheme_host_port);
  client.set_connection_timeout(config.request_timeout);
  client.set_read_timeout(config.request_timeout);
  client.set_write_timeout(config.request_timeout);

  httplib::Headers headers;
  if (auto key = api_key(); !key.empty()) headers.emplace("Authorization", "Bearer " + key);

  Json body;
  body["model"] = config.model_name;
  body["temperature"] = config.temperature;
  body["messages"] = Json::array({
      {{"role", "system"}, {"content", prompt.system_text}},
      {{"role", "user"}, {"content", prompt.user_text}},
  });

  auto res = client.Post(ep.path, headers, body.dump(), "application/json");
  if (!res) {
    fail(ErrorCode::kTransport, config.endpoint + ": " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    fail(ErrorCode::kTransport, config.endpoint + ": HTTP " + std::to_string(res->status));
  }
  try {
    const Json reply = Json::parse(res->body);
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const Json::exception& e) {
    fail(ErrorCode::kTransport, config.endpoint + ": malformed completion body: " + e.what());
  }
}

// --- cache -------------------------------------------------------------------

std::string annotation_cache_key(std::string_view previous_step, std::string_view current_step) {
  Sha256 hasher;
  // Length-prefixed parts keep (a, bc) and (ab, c) apart.
  for (std::string_view part : {kPromptTemplateVersion, previous_step, current_step}) {
    hasher.update(std::to_string(part.size()) + ":").update(part);
  }
  return hasher.hex_digest();
}

namespace {

Json cache_entry_json(const AnnotationCacheEntry& e) {
  return Json{{"key", e.key}, {"label", std::string(label_name(e.label))}, {"raw_response", e.raw_response}};
}

}  // namespace

AnnotationCache::AnnotationCache(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.empty() || !std::filesystem::exists(path_)) return;
  std::ifstream in(path_);
  if (!in) fail(ErrorCode::kIo, "cannot open annotation cache " + path_.string());
  std::string line;
  while (std::getline(in, line)) {
    if (text::trim(line).empty()) continue;
    // A torn final line from an interrupted writer is ignored.
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) continue;
    auto label = label_from_name(j.value("label", ""));
    if (!label || !j.contains("key")) continue;
    AnnotationCacheEntry e{j["key"].get<std::string>(), *label, j.value("raw_response", "")};
    entries_[e.key] = std::move(e);
  }
}

std::optional<AnnotationCacheEntry> AnnotationCache::get(const std::string& key) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void AnnotationCache::put(const AnnotationCacheEntry& entry) {
  std::lock_guard lock(mu_);
  if (!path_.empty()) {
    std::ofstream out(path_, std::ios::app);
    out << cache_entry_json(entry).dump() << '\n';
    out.flush();
    if (!out) fail(ErrorCode::kIo, "cannot append to annotation cache " + path_.string());
  }
  entries_[entry.key] = entry;
}

std::size_t AnnotationCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

void AnnotationCache::compact() {
  std::lock_guard lock(mu_);
  if (path_.empty()) return;
  std::map<std::string, const AnnotationCacheEntry*> ordered;
  for (const auto& [k, e] : entries_) ordered.emplace(k, &e);
  AtomicFileWriter writer(path_);
  for (const auto& [k, e] : ordered) writer.stream() << cache_entry_json(*e).dump() << '\n';
  writer.commit();
}

// --- annotator ---------------------------------------------------------------

Annotator::Annotator(AnnotatorConfig config, std::shared_ptr<ChatBackend> backend)
    : config_(std::move(config)), backend_(std::move(backend)), cache_(config_.cache_path) {
  config_.validate();
  if (!backend_) fail(ErrorCode::kInvalidArgument, "annotator needs a chat backend");
}

BehaviorLabel Annotator::annotate_step(std::string_view previous_step, std::string_view current_step,
                                       std::string_view step_name) {
  const std::string key = annotation_cache_key(previous_step, current_step);
  if (auto hit = cache_.get(key)) {
    ++cache_hits_;
    return hit->label;
  }
  const AnnotationPrompt prompt = render_prompt(previous_step, current_step);
  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0 && config_.retry_backoff.count() > 0) {
      std::this_thread::sleep_for(config_.retry_backoff * attempt);
    }
    std::string raw;
    try {
      ++service_calls_;
      raw = backend_->complete(prompt, config_);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kTransport) throw;
      last_error = e.what();
      continue;
    }
    BehaviorLabel label;
    try {
      label = parse_label(raw);
    } catch (const Error& e) {
      last_error = e.what();
      continue;
    }
    cache_.put({key, label, raw});
    return label;
  }
  std::string name = step_name.empty() ? std::string("step") : std::string(step_name);
  fail(ErrorCode::kAnnotation, "annotation failed for " + name + " after " + std::to_string(config_.max_retries + 1) +
                                   " attempts: " + last_error);
}

AnnotateResult Annotator::annotate_corpus(std::vector<Trajectory> corpus) {
  struct Job {
    std::size_t trajectory;
    std::size_t step;
  };
  std::vector<Job> jobs;
  for (std::size_t t = 0; t < corpus.size(); ++t) {
    if (!corpus[t].steps) fail(ErrorCode::kSchema, "trajectory " + corpus[t].id + " has no steps; segment first");
    for (std::size_t s = 0; s < corpus[t].steps->size(); ++s) jobs.push_back({t, s});
  }

  std::vector<std::optional<BehaviorLabel>> labels(jobs.size());
  std::vector<std::string> errors(jobs.size());
  const std::size_t hits_before = cache_hits_.load();
  const std::size_t calls_before = service_calls_.load();

  // One worker per allowed in-flight request, so the bound holds by construction.
  parallel_for(jobs.size(), config_.max_concurrent_requests, [&](std::size_t i) {
    const auto& steps = *corpus[jobs[i].trajectory].steps;
    const std::size_t s = jobs[i].step;
    const std::string_view prev = s == 0 ? kFirstStepSentinel : std::string_view(steps[s - 1].text);
    const std::string name = "trajectory " + corpus[jobs[i].trajectory].id + " step " + std::to_string(s);
    try {
      labels[i] = annotate_step(prev, steps[s].text, name);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kIo) throw;
      errors[i] = e.what();
    }
  });

  AnnotateResult result;
  std::size_t j = 0;
  for (auto& t : corpus) {
    std::vector<BehaviorLabel> traj_labels;
    std::optional<AnnotationFailure> failure;
    for (std::size_t s = 0; s < t.steps->size(); ++s, ++j) {
      if (labels[j]) {
        traj_labels.push_back(*labels[j]);
      } else if (!failure) {
        failure = AnnotationFailure{t.id, s, errors[j]};
      }
    }
    if (failure) {
      result.failures.push_back(std::move(*failure));
    } else {
      t.labels = std::move(traj_labels);
      result.labeled.push_back(std::move(t));
    }
  }
  result.cache_hits = cache_hits_.load() - hits_before;
  result.service_calls = service_calls_.load() - calls_before;
  return result;
}

// --- heuristic ---------------------------------------------------------------

Lexicon Lexicon::defaults() {
  Lexicon lex;
  lex.keywords[BehaviorLabel::kPropose] = {"perhaps", "maybe", "alternatively", "another", "what if", "suppose", "try"};
  lex.keywords[BehaviorLabel::kVerify] = {"check", "verify", "confirm", "double-check", "make sure", "sanity"};
  lex.keywords[BehaviorLabel::kBacktrack] = {"wrong",   "mistake",    "contradicts", "discard",
                                             "abandon", "start over", "dead end"};
  lex.keywords[BehaviorLabel::kDeduce] = {};
  return lex;
}

BehaviorLabel heuristic_annotate(std::string_view /*previous_step*/, std::string_view current_step,
                                 const Lexicon& lexicon) {
  const std::string window = text::leading_words(current_step, 12);
  for (auto label : {BehaviorLabel::kBacktrack, BehaviorLabel::kVerify, BehaviorLabel::kPropose}) {
    auto it = lexicon.keywords.find(label);
    if (it == lexicon.keywords.end()) continue;
    for (const auto& kw : it->second) {
      if (text::contains_whole_word(window, kw)) return label;
    }
  }
  return BehaviorLabel::kDeduce;
}

void heuristic_annotate_corpus(std::vector<Trajectory>& corpus, const Lexicon& lexicon) {
  for (auto& t : corpus) {
    if (!t.steps) fail(ErrorCode::kSchema, "trajectory " + t.id + " has no steps; segment first");
    std::vector<BehaviorLabel> labels;
    labels.reserve(t.steps->size());
    for (std::size_t s = 0; s < t.steps->size(); ++s) {
      const std::string_view prev = s == 0 ? kFirstStepSentinel : std::string_view((*t.steps)[s - 1].text);
      labels.push_back(heuristic_annotate(prev, (*t.steps)[s].text, lexicon));
    }
    t.labels = std::move(labels);
  }
}

}  // namespace cotkit
