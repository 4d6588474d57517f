#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cotkit/types.hpp"

namespace cotkit {

/// Bumped whenever the prompt text changes; part of every cache key.
inline constexpr std::string_view kPromptTemplateVersion = "behavior-annotation-v1";

/// Stands in for the previous step when annotating step 0.
inline constexpr std::string_view kFirstStepSentinel = "(none — this is the first step)";

struct AnnotationPrompt {
  std::string system_text;
  std::string user_text;

  bool operator==(const AnnotationPrompt&) const = default;
};

AnnotationPrompt render_prompt(std::string_view previous_step, std::string_view current_step);

/// Accepts a response iff exactly one of the four label words occurs in it
/// (whole word, case-insensitive) after stripping whitespace and quotes.
/// Throws Error(kAnnotation) carrying the raw text otherwise.
BehaviorLabel parse_label(std::string_view raw_response);

struct AnnotatorConfig {
  std::string endpoint;
  std::string model_name;
  double temperature = 0.0;
  int max_retries = 3;
  std::size_t max_concurrent_requests = 8;
  std::filesystem::path cache_path;  // empty: in-memory cache only
  std::chrono::milliseconds retry_backoff{500};
  std::chrono::seconds request_timeout{120};

  void validate() const;
};

/// One chat-completions round trip. Implementations throw Error(kTransport)
/// on anything that is not a usable completion.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string complete(const AnnotationPrompt& prompt, const AnnotatorConfig& config) = 0;
};

/// OpenAI-compatible `/v1/chat/completions` client. The bearer token comes
/// from COTKIT_API_KEY, falling back to OPENAI_API_KEY.
class HttpChatBackend : public ChatBackend {
 public:
  std::string complete(const AnnotationPrompt& prompt, const AnnotatorConfig& config) override;
};

struct AnnotationCacheEntry {
  std::string key;
  BehaviorLabel label = BehaviorLabel::kDeduce;
  std::string raw_response;
};

std::string annotation_cache_key(std::string_view previous_step, std::string_view current_step);

/// Append-only JSONL log with last-write-wins lookup. Safe for concurrent
/// callers within one process.
class AnnotationCache {
 public:
  AnnotationCache() = default;  // in-memory only
  explicit AnnotationCache(std::filesystem::path path);

  std::optional<AnnotationCacheEntry> get(const std::string& key) const;
  void put(const AnnotationCacheEntry& entry);
  std::size_t size() const;
  /// Rewrites the log with one line per key.
  void compact();

 private:
  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, AnnotationCacheEntry> entries_;
};

struct AnnotationFailure {
  std::string trajectory_id;
  std::size_t step_index = 0;
  std::string message;
};

struct AnnotateResult {
  std::vector<Trajectory> labeled;
  std::vector<AnnotationFailure> failures;
  std::size_t cache_hits = 0;
  std::size_t service_calls = 0;
};

class Annotator {
 public:
  Annotator(AnnotatorConfig config, std::shared_ptr<ChatBackend> backend);

  BehaviorLabel annotate_step(std::string_view previous_step, std::string_view current_step,
                              std::string_view step_name = "");

  /// Labels every step; trajectories with any failed step go to the failure
  /// report instead of the output. Cache I/O errors abort the whole call.
  AnnotateResult annotate_corpus(std::vector<Trajectory> corpus);

  std::size_t service_calls() const noexcept { return service_calls_.load(); }
  std::size_t cache_hits() const noexcept { return cache_hits_.load(); }
  AnnotationCache& cache() noexcept { return cache_; }

 private:
  AnnotatorConfig config_;
  std::shared_ptr<ChatBackend> backend_;
  AnnotationCache cache_;
  std::atomic<std::size_t> service_calls_{0};
  std::atomic<std::size_t> cache_hits_{0};
};

/// Keyword lists per label for the offline annotator.
struct Lexicon {
  std::map<BehaviorLabel, std::vector<std::string>> keywords;

  static Lexicon defaults();
};

/// Offline fallback. Checks the first 12 words of the current step for
/// whole-word keywords in priority order Backtrack > Verify > Propose, and
/// falls back to Deduce.
BehaviorLabel heuristic_annotate(std::string_view previous_step, std::string_view current_step,
                                 const Lexicon& lexicon = Lexicon::defaults());

/// Applies heuristic_annotate to every step of every trajectory.
void heuristic_annotate_corpus(std::vector<Trajectory>& corpus, const Lexicon& lexicon = Lexicon::defaults());

}  // namespace cotkit
