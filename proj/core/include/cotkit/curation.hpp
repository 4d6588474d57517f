#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cotkit/json.hpp"
#include "cotkit/types.hpp"

namespace cotkit {

// --- scoring -------------------------------------------------------------------

std::vector<std::string> default_branch_lexicon();

enum class ReferenceSide { kLeft, kRight };

/// (steps_ref - steps_other) / steps_ref, where the reference side is the
/// normalizing trajectory. Throws when the reference has no steps.
CurationScore proxy1_diff_ratio(const PairedItem& pair, ReferenceSide reference = ReferenceSide::kLeft);

/// Fraction of steps containing at least one keyword (whole word,
/// case-insensitive).
CurationScore proxy2_branch_fraction(const Trajectory& trajectory, const std::vector<std::string>& keywords);

enum class LengthRule { kChars, kWords };

std::string_view length_rule_name(LengthRule rule) noexcept;
std::optional<LengthRule> length_rule_from_name(std::string_view name) noexcept;

/// Unicode scalar count of the text, or its whitespace-delimited word count.
CurationScore token_length(const Trajectory& trajectory, LengthRule rule = LengthRule::kChars);

using ScoreTable = std::map<std::string, double>;

std::string scores_csv(const std::vector<CurationScore>& scores);
/// Parses `trajectory_id,metric,value`; all rows must share one metric.
std::vector<CurationScore> parse_scores_csv(const std::string& csv);

// --- filtering -----------------------------------------------------------------

enum class FilterMode { kRemoveTop, kKeepBottom, kKeepTop, kRemoveLongest };

std::string_view filter_mode_name(FilterMode mode) noexcept;
/// Accepts both "remove_top" and "remove-top" spellings.
std::optional<FilterMode> filter_mode_from_name(std::string_view name) noexcept;

struct FilterSpec {
  ScoreMetric metric = ScoreMetric::kTokenLength;
  FilterMode mode = FilterMode::kRemoveTop;
  double k = 0.1;

  void validate() const;
};

struct RemovedEntry {
  std::string id;
  double score = 0.0;
};

struct FilterResult {
  std::vector<Trajectory> kept;  // input order
  std::vector<RemovedEntry> removed;  // input order
};

/// Selects round_half_up(k * N) items ranked by (score desc, id asc) for the
/// top-oriented modes and (score asc, id asc) for keep_bottom. remove_* modes
/// drop the selection, keep_* modes keep only it.
FilterResult apply_filter(std::vector<Trajectory> corpus, const ScoreTable& scores, const FilterSpec& spec);

// --- step deletion ---------------------------------------------------------------

/// min(round_half_up(p * n), n - 1).
std::size_t deletion_count(std::size_t n, double p);

/// Deletes steps chosen uniformly without replacement by a generator seeded
/// from (seed, trajectory id). Surviving steps are rejoined with "\n" and
/// re-indexed; labels, when present, follow their steps.
Trajectory delete_random_steps(const Trajectory& trajectory, double p, std::uint64_t seed);

// --- recipes -------------------------------------------------------------------

struct ScoreStage {
  ScoreMetric metric = ScoreMetric::kProxy2BranchFraction;
  std::vector<std::string> lexicon = default_branch_lexicon();  // proxy2
  LengthRule length_rule = LengthRule::kChars;                   // token_length
  std::string counterpart;                                       // proxy1: path of the paired corpus
  ReferenceSide reference = ReferenceSide::kLeft;                // proxy1: left is the curated corpus
};

struct FilterStage {
  FilterMode mode = FilterMode::kRemoveTop;
  double k = 0.1;
};

struct DeleteStage {
  double p = 0.1;
  std::optional<std::uint64_t> seed;  // defaults to the recipe seed
};

using Stage = std::variant<ScoreStage, FilterStage, DeleteStage>;

struct Recipe {
  std::uint64_t seed = 0;
  std::vector<Stage> stages;
};

Recipe recipe_from_json(const Json& j);
Json recipe_to_json(const Recipe& recipe);

struct CurateOptions {
  std::size_t threads = 1;
  std::filesystem::path base_dir;  // relative counterpart paths resolve here
};

struct CurateResult {
  std::vector<Trajectory> corpus;
  Json manifest;
};

/// Digest of the corpus exactly as write_corpus would serialize it.
std::string corpus_digest(const std::vector<Trajectory>& corpus);

CurateResult curate_corpus(std::vector<Trajectory> corpus, const Recipe& recipe, const CurateOptions& options = {});

/// Re-runs the recipe embedded in `manifest`. Throws Error(kSchema) when the
/// input digest differs from the recorded one or the output does not
/// reproduce.
CurateResult replay_manifest(std::vector<Trajectory> corpus, const Json& manifest, const CurateOptions& options = {});

}  // namespace cotkit
