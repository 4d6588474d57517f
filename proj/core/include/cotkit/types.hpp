#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cotkit {

enum class BehaviorLabel { kPropose = 0, kDeduce = 1, kVerify = 2, kBacktrack = 3 };

inline constexpr std::size_t kNumLabels = 4;
inline constexpr std::array<BehaviorLabel, kNumLabels> kAllLabels = {
    BehaviorLabel::kPropose, BehaviorLabel::kDeduce, BehaviorLabel::kVerify, BehaviorLabel::kBacktrack};

std::string_view label_name(BehaviorLabel label) noexcept;
/// Exact, case-sensitive wire name ("Propose", ...). Unknown names give nullopt.
std::optional<BehaviorLabel> label_from_name(std::string_view name) noexcept;
inline std::size_t label_index(BehaviorLabel label) noexcept { return static_cast<std::size_t>(label); }

struct ReasoningStep {
  std::size_t index = 0;
  std::string text;
  std::size_t start = 0;  // scalar offsets into Trajectory::text, half-open
  std::size_t end = 0;
  int split_level = 1;

  bool operator==(const ReasoningStep&) const = default;
};

struct Trajectory {
  std::string id;
  std::string prompt;
  std::string source;
  std::string text;
  std::optional<std::vector<ReasoningStep>> steps;
  std::optional<std::vector<BehaviorLabel>> labels;

  std::size_t step_count() const noexcept { return steps ? steps->size() : 0; }
  bool operator==(const Trajectory&) const = default;
};

struct PairedItem {
  std::string id;
  Trajectory left;
  Trajectory right;
};

struct TokenLossRecord {
  std::string trajectory_id;
  std::vector<std::string> tokens;
  std::vector<double> losses;

  bool operator==(const TokenLossRecord&) const = default;
};

enum class ScoreMetric { kProxy1DiffRatio, kProxy2BranchFraction, kTokenLength };

std::string_view metric_name(ScoreMetric metric) noexcept;
std::optional<ScoreMetric> metric_from_name(std::string_view name) noexcept;

struct CurationScore {
  std::string trajectory_id;
  ScoreMetric metric = ScoreMetric::kTokenLength;
  double value = 0.0;
};

/// Throws Error(kSchema) describing the first violated invariant.
void validate(const Trajectory& trajectory);
void validate(const TokenLossRecord& record);

}  // namespace cotkit
