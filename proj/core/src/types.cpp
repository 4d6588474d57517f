#include "cotkit/types.hpp"

#include <cmath>

#include "cotkit/error.hpp"
#include "cotkit/text.hpp"

namespace cotkit {

std::string_view label_name(BehaviorLabel label) noexcept {
  switch (label) {
    case BehaviorLabel::kPropose: return "Propose";
    case BehaviorLabel::kDeduce: return "Deduce";
    case BehaviorLabel::kVerify: return "Verify";
    case BehaviorLabel::kBacktrack: return "Backtrack";
  }
  return "Deduce";
}

std::optional<BehaviorLabel> label_from_name(std::string_view name) noexcept {
  for (auto label : kAllLabels) {
    if (label_name(label) == name) return label;
  }
  return std::nullopt;
}

std::string_view metric_name(ScoreMetric metric) noexcept {
  switch (metric) {
    case ScoreMetric::kProxy1DiffRatio: return "proxy1_diff_ratio";
    case ScoreMetric::kProxy2BranchFraction: return "proxy2_branch_fraction";
    case ScoreMetric::kTokenLength: return "token_length";
  }
  return "token_length";
}

std::optional<ScoreMetric> metric_from_name(std::string_view name) noexcept {
  for (auto m : {ScoreMetric::kProxy1DiffRatio, ScoreMetric::kProxy2BranchFraction, ScoreMetric::kTokenLength}) {
    if (metric_name(m) == name) return m;
  }
  return std::nullopt;
}

void validate(const Trajectory& t) {
  if (t.id.empty()) fail(ErrorCode::kSchema, "trajectory id must be nonempty");
  if (t.labels && !t.steps) fail(ErrorCode::kSchema, "trajectory " + t.id + ": labels present without steps");
  if (t.labels && t.labels->size() != t.steps->size()) {
    fail(ErrorCode::kSchema, "trajectory " + t.id + ": " + std::to_string(t.labels->size()) + " labels for " +
                                 std::to_string(t.steps->size()) + " steps");
  }
  if (!t.steps) return;
  const std::u32string text = text::decode_utf8(t.text);
  std::size_t prev_end = 0;
  for (std::size_t i = 0; i < t.steps->size(); ++i) {
    const auto& s = (*t.steps)[i];
    const std::string where = "trajectory " + t.id + " step " + std::to_string(i);
    if (s.index != i) fail(ErrorCode::kSchema, where + ": index " + std::to_string(s.index) + " out of sequence");
    if (s.end <= s.start) fail(ErrorCode::kSchema, where + ": end must exceed start");
    if (s.start < prev_end) fail(ErrorCode::kSchema, where + ": overlaps the previous step");
    if (s.end > text.size()) fail(ErrorCode::kSchema, where + ": end beyond text length");
    if (s.split_level < 1) fail(ErrorCode::kSchema, where + ": split_level must be >= 1");
    const std::string slice = text::encode_utf8(std::u32string_view(text).substr(s.start, s.end - s.start));
    if (text::trim(slice) != s.text || s.text.empty()) {
      fail(ErrorCode::kSchema, where + ": text does not match the trimmed offset range");
    }
    prev_end = s.end;
  }
}

void validate(const TokenLossRecord& r) {
  if (r.tokens.empty()) fail(ErrorCode::kSchema, "token-loss record " + r.trajectory_id + ": no tokens");
  if (r.tokens.size() != r.losses.size()) {
    fail(ErrorCode::kSchema, "token-loss record " + r.trajectory_id + ": tokens/losses length mismatch");
  }
  for (double v : r.losses) {
    if (!std::isfinite(v) || v < 0.0) {
      fail(ErrorCode::kSchema, "token-loss record " + r.trajectory_id + ": losses must be finite and >= 0");
    }
  }
}

}  // namespace cotkit
