#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "cotkit/types.hpp"

namespace cotkit {

struct SegmenterConfig {
  /// Split levels in order. Whitespace-only signals are consumed; any other
  /// signal stays attached to the end of the step on its left.
  std::vector<std::string> signal_strings = {"\n\n", "\n", "?", "."};
  std::size_t max_step_chars = 2000;
  std::size_t min_step_chars = 1;

  void validate() const;
};

/// Hierarchical split: level 1 always applies; a piece descends to the next
/// signal only while its trimmed length exceeds max_step_chars. A '.' with
/// digits on both sides is never a split point.
std::vector<ReasoningStep> segment(std::string_view text, const SegmenterConfig& config = {});

struct SegmentSummary {
  std::size_t trajectories = 0;
  std::size_t total_steps = 0;
  std::vector<std::size_t> step_counts;

  double mean_steps() const noexcept {
    return trajectories == 0 ? 0.0 : static_cast<double>(total_steps) / static_cast<double>(trajectories);
  }
};

/// Populates steps for every trajectory (order preserving). Trajectories that
/// already carry steps are left untouched unless `force` is set; re-segmented
/// trajectories lose any labels.
SegmentSummary segment_corpus(std::vector<Trajectory>& corpus, const SegmenterConfig& config, bool force = false,
                              std::size_t threads = 1);

}  // namespace cotkit
