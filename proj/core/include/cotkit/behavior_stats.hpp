#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cotkit/json.hpp"
#include "cotkit/types.hpp"

namespace cotkit {

struct BehaviorDistribution {
  std::array<std::uint64_t, kNumLabels> counts{};
  std::array<double, kNumLabels> proportions{};

  std::uint64_t total() const noexcept;
};

struct TransitionMatrix {
  std::array<std::array<std::uint64_t, kNumLabels>, kNumLabels> counts{};
  std::array<std::array<double, kNumLabels>, kNumLabels> probs{};
  std::array<bool, kNumLabels> defined_rows{};

  std::uint64_t total_transitions() const noexcept;
};

/// Mergeable partial counts. Accumulating shards in any order yields the
/// same integers as one sequential pass.
class BehaviorCounter {
 public:
  void add(std::span<const BehaviorLabel> labels);
  /// Throws Error(kSchema) when the trajectory carries no labels.
  void add(const Trajectory& trajectory);
  void merge(const BehaviorCounter& other);

  BehaviorDistribution distribution() const;
  TransitionMatrix transitions() const;
  std::uint64_t trajectories() const noexcept { return trajectories_; }

 private:
  std::array<std::uint64_t, kNumLabels> label_counts_{};
  std::array<std::array<std::uint64_t, kNumLabels>, kNumLabels> pair_counts_{};
  std::uint64_t trajectories_ = 0;
};

BehaviorDistribution distribution(std::span<const Trajectory> corpus);
TransitionMatrix transition_matrix(std::span<const Trajectory> corpus);
/// Per-trajectory matrices, for variance reporting.
std::vector<TransitionMatrix> per_trajectory_transitions(std::span<const Trajectory> corpus);

struct DistributionDiff {
  std::array<double, kNumLabels> diff{};  // other - reference
};

struct TransitionDiff {
  std::array<std::array<std::optional<double>, kNumLabels>, kNumLabels> diff{};  // nullopt: not comparable
};

DistributionDiff compare(const BehaviorDistribution& reference, const BehaviorDistribution& other);
TransitionDiff compare(const TransitionMatrix& reference, const TransitionMatrix& other);

// Report JSON ("kind": "distribution" / "transition").
Json distribution_report(const BehaviorDistribution& d);
Json transition_report(const TransitionMatrix& m);
BehaviorDistribution distribution_from_report(const Json& report);
TransitionMatrix transition_from_report(const Json& report);

/// Diff block for two reports of the same kind; throws Error(kSchema) on a
/// kind mismatch.
Json compare_reports(const Json& reference, const Json& other);

}  // namespace cotkit
