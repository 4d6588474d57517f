#include "cotkit/behavior_stats.hpp"

#include <numeric>
#include <string>

#include "cotkit/error.hpp"

namespace cotkit {

std::uint64_t BehaviorDistribution::total() const noexcept {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

std::uint64_t TransitionMatrix::total_transitions() const noexcept {
  std::uint64_t sum = 0;
  for (const auto& row : counts) sum = std::accumulate(row.begin(), row.end(), sum);
  return sum;
}

void BehaviorCounter::add(std::span<const BehaviorLabel> labels) {
  ++trajectories_;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    ++label_counts_[label_index(labels[i])];
    if (i + 1 < labels.size()) ++pair_counts_[label_index(labels[i])][label_index(labels[i + 1])];
  }
}

void BehaviorCounter::add(const Trajectory& trajectory) {
  if (!trajectory.labels) fail(ErrorCode::kSchema, "trajectory " + trajectory.id + " is not labeled");
  add(std::span<const BehaviorLabel>(*trajectory.labels));
}

void BehaviorCounter::merge(const BehaviorCounter& other) {
  trajectories_ += other.trajectories_;
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    label_counts_[i] += other.label_counts_[i];
    for (std::size_t j = 0; j < kNumLabels; ++j) pair_counts_[i][j] += other.pair_counts_[i][j];
  }
}

BehaviorDistribution BehaviorCounter::distribution() const {
  BehaviorDistribution d;
  d.counts = label_counts_;
  const std::uint64_t total = d.total();
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    d.proportions[i] = total == 0 ? 0.0 : static_cast<double>(d.counts[i]) / static_cast<double>(total);
  }
  return d;
}

TransitionMatrix BehaviorCounter::transitions() const {
  TransitionMatrix m;
  m.counts = pair_counts_;
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    const std::uint64_t row = std::accumulate(m.counts[i].begin(), m.counts[i].end(), std::uint64_t{0});
    m.defined_rows[i] = row > 0;
    for (std::size_t j = 0; j < kNumLabels; ++j) {
      m.probs[i][j] = row == 0 ? 0.0 : static_cast<double>(m.counts[i][j]) / static_cast<double>(row);
    }
  }
  return m;
}

BehaviorDistribution distribution(std::span<const Trajectory> corpus) {
  BehaviorCounter counter;
  for (const auto& t : corpus) counter.add(t);
  return counter.distribution();
}

TransitionMatrix transition_matrix(std::span<const Trajectory> corpus) {
  BehaviorCounter counter;
  for (const auto& t : corpus) counter.add(t);
  return counter.transitions();
}

std::vector<TransitionMatrix> per_trajectory_transitions(std::span<const Trajectory> corpus) {
  std::vector<TransitionMatrix> out;
  out.reserve(corpus.size());
  for (const auto& t : corpus) {
    BehaviorCounter counter;
    counter.add(t);
    out.push_back(counter.transitions());
  }
  return out;
}

DistributionDiff compare(const BehaviorDistribution& reference, const BehaviorDistribution& other) {
  DistributionDiff d;
  for (std::size_t i = 0; i < kNumLabels; ++i) d.diff[i] = other.proportions[i] - reference.proportions[i];
  return d;
}

TransitionDiff compare(const TransitionMatrix& reference, const TransitionMatrix& other) {
  TransitionDiff d;
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    if (!reference.defined_rows[i] || !other.defined_rows[i]) continue;
    for (std::size_t j = 0; j < kNumLabels; ++j) d.diff[i][j] = other.probs[i][j] - reference.probs[i][j];
  }
  return d;
}

namespace {

Json label_names() {
  Json names = Json::array();
  for (auto l : kAllLabels) names.push_back(std::string(label_name(l)));
  return names;
}

void expect_kind(const Json& report, const char* kind) {
  if (!report.is_object() || report.value("kind", "") != kind) {
    fail(ErrorCode::kSchema, std::string("expected a '") + kind + "' report");
  }
}

template <typename T>
T checked_number(const Json& j, const std::string& where) {
  if (!j.is_number()) fail(ErrorCode::kSchema, "report field " + where + " must be numeric");
  return j.get<T>();
}

}  // namespace

Json distribution_report(const BehaviorDistribution& d) {
  Json counts = Json::object();
  Json proportions = Json::object();
  for (auto l : kAllLabels) {
    counts[std::string(label_name(l))] = d.counts[label_index(l)];
    proportions[std::string(label_name(l))] = d.proportions[label_index(l)];
  }
  return Json{{"kind", "distribution"},
              {"labels", label_names()},
              {"total", d.total()},
              {"counts", std::move(counts)},
              {"proportions", std::move(proportions)}};
}

Json transition_report(const TransitionMatrix& m) {
  Json counts = Json::array();
  Json probs = Json::array();
  Json defined = Json::array();
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    counts.push_back(m.counts[i]);
    probs.push_back(m.probs[i]);
    defined.push_back(m.defined_rows[i]);
  }
  return Json{{"kind", "transition"},
              {"labels", label_names()},
              {"total_transitions", m.total_transitions()},
              {"counts", std::move(counts)},
              {"probs", std::move(probs)},
              {"defined_rows", std::move(defined)}};
}

BehaviorDistribution distribution_from_report(const Json& report) {
  expect_kind(report, "distribution");
  BehaviorDistribution d;
  for (auto l : kAllLabels) {
    const std::string name(label_name(l));
    if (!report.contains("counts") || !report["counts"].contains(name) || !report.contains("proportions") ||
        !report["proportions"].contains(name)) {
      fail(ErrorCode::kSchema, "distribution report missing label " + name);
    }
    d.counts[label_index(l)] = checked_number<std::uint64_t>(report["counts"][name], "counts." + name);
    d.proportions[label_index(l)] = checked_number<double>(report["proportions"][name], "proportions." + name);
  }
  return d;
}

TransitionMatrix transition_from_report(const Json& report) {
  expect_kind(report, "transition");
  TransitionMatrix m;
  for (const char* key : {"counts", "probs", "defined_rows"}) {
    if (!report.contains(key) || !report[key].is_array() || report[key].size() != kNumLabels) {
      fail(ErrorCode::kSchema, std::string("transition report field '") + key + "' must have 4 rows");
    }
  }
  for (std::size_t i = 0; i < kNumLabels; ++i) {
    const Json& crow = report["counts"][i];
    const Json& prow = report["probs"][i];
    if (!crow.is_array() || crow.size() != kNumLabels || !prow.is_array() || prow.size() != kNumLabels) {
      fail(ErrorCode::kSchema, "transition report rows must have 4 columns");
    }
    if (!report["defined_rows"][i].is_boolean()) fail(ErrorCode::kSchema, "defined_rows entries must be booleans");
    m.defined_rows[i] = report["defined_rows"][i].get<bool>();
    for (std::size_t j = 0; j < kNumLabels; ++j) {
      m.counts[i][j] = checked_number<std::uint64_t>(crow[j], "counts");
      m.probs[i][j] = checked_number<double>(prow[j], "probs");
    }
  }
  return m;
}

Json compare_reports(const Json& reference, const Json& other) {
  const std::string ref_kind = reference.is_object() ? reference.value("kind", "") : "";
  const std::string other_kind = other.is_object() ? other.value("kind", "") : "";
  if (ref_kind != other_kind) {
    fail(ErrorCode::kSchema, "cannot compare a '" + ref_kind + "' report with a '" + other_kind + "' report");
  }
  if (ref_kind == "distribution") {
    const auto diff = compare(distribution_from_report(reference), distribution_from_report(other));
    Json out = Json::object();
    for (auto l : kAllLabels) out[std::string(label_name(l))] = diff.diff[label_index(l)];
    return Json{{"kind", "distribution"}, {"difference", std::move(out)}};
  }
  if (ref_kind == "transition") {
    const auto diff = compare(transition_from_report(reference), transition_from_report(other));
    Json rows = Json::array();
    Json comparable = Json::array();
    for (std::size_t i = 0; i < kNumLabels; ++i) {
      Json row = Json::array();
      for (std::size_t j = 0; j < kNumLabels; ++j) {
        row.push_back(diff.diff[i][j] ? Json(*diff.diff[i][j]) : Json(nullptr));
      }
      comparable.push_back(diff.diff[i][0].has_value());
      rows.push_back(std::move(row));
    }
    return Json{{"kind", "transition"}, {"difference", std::move(rows)}, {"comparable_rows", std::move(comparable)}};
  }
  fail(ErrorCode::kSchema, "unknown report kind '" + ref_kind + "'");
}

}  // namespace cotkit
