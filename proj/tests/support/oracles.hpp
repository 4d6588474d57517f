#pragma once

// Independent reference implementations used by the unit and acceptance
// suites. Nothing here calls into the code path it checks.

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <random>
#include <regex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "cotkit/annotator.hpp"
#include "cotkit/types.hpp"

namespace cotkit::testing {

// Portable draws (std distributions differ across standard libraries).
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }
inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

// --- segmentation ----------------------------------------------------------------

/// Random CoT-like text mixing words, decimals, newlines, '?' and '.'.
inline std::string random_cot_text(std::mt19937_64& rng, std::size_t pieces) {
  static const std::vector<std::string> parts = {
      "Perhaps", "x", "=", "3.14", "so", "y", "2.5", "is", "Thus", "check", "0.001", "12", "é", "λ", "wait",
      ".",       "?", "\n", "\n\n", " ", "  ", "\t", "..", "?.", "1.", ".5", "a.b", "Another", "\n \n", "1.2.3"};
  std::string out;
  for (std::size_t i = 0; i < pieces; ++i) {
    out += parts[uniform_index(rng, parts.size())];
    if (uniform01(rng) < 0.6) out += ' ';
  }
  if (out.find_first_not_of(" \t\n") == std::string::npos) out += "z";
  return out;
}

/// Drops ASCII whitespace bytes. With the default minimum step size no
/// non-whitespace separator can ever be dropped, so this is the whole filter.
inline std::string strip_whitespace(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c != ' ' && c != '\t' && c != '\n' && c != '\r' && c != '\v' && c != '\f') out.push_back(c);
  }
  return out;
}

// --- behavior statistics ------------------------------------------------------------

using Counts4x4 = std::array<std::array<std::uint64_t, 4>, 4>;

inline Counts4x4 naive_pair_counts(const std::vector<std::vector<BehaviorLabel>>& sequences) {
  Counts4x4 c{};
  for (const auto& seq : sequences) {
    for (std::size_t t = 1; t < seq.size(); ++t) {
      c[static_cast<int>(seq[t - 1])][static_cast<int>(seq[t])] += 1;
    }
  }
  return c;
}

inline std::array<std::uint64_t, 4> naive_label_counts(const std::vector<std::vector<BehaviorLabel>>& sequences) {
  std::array<std::uint64_t, 4> c{};
  for (const auto& seq : sequences)
    for (auto l : seq) c[static_cast<int>(l)] += 1;
  return c;
}

using Matrix4 = std::array<std::array<double, 4>, 4>;

/// Row-stochastic matrix with entries drawn from [lo, hi] before
/// normalization, so every transition probability is strictly positive.
inline Matrix4 random_positive_stochastic(std::mt19937_64& rng, double lo = 1.0, double hi = 2.0) {
  Matrix4 m{};
  for (auto& row : m) {
    double sum = 0;
    for (auto& v : row) {
      v = lo + (hi - lo) * uniform01(rng);
      sum += v;
    }
    for (auto& v : row) v /= sum;
  }
  return m;
}

inline std::vector<BehaviorLabel> sample_chain(std::mt19937_64& rng, const Matrix4& m, std::size_t length) {
  std::vector<BehaviorLabel> seq;
  seq.reserve(length);
  std::size_t state = uniform_index(rng, 4);
  for (std::size_t t = 0; t < length; ++t) {
    seq.push_back(static_cast<BehaviorLabel>(state));
    const double u = uniform01(rng);
    double acc = 0;
    std::size_t next = 3;
    for (std::size_t j = 0; j < 4; ++j) {
      acc += m[state][j];
      if (u < acc) {
        next = j;
        break;
      }
    }
    state = next;
  }
  return seq;
}

// --- quantile / filter -----------------------------------------------------------------

inline std::size_t oracle_round_half_up(double x) { return static_cast<std::size_t>(std::floor(x + 0.5)); }

struct OracleQuantile {
  double threshold = 0;
  std::map<std::string, std::uint64_t> counts;
};

/// Full sort, descending; keep everything >= the m-th largest value.
inline OracleQuantile sort_and_slice(const std::vector<std::pair<std::string, double>>& tokens, double q) {
  std::vector<double> sorted;
  for (const auto& t : tokens) sorted.push_back(t.second);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  std::size_t m = oracle_round_half_up(q * static_cast<double>(sorted.size()));
  m = std::clamp<std::size_t>(m, 1, sorted.size());
  OracleQuantile out;
  out.threshold = sorted[m - 1];
  for (const auto& t : tokens) {
    if (t.second >= out.threshold) out.counts[t.first] += 1;
  }
  return out;
}

struct OracleSelection {
  std::vector<std::string> kept;  // input order
  std::set<std::string> removed;
};

/// Sort every (score, id) pair under the stated ranking, slice, partition.
inline OracleSelection sort_and_select(const std::vector<std::pair<std::string, double>>& items, double k,
                                       bool bottom, bool keep_selected) {
  auto ranked = items;
  std::sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
    if (a.second != b.second) return bottom ? a.second < b.second : a.second > b.second;
    return a.first < b.first;
  });
  const std::size_t m = std::min(items.size(), oracle_round_half_up(k * static_cast<double>(items.size())));
  std::set<std::string> selected;
  for (std::size_t i = 0; i < m; ++i) selected.insert(ranked[i].first);
  OracleSelection out;
  for (const auto& [id, score] : items) {
    const bool in_sel = selected.count(id) > 0;
    if (in_sel == keep_selected) {
      out.kept.push_back(id);
    } else {
      out.removed.insert(id);
    }
  }
  return out;
}

// --- proxy 2 -------------------------------------------------------------------------

inline std::string regex_escape(const std::string& s) {
  static const std::regex special(R"([.^$|()\[\]{}*+?\\])");
  return std::regex_replace(s, special, R"(\$&)");
}

/// Independent whole-word matcher for ASCII text: std::regex with explicit non-word
/// lookarounds, spaces in a phrase matching any whitespace run.
inline double regex_branch_fraction(const std::vector<std::string>& steps, const std::vector<std::string>& lexicon) {
  std::vector<std::regex> patterns;
  for (const auto& kw : lexicon) {
    std::string body;
    std::string word;
    for (char c : kw + " ") {
      if (c == ' ') {
        if (!word.empty()) {
          if (!body.empty()) body += R"(\s+)";
          body += regex_escape(word);
          word.clear();
        }
      } else {
        word.push_back(c);
      }
    }
    patterns.emplace_back("(^|[^A-Za-z0-9_])" + body + "($|[^A-Za-z0-9_])",
                          std::regex::icase | std::regex::ECMAScript);
  }
  std::size_t hits = 0;
  for (const auto& s : steps) {
    for (const auto& re : patterns) {
      if (std::regex_search(s, re)) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(steps.size());
}

// --- annotation backends ------------------------------------------------------------------

/// Label encoded in the step text: the first of P/D/V/B after a '#' marker,
/// e.g. "step 3 #V". Falls back to Deduce.
inline BehaviorLabel expected_mock_label(const std::string& step) {
  const auto pos = step.find('#');
  if (pos == std::string::npos || pos + 1 >= step.size()) return BehaviorLabel::kDeduce;
  switch (step[pos + 1]) {
    case 'P': return BehaviorLabel::kPropose;
    case 'V': return BehaviorLabel::kVerify;
    case 'B': return BehaviorLabel::kBacktrack;
    default: return BehaviorLabel::kDeduce;
  }
}

inline std::string current_step_of(const AnnotationPrompt& prompt) {
  static const std::string marker = "[CURRENT STEP]:\n\n";
  const auto pos = prompt.user_text.rfind(marker);
  return prompt.user_text.substr(pos + marker.size());
}

/// Deterministic backend that answers with the label encoded in the current
/// step, records call counts, and tracks peak concurrency.
class InstrumentedMock : public ChatBackend {
 public:
  std::chrono::microseconds delay{0};
  std::string poison;  // steps containing this substring always get garbage

  std::string complete(const AnnotationPrompt& prompt, const AnnotatorConfig&) override {
    const int now = ++in_flight_;
    int peak = peak_.load();
    while (now > peak && !peak_.compare_exchange_weak(peak, now)) {
    }
    ++calls_;
    if (delay.count() > 0) std::this_thread::sleep_for(delay);
    const std::string step = current_step_of(prompt);
    std::string reply;
    if (!poison.empty() && step.find(poison) != std::string::npos) {
      reply = "I cannot decide";
    } else {
      reply = "'" + std::string(label_name(expected_mock_label(step))) + "'";
    }
    --in_flight_;
    return reply;
  }

  int calls() const { return calls_.load(); }
  int peak_in_flight() const { return peak_.load(); }

 private:
  std::atomic<int> in_flight_{0};
  std::atomic<int> peak_{0};
  std::atomic<int> calls_{0};
};

}  // namespace cotkit::testing
