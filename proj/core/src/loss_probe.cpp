#include "cotkit/loss_probe.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "cotkit/error.hpp"
#include "cotkit/numeric.hpp"
#include "cotkit/text.hpp"

namespace cotkit {

LossSource file_loss_source(std::filesystem::path path, ReadOptions options) {
  return [path = std::move(path), options](const std::function<void(const TokenLossRecord&)>& visit) {
    TokenLossReader reader(path, options);
    while (auto r = reader.next()) visit(*r);
  };
}

LossSource memory_loss_source(const std::vector<TokenLossRecord>& records) {
  return [&records](const std::function<void(const TokenLossRecord&)>& visit) {
    for (const auto& r : records) visit(r);
  };
}

std::vector<double> default_bin_edges() {
  std::vector<double> edges;
  for (int i = 0; i <= 60; ++i) edges.push_back(static_cast<double>(i) / 10.0);
  return edges;
}

HistogramBuilder::HistogramBuilder(std::vector<double> bin_edges, double head_threshold) {
  if (bin_edges.empty()) fail(ErrorCode::kInvalidArgument, "bin_edges must be nonempty");
  if (bin_edges.front() > 0.0) fail(ErrorCode::kInvalidArgument, "bin_edges must start at or below 0");
  for (std::size_t i = 1; i < bin_edges.size(); ++i) {
    if (!(bin_edges[i] > bin_edges[i - 1])) fail(ErrorCode::kInvalidArgument, "bin_edges must be strictly ascending");
  }
  hist_.bin_counts.assign(bin_edges.size(), 0);
  hist_.bin_edges = std::move(bin_edges);
  hist_.head_threshold = head_threshold;
}

void HistogramBuilder::add(double loss) {
  if (!std::isfinite(loss) || loss < 0.0) fail(ErrorCode::kSchema, "loss values must be finite and >= 0");
  auto it = std::upper_bound(hist_.bin_edges.begin(), hist_.bin_edges.end(), loss);
  ++hist_.bin_counts[static_cast<std::size_t>(it - hist_.bin_edges.begin()) - 1];
  ++hist_.total;
  if (loss < hist_.head_threshold) ++hist_.head_count;
  hist_.loss_sum += loss;
}

void HistogramBuilder::add(const TokenLossRecord& record) {
  for (double v : record.losses) add(v);
}

void HistogramBuilder::merge(const HistogramBuilder& other) {
  if (other.hist_.bin_edges != hist_.bin_edges || other.hist_.head_threshold != hist_.head_threshold) {
    fail(ErrorCode::kInvalidArgument, "cannot merge histograms with different binning");
  }
  for (std::size_t i = 0; i < hist_.bin_counts.size(); ++i) hist_.bin_counts[i] += other.hist_.bin_counts[i];
  hist_.total += other.hist_.total;
  hist_.head_count += other.hist_.head_count;
  hist_.loss_sum += other.hist_.loss_sum;
}

LossHistogram histogram(const LossSource& source, std::vector<double> bin_edges, double head_threshold) {
  HistogramBuilder builder(std::move(bin_edges), head_threshold);
  source([&](const TokenLossRecord& r) { builder.add(r); });
  if (builder.result().total == 0) fail(ErrorCode::kInvalidArgument, "token-loss corpus is empty");
  return builder.result();
}

std::string normalize_token(std::string_view token) {
  std::string_view s = text::trim(token);
  for (std::string_view marker : {std::string_view("\xC4\xA0"), std::string_view("\xE2\x96\x81")}) {
    if (s.substr(0, marker.size()) == marker) {
      s.remove_prefix(marker.size());
      break;
    }
  }
  s = text::trim(s);
  if (s.empty()) return std::string(token);
  return std::string(s);
}

TopQuantileResult top_quantile_tokens(const LossSource& source, double q) {
  if (!(q > 0.0 && q < 1.0)) fail(ErrorCode::kInvalidArgument, "q must be in (0,1)");

  // Pass 1: exact selection over the buffered loss values.
  std::vector<double> losses;
  source([&](const TokenLossRecord& r) { losses.insert(losses.end(), r.losses.begin(), r.losses.end()); });
  if (losses.empty()) fail(ErrorCode::kInvalidArgument, "token-loss corpus is empty");
  const std::size_t n = losses.size();
  const std::size_t m = std::clamp<std::size_t>(round_half_up(q * static_cast<double>(n)), 1, n);
  auto nth = losses.begin() + static_cast<std::ptrdiff_t>(n - m);
  std::nth_element(losses.begin(), nth, losses.end());

  TopQuantileResult result;
  result.q = q;
  result.threshold = *nth;
  result.total_tokens = n;
  losses = {};

  // Pass 2: count surfaces at or above the threshold.
  source([&](const TokenLossRecord& r) {
    for (std::size_t i = 0; i < r.tokens.size(); ++i) {
      if (r.losses[i] < result.threshold) continue;
      auto& stat = result.tokens[normalize_token(r.tokens[i])];
      ++stat.count;
      stat.loss_sum += r.losses[i];
      ++result.selected_tokens;
    }
  });
  return result;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::vector<std::pair<std::string, TokenStat>> by_count(const std::map<std::string, TokenStat>& tokens) {
  std::vector<std::pair<std::string, TokenStat>> rows(tokens.begin(), tokens.end());
  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a.second.count > b.second.count; });
  return rows;
}

}  // namespace

std::string word_cloud_csv(const TopQuantileResult& result) {
  std::ostringstream out;
  out << "token,count,mean_loss\n";
  char buf[64];
  for (const auto& [token, stat] : by_count(result.tokens)) {
    std::snprintf(buf, sizeof buf, "%.6g", stat.mean());
    out << csv_field(token) << ',' << stat.count << ',' << buf << '\n';
  }
  return out.str();
}

KeyTokenReport key_token_mean(const LossSource& source, const std::vector<std::string>& token_set, MatchRule rule) {
  if (token_set.empty()) fail(ErrorCode::kInvalidArgument, "key token set must be nonempty");
  auto key = [rule](std::string_view tok) {
    std::string norm = normalize_token(tok);
    return rule == MatchRule::kCaseInsensitive ? text::to_lower_ascii(norm) : norm;
  };
  std::map<std::string, std::string> wanted;  // match key -> display token
  for (const auto& t : token_set) wanted.emplace(key(t), t);

  KeyTokenReport report;
  report.token_set = token_set;
  double corpus_sum = 0.0;
  double key_sum = 0.0;
  source([&](const TokenLossRecord& r) {
    for (std::size_t i = 0; i < r.tokens.size(); ++i) {
      ++report.corpus_tokens;
      corpus_sum += r.losses[i];
      auto it = wanted.find(key(r.tokens[i]));
      if (it == wanted.end()) continue;
      ++report.occurrence_count;
      key_sum += r.losses[i];
      auto& stat = report.per_token[it->second];
      ++stat.count;
      stat.loss_sum += r.losses[i];
    }
  });
  if (report.occurrence_count == 0) fail(ErrorCode::kInvalidArgument, "no occurrences of any key token");
  report.mean_loss = key_sum / static_cast<double>(report.occurrence_count);
  report.corpus_mean_loss = corpus_sum / static_cast<double>(report.corpus_tokens);
  return report;
}

Json histogram_report(const LossHistogram& h) {
  return Json{{"bin_edges", h.bin_edges},   {"bin_counts", h.bin_counts},       {"total", h.total},
              {"head_threshold", h.head_threshold}, {"head_fraction", h.head_fraction()}, {"mean_loss", h.mean_loss()}};
}

Json top_quantile_report(const TopQuantileResult& r, std::size_t max_tokens) {
  Json tokens = Json::array();
  for (const auto& [token, stat] : by_count(r.tokens)) {
    if (tokens.size() == max_tokens) break;
    tokens.push_back({{"token", token}, {"count", stat.count}, {"mean_loss", stat.mean()}});
  }
  return Json{{"q", r.q},
              {"threshold", r.threshold},
              {"total_tokens", r.total_tokens},
              {"selected_tokens", r.selected_tokens},
              {"distinct_tokens", r.tokens.size()},
              {"top_tokens", std::move(tokens)}};
}

Json key_token_report(const KeyTokenReport& r) {
  Json per_token = Json::object();
  for (const auto& [token, stat] : r.per_token) {
    per_token[token] = {{"count", stat.count}, {"mean_loss", stat.mean()}};
  }
  return Json{{"token_set", r.token_set},
              {"occurrence_count", r.occurrence_count},
              {"mean_loss", r.mean_loss},
              {"corpus_mean_loss", r.corpus_mean_loss},
              {"corpus_tokens", r.corpus_tokens},
              {"per_token", std::move(per_token)}};
}

}  // namespace cotkit
