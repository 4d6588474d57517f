#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "cotkit/corpus.hpp"
#include "cotkit/json.hpp"
#include "cotkit/types.hpp"

namespace cotkit {

/// A re-iterable stream of token-loss records: each call replays the whole
/// corpus through the visitor. The quantile export makes two passes.
using LossSource = std::function<void(const std::function<void(const TokenLossRecord&)>&)>;

LossSource file_loss_source(std::filesystem::path path, ReadOptions options = {});
LossSource memory_loss_source(const std::vector<TokenLossRecord>& records);

/// 60 uniform bins on [0, 6]; the last edge opens the overflow bin.
std::vector<double> default_bin_edges();

struct LossHistogram {
  std::vector<double> bin_edges;  // bin i is [edges[i], edges[i+1]); the last is [edges.back(), inf)
  std::vector<std::uint64_t> bin_counts;
  std::uint64_t total = 0;
  std::uint64_t head_count = 0;
  double head_threshold = 0.1;
  double loss_sum = 0.0;

  double head_fraction() const noexcept {
    return total == 0 ? 0.0 : static_cast<double>(head_count) / static_cast<double>(total);
  }
  double mean_loss() const noexcept { return total == 0 ? 0.0 : loss_sum / static_cast<double>(total); }
};

class HistogramBuilder {
 public:
  HistogramBuilder(std::vector<double> bin_edges, double head_threshold);

  void add(double loss);
  void add(const TokenLossRecord& record);
  /// Integer counts merge exactly; both builders must share edges and threshold.
  void merge(const HistogramBuilder& other);
  const LossHistogram& result() const noexcept { return hist_; }

 private:
  LossHistogram hist_;
};

/// Throws Error(kInvalidArgument) for an empty corpus.
LossHistogram histogram(const LossSource& source, std::vector<double> bin_edges = default_bin_edges(),
                        double head_threshold = 0.1);

/// Drops a leading tokenizer space marker ("Ġ", "▁") and surrounding
/// whitespace. A token that would become empty is returned unchanged.
std::string normalize_token(std::string_view token);

struct TokenStat {
  std::uint64_t count = 0;
  double loss_sum = 0.0;

  double mean() const noexcept { return count == 0 ? 0.0 : loss_sum / static_cast<double>(count); }
};

struct TopQuantileResult {
  double q = 0.1;
  double threshold = 0.0;
  std::uint64_t total_tokens = 0;
  std::uint64_t selected_tokens = 0;
  std::map<std::string, TokenStat> tokens;  // normalized surface -> stats over selected occurrences
};

/// Every occurrence with loss >= the corpus-level threshold, where the
/// threshold is the m-th largest loss and m = round_half_up(q * N) clamped to
/// [1, N]. Ties at the threshold are all included.
TopQuantileResult top_quantile_tokens(const LossSource& source, double q);

/// `token,count,mean_loss`, by count descending then token ascending.
std::string word_cloud_csv(const TopQuantileResult& result);

enum class MatchRule { kExact, kCaseInsensitive };

struct KeyTokenReport {
  std::vector<std::string> token_set;
  std::uint64_t occurrence_count = 0;
  double mean_loss = 0.0;  // pooled over every matching occurrence
  double corpus_mean_loss = 0.0;
  std::uint64_t corpus_tokens = 0;
  std::map<std::string, TokenStat> per_token;
};

/// Throws Error(kInvalidArgument) when nothing in the set occurs.
KeyTokenReport key_token_mean(const LossSource& source, const std::vector<std::string>& token_set,
                              MatchRule rule = MatchRule::kExact);

Json histogram_report(const LossHistogram& h);
Json top_quantile_report(const TopQuantileResult& r, std::size_t max_tokens = 100);
Json key_token_report(const KeyTokenReport& r);

}  // namespace cotkit
