#include "cotkit/segmenter.hpp"

#include "cotkit/error.hpp"
#include "cotkit/parallel.hpp"
#include "cotkit/text.hpp"

namespace cotkit {

void SegmenterConfig::validate() const {
  if (signal_strings.empty()) fail(ErrorCode::kInvalidArgument, "signal_strings must be nonempty");
  for (const auto& s : signal_strings) {
    if (s.empty()) fail(ErrorCode::kInvalidArgument, "signal strings must be nonempty");
  }
  if (min_step_chars < 1) fail(ErrorCode::kInvalidArgument, "min_step_chars must be >= 1");
  if (max_step_chars <= min_step_chars) fail(ErrorCode::kInvalidArgument, "max_step_chars must exceed min_step_chars");
}

namespace {

struct Signal {
  std::u32string pattern;
  bool consumed = false;  // whitespace-only signals are dropped, others attach left
  bool decimal_guard = false;
};

class Splitter {
 public:
  Splitter(std::u32string_view text, const SegmenterConfig& config) : text_(text), config_(config) {
    for (const auto& s : config.signal_strings) {
      Signal sig;
      sig.pattern = text::decode_utf8(s);
      sig.consumed = true;
      for (char32_t c : sig.pattern) sig.consumed = sig.consumed && text::is_space(c);
      sig.decimal_guard = sig.pattern == U".";
      signals_.push_back(std::move(sig));
    }
  }

  std::vector<ReasoningStep> run() {
    split(0, text_.size(), 0);
    return std::move(steps_);
  }

 private:
  bool matches(const Signal& sig, std::size_t pos, std::size_t end) const {
    if (pos + sig.pattern.size() > end) return false;
    if (text_.compare(pos, sig.pattern.size(), sig.pattern) != 0) return false;
    if (sig.decimal_guard && pos > 0 && pos + 1 < text_.size() && text::is_ascii_digit(text_[pos - 1]) &&
        text::is_ascii_digit(text_[pos + 1])) {
      return false;
    }
    return true;
  }

  // Splits [begin, end) with signal `level` (0-based) and recurses into
  // oversized pieces.
  void split(std::size_t begin, std::size_t end, std::size_t level) {
    const Signal& sig = signals_[level];
    std::size_t piece_start = begin;
    std::size_t pos = begin;
    while (pos < end) {
      if (matches(sig, pos, end)) {
        const std::size_t match_end = pos + sig.pattern.size();
        emit_or_refine(piece_start, sig.consumed ? pos : match_end, level);
        piece_start = match_end;
        pos = match_end;
      } else {
        ++pos;
      }
    }
    emit_or_refine(piece_start, end, level);
  }

  void emit_or_refine(std::size_t begin, std::size_t end, std::size_t level) {
    while (begin < end && text::is_space(text_[begin])) ++begin;
    while (end > begin && text::is_space(text_[end - 1])) --end;
    const std::size_t len = end - begin;
    if (len == 0 || len < config_.min_step_chars) return;
    if (len > config_.max_step_chars && level + 1 < signals_.size()) {
      split(begin, end, level + 1);
      return;
    }
    ReasoningStep step;
    step.index = steps_.size();
    step.text = text::encode_utf8(text_.substr(begin, len));
    step.start = begin;
    step.end = end;
    step.split_level = static_cast<int>(level + 1);
    steps_.push_back(std::move(step));
  }

  std::u32string_view text_;
  const SegmenterConfig& config_;
  std::vector<Signal> signals_;
  std::vector<ReasoningStep> steps_;
};

}  // namespace

std::vector<ReasoningStep> segment(std::string_view text, const SegmenterConfig& config) {
  config.validate();
  const std::u32string scalars = text::decode_utf8(text);
  return Splitter(scalars, config).run();
}

SegmentSummary segment_corpus(std::vector<Trajectory>& corpus, const SegmenterConfig& config, bool force,
                              std::size_t threads) {
  config.validate();
  parallel_for(corpus.size(), threads, [&](std::size_t i) {
    Trajectory& t = corpus[i];
    if (t.steps && !force) return;
    t.steps = segment(t.text, config);
    t.labels.reset();
  });
  SegmentSummary summary;
  summary.trajectories = corpus.size();
  for (const auto& t : corpus) {
    summary.step_counts.push_back(t.step_count());
    summary.total_steps += t.step_count();
  }
  return summary;
}

}  // namespace cotkit
