#include <benchmark/benchmark.h>

#include <random>

#include "cotkit/annotator.hpp"
#include "cotkit/behavior_stats.hpp"
#include "cotkit/curation.hpp"
#include "cotkit/loss_probe.hpp"
#include "cotkit/segmenter.hpp"

namespace {

std::string synthetic_trace(std::mt19937_64& rng, std::size_t words) {
  static const char* vocab[] = {"Perhaps", "we", "check", "x", "=", "3.14", "so", "Thus", "the", "sum", "is", "wrong",
                                "Another", "way", "7", "?", "."};
  std::string out;
  for (std::size_t i = 0; i < words; ++i) {
    out += vocab[rng() % std::size(vocab)];
    const auto r = rng() % 20;
    out += r == 0 ? "\n\n" : r == 1 ? "\n" : " ";
  }
  return out;
}

std::vector<cotkit::Trajectory> labeled_corpus(std::size_t n, std::size_t steps) {
  std::mt19937_64 rng(1);
  std::vector<cotkit::Trajectory> corpus;
  for (std::size_t i = 0; i < n; ++i) {
    cotkit::Trajectory t{"t" + std::to_string(i), "p", "r1", "", std::vector<cotkit::ReasoningStep>(steps),
                         std::vector<cotkit::BehaviorLabel>(steps)};
    for (auto& l : *t.labels) l = static_cast<cotkit::BehaviorLabel>(rng() % 4);
    corpus.push_back(std::move(t));
  }
  return corpus;
}

void BM_Segment(benchmark::State& state) {
  std::mt19937_64 rng(7);
  const std::string text = synthetic_trace(rng, static_cast<std::size_t>(state.range(0)));
  cotkit::SegmenterConfig cfg;
  cfg.max_step_chars = 200;
  for (auto _ : state) benchmark::DoNotOptimize(cotkit::segment(text, cfg));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_Segment)->Arg(1000)->Arg(20000);

void BM_TransitionMatrix(benchmark::State& state) {
  const auto corpus = labeled_corpus(static_cast<std::size_t>(state.range(0)), 250);
  for (auto _ : state) benchmark::DoNotOptimize(cotkit::transition_matrix(corpus));
  state.SetItemsProcessed(state.iterations() * state.range(0) * 250);
}
BENCHMARK(BM_TransitionMatrix)->Arg(100)->Arg(2000);

void BM_TopQuantile(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::vector<cotkit::TokenLossRecord> records;
  for (int r = 0; r < state.range(0) / 500; ++r) {
    cotkit::TokenLossRecord rec{"r" + std::to_string(r), {}, {}};
    for (int i = 0; i < 500; ++i) {
      rec.tokens.push_back("w" + std::to_string(rng() % 300));
      rec.losses.push_back(static_cast<double>(rng() % 10000) / 1000.0);
    }
    records.push_back(std::move(rec));
  }
  const auto source = cotkit::memory_loss_source(records);
  for (auto _ : state) benchmark::DoNotOptimize(cotkit::top_quantile_tokens(source, 0.1));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TopQuantile)->Arg(100000)->Arg(1000000);

void BM_HeuristicAnnotate(benchmark::State& state) {
  std::mt19937_64 rng(5);
  std::vector<cotkit::Trajectory> corpus;
  for (int i = 0; i < 50; ++i) {
    std::string text = synthetic_trace(rng, 2000);
    corpus.push_back({"t" + std::to_string(i), "p", "r1", text, cotkit::segment(text), std::nullopt});
  }
  for (auto _ : state) {
    auto copy = corpus;
    cotkit::heuristic_annotate_corpus(copy);
    benchmark::DoNotOptimize(copy);
  }
}
BENCHMARK(BM_HeuristicAnnotate);

void BM_Filter(benchmark::State& state) {
  std::mt19937_64 rng(9);
  std::vector<cotkit::Trajectory> corpus;
  cotkit::ScoreTable scores;
  for (int i = 0; i < state.range(0); ++i) {
    corpus.push_back({"id" + std::to_string(i), "p", "r1", "x", std::nullopt, std::nullopt});
    scores[corpus.back().id] = static_cast<double>(rng() % 1000);
  }
  const cotkit::FilterSpec spec{cotkit::ScoreMetric::kTokenLength, cotkit::FilterMode::kRemoveTop, 0.1};
  for (auto _ : state) benchmark::DoNotOptimize(cotkit::apply_filter(corpus, scores, spec));
}
BENCHMARK(BM_Filter)->Arg(10000)->Arg(100000);

}  // namespace

BENCHMARK_MAIN();
