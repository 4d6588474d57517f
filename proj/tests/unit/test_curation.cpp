#include <doctest.h>

#include <random>
#include <set>

#include "cotkit/corpus.hpp"
#include "cotkit/curation.hpp"
#include "cotkit/error.hpp"
#include "cotkit/segmenter.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

using namespace cotkit;

namespace {

Trajectory from_steps(const std::string& id, const std::vector<std::string>& steps, const std::string& source = "r1") {
  std::string text;
  for (std::size_t i = 0; i < steps.size(); ++i) text += (i ? "\n\n" : "") + steps[i];
  Trajectory t{id, "prompt " + id, source, text, segment(text, SegmenterConfig{}), std::nullopt};
  return t;
}

Trajectory with_n_steps(const std::string& id, std::size_t n, const std::string& source) {
  std::vector<std::string> steps;
  for (std::size_t i = 0; i < n; ++i) steps.push_back("step " + std::to_string(i) + ".");
  return from_steps(id, steps, source);
}

std::vector<Trajectory> sized_corpus(const std::vector<std::size_t>& lengths) {
  std::vector<Trajectory> out;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    out.push_back(Trajectory{"t" + std::to_string(i), "p", "r1", std::string(lengths[i], 'x'), std::nullopt, std::nullopt});
  }
  return out;
}

std::vector<std::string> ids(const std::vector<Trajectory>& c) {
  std::vector<std::string> out;
  for (const auto& t : c) out.push_back(t.id);
  return out;
}

}  // namespace

TEST_CASE("proxy1 ratio values") {
  CHECK(proxy1_diff_ratio({"a", with_n_steps("a", 10, "r1"), with_n_steps("a", 4, "v3")}).value == 0.6);
  CHECK(proxy1_diff_ratio({"a", with_n_steps("a", 10, "r1"), with_n_steps("a", 10, "v3")}).value == 0.0);
  CHECK(proxy1_diff_ratio({"a", with_n_steps("a", 4, "r1"), with_n_steps("a", 6, "v3")}).value == -0.5);
  CHECK(proxy1_diff_ratio({"a", with_n_steps("a", 4, "r1"), with_n_steps("a", 10, "v3")}, ReferenceSide::kRight).value ==
        0.6);
  Trajectory empty{"a", "p", "r1", "", std::vector<ReasoningStep>{}, std::nullopt};
  CHECK_THROWS_AS(proxy1_diff_ratio({"a", empty, with_n_steps("a", 2, "v3")}), Error);
  Trajectory raw{"a", "p", "r1", "x", std::nullopt, std::nullopt};
  CHECK_THROWS_AS(proxy1_diff_ratio({"a", raw, with_n_steps("a", 2, "v3")}), Error);
}

TEST_CASE("proxy2 branch fraction") {
  auto t = from_steps("a", {"Perhaps we try x.", "Compute y.", "Another idea is z.", "So w."});
  CHECK(proxy2_branch_fraction(t, default_branch_lexicon()).value == 0.5);
  CHECK(proxy2_branch_fraction(from_steps("b", {"a.", "b."}), default_branch_lexicon()).value == 0.0);
  CHECK(proxy2_branch_fraction(from_steps("c", {"maybe.", "Maybe not."}), default_branch_lexicon()).value == 1.0);
  // "anothers" is not the word "another".
  CHECK(proxy2_branch_fraction(from_steps("d", {"anothers."}), {"another"}).value == 0.0);
}

TEST_CASE("proxy2 agrees with a regex oracle") {
  std::mt19937_64 rng(5);
  const std::vector<std::string> words = {"perhaps", "Perhaps", "PERHAPS", "perhapsy", "another", "xanother",
                                          "maybe",   "what",    "if",      "what if",  "or",      "alternatively",
                                          "calc",    "_maybe",  "maybe_",  "way",      "idea",    "another way"};
  const auto lexicon = default_branch_lexicon();
  for (int round = 0; round < 200; ++round) {
    std::vector<std::string> steps(1 + testing::uniform_index(rng, 6));
    for (auto& s : steps) {
      const std::size_t n = 1 + testing::uniform_index(rng, 6);
      for (std::size_t w = 0; w < n; ++w) {
        s += (w ? (testing::uniform_index(rng, 4) == 0 ? ", " : " ") : "") + words[testing::uniform_index(rng, words.size())];
      }
      s += ".";
    }
    auto t = from_steps("r", steps);
    std::vector<std::string> step_texts;
    for (const auto& st : *t.steps) step_texts.push_back(st.text);
    CHECK(proxy2_branch_fraction(t, lexicon).value == testing::regex_branch_fraction(step_texts, lexicon));
  }
}

TEST_CASE("token length rules") {
  Trajectory t{"a", "p", "r1", "ab cd", std::nullopt, std::nullopt};
  CHECK(token_length(t).value == 5);
  CHECK(token_length(t, LengthRule::kWords).value == 2);
  Trajectory e{"e", "p", "r1", "", std::nullopt, std::nullopt};
  CHECK(token_length(e).value == 0);
  CHECK(token_length(e, LengthRule::kWords).value == 0);
  Trajectory u{"u", "p", "r1", "λé", std::nullopt, std::nullopt};
  CHECK(token_length(u).value == 2);
}

TEST_CASE("scores CSV round trip") {
  std::vector<CurationScore> s = {{"a", ScoreMetric::kProxy1DiffRatio, 0.6}, {"b", ScoreMetric::kProxy1DiffRatio, -0.5}};
  auto back = parse_scores_csv(scores_csv(s));
  REQUIRE(back.size() == 2);
  CHECK(back[1].trajectory_id == "b");
  CHECK(back[1].value == -0.5);
  CHECK_THROWS_AS(parse_scores_csv("trajectory_id,metric,value\na,bogus,1\n"), Error);
  CHECK_THROWS_AS(scores_csv({{"b,c", ScoreMetric::kProxy1DiffRatio, 1.0}}), Error);
}

TEST_CASE("remove_top drops the ten longest of a hundred") {
  std::vector<std::size_t> lengths;
  for (std::size_t i = 0; i < 100; ++i) lengths.push_back(i + 1);
  auto corpus = sized_corpus(lengths);
  ScoreTable scores;
  for (const auto& t : corpus) scores[t.id] = token_length(t).value;
  auto r = apply_filter(corpus, scores, FilterSpec{ScoreMetric::kTokenLength, FilterMode::kRemoveTop, 0.1});
  CHECK(r.kept.size() == 90);
  REQUIRE(r.removed.size() == 10);
  for (const auto& rm : r.removed) CHECK(rm.score > 90);
  auto longest = apply_filter(corpus, scores, FilterSpec{ScoreMetric::kTokenLength, FilterMode::kRemoveLongest, 0.1});
  CHECK(ids(longest.kept) == ids(r.kept));
}

TEST_CASE("keep_bottom keeps the lowest scores") {
  auto corpus = sized_corpus({1, 1, 1, 1, 1, 1, 1, 1, 1, 1});
  ScoreTable scores;
  for (std::size_t i = 0; i < corpus.size(); ++i) scores[corpus[i].id] = i < 5 ? 0.0 : static_cast<double>(i);
  auto r = apply_filter(corpus, scores, FilterSpec{ScoreMetric::kProxy2BranchFraction, FilterMode::kKeepBottom, 0.5});
  CHECK(ids(r.kept) == std::vector<std::string>{"t0", "t1", "t2", "t3", "t4"});
}

TEST_CASE("filter validation") {
  CHECK_THROWS_AS((FilterSpec{ScoreMetric::kTokenLength, FilterMode::kRemoveTop, 1.5}.validate()), Error);
  CHECK_THROWS_AS((FilterSpec{ScoreMetric::kTokenLength, FilterMode::kRemoveTop, 0.0}.validate()), Error);
  CHECK_THROWS_AS((FilterSpec{ScoreMetric::kProxy1DiffRatio, FilterMode::kRemoveLongest, 0.1}.validate()), Error);
  try {
    FilterSpec{ScoreMetric::kTokenLength, FilterMode::kRemoveTop, 1.5}.validate();
  } catch (const Error& e) {
    CHECK(std::string(e.what()) == "k must be in (0,1)");
    CHECK(e.code() == ErrorCode::kInvalidArgument);
  }
  CHECK(filter_mode_from_name("remove-top") == FilterMode::kRemoveTop);
  CHECK(filter_mode_from_name("keep_bottom") == FilterMode::kKeepBottom);
  CHECK_FALSE(filter_mode_from_name("drop").has_value());
  auto corpus = sized_corpus({1, 2});
  CHECK_THROWS_AS(apply_filter(corpus, ScoreTable{{"t0", 1.0}}, FilterSpec{}), Error);
}

TEST_CASE("filter equals sort-and-select on random tables") {
  std::mt19937_64 rng(12);
  const FilterMode modes[] = {FilterMode::kRemoveTop, FilterMode::kKeepBottom, FilterMode::kKeepTop};
  for (int round = 0; round < 100; ++round) {
    const std::size_t n = 1 + testing::uniform_index(rng, 60);
    std::vector<Trajectory> corpus;
    std::vector<std::pair<std::string, double>> items;
    ScoreTable scores;
    for (std::size_t i = 0; i < n; ++i) {
      const std::string id = "id" + std::to_string(testing::uniform_index(rng, 1000000)) + "_" + std::to_string(i);
      const double score = static_cast<double>(testing::uniform_index(rng, 7)) / 4.0;  // ties
      corpus.push_back(Trajectory{id, "p", "r1", "x", std::nullopt, std::nullopt});
      items.emplace_back(id, score);
      scores[id] = score;
    }
    const double k = 0.01 + 0.98 * testing::uniform01(rng);
    const FilterMode mode = modes[round % 3];
    auto r = apply_filter(corpus, scores, FilterSpec{ScoreMetric::kProxy2BranchFraction, mode, k});
    auto oracle = testing::sort_and_select(items, k, mode == FilterMode::kKeepBottom, mode != FilterMode::kRemoveTop);
    CHECK(ids(r.kept) == oracle.kept);
    std::set<std::string> removed;
    for (const auto& rm : r.removed) removed.insert(rm.id);
    CHECK(removed == oracle.removed);
  }
}

TEST_CASE("larger k removes a superset") {
  std::mt19937_64 rng(31);
  std::vector<Trajectory> corpus;
  ScoreTable scores;
  for (int i = 0; i < 80; ++i) {
    corpus.push_back(Trajectory{"x" + std::to_string(i), "p", "r1", "x", std::nullopt, std::nullopt});
    scores["x" + std::to_string(i)] = static_cast<double>(testing::uniform_index(rng, 10));
  }
  std::set<std::string> previous;
  for (double k = 0.05; k < 0.99; k += 0.05) {
    auto r = apply_filter(corpus, scores, FilterSpec{ScoreMetric::kTokenLength, FilterMode::kRemoveTop, k});
    std::set<std::string> now;
    for (const auto& rm : r.removed) now.insert(rm.id);
    CHECK(std::includes(now.begin(), now.end(), previous.begin(), previous.end()));
    previous = now;
  }
}

TEST_CASE("deletion count law") {
  CHECK(deletion_count(20, 0.1) == 2);
  CHECK(deletion_count(5, 0.1) == 1);   // 0.5 rounds up
  CHECK(deletion_count(4, 0.1) == 0);
  CHECK(deletion_count(1, 0.5) == 0);
  CHECK(deletion_count(3, 0.9) == 2);   // at least one step survives
  for (std::size_t n = 1; n < 200; ++n) {
    for (double p : {0.0, 0.05, 0.1, 0.25, 0.5, 0.75, 0.95}) {
      CHECK(deletion_count(n, p) == std::min(testing::oracle_round_half_up(p * static_cast<double>(n)), n - 1));
    }
  }
}

TEST_CASE("random step deletion") {
  std::vector<std::string> steps;
  for (int i = 0; i < 20; ++i) steps.push_back("s" + std::to_string(i) + ".");
  auto t = from_steps("abc", steps);
  t.labels = std::vector<BehaviorLabel>(20, BehaviorLabel::kDeduce);
  (*t.labels)[7] = BehaviorLabel::kVerify;

  auto a = delete_random_steps(t, 0.1, 42);
  auto b = delete_random_steps(t, 0.1, 42);
  CHECK(a.step_count() == 18);
  CHECK(to_jsonl_line(a) == to_jsonl_line(b));
  CHECK_NOTHROW(validate(a));

  // Survivors keep their relative order and their labels.
  std::size_t cursor = 0;
  bool saw_verify = false;
  for (std::size_t i = 0; i < a.steps->size(); ++i) {
    const auto& s = (*a.steps)[i];
    CHECK(s.index == i);
    while (cursor < steps.size() && steps[cursor] != s.text) ++cursor;
    REQUIRE(cursor < steps.size());
    CHECK((*a.labels)[i] == (cursor == 7 ? BehaviorLabel::kVerify : BehaviorLabel::kDeduce));
    saw_verify |= cursor == 7;
  }
  (void)saw_verify;

  bool any_differs = false;
  for (std::uint64_t seed = 0; seed < 10; ++seed) any_differs |= to_jsonl_line(delete_random_steps(t, 0.1, seed)) != to_jsonl_line(a);
  CHECK(any_differs);

  CHECK(delete_random_steps(t, 0.0, 1).step_count() == 20);
  CHECK_THROWS_AS(delete_random_steps(t, 1.0, 1), Error);
  CHECK_THROWS_AS(delete_random_steps(t, -0.1, 1), Error);
  Trajectory raw{"r", "p", "r1", "x", std::nullopt, std::nullopt};
  CHECK_THROWS_AS(delete_random_steps(raw, 0.1, 1), Error);
}

TEST_CASE("deletion is roughly uniform over positions") {
  std::vector<std::string> steps;
  for (int i = 0; i < 10; ++i) steps.push_back("s" + std::to_string(i) + ".");
  auto t = from_steps("u", steps);
  std::array<int, 10> kept{};
  const int trials = 4000;
  for (int seed = 0; seed < trials; ++seed) {
    auto d = delete_random_steps(t, 0.2, static_cast<std::uint64_t>(seed));
    for (const auto& s : *d.steps) ++kept[static_cast<std::size_t>(s.text[1] - '0')];
  }
  for (int c : kept) CHECK(c == doctest::Approx(0.8 * trials).epsilon(0.05));
}

TEST_CASE("recipe parsing") {
  auto r = recipe_from_json(Json::parse(R"({"seed": 7, "stages": [
    {"type": "score", "metric": "proxy2"},
    {"type": "filter", "mode": "keep_bottom", "k": 0.9},
    {"type": "delete_steps", "p": 0.1}]})"));
  CHECK(r.seed == 7);
  REQUIRE(r.stages.size() == 3);
  CHECK(std::get<FilterStage>(r.stages[1]).k == 0.9);
  CHECK(recipe_from_json(recipe_to_json(r)).stages.size() == 3);
  CHECK_THROWS_AS(recipe_from_json(Json::parse(R"({"stages": [{"type": "shuffle"}]})")), Error);
  CHECK_THROWS_AS(recipe_from_json(Json::parse(R"({"stages": [{"type": "filter", "k": 2}]})")), Error);
  CHECK_THROWS_AS(recipe_from_json(Json::parse(R"({"seed": 1, "extra": 0})")), Error);
}

TEST_CASE("score then keep_bottom composes") {
  std::vector<Trajectory> corpus;
  for (int i = 0; i < 10; ++i) {
    corpus.push_back(from_steps("c" + std::to_string(i), {i == 3 ? "Perhaps x." : "x.", "y."}));
  }
  Recipe recipe{1, {ScoreStage{}, FilterStage{FilterMode::kKeepBottom, 0.9}}};
  auto r = curate_corpus(corpus, recipe);
  CHECK(r.corpus.size() == 9);
  for (const auto& t : r.corpus) CHECK(t.id != "c3");
  CHECK(r.manifest["stages"][1]["removed"][0]["id"] == "c3");
  CHECK(r.manifest["output"]["count"] == 9);

  Recipe filter_first{1, {FilterStage{}}};
  CHECK_THROWS_AS(curate_corpus(corpus, filter_first), Error);
}

TEST_CASE("empty recipe is the identity") {
  std::vector<Trajectory> corpus = {from_steps("a", {"x."}), from_steps("b", {"y."})};
  auto r = curate_corpus(corpus, Recipe{});
  CHECK(corpus_digest(r.corpus) == corpus_digest(corpus));
  CHECK(r.manifest["input"]["sha256"] == r.manifest["output"]["sha256"]);
}

TEST_CASE("manifest replay reproduces the output and rejects other inputs") {
  std::vector<Trajectory> corpus;
  for (int i = 0; i < 12; ++i) corpus.push_back(with_n_steps("m" + std::to_string(i), 5 + i, "r1"));
  Recipe recipe{9, {ScoreStage{ScoreMetric::kTokenLength}, FilterStage{FilterMode::kRemoveTop, 0.25}, DeleteStage{0.2}}};
  auto first = curate_corpus(corpus, recipe, CurateOptions{4, {}});
  auto again = replay_manifest(corpus, first.manifest);
  CHECK(corpus_digest(again.corpus) == corpus_digest(first.corpus));
  auto tampered = corpus;
  tampered.pop_back();
  CHECK_THROWS_AS(replay_manifest(tampered, first.manifest), Error);
}

TEST_CASE("proxy1 stage pairs against a counterpart file") {
  testing::TempDir dir;
  std::vector<Trajectory> r1 = {with_n_steps("a", 10, "r1"), with_n_steps("b", 10, "r1")};
  std::vector<Trajectory> v3 = {with_n_steps("a", 4, "v3"), with_n_steps("b", 10, "v3")};
  write_corpus(v3, dir.path() / "v3.jsonl");
  ScoreStage s;
  s.metric = ScoreMetric::kProxy1DiffRatio;
  s.counterpart = "v3.jsonl";
  Recipe recipe{0, {s, FilterStage{FilterMode::kRemoveTop, 0.5}}};
  auto r = curate_corpus(r1, recipe, CurateOptions{1, dir.path()});
  REQUIRE(r.corpus.size() == 1);
  CHECK(r.corpus[0].id == "b");

  v3.pop_back();
  write_corpus(v3, dir.path() / "v3.jsonl");
  CHECK_THROWS_AS(curate_corpus(r1, recipe, CurateOptions{1, dir.path()}), Error);
}
