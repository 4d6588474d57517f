#include "cotkit/curation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "cotkit/corpus.hpp"
#include "cotkit/error.hpp"
#include "cotkit/hash.hpp"
#include "cotkit/numeric.hpp"
#include "cotkit/parallel.hpp"
#include "cotkit/text.hpp"

namespace cotkit {

// --- scoring -------------------------------------------------------------------

std::vector<std::string> default_branch_lexicon() {
  return {"perhaps", "another", "alternatively", "maybe", "what if", "or perhaps", "another idea", "another way"};
}

CurationScore proxy1_diff_ratio(const PairedItem& pair, ReferenceSide reference) {
  const Trajectory& ref = reference == ReferenceSide::kLeft ? pair.left : pair.right;
  const Trajectory& other = reference == ReferenceSide::kLeft ? pair.right : pair.left;
  if (!ref.steps || !other.steps) fail(ErrorCode::kSchema, "pair " + pair.id + ": both sides must be segmented");
  const auto ref_steps = static_cast<double>(ref.steps->size());
  if (ref.steps->empty()) fail(ErrorCode::kInvalidArgument, "pair " + pair.id + ": reference trajectory has no steps");
  const auto other_steps = static_cast<double>(other.steps->size());
  return {pair.id, ScoreMetric::kProxy1DiffRatio, (ref_steps - other_steps) / ref_steps};
}

CurationScore proxy2_branch_fraction(const Trajectory& trajectory, const std::vector<std::string>& keywords) {
  if (keywords.empty()) fail(ErrorCode::kInvalidArgument, "branching lexicon must be nonempty");
  if (!trajectory.steps || trajectory.steps->empty()) {
    fail(ErrorCode::kInvalidArgument, "trajectory " + trajectory.id + " has no steps");
  }
  std::size_t branching = 0;
  for (const auto& step : *trajectory.steps) {
    const bool hit = std::any_of(keywords.begin(), keywords.end(),
                                 [&](const std::string& kw) { return text::contains_whole_word(step.text, kw); });
    if (hit) ++branching;
  }
  return {trajectory.id, ScoreMetric::kProxy2BranchFraction,
          static_cast<double>(branching) / static_cast<double>(trajectory.steps->size())};
}

std::string_view length_rule_name(LengthRule rule) noexcept { return rule == LengthRule::kChars ? "chars" : "words"; }

std::optional<LengthRule> length_rule_from_name(std::string_view name) noexcept {
  if (name == "chars") return LengthRule::kChars;
  if (name == "words") return LengthRule::kWords;
  return std::nullopt;
}

CurationScore token_length(const Trajectory& trajectory, LengthRule rule) {
  const std::size_t n =
      rule == LengthRule::kChars ? text::scalar_count(trajectory.text) : text::split_words(trajectory.text).size();
  return {trajectory.id, ScoreMetric::kTokenLength, static_cast<double>(n)};
}

std::string scores_csv(const std::vector<CurationScore>& scores) {
  std::ostringstream out;
  out << "trajectory_id,metric,value\n";
  char buf[64];
  for (const auto& s : scores) {
    if (s.trajectory_id.find_first_of(",\"\n\r") != std::string::npos) {
      fail(ErrorCode::kInvalidArgument, "trajectory id '" + s.trajectory_id + "' cannot be written to a scores CSV");
    }
    std::snprintf(buf, sizeof buf, "%.17g", s.value);
    out << s.trajectory_id << ',' << metric_name(s.metric) << ',' << buf << '\n';
  }
  return out.str();
}

std::vector<CurationScore> parse_scores_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  std::vector<CurationScore> scores;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line == "trajectory_id,metric,value") continue;
    if (text::trim(line).empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string::npos) fail(ErrorCode::kSchema, "scores CSV line " + std::to_string(line_no) + ": expected 3 fields");
    CurationScore s;
    s.trajectory_id = line.substr(0, c1);
    auto metric = metric_from_name(line.substr(c1 + 1, c2 - c1 - 1));
    if (!metric) fail(ErrorCode::kSchema, "scores CSV line " + std::to_string(line_no) + ": unknown metric");
    s.metric = *metric;
    const std::string value = line.substr(c2 + 1);
    char* end = nullptr;
    s.value = std::strtod(value.c_str(), &end);
    if (value.empty() || end != value.c_str() + value.size() || !std::isfinite(s.value)) {
      fail(ErrorCode::kSchema, "scores CSV line " + std::to_string(line_no) + ": bad value '" + value + "'");
    }
    if (!scores.empty() && scores.front().metric != s.metric) {
      fail(ErrorCode::kSchema, "scores CSV mixes metrics");
    }
    scores.push_back(std::move(s));
  }
  return scores;
}

// --- filtering -----------------------------------------------------------------

std::string_view filter_mode_name(FilterMode mode) noexcept {
  switch (mode) {
    case FilterMode::kRemoveTop: return "remove_top";
    case FilterMode::kKeepBottom: return "keep_bottom";
    case FilterMode::kKeepTop: return "keep_top";
    case FilterMode::kRemoveLongest: return "remove_longest";
  }
  return "remove_top";
}

std::optional<FilterMode> filter_mode_from_name(std::string_view name) noexcept {
  std::string norm(name);
  std::replace(norm.begin(), norm.end(), '-', '_');
  for (auto m : {FilterMode::kRemoveTop, FilterMode::kKeepBottom, FilterMode::kKeepTop, FilterMode::kRemoveLongest}) {
    if (filter_mode_name(m) == norm) return m;
  }
  return std::nullopt;
}

void FilterSpec::validate() const {
  if (!(k > 0.0 && k < 1.0)) fail(ErrorCode::kInvalidArgument, "k must be in (0,1)");
  if (mode == FilterMode::kRemoveLongest && metric != ScoreMetric::kTokenLength) {
    fail(ErrorCode::kInvalidArgument, "remove_longest needs token_length scores");
  }
}

FilterResult apply_filter(std::vector<Trajectory> corpus, const ScoreTable& scores, const FilterSpec& spec) {
  spec.validate();
  struct Ranked {
    std::size_t pos;
    double score;
  };
  std::vector<Ranked> ranked;
  ranked.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    auto it = scores.find(corpus[i].id);
    if (it == scores.end()) fail(ErrorCode::kInvalidArgument, "missing score for id '" + corpus[i].id + "'");
    ranked.push_back({i, it->second});
  }
  const bool bottom = spec.mode == FilterMode::kKeepBottom;
  std::sort(ranked.begin(), ranked.end(), [&](const Ranked& a, const Ranked& b) {
    if (a.score != b.score) return bottom ? a.score < b.score : a.score > b.score;
    return corpus[a.pos].id < corpus[b.pos].id;
  });
  const std::size_t selected = std::min(corpus.size(), round_half_up(spec.k * static_cast<double>(corpus.size())));
  const bool keep_selected = spec.mode == FilterMode::kKeepBottom || spec.mode == FilterMode::kKeepTop;

  std::vector<char> keep(corpus.size(), keep_selected ? 0 : 1);
  for (std::size_t r = 0; r < selected; ++r) keep[ranked[r].pos] = keep_selected ? 1 : 0;

  FilterResult result;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (keep[i]) {
      result.kept.push_back(std::move(corpus[i]));
    } else {
      result.removed.push_back({corpus[i].id, scores.at(corpus[i].id)});
    }
  }
  return result;
}

// --- step deletion ---------------------------------------------------------------

std::size_t deletion_count(std::size_t n, double p) {
  if (n == 0) return 0;
  return std::min(round_half_up(p * static_cast<double>(n)), n - 1);
}

namespace {

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Uniform in [0, bound) by rejection; std distributions are not portable.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

}  // namespace

Trajectory delete_random_steps(const Trajectory& trajectory, double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p < 1.0)) fail(ErrorCode::kInvalidArgument, "p must be in [0,1)");
  if (!trajectory.steps || trajectory.steps->empty()) {
    fail(ErrorCode::kInvalidArgument, "trajectory " + trajectory.id + " has no steps");
  }
  const auto& steps = *trajectory.steps;
  const std::size_t n = steps.size();
  const std::size_t k = deletion_count(n, p);
  if (k == 0) return trajectory;

  std::mt19937_64 rng(splitmix64(seed ^ splitmix64(fnv1a64(trajectory.id))));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(bounded(rng, n - i));
    std::swap(order[i], order[j]);
  }
  std::vector<char> drop(n, 0);
  for (std::size_t i = 0; i < k; ++i) drop[order[i]] = 1;

  Trajectory out;
  out.id = trajectory.id;
  out.prompt = trajectory.prompt;
  out.source = trajectory.source;
  std::vector<ReasoningStep> kept;
  std::vector<BehaviorLabel> labels;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (drop[i]) continue;
    if (!kept.empty()) {
      out.text.push_back('\n');
      ++offset;
    }
    ReasoningStep s = steps[i];
    const std::size_t len = text::scalar_count(s.text);
    s.index = kept.size();
    s.start = offset;
    s.end = offset + len;
    offset += len;
    out.text += s.text;
    kept.push_back(std::move(s));
    if (trajectory.labels) labels.push_back((*trajectory.labels)[i]);
  }
  out.steps = std::move(kept);
  if (trajectory.labels) out.labels = std::move(labels);
  return out;
}

// --- recipes -------------------------------------------------------------------

namespace {

std::string_view short_metric(ScoreMetric m) {
  switch (m) {
    case ScoreMetric::kProxy1DiffRatio: return "proxy1";
    case ScoreMetric::kProxy2BranchFraction: return "proxy2";
    case ScoreMetric::kTokenLength: return "length";
  }
  return "length";
}

ScoreMetric metric_from_recipe(const std::string& name) {
  if (name == "proxy1") return ScoreMetric::kProxy1DiffRatio;
  if (name == "proxy2") return ScoreMetric::kProxy2BranchFraction;
  if (name == "length") return ScoreMetric::kTokenLength;
  if (auto m = metric_from_name(name)) return *m;
  fail(ErrorCode::kSchema, "unknown metric '" + name + "' in recipe");
}

void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      fail(ErrorCode::kSchema, "unknown key '" + key + "' in " + where);
    }
  }
}

}  // namespace

Recipe recipe_from_json(const Json& j) {
  if (!j.is_object()) fail(ErrorCode::kSchema, "recipe must be a JSON object");
  check_keys(j, {"seed", "stages"}, "recipe");
  Recipe recipe;
  try {
    recipe.seed = j.value("seed", std::uint64_t{0});
    if (!j.contains("stages")) return recipe;
    if (!j["stages"].is_array()) fail(ErrorCode::kSchema, "recipe 'stages' must be an array");
    for (const auto& s : j["stages"]) {
      const std::string type = s.value("type", "");
      const std::string where = "recipe stage '" + type + "'";
      if (type == "score") {
        check_keys(s, {"type", "metric", "lexicon", "length_rule", "counterpart", "reference"}, where);
        ScoreStage st;
        st.metric = metric_from_recipe(s.value("metric", ""));
        if (s.contains("lexicon")) st.lexicon = s["lexicon"].get<std::vector<std::string>>();
        if (s.contains("length_rule")) {
          auto rule = length_rule_from_name(s["length_rule"].get<std::string>());
          if (!rule) fail(ErrorCode::kSchema, "unknown length_rule in recipe");
          st.length_rule = *rule;
        }
        st.counterpart = s.value("counterpart", "");
        const std::string ref = s.value("reference", "left");
        if (ref != "left" && ref != "right") fail(ErrorCode::kSchema, "reference must be 'left' or 'right'");
        st.reference = ref == "left" ? ReferenceSide::kLeft : ReferenceSide::kRight;
        if (st.metric == ScoreMetric::kProxy1DiffRatio && st.counterpart.empty()) {
          fail(ErrorCode::kSchema, "proxy1 score stage needs a 'counterpart' corpus");
        }
        recipe.stages.emplace_back(std::move(st));
      } else if (type == "filter") {
        check_keys(s, {"type", "mode", "k"}, where);
        FilterStage st;
        auto mode = filter_mode_from_name(s.value("mode", ""));
        if (!mode) fail(ErrorCode::kSchema, "unknown filter mode in recipe");
        st.mode = *mode;
        st.k = s.at("k").get<double>();
        if (!(st.k > 0.0 && st.k < 1.0)) fail(ErrorCode::kInvalidArgument, "k must be in (0,1)");
        recipe.stages.emplace_back(st);
      } else if (type == "delete_steps") {
        check_keys(s, {"type", "p", "seed"}, where);
        DeleteStage st;
        st.p = s.at("p").get<double>();
        if (!(st.p >= 0.0 && st.p < 1.0)) fail(ErrorCode::kInvalidArgument, "p must be in [0,1)");
        if (s.contains("seed")) st.seed = s["seed"].get<std::uint64_t>();
        recipe.stages.emplace_back(st);
      } else {
        fail(ErrorCode::kSchema, "unknown recipe stage type '" + type + "'");
      }
    }
  } catch (const Json::exception& e) {
    fail(ErrorCode::kSchema, std::string("malformed recipe: ") + e.what());
  }
  return recipe;
}

Json recipe_to_json(const Recipe& recipe) {
  Json stages = Json::array();
  for (const auto& stage : recipe.stages) {
    if (const auto* s = std::get_if<ScoreStage>(&stage)) {
      Json j{{"type", "score"}, {"metric", std::string(short_metric(s->metric))}};
      if (s->metric == ScoreMetric::kProxy2BranchFraction) j["lexicon"] = s->lexicon;
      if (s->metric == ScoreMetric::kTokenLength) j["length_rule"] = std::string(length_rule_name(s->length_rule));
      if (s->metric == ScoreMetric::kProxy1DiffRatio) {
        j["counterpart"] = s->counterpart;
        j["reference"] = s->reference == ReferenceSide::kLeft ? "left" : "right";
      }
      stages.push_back(std::move(j));
    } else if (const auto* f = std::get_if<FilterStage>(&stage)) {
      stages.push_back({{"type", "filter"}, {"mode", std::string(filter_mode_name(f->mode))}, {"k", f->k}});
    } else {
      const auto& d = std::get<DeleteStage>(stage);
      Json j{{"type", "delete_steps"}, {"p", d.p}};
      j["seed"] = d.seed.value_or(recipe.seed);
      stages.push_back(std::move(j));
    }
  }
  return Json{{"seed", recipe.seed}, {"stages", std::move(stages)}};
}

std::string corpus_digest(const std::vector<Trajectory>& corpus) {
  Sha256 hasher;
  for (const auto& t : corpus) hasher.update(to_jsonl_line(t));
  return hasher.hex_digest();
}

namespace {

struct ScoreState {
  ScoreMetric metric;
  ScoreTable table;
};

Json run_score_stage(const ScoreStage& st, const std::vector<Trajectory>& corpus, const CurateOptions& options,
                     std::optional<ScoreState>& state) {
  std::vector<CurationScore> scores(corpus.size());
  Json record{{"type", "score"}, {"metric", std::string(metric_name(st.metric))}};
  switch (st.metric) {
    case ScoreMetric::kProxy2BranchFraction:
      parallel_for(corpus.size(), options.threads,
                   [&](std::size_t i) { scores[i] = proxy2_branch_fraction(corpus[i], st.lexicon); });
      record["lexicon"] = st.lexicon;
      break;
    case ScoreMetric::kTokenLength:
      parallel_for(corpus.size(), options.threads,
                   [&](std::size_t i) { scores[i] = token_length(corpus[i], st.length_rule); });
      record["length_rule"] = std::string(length_rule_name(st.length_rule));
      break;
    case ScoreMetric::kProxy1DiffRatio: {
      std::filesystem::path path(st.counterpart);
      if (path.is_relative() && !options.base_dir.empty()) path = options.base_dir / path;
      auto counterpart = read_corpus(path);
      record["counterpart"] = st.counterpart;
      record["counterpart_sha256"] = corpus_digest(counterpart);
      record["reference"] = st.reference == ReferenceSide::kLeft ? "left" : "right";
      auto joined = join_paired(corpus, std::move(counterpart));
      if (!joined.unmatched_left.empty()) {
        fail(ErrorCode::kInvalidArgument, std::to_string(joined.unmatched_left.size()) +
                                              " trajectories have no counterpart (first: '" +
                                              joined.unmatched_left.front() + "')");
      }
      ScoreTable by_id;
      for (const auto& pair : joined.pairs) by_id[pair.id] = proxy1_diff_ratio(pair, st.reference).value;
      for (std::size_t i = 0; i < corpus.size(); ++i) {
        scores[i] = {corpus[i].id, ScoreMetric::kProxy1DiffRatio, by_id.at(corpus[i].id)};
      }
      break;
    }
  }
  ScoreState next{st.metric, {}};
  for (const auto& s : scores) next.table[s.trajectory_id] = s.value;
  record["scored"] = scores.size();
  state = std::move(next);
  return record;
}

}  // namespace

CurateResult curate_corpus(std::vector<Trajectory> corpus, const Recipe& recipe, const CurateOptions& options) {
  CurateResult result;
  Json manifest;
  manifest["format"] = "cotkit-curation-manifest/1";
  manifest["recipe"] = recipe_to_json(recipe);
  manifest["input"] = {{"count", corpus.size()}, {"sha256", corpus_digest(corpus)}};
  Json stages = Json::array();

  std::optional<ScoreState> scores;
  for (std::size_t i = 0; i < recipe.stages.size(); ++i) {
    Json record;
    if (const auto* s = std::get_if<ScoreStage>(&recipe.stages[i])) {
      record = run_score_stage(*s, corpus, options, scores);
    } else if (const auto* f = std::get_if<FilterStage>(&recipe.stages[i])) {
      if (!scores) fail(ErrorCode::kInvalidArgument, "filter stage " + std::to_string(i) + " has no current scores");
      FilterSpec spec{scores->metric, f->mode, f->k};
      const std::size_t before = corpus.size();
      auto filtered = apply_filter(std::move(corpus), scores->table, spec);
      corpus = std::move(filtered.kept);
      Json removed = Json::array();
      for (const auto& r : filtered.removed) removed.push_back({{"id", r.id}, {"score", r.score}});
      record = {{"type", "filter"},
                {"metric", std::string(metric_name(spec.metric))},
                {"mode", std::string(filter_mode_name(spec.mode))},
                {"k", spec.k},
                {"input_count", before},
                {"kept_count", corpus.size()},
                {"removed_count", filtered.removed.size()},
                {"removed", std::move(removed)}};
    } else {
      const auto& d = std::get<DeleteStage>(recipe.stages[i]);
      const std::uint64_t seed = d.seed.value_or(recipe.seed);
      std::size_t before = 0;
      for (const auto& t : corpus) before += t.step_count();
      parallel_for(corpus.size(), options.threads,
                   [&](std::size_t j) { corpus[j] = delete_random_steps(corpus[j], d.p, seed); });
      std::size_t after = 0;
      for (const auto& t : corpus) after += t.step_count();
      record = {{"type", "delete_steps"}, {"p", d.p},           {"seed", seed},
                {"trajectories", corpus.size()}, {"steps_before", before}, {"steps_after", after}};
      scores.reset();  // step counts changed; rescore before filtering again
    }
    record["stage"] = i;
    stages.push_back(std::move(record));
  }
  manifest["stages"] = std::move(stages);
  manifest["output"] = {{"count", corpus.size()}, {"sha256", corpus_digest(corpus)}};
  result.corpus = std::move(corpus);
  result.manifest = std::move(manifest);
  return result;
}

CurateResult replay_manifest(std::vector<Trajectory> corpus, const Json& manifest, const CurateOptions& options) {
  if (!manifest.is_object() || !manifest.contains("recipe") || !manifest.contains("input") ||
      !manifest.contains("output")) {
    fail(ErrorCode::kSchema, "not a curation manifest");
  }
  const std::string input_digest = corpus_digest(corpus);
  if (manifest["input"].value("sha256", "") != input_digest) {
    fail(ErrorCode::kSchema, "replay input differs from the manifest's recorded input");
  }
  CurateResult result = curate_corpus(std::move(corpus), recipe_from_json(manifest["recipe"]), options);
  if (result.manifest["output"]["sha256"] != manifest["output"].value("sha256", "")) {
    fail(ErrorCode::kSchema, "replay produced a different output corpus");
  }
  return result;
}

}  // namespace cotkit
