#include "cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>
#include <thread>

#include "cotkit/annotator.hpp"
#include "cotkit/behavior_stats.hpp"
#include "cotkit/corpus.hpp"
#include "cotkit/curation.hpp"
#include "cotkit/error.hpp"
#include "cotkit/loss_probe.hpp"
#include "cotkit/parallel.hpp"
#include "cotkit/segmenter.hpp"
#include "cotkit/svg.hpp"
#include "cotkit/text.hpp"

#ifndef COTKIT_VERSION
#define COTKIT_VERSION "0.0.0"
#endif

namespace cotkit::cli {
namespace {

struct Options {
  // global
  std::string config;
  std::uint64_t seed = 0;
  bool strict = false;
  bool lenient = false;
  std::size_t threads = 0;

  // shared by most subcommands
  std::string in;
  std::string out;

  // segment
  std::size_t max_step_chars = 2000;
  std::size_t min_step_chars = 1;
  std::string signals = "\\n\\n,\\n,?,.";
  bool force = false;

  // annotate
  std::string endpoint;
  std::string model;
  bool heuristic = false;
  std::string cache;
  std::size_t concurrency = 8;
  int max_retries = 3;
  double temperature = 0.0;
  std::string failures;

  // transition
  std::string compare;

  // loss-report
  double quantile = 0.10;
  double head_threshold = 0.1;
  std::string key_tokens;
  std::string match = "exact";
  std::string word_cloud;
  std::size_t top_n = 100;

  // score
  std::string metric;
  std::string counterpart;
  std::string reference = "left";
  std::string lexicon;
  std::string length_rule = "chars";

  // filter
  std::string mode = "remove-top";
  double k = 0.1;
  std::string scores;
  std::string removed;

  // delete-steps
  double p = 0.1;

  // curate
  std::string recipe;
  std::string replay;
  std::string manifest;
};

std::unique_ptr<CLI::App> build_app(Options& o) {
  auto app = std::make_unique<CLI::App>("Chain-of-thought trace analysis and curation", "cotkit");
  app->option_defaults()->always_capture_default();
  app->fallthrough();
  app->require_subcommand(1);
  app->set_version_flag("--version", COTKIT_VERSION);

  app->add_option("--config", o.config, "JSON file of flag values (flags on the command line win)");
  app->add_option("--seed", o.seed, "Base seed for randomized stages");
  auto* strict = app->add_flag("--strict", o.strict, "Abort on the first malformed input line (default)");
  auto* lenient = app->add_flag("--lenient", o.lenient, "Skip malformed input lines and report them");
  strict->excludes(lenient);
  app->add_option("--threads", o.threads, "Worker threads (0: hardware concurrency)");

  auto io = [&o](CLI::App* sub, const std::string& in_help, const std::string& out_help) {
    sub->add_option("--in", o.in, in_help);
    sub->add_option("--out", o.out, out_help);
  };

  auto* seg = app->add_subcommand("segment", "Split trajectories into reasoning steps");
  io(seg, "Input trajectories (JSONL)", "Output trajectories (JSONL)");
  seg->add_option("--max-step-chars", o.max_step_chars, "Refine pieces longer than this");
  seg->add_option("--min-step-chars", o.min_step_chars, "Drop pieces shorter than this");
  seg->add_option("--signals", o.signals, "Comma-separated split signals by level; \\n, \\t, \\, and \\\\ escapes");
  seg->add_flag("--force", o.force, "Re-segment trajectories that already have steps");

  auto* ann = app->add_subcommand("annotate", "Label every step with a reasoning behavior");
  io(ann, "Segmented trajectories (JSONL)", "Labeled trajectories (JSONL)");
  ann->add_option("--endpoint", o.endpoint, "Chat-completions endpoint URL");
  ann->add_option("--model", o.model, "Model name sent to the endpoint");
  ann->add_flag("--heuristic", o.heuristic, "Use the offline keyword annotator");
  ann->add_option("--cache", o.cache, "Response cache (JSONL)");
  ann->add_option("--concurrency", o.concurrency, "Maximum requests in flight");
  ann->add_option("--max-retries", o.max_retries, "Retries per step after the first attempt");
  ann->add_option("--temperature", o.temperature, "Sampling temperature");
  ann->add_option("--failures", o.failures, "Write the failure report here (JSON)");

  auto* stats = app->add_subcommand("stats", "Behavior distribution report");
  io(stats, "Labeled trajectories (JSONL)", "Report (JSON)");

  auto* trans = app->add_subcommand("transition", "Behavior transition-matrix report");
  io(trans, "Labeled trajectories (JSONL)", "Report (JSON)");
  trans->add_option("--compare", o.compare, "Reference transition report to diff against");

  auto* loss = app->add_subcommand("loss-report", "Token-loss histogram, high-loss tokens and key-token means");
  io(loss, "Token-loss records (JSONL)", "Report (JSON)");
  loss->add_option("--quantile", o.quantile, "Top fraction of losses to export");
  loss->add_option("--head-threshold", o.head_threshold, "Loss below which a token counts as head mass");
  loss->add_option("--key-tokens", o.key_tokens, "File with one key token per line");
  loss->add_option("--match", o.match, "Key-token matching: exact or case-insensitive");
  loss->add_option("--word-cloud", o.word_cloud, "Write token,count,mean_loss CSV here");
  loss->add_option("--top-n", o.top_n, "Tokens listed in the JSON report");

  auto* score = app->add_subcommand("score", "Score trajectories for curation");
  io(score, "Segmented trajectories (JSONL)", "Scores (CSV)");
  score->add_option("--metric", o.metric, "proxy1, proxy2 or length");
  score->add_option("--counterpart", o.counterpart, "Paired corpus for proxy1");
  score->add_option("--reference", o.reference, "Normalizing side for proxy1: left (--in) or right (--counterpart)");
  score->add_option("--lexicon", o.lexicon, "Branching keywords for proxy2, one per line");
  score->add_option("--length-rule", o.length_rule, "chars or words");

  auto* filt = app->add_subcommand("filter", "Drop or keep the extreme fraction by score");
  io(filt, "Trajectories (JSONL)", "Kept trajectories (JSONL)");
  filt->add_option("--mode", o.mode, "remove-top, keep-bottom, keep-top or remove-longest");
  filt->add_option("--k", o.k, "Fraction selected, in (0,1)");
  filt->add_option("--scores", o.scores, "Scores CSV from `score`");
  filt->add_option("--removed", o.removed, "Write the removed ids and scores here (JSON)");

  auto* del = app->add_subcommand("delete-steps", "Randomly delete a fraction of each trajectory's steps");
  io(del, "Segmented trajectories (JSONL)", "Trajectories (JSONL)");
  del->add_option("--p", o.p, "Fraction of steps to delete, in [0,1)");

  auto* cur = app->add_subcommand("curate", "Run a scoring/filtering/deletion recipe with a replayable manifest");
  io(cur, "Trajectories (JSONL)", "Curated trajectories (JSONL)");
  cur->add_option("--recipe", o.recipe, "Recipe (JSON)");
  cur->add_option("--replay", o.replay, "Manifest of an earlier run to reproduce");
  cur->add_option("--manifest", o.manifest, "Manifest path (default: <out>.manifest.json)");

  auto* rep = app->add_subcommand("report", "Render a distribution or transition report as SVG");
  io(rep, "Report (JSON)", "Chart (SVG)");

  return app;
}

// --- argument plumbing ------------------------------------------------------------------

struct Parsed {
  Options options;
  std::unique_ptr<CLI::App> app;
  CLI::App* sub = nullptr;
  std::set<std::string> from_config;
};

CLI::App* active_subcommand(CLI::App& app) {
  auto subs = app.get_subcommands();
  return subs.empty() ? nullptr : subs.front();
}

std::string long_name(const CLI::Option* opt) {
  const auto& names = opt->get_lnames();
  return names.empty() ? std::string() : names.front();
}

bool is_flag(const CLI::Option* opt) { return opt->get_expected_min() == 0; }

std::string config_scalar(const Json& v, const std::string& key) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number() || v.is_boolean()) return v.dump();
  if (v.is_array()) {
    std::string joined;
    for (const auto& item : v) {
      if (!item.is_string() && !item.is_number()) fail(ErrorCode::kInvalidArgument, "config key '" + key + "': bad list item");
      if (!joined.empty()) joined += ',';
      joined += config_scalar(item, key);
    }
    return joined;
  }
  fail(ErrorCode::kInvalidArgument, "config key '" + key + "' must be a string, number, boolean or list");
}

std::vector<const char*> as_argv(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return argv;
}

/// Names the offending word when the first positional argument is not a
/// subcommand; CLI11 would only say that one is required.
void check_subcommand_name(const std::vector<std::string>& args) {
  static const std::set<std::string> known = {"segment", "annotate", "stats", "transition", "loss-report",
                                              "score", "filter", "delete-steps", "curate", "report"};
  static const std::set<std::string> takes_value = {"--config", "--seed", "--threads"};
  for (std::size_t i = 1; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a.rfind("-", 0) == 0) {
      if (takes_value.count(a) > 0) ++i;
      continue;
    }
    if (known.count(a) == 0) fail(ErrorCode::kInvalidArgument, "unknown subcommand '" + a + "'");
    return;
  }
}

/// Parses argv, then re-parses with config-file values appended for every
/// option the command line left unset.
Parsed parse(const std::vector<std::string>& args) {
  check_subcommand_name(args);
  Parsed first;
  first.app = build_app(first.options);
  {
    auto argv = as_argv(args);
    first.app->parse(static_cast<int>(argv.size()), argv.data());
  }
  if (first.options.config.empty()) {
    first.sub = active_subcommand(*first.app);
    return first;
  }

  Json config;
  try {
    config = Json::parse(read_file(first.options.config));
  } catch (const Json::exception& e) {
    fail(ErrorCode::kInvalidArgument, "config " + first.options.config + ": " + e.what());
  }
  if (!config.is_object()) fail(ErrorCode::kInvalidArgument, "config " + first.options.config + " must be a JSON object");

  CLI::App* sub = active_subcommand(*first.app);
  std::vector<std::string> extended = args;
  std::set<std::string> injected;
  // A section named after a subcommand applies only to that subcommand and
  // wins over top-level keys. Every section is validated either way.
  auto inject = [&](const std::string& key, const Json& value, CLI::App* scope, bool active) {
    if (key == "config") fail(ErrorCode::kInvalidArgument, "config files cannot name another config");
    const std::string flag = "--" + key;
    const CLI::Option* opt = scope ? scope->get_option_no_throw(flag) : nullptr;
    if (opt == nullptr && scope == sub) opt = first.app->get_option_no_throw(flag);
    if (opt == nullptr || key == "help" || key == "version") {
      fail(ErrorCode::kInvalidArgument, "unknown config key '" + key + "'");
    }
    if (!active || injected.count(key) > 0) return;
    const bool on_command_line = opt->count() > 0 || ((key == "strict" || key == "lenient") &&
                                                      (first.options.strict || first.options.lenient));
    if (on_command_line) return;
    if (is_flag(opt)) {
      if (!value.is_boolean()) fail(ErrorCode::kInvalidArgument, "config key '" + key + "' must be a boolean");
      if (value.get<bool>()) extended.push_back(flag);
    } else {
      extended.push_back(flag);
      extended.push_back(config_scalar(value, key));
    }
    injected.insert(key);
  };
  for (const auto& [key, value] : config.items()) {
    if (!value.is_object()) continue;
    CLI::App* section = nullptr;
    try {
      section = first.app->get_subcommand(key);
    } catch (const CLI::OptionNotFound&) {
      fail(ErrorCode::kInvalidArgument, "unknown config section '" + key + "'");
    }
    for (const auto& [k, v] : value.items()) inject(k, v, section, section == sub);
  }
  for (const auto& [key, value] : config.items()) {
    if (!value.is_object()) inject(key, value, sub, true);
  }

  Parsed second;
  second.app = build_app(second.options);
  auto argv = as_argv(extended);
  second.app->parse(static_cast<int>(argv.size()), argv.data());
  second.sub = active_subcommand(*second.app);
  second.from_config = std::move(injected);
  return second;
}

Json typed_value(const std::string& s) {
  if (s.empty()) return Json(nullptr);
  double d = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), d);
  if (ec == std::errc() && ptr == s.data() + s.size()) {
    std::int64_t i = 0;
    const auto [iptr, iec] = std::from_chars(s.data(), s.data() + s.size(), i);
    if (iec == std::errc() && iptr == s.data() + s.size()) return Json(i);
    return Json(d);
  }
  return Json(s);
}

/// Every option of the global app and the active subcommand with the value
/// that was actually used.
Json resolved_config(const Parsed& p) {
  Json cfg = Json::object();
  auto add = [&cfg](const CLI::App* app) {
    for (const CLI::Option* opt : app->get_options()) {
      const std::string name = long_name(opt);
      if (name.empty() || name == "help" || name == "version" || name == "config" || name == "strict" ||
          name == "lenient") {
        continue;
      }
      if (is_flag(opt)) {
        cfg[name] = opt->count() > 0;
      } else if (opt->count() > 0) {
        cfg[name] = typed_value(opt->as<std::string>());
      } else {
        cfg[name] = typed_value(opt->get_default_str());
      }
    }
  };
  add(p.app.get());
  cfg["strict"] = !p.options.lenient;
  if (p.sub) add(p.sub);
  return cfg;
}

// --- helpers --------------------------------------------------------------------------------

struct Context {
  const Parsed& parsed;
  std::ostream& out;
  std::ostream& err;

  const Options& o() const { return parsed.options; }
  ReadOptions read_options() const { return ReadOptions{!parsed.options.lenient, std::nullopt}; }
  std::size_t threads() const {
    if (parsed.options.threads > 0) return parsed.options.threads;
    return std::max(1u, std::thread::hardware_concurrency());
  }
  bool seed_given() const {
    return parsed.app->get_option("--seed")->count() > 0 || parsed.from_config.count("seed") > 0;
  }
};

void require(const std::string& value, const std::string& flag, const std::string& sub) {
  if (value.empty()) fail(ErrorCode::kInvalidArgument, sub + " requires " + flag);
}

void warn_skipped(Context& ctx, const std::string& path, const std::vector<SkippedLine>& skipped) {
  for (const auto& s : skipped) ctx.err << "warning: " << path << ":" << s.line << ": " << s.reason << "\n";
}

std::vector<Trajectory> load(Context& ctx, const std::string& path, std::vector<SkippedLine>* skipped = nullptr) {
  std::vector<SkippedLine> local;
  auto corpus = read_corpus(path, ctx.read_options(), &local);
  warn_skipped(ctx, path, local);
  if (skipped) *skipped = std::move(local);
  return corpus;
}

Json provenance(const Context& ctx, const std::string& subcommand, std::size_t records, std::size_t skipped) {
  return Json{{"tool", "cotkit"},
              {"version", COTKIT_VERSION},
              {"subcommand", subcommand},
              {"config", resolved_config(ctx.parsed)},
              {"input", {{"path", ctx.o().in}, {"records", records}, {"skipped_lines", skipped}}}};
}

void write_json(const std::string& path, const Json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

std::string unescape(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\' || i + 1 == s.size()) {
      out += s[i];
      continue;
    }
    const char c = s[++i];
    switch (c) {
      case 'n': out += '\n'; break;
      case 't': out += '\t'; break;
      case 'r': out += '\r'; break;
      default: out += c; break;
    }
  }
  return out;
}

/// Splits on commas not preceded by a backslash, then unescapes each item.
std::vector<std::string> parse_signals(const std::string& spec) {
  std::vector<std::string> items;
  std::string current;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    if (spec[i] == '\\' && i + 1 < spec.size()) {
      current += spec[i];
      current += spec[++i];
    } else if (spec[i] == ',') {
      items.push_back(unescape(current));
      current.clear();
    } else {
      current += spec[i];
    }
  }
  items.push_back(unescape(current));
  return items;
}

std::vector<std::string> read_word_list(const std::string& path) {
  std::vector<std::string> words;
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string t(text::trim(line));
    if (t.empty() || t[0] == '#') continue;
    words.push_back(t);
  }
  if (words.empty()) fail(ErrorCode::kInvalidArgument, path + " lists no tokens");
  return words;
}

// --- subcommands ------------------------------------------------------------------------------

int cmd_segment(Context& ctx) {
  const auto& o = ctx.o();
  SegmenterConfig cfg;
  cfg.signal_strings = parse_signals(o.signals);
  cfg.max_step_chars = o.max_step_chars;
  cfg.min_step_chars = o.min_step_chars;
  cfg.validate();
  require(o.in, "--in", "segment");
  require(o.out, "--out", "segment");
  auto corpus = load(ctx, o.in);
  const auto summary = segment_corpus(corpus, cfg, o.force, ctx.threads());
  write_corpus(corpus, o.out);
  ctx.out << "segmented " << summary.trajectories << " trajectories into " << summary.total_steps << " steps\n";
  return 0;
}

int cmd_annotate(Context& ctx) {
  const auto& o = ctx.o();
  require(o.in, "--in", "annotate");
  require(o.out, "--out", "annotate");
  if (o.heuristic && (!o.endpoint.empty() || !o.cache.empty())) {
    fail(ErrorCode::kInvalidArgument, "--heuristic cannot be combined with --endpoint or --cache");
  }
  if (!o.heuristic && (o.endpoint.empty() || o.model.empty())) {
    fail(ErrorCode::kInvalidArgument, "annotate requires --endpoint and --model unless --heuristic is set");
  }
  auto corpus = load(ctx, o.in);
  for (const auto& t : corpus) {
    if (!t.steps) fail(ErrorCode::kSchema, "trajectory '" + t.id + "' has no steps; run segment first");
  }

  if (o.heuristic) {
    heuristic_annotate_corpus(corpus);
    write_corpus(corpus, o.out);
    ctx.out << "labeled " << corpus.size() << " trajectories with the keyword heuristic\n";
    return 0;
  }

  AnnotatorConfig cfg;
  cfg.endpoint = o.endpoint;
  cfg.model_name = o.model;
  cfg.temperature = o.temperature;
  cfg.max_retries = o.max_retries;
  cfg.max_concurrent_requests = o.concurrency;
  cfg.cache_path = o.cache;
  Annotator annotator(cfg, std::make_shared<HttpChatBackend>());
  auto result = annotator.annotate_corpus(std::move(corpus));
  write_corpus(result.labeled, o.out);

  Json failures = Json::array();
  for (const auto& f : result.failures) {
    failures.push_back({{"trajectory_id", f.trajectory_id}, {"step_index", f.step_index}, {"message", f.message}});
  }
  if (!o.failures.empty()) {
    write_json(o.failures, Json{{"failures", failures}, {"provenance", provenance(ctx, "annotate", result.labeled.size() + result.failures.size(), 0)}});
  }
  ctx.out << "labeled " << result.labeled.size() << " trajectories; " << result.service_calls << " service calls, "
          << result.cache_hits << " cache hits\n";
  if (!result.failures.empty()) {
    fail(ErrorCode::kAnnotation, std::to_string(result.failures.size()) + " step(s) could not be labeled; first: " +
                                     result.failures.front().message);
  }
  return 0;
}

int cmd_stats(Context& ctx) {
  const auto& o = ctx.o();
  require(o.in, "--in", "stats");
  require(o.out, "--out", "stats");
  std::vector<SkippedLine> skipped;
  BehaviorCounter counter;
  std::size_t records = 0;
  skipped = for_each_trajectory(o.in, ctx.read_options(), [&](Trajectory&& t) {
    counter.add(t);
    ++records;
  });
  warn_skipped(ctx, o.in, skipped);
  Json report = distribution_report(counter.distribution());
  report["provenance"] = provenance(ctx, "stats", records, skipped.size());
  write_json(o.out, report);
  return 0;
}

int cmd_transition(Context& ctx) {
  const auto& o = ctx.o();
  require(o.in, "--in", "transition");
  require(o.out, "--out", "transition");
  Json reference;
  if (!o.compare.empty()) reference = Json::parse(read_file(o.compare));
  BehaviorCounter counter;
  std::size_t records = 0;
  auto skipped = for_each_trajectory(o.in, ctx.read_options(), [&](Trajectory&& t) {
    counter.add(t);
    ++records;
  });
  warn_skipped(ctx, o.in, skipped);
  Json report = transition_report(counter.transitions());
  if (!o.compare.empty()) {
    Json cmp = compare_reports(reference, report);
    cmp["reference"] = o.compare;
    report["comparison"] = std::move(cmp);
  }
  report["provenance"] = provenance(ctx, "transition", records, skipped.size());
  write_json(o.out, report);
  return 0;
}

int cmd_loss_report(Context& ctx) {
  const auto& o = ctx.o();
  require(o.in, "--in", "loss-report");
  require(o.out, "--out", "loss-report");
  MatchRule rule;
  if (o.match == "exact") {
    rule = MatchRule::kExact;
  } else if (o.match == "case-insensitive" || o.match == "case_insensitive") {
    rule = MatchRule::kCaseInsensitive;
  } else {
    fail(ErrorCode::kInvalidArgument, "--match must be exact or case-insensitive");
  }
  if (!(o.quantile > 0.0 && o.quantile < 1.0)) fail(ErrorCode::kInvalidArgument, "quantile must be in (0,1)");
  std::vector<std::string> key_tokens;
  if (!o.key_tokens.empty()) key_tokens = read_word_list(o.key_tokens);

  const auto source = file_loss_source(o.in, ctx.read_options());
  const auto hist = histogram(source, default_bin_edges(), o.head_threshold);
  const auto top = top_quantile_tokens(source, o.quantile);

  std::size_t records = 0;
  TokenLossReader counter(o.in, ctx.read_options());
  while (counter.next()) ++records;
  warn_skipped(ctx, o.in, counter.skipped());

  Json report{{"kind", "loss"}, {"histogram", histogram_report(hist)}, {"top_quantile", top_quantile_report(top, o.top_n)}};
  if (!key_tokens.empty()) report["key_tokens"] = key_token_report(key_token_mean(source, key_tokens, rule));
  report["provenance"] = provenance(ctx, "loss-report", records, counter.skipped().size());
  if (!o.word_cloud.empty()) write_file_atomic(o.word_cloud, word_cloud_csv(top));
  write_json(o.out, report);
  return 0;
}

int cmd_score(Context& ctx) {
  const auto& o = ctx.o();
  ScoreMetric metric;
  if (o.metric == "proxy1") {
    metric = ScoreMetric::kProxy1DiffRatio;
  } else if (o.metric == "proxy2") {
    metric = ScoreMetric::kProxy2BranchFraction;
  } else if (o.metric == "length") {
    metric = ScoreMetric::kTokenLength;
  } else {
    fail(ErrorCode::kInvalidArgument, "--metric must be proxy1, proxy2 or length");
  }
  const auto rule = length_rule_from_name(o.length_rule);
  if (!rule) fail(ErrorCode::kInvalidArgument, "--length-rule must be chars or words");
  if (o.reference != "left" && o.reference != "right") fail(ErrorCode::kInvalidArgument, "--reference must be left or right");
  if (metric == ScoreMetric::kProxy1DiffRatio && o.counterpart.empty()) {
    fail(ErrorCode::kInvalidArgument, "proxy1 requires --counterpart");
  }
  if (metric != ScoreMetric::kProxy1DiffRatio && !o.counterpart.empty()) {
    fail(ErrorCode::kInvalidArgument, "--counterpart only applies to proxy1");
  }
  require(o.in, "--in", "score");
  require(o.out, "--out", "score");
  const auto lexicon = o.lexicon.empty() ? default_branch_lexicon() : read_word_list(o.lexicon);

  auto corpus = load(ctx, o.in);
  std::vector<CurationScore> scores;
  if (metric == ScoreMetric::kProxy1DiffRatio) {
    auto joined = join_paired(std::move(corpus), load(ctx, o.counterpart));
    if (!joined.unmatched_left.empty() || !joined.unmatched_right.empty()) {
      const auto& first = joined.unmatched_left.empty() ? joined.unmatched_right.front() : joined.unmatched_left.front();
      fail(ErrorCode::kSchema, std::to_string(joined.unmatched_left.size() + joined.unmatched_right.size()) +
                                   " id(s) have no counterpart, e.g. '" + first + "'");
    }
    const auto side = o.reference == "left" ? ReferenceSide::kLeft : ReferenceSide::kRight;
    scores.resize(joined.pairs.size());
    parallel_for(joined.pairs.size(), ctx.threads(),
                 [&](std::size_t i) { scores[i] = proxy1_diff_ratio(joined.pairs[i], side); });
  } else {
    scores.resize(corpus.size());
    parallel_for(corpus.size(), ctx.threads(), [&](std::size_t i) {
      scores[i] = metric == ScoreMetric::kTokenLength ? token_length(corpus[i], *rule)
                                                      : proxy2_branch_fraction(corpus[i], lexicon);
    });
  }
  write_file_atomic(o.out, scores_csv(scores));
  return 0;
}

int cmd_filter(Context& ctx) {
  const auto& o = ctx.o();
  const auto mode = filter_mode_from_name(o.mode);
  if (!mode) fail(ErrorCode::kInvalidArgument, "--mode must be remove-top, keep-bottom, keep-top or remove-longest");
  FilterSpec spec;
  spec.mode = *mode;
  spec.k = o.k;
  if (!(o.k > 0.0 && o.k < 1.0)) fail(ErrorCode::kInvalidArgument, "k must be in (0,1)");
  require(o.in, "--in", "filter");
  require(o.out, "--out", "filter");
  require(o.scores, "--scores", "filter");

  const auto parsed_scores = parse_scores_csv(read_file(o.scores));
  ScoreTable table;
  for (const auto& s : parsed_scores) table[s.trajectory_id] = s.value;
  if (!parsed_scores.empty()) spec.metric = parsed_scores.front().metric;
  spec.validate();

  std::vector<SkippedLine> skipped;
  auto corpus = load(ctx, o.in, &skipped);
  const std::size_t records = corpus.size();
  auto result = apply_filter(std::move(corpus), table, spec);
  if (!o.removed.empty()) {
    Json removed = Json::array();
    for (const auto& r : result.removed) removed.push_back({{"id", r.id}, {"score", r.score}});
    write_json(o.removed, Json{{"metric", metric_name(spec.metric)},
                               {"mode", filter_mode_name(spec.mode)},
                               {"k", spec.k},
                               {"kept_count", result.kept.size()},
                               {"removed", std::move(removed)},
                               {"provenance", provenance(ctx, "filter", records, skipped.size())}});
  }
  write_corpus(result.kept, o.out);
  ctx.out << "kept " << result.kept.size() << ", removed " << result.removed.size() << "\n";
  return 0;
}

int cmd_delete_steps(Context& ctx) {
  const auto& o = ctx.o();
  if (!(o.p >= 0.0 && o.p < 1.0)) fail(ErrorCode::kInvalidArgument, "p must be in [0,1)");
  require(o.in, "--in", "delete-steps");
  require(o.out, "--out", "delete-steps");
  auto corpus = load(ctx, o.in);
  std::vector<Trajectory> result(corpus.size());
  parallel_for(corpus.size(), ctx.threads(),
               [&](std::size_t i) { result[i] = delete_random_steps(corpus[i], o.p, o.seed); });
  write_corpus(result, o.out);
  return 0;
}

int cmd_curate(Context& ctx) {
  const auto& o = ctx.o();
  if (o.recipe.empty() == o.replay.empty()) fail(ErrorCode::kInvalidArgument, "curate needs exactly one of --recipe or --replay");
  if (!o.replay.empty() && ctx.seed_given()) fail(ErrorCode::kInvalidArgument, "--seed cannot override a replayed manifest");
  require(o.in, "--in", "curate");
  require(o.out, "--out", "curate");
  const std::string manifest_path = o.manifest.empty() ? o.out + ".manifest.json" : o.manifest;

  std::vector<SkippedLine> skipped;
  auto corpus = load(ctx, o.in, &skipped);
  const std::size_t records = corpus.size();
  CurateResult result;
  if (!o.recipe.empty()) {
    Recipe recipe = recipe_from_json(Json::parse(read_file(o.recipe)));
    if (ctx.seed_given()) recipe.seed = o.seed;
    const auto base = std::filesystem::path(o.recipe).parent_path();
    result = curate_corpus(std::move(corpus), recipe, CurateOptions{ctx.threads(), base});
  } else {
    const Json manifest = Json::parse(read_file(o.replay));
    const auto base = std::filesystem::path(o.replay).parent_path();
    result = replay_manifest(std::move(corpus), manifest, CurateOptions{ctx.threads(), base});
  }
  result.manifest["provenance"] = provenance(ctx, "curate", records, skipped.size());
  write_corpus(result.corpus, o.out);
  write_json(manifest_path, result.manifest);
  ctx.out << "curated " << records << " -> " << result.corpus.size() << " trajectories; manifest " << manifest_path
          << "\n";
  return 0;
}

int cmd_report(Context& ctx) {
  const auto& o = ctx.o();
  require(o.in, "--in", "report");
  require(o.out, "--out", "report");
  Json report;
  try {
    report = Json::parse(read_file(o.in));
  } catch (const Json::exception& e) {
    fail(ErrorCode::kSchema, o.in + ": " + e.what());
  }
  write_file_atomic(o.out, render_svg(report));
  return 0;
}

int dispatch(Context& ctx, const std::string& name) {
  if (name == "segment") return cmd_segment(ctx);
  if (name == "annotate") return cmd_annotate(ctx);
  if (name == "stats") return cmd_stats(ctx);
  if (name == "transition") return cmd_transition(ctx);
  if (name == "loss-report") return cmd_loss_report(ctx);
  if (name == "score") return cmd_score(ctx);
  if (name == "filter") return cmd_filter(ctx);
  if (name == "delete-steps") return cmd_delete_steps(ctx);
  if (name == "curate") return cmd_curate(ctx);
  if (name == "report") return cmd_report(ctx);
  fail(ErrorCode::kInvalidArgument, "unknown subcommand '" + name + "'");
}

std::string one_line(std::string s) {
  for (auto& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Parsed parsed;
  try {
    parsed = parse(args);
  } catch (const CLI::CallForHelp&) {
    Options scratch;
    out << build_app(scratch)->help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << COTKIT_VERSION << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    Options scratch;
    err << "E" << static_cast<int>(ErrorCode::kInvalidArgument) << ": " << one_line(e.what()) << "\n";
    err << build_app(scratch)->help();
    return static_cast<int>(ErrorCode::kInvalidArgument);
  } catch (const Error& e) {
    err << "E" << static_cast<int>(e.code()) << ": " << one_line(e.what()) << "\n";
    return static_cast<int>(e.code());
  }

  Context ctx{parsed, out, err};
  try {
    return dispatch(ctx, parsed.sub->get_name());
  } catch (const Error& e) {
    err << "E" << static_cast<int>(e.code()) << ": " << one_line(e.what()) << "\n";
    return static_cast<int>(e.code());
  } catch (const Json::exception& e) {
    err << "E" << static_cast<int>(ErrorCode::kSchema) << ": " << one_line(e.what()) << "\n";
    return static_cast<int>(ErrorCode::kSchema);
  } catch (const std::exception& e) {
    err << "E1: " << one_line(e.what()) << "\n";
    return 1;
  }
}

}  // namespace cotkit::cli
