#include <doctest.h>

#include <sstream>

#include "cli.hpp"
#include "cotkit/corpus.hpp"
#include "temp_dir.hpp"

using namespace cotkit;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "cotkit");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

const char* kCorpus =
    R"({"id":"a","prompt":"p","source":"r1","text":"Let x = 2.5.\n\nPerhaps try y? Check it.\n\nWait, that is wrong."})"
    "\n"
    R"({"id":"b","prompt":"p","source":"r1","text":"Compute.\n\nVerify the sum.\n\nSo done."})"
    "\n";

}  // namespace

TEST_CASE("cli: segment happy path") {
  testing::TempDir dir;
  const auto in = (dir.path() / "a.jsonl").string();
  const auto out = (dir.path() / "b.jsonl").string();
  write_file_atomic(in, kCorpus);
  auto r = invoke({"segment", "--in", in, "--out", out});
  CHECK(r.code == 0);
  auto corpus = read_corpus(out);
  REQUIRE(corpus.size() == 2);
  CHECK(corpus[0].step_count() == 3);
}

TEST_CASE("cli: argument errors") {
  auto unknown = invoke({"segment", "--bogus"});
  CHECK(unknown.code == 2);
  CHECK(unknown.err.rfind("E2: ", 0) == 0);
  CHECK(unknown.err.find("Usage:") != std::string::npos);

  auto k = invoke({"filter", "--k", "1.5"});
  CHECK(k.code == 2);
  CHECK(k.err == "E2: k must be in (0,1)\n");

  CHECK(invoke({"frobnicate"}).code == 2);
  CHECK(invoke({"curate", "--in", "x", "--out", "y"}).code == 2);
  CHECK(invoke({"annotate", "--in", "x", "--out", "y"}).code == 2);
  CHECK(invoke({"stats", "--in", "/nonexistent/x.jsonl", "--out", "y"}).code == 4);
  CHECK(invoke({"--strict", "--lenient", "stats"}).code == 2);
  CHECK(invoke({"--help"}).code == 0);
}

TEST_CASE("cli: pipeline reports are deterministic and carry provenance") {
  testing::TempDir dir;
  auto p = [&](const char* name) { return (dir.path() / name).string(); };
  write_file_atomic(p("in.jsonl"), kCorpus);
  REQUIRE(invoke({"segment", "--in", p("in.jsonl"), "--out", p("seg.jsonl")}).code == 0);
  REQUIRE(invoke({"annotate", "--heuristic", "--in", p("seg.jsonl"), "--out", p("lab.jsonl")}).code == 0);
  REQUIRE(invoke({"stats", "--in", p("lab.jsonl"), "--out", p("stats.json")}).code == 0);
  REQUIRE(invoke({"transition", "--in", p("lab.jsonl"), "--out", p("tr.json")}).code == 0);
  REQUIRE(invoke({"report", "--in", p("tr.json"), "--out", p("tr.svg")}).code == 0);
  REQUIRE(invoke({"report", "--in", p("stats.json"), "--out", p("stats.svg")}).code == 0);
  const auto stats = Json::parse(read_file(p("stats.json")));
  CHECK(stats["provenance"]["input"]["records"] == 2);
  CHECK(stats["provenance"]["config"]["in"] == p("lab.jsonl"));
  CHECK(stats["counts"]["Verify"] == 2);
  CHECK(stats["counts"]["Backtrack"] == 1);

  const std::string first_svg = read_file(p("tr.svg"));
  REQUIRE(invoke({"transition", "--in", p("lab.jsonl"), "--out", p("tr.json")}).code == 0);
  REQUIRE(invoke({"report", "--in", p("tr.json"), "--out", p("tr.svg")}).code == 0);
  CHECK(read_file(p("tr.svg")) == first_svg);

  REQUIRE(invoke({"transition", "--in", p("lab.jsonl"), "--out", p("tr2.json"), "--compare", p("tr.json")}).code == 0);
  const auto cmp = Json::parse(read_file(p("tr2.json")));
  CHECK(cmp["comparison"]["difference"][1][1] == 0.0);
}

TEST_CASE("cli: config values fill unset flags and the command line wins") {
  testing::TempDir dir;
  auto p = [&](const char* name) { return (dir.path() / name).string(); };
  write_file_atomic(p("in.jsonl"), kCorpus);
  write_file_atomic(p("cfg.json"), R"({"seed": 3, "segment": {"max-step-chars": 5}})");
  REQUIRE(invoke({"--config", p("cfg.json"), "segment", "--in", p("in.jsonl"), "--out", p("seg.jsonl")}).code == 0);
  CHECK(read_corpus(p("seg.jsonl"))[0].step_count() == 4);

  REQUIRE(invoke({"--config", p("cfg.json"), "annotate", "--heuristic", "--in", p("seg.jsonl"), "--out", p("lab.jsonl")}).code == 0);
  REQUIRE(invoke({"--config", p("cfg.json"), "stats", "--seed", "9", "--in", p("lab.jsonl"), "--out", p("s.json")}).code == 0);
  CHECK(Json::parse(read_file(p("s.json")))["provenance"]["config"]["seed"] == 9);
  REQUIRE(invoke({"--config", p("cfg.json"), "stats", "--in", p("lab.jsonl"), "--out", p("s.json")}).code == 0);
  CHECK(Json::parse(read_file(p("s.json")))["provenance"]["config"]["seed"] == 3);

  write_file_atomic(p("bad.json"), R"({"nope": 1})");
  auto bad = invoke({"--config", p("bad.json"), "stats", "--in", p("lab.jsonl"), "--out", p("s.json")});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("nope") != std::string::npos);
}

TEST_CASE("cli: lenient mode skips bad lines, strict mode stops") {
  testing::TempDir dir;
  auto p = [&](const char* name) { return (dir.path() / name).string(); };
  write_file_atomic(p("in.jsonl"), std::string(kCorpus) + "{not json\n");
  auto strict = invoke({"segment", "--in", p("in.jsonl"), "--out", p("o.jsonl")});
  CHECK(strict.code == 3);
  CHECK(strict.err.find(":3:") != std::string::npos);
  auto lenient = invoke({"--lenient", "segment", "--in", p("in.jsonl"), "--out", p("o.jsonl")});
  CHECK(lenient.code == 0);
  CHECK(lenient.err.find("warning") != std::string::npos);
  CHECK(read_corpus(p("o.jsonl")).size() == 2);
}

TEST_CASE("cli: score, filter, delete-steps and curate") {
  testing::TempDir dir;
  auto p = [&](const char* name) { return (dir.path() / name).string(); };
  write_file_atomic(p("in.jsonl"), kCorpus);
  REQUIRE(invoke({"segment", "--in", p("in.jsonl"), "--out", p("seg.jsonl")}).code == 0);
  REQUIRE(invoke({"score", "--metric", "length", "--in", p("seg.jsonl"), "--out", p("len.csv")}).code == 0);
  REQUIRE(invoke({"filter", "--mode", "remove-longest", "--k", "0.5", "--scores", p("len.csv"), "--in", p("seg.jsonl"),
                  "--out", p("f.jsonl"), "--removed", p("rm.json")})
              .code == 0);
  const auto kept = read_corpus(p("f.jsonl"));
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].id == "b");
  CHECK(Json::parse(read_file(p("rm.json")))["removed"][0]["id"] == "a");

  REQUIRE(invoke({"score", "--metric", "proxy2", "--in", p("seg.jsonl"), "--out", p("p2.csv")}).code == 0);
  CHECK(invoke({"filter", "--mode", "remove-longest", "--k", "0.5", "--scores", p("p2.csv"), "--in", p("seg.jsonl"),
                "--out", p("f.jsonl")})
            .code == 2);

  REQUIRE(invoke({"delete-steps", "--p", "0.4", "--seed", "7", "--in", p("seg.jsonl"), "--out", p("d1.jsonl")}).code == 0);
  REQUIRE(invoke({"--threads", "8", "delete-steps", "--p", "0.4", "--seed", "7", "--in", p("seg.jsonl"), "--out",
                  p("d2.jsonl")})
              .code == 0);
  CHECK(read_file(p("d1.jsonl")) == read_file(p("d2.jsonl")));
  CHECK(read_corpus(p("d1.jsonl"))[0].step_count() == 2);

  write_file_atomic(p("recipe.json"),
                    R"({"seed": 1, "stages": [{"type": "score", "metric": "proxy2"}, {"type": "filter", "mode": "keep_bottom", "k": 0.5}]})");
  REQUIRE(invoke({"curate", "--recipe", p("recipe.json"), "--in", p("seg.jsonl"), "--out", p("c1.jsonl")}).code == 0);
  REQUIRE(invoke({"curate", "--replay", p("c1.jsonl.manifest.json"), "--in", p("seg.jsonl"), "--out", p("c2.jsonl")}).code == 0);
  CHECK(read_file(p("c1.jsonl")) == read_file(p("c2.jsonl")));
  CHECK(read_corpus(p("c1.jsonl"))[0].id == "b");
  CHECK(invoke({"curate", "--replay", p("c1.jsonl.manifest.json"), "--in", p("f.jsonl"), "--out", p("c3.jsonl")}).code == 3);
}

TEST_CASE("cli: loss report") {
  testing::TempDir dir;
  auto p = [&](const char* name) { return (dir.path() / name).string(); };
  write_file_atomic(p("tl.jsonl"),
                    R"({"trajectory_id":"a","tokens":["ĠPerhaps","x","y","ĠWait"],"losses":[3.5,0.05,0.02,4.0]})"
                    "\n");
  write_file_atomic(p("keys.txt"), "# key tokens\nPerhaps\n");
  REQUIRE(invoke({"loss-report", "--in", p("tl.jsonl"), "--out", p("lr.json"), "--quantile", "0.5", "--key-tokens",
                  p("keys.txt"), "--word-cloud", p("wc.csv")})
              .code == 0);
  CHECK(read_file(p("wc.csv")) == "token,count,mean_loss\nPerhaps,1,3.5\nWait,1,4\n");
  const auto report = Json::parse(read_file(p("lr.json")));
  CHECK(report["key_tokens"]["mean_loss"] == 3.5);
  CHECK(report["histogram"]["head_fraction"] == 0.5);
}
