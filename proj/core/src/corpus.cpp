#include "cotkit/corpus.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <sstream>
#include <system_error>

#include "cotkit/error.hpp"

namespace cotkit {

namespace {

const std::string& require_string(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) fail(ErrorCode::kSchema, std::string("missing or non-string field '") + key + "'");
  return it->get_ref<const std::string&>();
}

std::size_t require_index(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_number_integer() || it->get<long long>() < 0) {
    fail(ErrorCode::kSchema, std::string("missing or invalid integer field '") + key + "'");
  }
  return it->get<std::size_t>();
}

void reject_unknown_keys(const Json& j, std::initializer_list<const char*> allowed, const char* what) {
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      fail(ErrorCode::kSchema, std::string("unknown field '") + key + "' in " + what);
    }
  }
}

// Trailing '\r' from CRLF files is not part of the record.
void chomp(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

bool is_blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](char c) { return c == ' ' || c == '\t'; });
}

std::atomic<unsigned> temp_counter{0};

}  // namespace

Json to_json(const Trajectory& t) {
  Json j;
  j["id"] = t.id;
  j["prompt"] = t.prompt;
  j["source"] = t.source;
  j["text"] = t.text;
  if (t.steps) {
    Json steps = Json::array();
    for (const auto& s : *t.steps) {
      steps.push_back({{"index", s.index}, {"text", s.text}, {"start", s.start}, {"end", s.end},
                       {"split_level", s.split_level}});
    }
    j["steps"] = std::move(steps);
  }
  if (t.labels) {
    Json labels = Json::array();
    for (auto l : *t.labels) labels.push_back(std::string(label_name(l)));
    j["labels"] = std::move(labels);
  }
  return j;
}

Trajectory trajectory_from_json(const Json& j) {
  if (!j.is_object()) fail(ErrorCode::kSchema, "record is not a JSON object");
  reject_unknown_keys(j, {"id", "prompt", "source", "text", "steps", "labels"}, "trajectory record");
  Trajectory t;
  t.id = require_string(j, "id");
  t.prompt = require_string(j, "prompt");
  t.source = require_string(j, "source");
  t.text = require_string(j, "text");
  if (auto it = j.find("steps"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) fail(ErrorCode::kSchema, "'steps' must be an array");
    std::vector<ReasoningStep> steps;
    steps.reserve(it->size());
    for (const auto& s : *it) {
      if (!s.is_object()) fail(ErrorCode::kSchema, "step is not a JSON object");
      reject_unknown_keys(s, {"index", "text", "start", "end", "split_level"}, "step");
      ReasoningStep step;
      step.index = require_index(s, "index");
      step.text = require_string(s, "text");
      step.start = require_index(s, "start");
      step.end = require_index(s, "end");
      step.split_level = static_cast<int>(require_index(s, "split_level"));
      steps.push_back(std::move(step));
    }
    t.steps = std::move(steps);
  }
  if (auto it = j.find("labels"); it != j.end() && !it->is_null()) {
    if (!it->is_array()) fail(ErrorCode::kSchema, "'labels' must be an array");
    std::vector<BehaviorLabel> labels;
    for (const auto& l : *it) {
      if (!l.is_string()) fail(ErrorCode::kSchema, "label must be a string");
      auto label = label_from_name(l.get_ref<const std::string&>());
      if (!label) fail(ErrorCode::kSchema, "unknown label '" + l.get<std::string>() + "'");
      labels.push_back(*label);
    }
    t.labels = std::move(labels);
  }
  validate(t);
  return t;
}

Json to_json(const TokenLossRecord& r) {
  Json j;
  j["trajectory_id"] = r.trajectory_id;
  j["tokens"] = r.tokens;
  j["losses"] = r.losses;
  return j;
}

TokenLossRecord token_loss_from_json(const Json& j) {
  if (!j.is_object()) fail(ErrorCode::kSchema, "record is not a JSON object");
  reject_unknown_keys(j, {"trajectory_id", "tokens", "losses"}, "token-loss record");
  TokenLossRecord r;
  r.trajectory_id = require_string(j, "trajectory_id");
  auto tokens = j.find("tokens");
  auto losses = j.find("losses");
  if (tokens == j.end() || !tokens->is_array()) fail(ErrorCode::kSchema, "missing array field 'tokens'");
  if (losses == j.end() || !losses->is_array()) fail(ErrorCode::kSchema, "missing array field 'losses'");
  r.tokens.reserve(tokens->size());
  for (const auto& tok : *tokens) {
    if (!tok.is_string()) fail(ErrorCode::kSchema, "token must be a string");
    r.tokens.push_back(tok.get<std::string>());
  }
  r.losses.reserve(losses->size());
  for (const auto& v : *losses) {
    if (!v.is_number()) fail(ErrorCode::kSchema, "loss must be a number");
    r.losses.push_back(v.get<double>());
  }
  validate(r);
  return r;
}

CorpusReader::CorpusReader(const std::filesystem::path& path, ReadOptions options)
    : path_(path), in_(path), options_(options) {
  if (!in_) fail(ErrorCode::kIo, "cannot open " + path.string());
}

std::optional<Trajectory> CorpusReader::next() {
  if (options_.limit && yielded_ >= *options_.limit) return std::nullopt;
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    chomp(line);
    if (is_blank(line)) continue;
    try {
      Trajectory t = trajectory_from_json(Json::parse(line));
      if (!seen_ids_.insert(t.id).second) fail(ErrorCode::kSchema, "duplicate id '" + t.id + "'");
      ++yielded_;
      return t;
    } catch (const std::exception& e) {
      const std::string reason = e.what();
      if (options_.strict) {
        fail(ErrorCode::kSchema, path_.string() + ":" + std::to_string(line_no_) + ": " + reason);
      }
      skipped_.push_back({line_no_, reason});
    }
  }
  if (in_.bad()) fail(ErrorCode::kIo, "read error on " + path_.string());
  return std::nullopt;
}

std::vector<SkippedLine> for_each_trajectory(const std::filesystem::path& path, const ReadOptions& options,
                                             const std::function<void(Trajectory&&)>& fn) {
  CorpusReader reader(path, options);
  while (auto t = reader.next()) fn(std::move(*t));
  return reader.skipped();
}

std::vector<Trajectory> read_corpus(const std::filesystem::path& path, const ReadOptions& options,
                                    std::vector<SkippedLine>* skipped) {
  std::vector<Trajectory> out;
  auto skips = for_each_trajectory(path, options, [&](Trajectory&& t) { out.push_back(std::move(t)); });
  if (skipped) *skipped = std::move(skips);
  return out;
}

std::string to_jsonl_line(const Trajectory& t) {
  return to_json(t).dump(-1, ' ', false, Json::error_handler_t::strict) + '\n';
}

std::size_t write_corpus(const std::vector<Trajectory>& corpus, const std::filesystem::path& path) {
  AtomicFileWriter writer(path);
  for (const auto& t : corpus) writer.stream() << to_jsonl_line(t);
  writer.commit();
  return corpus.size();
}

TokenLossReader::TokenLossReader(const std::filesystem::path& path, ReadOptions options)
    : path_(path), in_(path), options_(options) {
  if (!in_) fail(ErrorCode::kIo, "cannot open " + path.string());
}

std::optional<TokenLossRecord> TokenLossReader::next() {
  if (options_.limit && yielded_ >= *options_.limit) return std::nullopt;
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    chomp(line);
    if (is_blank(line)) continue;
    try {
      auto r = token_loss_from_json(Json::parse(line));
      ++yielded_;
      return r;
    } catch (const std::exception& e) {
      if (options_.strict) {
        fail(ErrorCode::kSchema, path_.string() + ":" + std::to_string(line_no_) + ": " + e.what());
      }
      skipped_.push_back({line_no_, e.what()});
    }
  }
  if (in_.bad()) fail(ErrorCode::kIo, "read error on " + path_.string());
  return std::nullopt;
}

std::size_t write_token_losses(const std::vector<TokenLossRecord>& records, const std::filesystem::path& path) {
  AtomicFileWriter writer(path);
  for (const auto& r : records) {
    writer.stream() << to_json(r).dump(-1, ' ', false, Json::error_handler_t::strict) << '\n';
  }
  writer.commit();
  return records.size();
}

JoinResult join_paired(std::vector<Trajectory> left, std::vector<Trajectory> right) {
  auto index = [](std::vector<Trajectory>& side, const char* name) {
    std::map<std::string, Trajectory> by_id;
    for (auto& t : side) {
      std::string id = t.id;
      if (!by_id.emplace(id, std::move(t)).second) {
        fail(ErrorCode::kSchema, std::string("duplicate id '") + id + "' in " + name + " corpus");
      }
    }
    return by_id;
  };
  auto l = index(left, "left");
  auto r = index(right, "right");

  JoinResult result;
  auto li = l.begin();
  auto ri = r.begin();
  while (li != l.end() || ri != r.end()) {
    if (ri == r.end() || (li != l.end() && li->first < ri->first)) {
      result.unmatched_left.push_back(li->first);
      ++li;
    } else if (li == l.end() || ri->first < li->first) {
      result.unmatched_right.push_back(ri->first);
      ++ri;
    } else {
      if (li->second.source == ri->second.source) {
        fail(ErrorCode::kSchema, "pair '" + li->first + "': sources must differ (both '" + li->second.source + "')");
      }
      result.pairs.push_back({li->first, std::move(li->second), std::move(ri->second)});
      ++li;
      ++ri;
    }
  }
  return result;
}

AtomicFileWriter::AtomicFileWriter(std::filesystem::path path) : path_(std::move(path)) {
  temp_ = path_;
  temp_ += ".tmp-" + std::to_string(temp_counter.fetch_add(1));
  out_.open(temp_, std::ios::binary | std::ios::trunc);
  if (!out_) fail(ErrorCode::kIo, "cannot write " + path_.string());
}

AtomicFileWriter::~AtomicFileWriter() {
  if (!committed_) {
    out_.close();
    std::error_code ec;
    std::filesystem::remove(temp_, ec);
  }
}

void AtomicFileWriter::commit() {
  out_.flush();
  if (!out_) fail(ErrorCode::kIo, "write failed for " + path_.string());
  out_.close();
  std::error_code ec;
  std::filesystem::rename(temp_, path_, ec);
  if (ec) {
    std::filesystem::remove(temp_, ec);
    fail(ErrorCode::kIo, "cannot rename into " + path_.string() + ": " + ec.message());
  }
  committed_ = true;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  AtomicFileWriter writer(path);
  writer.stream() << contents;
  writer.commit();
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace cotkit
