#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "cotkit/json.hpp"

#include "cotkit/types.hpp"

namespace cotkit {

// JSON mapping of the corpus record schemas.
Json to_json(const Trajectory& t);
Trajectory trajectory_from_json(const Json& j);
Json to_json(const TokenLossRecord& r);
TokenLossRecord token_loss_from_json(const Json& j);

/// One JSONL line (with trailing newline) exactly as write_corpus emits it.
std::string to_jsonl_line(const Trajectory& t);

struct ReadOptions {
  bool strict = true;
  std::optional<std::size_t> limit;
};

struct SkippedLine {
  std::size_t line = 0;  // 1-based
  std::string reason;
};

/// Single-cursor JSONL reader. Holds one record at a time; the only state
/// that grows with the file is the id set used for duplicate detection.
class CorpusReader {
 public:
  explicit CorpusReader(const std::filesystem::path& path, ReadOptions options = {});

  std::optional<Trajectory> next();
  const std::vector<SkippedLine>& skipped() const noexcept { return skipped_; }
  std::size_t yielded() const noexcept { return yielded_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  ReadOptions options_;
  std::size_t line_no_ = 0;
  std::size_t yielded_ = 0;
  std::unordered_set<std::string> seen_ids_;
  std::vector<SkippedLine> skipped_;
};

/// Streams every record through `fn`; returns the lenient-mode skip report.
std::vector<SkippedLine> for_each_trajectory(const std::filesystem::path& path, const ReadOptions& options,
                                             const std::function<void(Trajectory&&)>& fn);

std::vector<Trajectory> read_corpus(const std::filesystem::path& path, const ReadOptions& options = {},
                                    std::vector<SkippedLine>* skipped = nullptr);

/// Atomic: writes to a sibling temp file and renames over `path`.
std::size_t write_corpus(const std::vector<Trajectory>& corpus, const std::filesystem::path& path);

class TokenLossReader {
 public:
  explicit TokenLossReader(const std::filesystem::path& path, ReadOptions options = {});
  std::optional<TokenLossRecord> next();
  const std::vector<SkippedLine>& skipped() const noexcept { return skipped_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  ReadOptions options_;
  std::size_t line_no_ = 0;
  std::size_t yielded_ = 0;
  std::vector<SkippedLine> skipped_;
};

std::size_t write_token_losses(const std::vector<TokenLossRecord>& records, const std::filesystem::path& path);

struct JoinResult {
  std::vector<PairedItem> pairs;  // ordered by id
  std::vector<std::string> unmatched_left;
  std::vector<std::string> unmatched_right;
};

JoinResult join_paired(std::vector<Trajectory> left, std::vector<Trajectory> right);

/// Writes to `<path>.tmp-<n>` and renames into place on commit(). An
/// uncommitted writer removes its temp file on destruction.
class AtomicFileWriter {
 public:
  explicit AtomicFileWriter(std::filesystem::path path);
  ~AtomicFileWriter();
  AtomicFileWriter(const AtomicFileWriter&) = delete;
  AtomicFileWriter& operator=(const AtomicFileWriter&) = delete;

  std::ostream& stream() { return out_; }
  void commit();

 private:
  std::filesystem::path path_;
  std::filesystem::path temp_;
  std::ofstream out_;
  bool committed_ = false;
};

void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace cotkit
