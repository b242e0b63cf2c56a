#pragma once

// The append-only archive of mutation attempts and its JSON Lines log.
//
// One line per attempt:
//   {"schema":1,"kind":"generated","id":..,"round":..,"slot":..,"parent_id":..,
//    "problem":..,"solution":..,"answer":..,"skills":[..],"raw_skills":[..],
//    "solve_rate":"n/K","quality":..,"rollouts":[{"text":..,"correct":..,"infra":..}],
//    "flags":[..],"attempts":..}
//   {"schema":1,"kind":"parse_failure","id":..,"round":..,"slot":..,
//    "parent_id":..,"reason":..,"attempts":..}
// Seed records (kind "seed") share the generated layout and live in a
// separate file.

#include "qdgen/quality.hpp"
#include "qdgen/sample.hpp"
#include "qdgen/skills.hpp"
#include "qdgen/working_set.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

namespace qdgen {

inline constexpr int kArchiveSchemaVersion = 1;

enum class RecordKind { seed, generated, parse_failure };

std::string_view to_string(RecordKind kind);

struct ArchiveRecord {
  RecordKind kind = RecordKind::generated;
  SampleId id = 0;
  std::uint64_t round = 0;
  std::uint64_t slot = 0;
  std::optional<SampleId> parent_id;

  // Generated and seed records.
  std::string problem;
  std::string solution;
  std::string answer;  // raw boxed content
  SkillSet skills;
  std::vector<std::string> raw_skills;
  std::optional<SolveRate> solve_rate;
  double quality = 0.0;
  std::vector<Rollout> rollouts;
  std::vector<std::string> flags;

  // Parse failures.
  std::string failure_reason;
  int attempts = 0;

  bool is_scored_problem() const { return kind != RecordKind::parse_failure; }
  bool has_flag(std::string_view flag) const;
  std::vector<std::size_t> successful_rollouts() const;

  ScoredSample to_scored(NormalizationProfile profile = NormalizationProfile::standard) const;
};

std::string record_to_json_line(const ArchiveRecord& record);
// Throws std::runtime_error on malformed input.
ArchiveRecord record_from_json_line(std::string_view line);

struct ArchiveLoad {
  std::vector<ArchiveRecord> records;
  std::size_t corrupt_lines = 0;
};

// Reads a log, skipping (and counting) lines that fail to parse.
ArchiveLoad read_archive_log(const std::filesystem::path& path);

// In-memory archive with an optional append-only log file.
class Archive {
 public:
  Archive() = default;

  // Opens (creating if needed) an append-only log.
  void attach_log(const std::filesystem::path& path);

  void append(std::vector<ArchiveRecord> batch);
  // Adopt records already present in the log (resume).
  void adopt(std::vector<ArchiveRecord> existing);

  const std::vector<ArchiveRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  std::size_t generated_count() const { return generated_; }
  std::size_t parse_failure_count() const { return parse_failures_; }
  std::size_t quality_positive_count() const { return quality_positive_; }
  std::size_t exact_duplicate_count() const { return duplicates_; }

  // Bytes written to the log so far (0 when no log is attached).
  std::uintmax_t log_bytes() const { return log_bytes_; }

 private:
  void count(const ArchiveRecord& r);

  std::vector<ArchiveRecord> records_;
  std::unordered_set<std::string> problems_seen_;
  std::size_t generated_ = 0;
  std::size_t parse_failures_ = 0;
  std::size_t quality_positive_ = 0;
  std::size_t duplicates_ = 0;
  std::ofstream log_;
  std::uintmax_t log_bytes_ = 0;
};

// Build an archive record from a scored sample and its verification.
ArchiveRecord make_generated_record(const ScoredSample& scored, const VerificationSet& vs,
                                    std::vector<std::string> raw_skills, std::uint64_t slot,
                                    RecordKind kind = RecordKind::generated);

// Working-set member snapshot lines.
std::string member_to_json_line(const WorkingSetMember& member);
WorkingSetMember member_from_json_line(std::string_view line,
                                       NormalizationProfile profile = NormalizationProfile::standard);

}  // namespace qdgen
