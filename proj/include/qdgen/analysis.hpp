#pragma once

// Diagnostics over an archive: validity labels from an oracle, validity by
// solve-rate bin, perturbative verification, coverage curves and solve-rate
// histograms. Tables render as CSV with a header row.

#include "qdgen/archive.hpp"
#include "qdgen/gateway.hpp"
#include "qdgen/quality.hpp"
#include "qdgen/working_set.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qdgen {

enum class Validity { valid, invalid, unscorable };

std::string_view to_string(Validity v);

struct ValidityLabel {
  SampleId id = 0;
  std::optional<FinalAnswer> oracle_answer;
  Validity label = Validity::unscorable;
  bool transport_failure = false;
};

// One oracle completion per sample by default; votes > 1 takes the majority
// over scorable votes (ties count as invalid).
std::vector<ValidityLabel> label_validity(ModelGateway& gateway, std::span<const Sample> samples,
                                          std::uint64_t substream_seed, int votes = 1,
                                          std::size_t workers = 1);

struct ValidityBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
  std::optional<double> mean_validity;
};

// Equal-width bins over [0, 1]; the last bin includes 1. Labels join to
// scores by id; unscorable labels and unscored samples are skipped.
std::vector<ValidityBin> validity_by_solve_rate(std::span<const ValidityLabel> labels,
                                                std::span<const ScoredSample> scored,
                                                std::size_t bins);

// Records whose solve rate lies in [lower, upper].
std::vector<ArchiveRecord> solve_rate_window(std::span<const ArchiveRecord> records,
                                             double lower, double upper);

// Up to `count` distinct quality > 0 generated records, uniformly.
std::vector<ArchiveRecord> sample_quality_positive(std::span<const ArchiveRecord> records,
                                                   std::size_t count, std::uint64_t seed);

struct PerturbationReport {
  SampleId parent_id = 0;
  double parent_quality = 0.0;
  std::vector<double> child_qualities;
  double mean_diff = 0.0;
  double child_failure_rate = 0.0;
  std::size_t requested = 0;       // n asked for
  std::size_t parse_failures = 0;  // redrawn or dropped
};

// mean_diff and failure rate from already scored children.
PerturbationReport summarize_perturbation(SampleId parent_id, double parent_quality,
                                          std::vector<double> child_qualities);

struct PerturbationOptions {
  std::size_t children = 16;  // n
  QualityConfig quality;
  int parse_retry_budget = -1;  // extra draws for parse failures; -1 means n
  int verify_requeue = 2;
};

// Mutates the parent n times, scores each child with K rollouts and reports.
// Children whose verification stays unusable count as parse failures.
PerturbationReport perturbative_report(ModelGateway& gateway, const ScoredSample& parent,
                                       const PerturbationOptions& options,
                                       std::uint64_t substream_seed);

struct CoveragePoint {
  std::size_t problems_generated = 0;
  std::size_t archive_skill_sets = 0;
  std::size_t train_skill_sets = 0;  // quality > 0 subset
  std::size_t archive_unique_skills = 0;
  std::size_t train_unique_skills = 0;
};

struct CoverageCurve {
  std::vector<CoveragePoint> points;
  std::size_t corrupt_lines = 0;
};

// One point every `stride` generated problems plus a final point. Parse
// failures and unclassified problems add no coverage.
CoverageCurve coverage_curve(std::span<const ArchiveRecord> records, std::size_t stride);
CoverageCurve coverage_curve(const std::filesystem::path& archive_log, std::size_t stride);

struct HistogramRow {
  SolveRate value{0, 1};
  std::size_t count = 0;
};

// K + 1 rows, one per attainable n/K. Throws std::invalid_argument when a
// record was scored with a different K.
std::vector<HistogramRow> solve_rate_histogram(std::span<const ArchiveRecord> records,
                                               std::uint32_t k);

std::string validity_labels_csv(std::span<const ValidityLabel> labels);
std::string validity_bins_csv(std::span<const ValidityBin> bins);
std::string perturbation_csv(std::span<const PerturbationReport> reports);
std::string coverage_csv(const CoverageCurve& curve);
std::string histogram_csv(std::span<const HistogramRow> rows);

}  // namespace qdgen
