#pragma once

// Phase 2: training pairs from the archive, easy-pair downsampling, and the
// budgeted quality / diversity / QD / random subset filters.

#include "qdgen/archive.hpp"
#include "qdgen/skills.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace qdgen {

struct TrainingPair {
  SampleId problem_id = 0;
  std::size_t rollout_index = 0;
  std::string problem;
  std::string verification;  // the successful rollout text
  std::string intended_answer;
  std::string original_solution;
  SolveRate solve_rate{0, 1};
  double quality = 0.0;
  SkillSet skills;
  std::optional<SampleId> parent_id;
  std::uint64_t round = 0;
};

enum class FilterStrategy { quality_gaussian, diversity, qd, random };

std::string_view to_string(FilterStrategy strategy);
std::optional<FilterStrategy> parse_filter_strategy(std::string_view name);

struct FilterSpec {
  FilterStrategy strategy = FilterStrategy::random;
  std::size_t budget = 0;  // N
  double mean = 0.8;       // quality_gaussian only
  double sd = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

class BudgetExceedsPool : public std::runtime_error {
 public:
  BudgetExceedsPool(std::size_t budget, std::size_t available);
  std::size_t available() const { return available_; }

 private:
  std::size_t available_;
};

// One pair per successful rollout of every quality > 0 record.
std::vector<TrainingPair> build_training_pairs(std::span<const ArchiveRecord> archive);

// One pair per quality > 0 record, using its lowest-index successful rollout.
std::vector<TrainingPair> build_unique_pool(std::span<const ArchiveRecord> archive);

// Problems with solve rate >= easy_threshold keep ceil(keep_fraction * n)
// of their n pairs, chosen uniformly; other pairs pass through. Output keeps
// input order.
std::vector<TrainingPair> downsample_easy(std::span<const TrainingPair> pairs,
                                          double easy_threshold, double keep_fraction,
                                          std::uint64_t seed);

// Exactly spec.budget pairs with distinct problems. Throws BudgetExceedsPool
// when the pool has fewer distinct problems than the budget.
std::vector<TrainingPair> filter_subset(std::span<const TrainingPair> pool,
                                        const FilterSpec& spec);

// Gaussian weight used by quality_gaussian (unnormalised density).
double gaussian_weight(double quality, double mean, double sd);

// Sequential weighted draws without replacement: k indices, each step picks
// index i with probability weights[i] / (sum of remaining weights). All-zero
// remaining weights fall back to uniform. Returned in draw order.
std::vector<std::size_t> weighted_draws_without_replacement(std::span<const double> weights,
                                                            std::size_t k, std::uint64_t seed);

// Index chosen by one sequential step for a uniform variate u in [0, 1):
// the first i whose cumulative weight exceeds u * total. Exposed for tests.
std::size_t weighted_pick(std::span<const double> weights, double u);

// Dataset export.
enum class ExportFormat { full, plain };

std::string pair_to_json_line(const TrainingPair& pair, ExportFormat format);
TrainingPair pair_from_json_line(std::string_view line);
void write_dataset(const std::filesystem::path& path, std::span<const TrainingPair> pairs,
                   ExportFormat format);

}  // namespace qdgen
