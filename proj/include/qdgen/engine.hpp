#pragma once

// Phase 1: select parents, mutate, classify, verify, score, archive, and
// update the working set, one round at a time.
//
// Randomness: every decision draws from derive_seed(root, {round, slot,
// purpose}), so the archive is a function of (config, root seed) alone and
// does not depend on the number of workers.

#include "qdgen/archive.hpp"
#include "qdgen/gateway.hpp"
#include "qdgen/quality.hpp"
#include "qdgen/skills.hpp"
#include "qdgen/working_set.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace qdgen {

struct EngineConfig {
  std::size_t batch_size = 64;
  std::uint64_t rounds = 5000;
  QualityConfig quality;
  std::size_t max_skills = 3;         // k
  std::size_t vocabulary_size = 100;  // M
  VocabularyMode vocabulary_mode = VocabularyMode::bounded;
  Policy policy = Policy::static_uniform;
  std::size_t working_set_cap = 1000;      // T
  std::optional<std::size_t> niche_cap;    // T_phi, defaults to T
  NicheSelection niche_selection = NicheSelection::uniform;
  std::size_t max_div_niches = 0;          // 0: min(b, #niches)
  std::uint64_t root_seed = 0;
  std::size_t workers = 1;
  std::uint64_t checkpoint_every = 0;      // rounds; 0 disables periodic checkpoints
  int verify_requeue = 2;
  // Anything else that changes results (backend settings, prompts, seed
  // data hash) goes into the config hash through this string.
  std::string fingerprint;

  std::size_t effective_niche_cap() const { return niche_cap.value_or(working_set_cap); }

  // Throws std::invalid_argument naming the offending field.
  void validate() const;

  // Hash of every result-affecting field. `rounds`, `workers` and
  // `checkpoint_every` are excluded so a run can be extended or resumed with
  // different parallelism.
  std::string config_hash() const;
};

class EngineHalted : public std::runtime_error {
 public:
  EngineHalted(const std::string& what, std::uint64_t round)
      : std::runtime_error(what), round_(round) {}
  std::uint64_t round() const { return round_; }

 private:
  std::uint64_t round_;
};

class CheckpointMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SeedDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SeedInput {
  std::string problem;
  std::string solution;
};

struct EngineCounters {
  std::uint64_t rounds_completed = 0;
  std::size_t mutations = 0;  // attempts, parse failures included
  std::size_t parse_failures = 0;
  std::size_t quality_positive = 0;
  std::size_t exact_duplicates = 0;
};

class Engine {
 public:
  // `run_dir` empty: everything stays in memory.
  Engine(EngineConfig cfg, ModelGateway& gateway, std::filesystem::path run_dir = {});

  // Extracts intended answers (SeedDataError listing every item without
  // one), classifies and scores seeds, builds or adopts the vocabulary, and
  // fills the working set.
  void initialize(const std::vector<SeedInput>& seeds,
                  std::optional<SkillVocabulary> vocabulary = std::nullopt);

  // Runs rounds until cfg.rounds are complete or `max_rounds` more have run.
  // On a backend failure: checkpoints the last completed round and throws
  // EngineHalted.
  void run(std::optional<std::uint64_t> max_rounds = std::nullopt);

  // Runs exactly one round.
  void step();

  void checkpoint() const;

  // Restores from run_dir/checkpoint; throws CheckpointMismatch when the
  // config hash differs.
  static Engine resume(EngineConfig cfg, ModelGateway& gateway,
                       const std::filesystem::path& run_dir);

  const EngineConfig& config() const { return cfg_; }
  const Archive& archive() const { return archive_; }
  const WorkingSet& working_set() const { return working_set_; }
  const SkillVocabulary& vocabulary() const { return vocabulary_; }
  const std::vector<ScoredSample>& seeds() const { return seeds_; }
  std::uint64_t rounds_completed() const { return round_; }
  EngineCounters counters() const;

  // Mean working-set quality recorded after each round (round 0 = initial).
  const std::vector<double>& working_set_quality_history() const { return ws_history_; }

  static std::filesystem::path archive_path(const std::filesystem::path& run_dir);
  static std::filesystem::path seeds_path(const std::filesystem::path& run_dir);
  static std::filesystem::path vocabulary_path(const std::filesystem::path& run_dir);
  static std::filesystem::path checkpoint_dir(const std::filesystem::path& run_dir);

 private:
  struct SlotResult {
    ArchiveRecord record;
    std::optional<ScoredSample> scored;
  };

  SlotResult run_slot(std::uint64_t round, std::size_t slot, const Sample& parent);
  ScoredSample score(const Sample& sample, const std::vector<std::string>& raw_skills,
                     const VerificationSet& vs) const;
  VerificationSet verify_with_requeue(const Sample& sample, std::uint64_t seed);
  const Sample& parent_sample(SampleId id) const;

  EngineConfig cfg_;
  ModelGateway* gateway_;
  std::filesystem::path run_dir_;
  Archive archive_;
  WorkingSet working_set_;
  SkillVocabulary vocabulary_;
  std::vector<ScoredSample> seeds_;
  std::uint64_t round_ = 0;
  std::vector<double> ws_history_;
};

// Seed JSON Lines: {"problem": ..., "solution": ...} per line.
std::vector<SeedInput> read_seed_file(const std::filesystem::path& path);

}  // namespace qdgen
