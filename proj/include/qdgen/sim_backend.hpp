#pragma once

// Deterministic simulated models for offline runs and tests.
//
// Simulated problems carry a payload tag inside the problem text:
//
//   [sim d=0.5 a=42 v=1 s=skill-003;skill-017]
//
// d is the difficulty, a the intended answer, v whether the intended answer
// is actually right, s the skills in relevance order. Every role reads the
// first tag in its prompt. All randomness comes from the substream seed.

#include "qdgen/backend.hpp"
#include "qdgen/sample.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace qdgen {

struct SimProblemPayload {
  double difficulty = 0.5;
  std::int64_t true_answer = 0;
  bool valid = true;
  std::vector<std::string> skills;

  std::string tag() const;
  static std::optional<SimProblemPayload> find_in(std::string_view text);
};

struct SimConfig {
  // Child difficulty = clamp(parent + drift + N(0, mutation_sd)).
  double mutation_sd = 0.2;
  double difficulty_drift = 0.0;
  double skill_swap_probability = 0.3;
  std::size_t skill_universe = 120;
  // P(invalid) = invalidity_slope * difficulty for generated problems.
  double invalidity_slope = 0.5;
  double malformed_mutation_rate = 0.0;
  double garbled_classification_rate = 0.0;
  double transport_failure_rate = 0.0;
  double oracle_unscorable_rate = 0.0;
};

std::string sim_skill_label(std::size_t index);

class SimBackend final : public Backend {
 public:
  explicit SimBackend(SimConfig cfg = {}) : cfg_(cfg) {}

  std::string complete(const RoleConfig& role, std::string_view prompt,
                       std::uint64_t substream_seed) override;

  std::string identity() const override { return "sim"; }

  const SimConfig& config() const { return cfg_; }

 private:
  std::string student(const SimProblemPayload& p, std::uint64_t seed) const;
  std::string generator(const SimProblemPayload& p, std::uint64_t seed) const;
  std::string classifier(const SimProblemPayload& p, std::uint64_t seed) const;
  std::string oracle(const SimProblemPayload& p, std::uint64_t seed) const;

  SimConfig cfg_;
};

struct SeedItem {
  std::string problem;
  std::string solution;
};

struct SimSeedOptions {
  std::size_t count = 200;
  double min_difficulty = 0.0;
  double max_difficulty = 1.0;
  std::size_t max_skills = 3;
  std::size_t skill_universe = 120;
  // Seeds use only the first `skill_pool` labels of the universe (0 = all).
  std::size_t skill_pool = 0;
};

// Seed problems with uniform difficulty and 1..max_skills random skills.
std::vector<SeedItem> make_sim_seeds(const SimSeedOptions& options, std::uint64_t seed);

std::string sim_problem_text(const SimProblemPayload& payload, std::uint64_t nonce);
std::string sim_solution_text(const SimProblemPayload& payload);

}  // namespace qdgen
