#pragma once

#include "qdgen/answer.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace qdgen {

using SampleId = std::uint64_t;

enum class Origin { seed, generated };

// A problem-solution pair with its lineage.
struct Sample {
  SampleId id = 0;
  std::string problem;
  std::string solution;
  FinalAnswer answer{""};
  std::optional<SampleId> parent_id;
  std::uint64_t round = 0;
  Origin origin = Origin::generated;
};

struct Rollout {
  std::string text;
  bool correct = false;
  bool infrastructure_failure = false;
};

// K student rollouts for one problem.
struct VerificationSet {
  std::vector<Rollout> rollouts;
  bool unusable = false;

  std::size_t size() const { return rollouts.size(); }
  std::size_t correct_count() const;
  std::size_t infrastructure_failures() const;
  // Indices of successful rollouts, ascending.
  std::vector<std::size_t> successful_indices() const;
};

}  // namespace qdgen
