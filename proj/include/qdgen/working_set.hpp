#pragma once

// The bounded pool of mutation candidates, and the four selection/update
// policy pairs that manage it.

#include "qdgen/quality.hpp"
#include "qdgen/sample.hpp"
#include "qdgen/skills.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace qdgen {

struct ScoredSample {
  Sample sample;
  std::optional<SolveRate> solve_rate;  // absent when verification was unusable
  double quality = 0.0;
  SkillSet skills;
};

enum class Policy { static_uniform, static_diverse, dynamic_uniform, dynamic_diverse };

std::string_view to_string(Policy policy);
std::optional<Policy> parse_policy(std::string_view name);
bool is_diverse(Policy policy);
bool is_dynamic(Policy policy);

enum class NicheSelection {
  uniform,  // niche uniformly, then member uniformly
  max_div,  // niches for the round from greedy max unique-skill coverage
};

std::string_view to_string(NicheSelection selection);
std::optional<NicheSelection> parse_niche_selection(std::string_view name);

struct WorkingSetMember {
  ScoredSample scored;
  std::uint64_t insertion = 0;  // global insertion order, seeds first

  SampleId id() const { return scored.sample.id; }
  double quality() const { return scored.quality; }
};

// Higher quality first; ties: earlier insertion, then lower id.
bool ranks_before(const WorkingSetMember& a, const WorkingSetMember& b);

class WorkingSet {
 public:
  // `capacity` is T (dynamic_uniform), `niche_capacity` is T_phi
  // (dynamic_diverse). Both must be >= 1 for their policy.
  WorkingSet(Policy policy, std::size_t capacity, std::size_t niche_capacity);

  // Seeds enter regardless of quality; dynamic caps apply immediately.
  void initialize(std::vector<ScoredSample> seeds);

  // Static policies ignore candidates. Dynamic policies admit candidates with
  // quality > 0 and evict by rank.
  void update(std::span<const ScoredSample> newly_scored);

  // b parent ids drawn with replacement. Throws std::logic_error when empty.
  std::vector<SampleId> select_parents(std::size_t b, std::uint64_t substream_seed,
                                       NicheSelection selection = NicheSelection::uniform,
                                       std::size_t max_div_niches = 0) const;

  Policy policy() const { return policy_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t niche_capacity() const { return niche_capacity_; }
  std::uint64_t next_insertion() const { return next_insertion_; }

  std::size_t size() const;
  bool empty() const { return size() == 0; }
  const WorkingSetMember* find(SampleId id) const;

  // All members; for diverse policies in niche order then rank order.
  std::vector<const WorkingSetMember*> members() const;
  std::vector<SampleId> member_ids() const;
  // Diverse policies only.
  const std::map<SkillSet, std::vector<WorkingSetMember>>& niches() const { return niches_; }

  double mean_quality() const;

  // Checkpoint support.
  void restore(std::vector<WorkingSetMember> members, std::uint64_t next_insertion);

 private:
  void insert_member(WorkingSetMember m);
  void enforce_caps();

  Policy policy_;
  std::size_t capacity_;
  std::size_t niche_capacity_;
  std::uint64_t next_insertion_ = 0;
  std::vector<WorkingSetMember> flat_;  // uniform policies
  std::map<SkillSet, std::vector<WorkingSetMember>> niches_;  // diverse policies
};

}  // namespace qdgen
