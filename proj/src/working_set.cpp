#include "qdgen/working_set.hpp"

#include "qdgen/rng.hpp"

#include <algorithm>
#include <stdexcept>

namespace qdgen {

std::string_view to_string(Policy policy) {
  switch (policy) {
    case Policy::static_uniform: return "static_uniform";
    case Policy::static_diverse: return "static_diverse";
    case Policy::dynamic_uniform: return "dynamic_uniform";
    case Policy::dynamic_diverse: return "dynamic_diverse";
  }
  return "unknown";
}

std::optional<Policy> parse_policy(std::string_view name) {
  for (auto p : {Policy::static_uniform, Policy::static_diverse, Policy::dynamic_uniform,
                 Policy::dynamic_diverse}) {
    if (to_string(p) == name) return p;
  }
  return std::nullopt;
}

bool is_diverse(Policy policy) {
  return policy == Policy::static_diverse || policy == Policy::dynamic_diverse;
}

bool is_dynamic(Policy policy) {
  return policy == Policy::dynamic_uniform || policy == Policy::dynamic_diverse;
}

std::string_view to_string(NicheSelection selection) {
  return selection == NicheSelection::uniform ? "uniform" : "max_div";
}

std::optional<NicheSelection> parse_niche_selection(std::string_view name) {
  if (name == "uniform") return NicheSelection::uniform;
  if (name == "max_div") return NicheSelection::max_div;
  return std::nullopt;
}

bool ranks_before(const WorkingSetMember& a, const WorkingSetMember& b) {
  if (a.quality() != b.quality()) return a.quality() > b.quality();
  if (a.insertion != b.insertion) return a.insertion < b.insertion;
  return a.id() < b.id();
}

WorkingSet::WorkingSet(Policy policy, std::size_t capacity, std::size_t niche_capacity)
    : policy_(policy), capacity_(capacity), niche_capacity_(niche_capacity) {
  if (policy == Policy::dynamic_uniform && capacity < 1) {
    throw std::invalid_argument("dynamic_uniform needs T >= 1");
  }
  if (policy == Policy::dynamic_diverse && niche_capacity < 1) {
    throw std::invalid_argument("dynamic_diverse needs T_phi >= 1");
  }
}

void WorkingSet::insert_member(WorkingSetMember m) {
  if (is_diverse(policy_)) {
    auto& niche = niches_[m.scored.skills];
    auto pos = std::upper_bound(niche.begin(), niche.end(), m, ranks_before);
    niche.insert(pos, std::move(m));
  } else if (policy_ == Policy::dynamic_uniform) {
    auto pos = std::upper_bound(flat_.begin(), flat_.end(), m, ranks_before);
    flat_.insert(pos, std::move(m));
  } else {
    flat_.push_back(std::move(m));
  }
}

void WorkingSet::enforce_caps() {
  if (policy_ == Policy::dynamic_uniform && flat_.size() > capacity_) {
    flat_.resize(capacity_);
  }
  if (policy_ == Policy::dynamic_diverse) {
    for (auto& [key, niche] : niches_) {
      if (niche.size() > niche_capacity_) niche.resize(niche_capacity_);
    }
  }
}

void WorkingSet::initialize(std::vector<ScoredSample> seeds) {
  flat_.clear();
  niches_.clear();
  next_insertion_ = 0;
  for (auto& s : seeds) insert_member({std::move(s), next_insertion_++});
  enforce_caps();
}

void WorkingSet::update(std::span<const ScoredSample> newly_scored) {
  if (!is_dynamic(policy_)) return;
  for (const auto& s : newly_scored) {
    if (!(s.quality > 0.0)) continue;
    insert_member({s, next_insertion_++});
    // Evict one at a time so each insert sees the niche at its cap.
    enforce_caps();
  }
}

std::vector<SampleId> WorkingSet::select_parents(std::size_t b, std::uint64_t substream_seed,
                                                 NicheSelection selection,
                                                 std::size_t max_div_niches) const {
  if (empty()) throw std::logic_error("cannot select parents from an empty working set");
  Rng rng(substream_seed);
  std::vector<SampleId> out;
  out.reserve(b);
  if (!is_diverse(policy_)) {
    for (std::size_t i = 0; i < b; ++i) out.push_back(flat_[rng.below(flat_.size())].id());
    return out;
  }

  std::vector<const std::vector<WorkingSetMember>*> pools;
  if (selection == NicheSelection::max_div) {
    std::vector<SkillSet> keys;
    std::vector<const std::vector<WorkingSetMember>*> all;
    for (const auto& [key, niche] : niches_) {
      if (niche.empty()) continue;
      keys.push_back(key);
      all.push_back(&niche);
    }
    std::size_t n = max_div_niches > 0 ? max_div_niches : b;
    n = std::min(n, keys.size());
    for (std::size_t idx : max_unique_skill_order(keys, n)) pools.push_back(all[idx]);
  } else {
    for (const auto& [key, niche] : niches_) {
      if (!niche.empty()) pools.push_back(&niche);
    }
  }
  for (std::size_t i = 0; i < b; ++i) {
    const auto& niche = *pools[rng.below(pools.size())];
    out.push_back(niche[rng.below(niche.size())].id());
  }
  return out;
}

std::size_t WorkingSet::size() const {
  if (!is_diverse(policy_)) return flat_.size();
  std::size_t n = 0;
  for (const auto& [key, niche] : niches_) n += niche.size();
  return n;
}

const WorkingSetMember* WorkingSet::find(SampleId id) const {
  if (!is_diverse(policy_)) {
    for (const auto& m : flat_) {
      if (m.id() == id) return &m;
    }
    return nullptr;
  }
  for (const auto& [key, niche] : niches_) {
    for (const auto& m : niche) {
      if (m.id() == id) return &m;
    }
  }
  return nullptr;
}

std::vector<const WorkingSetMember*> WorkingSet::members() const {
  std::vector<const WorkingSetMember*> out;
  if (!is_diverse(policy_)) {
    for (const auto& m : flat_) out.push_back(&m);
  } else {
    for (const auto& [key, niche] : niches_) {
      for (const auto& m : niche) out.push_back(&m);
    }
  }
  return out;
}

std::vector<SampleId> WorkingSet::member_ids() const {
  std::vector<SampleId> out;
  for (const auto* m : members()) out.push_back(m->id());
  return out;
}

double WorkingSet::mean_quality() const {
  auto all = members();
  if (all.empty()) return 0.0;
  double sum = 0.0;
  for (const auto* m : all) sum += m->quality();
  return sum / static_cast<double>(all.size());
}

void WorkingSet::restore(std::vector<WorkingSetMember> members, std::uint64_t next_insertion) {
  flat_.clear();
  niches_.clear();
  // Static uniform keeps seed order, which is insertion order.
  std::sort(members.begin(), members.end(),
            [](const auto& a, const auto& b) { return a.insertion < b.insertion; });
  for (auto& m : members) insert_member(std::move(m));
  next_insertion_ = next_insertion;
}

}  // namespace qdgen
