#include "qdgen/filters.hpp"

#include "qdgen/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

namespace qdgen {

using nlohmann::json;

namespace {

// Fenwick tree over non-negative weights supporting "first index whose
// prefix sum exceeds t" and point removal.
class WeightedSampler {
 public:
  explicit WeightedSampler(std::span<const double> weights)
      : weights_(weights.begin(), weights.end()), tree_(weights.size() + 1, 0.0) {
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      if (!(weights_[i] > 0.0)) weights_[i] = 0.0;
      if (weights_[i] > 0.0) ++positive_;
      add(i, weights_[i]);
      remaining_.push_back(i);
      position_.push_back(i);
    }
  }

  bool has_positive() const { return positive_ > 0; }
  std::size_t remaining() const { return remaining_.size(); }

  double total() const {
    double s = 0.0;
    for (std::size_t i = tree_.size() - 1; i > 0; i -= i & (~i + 1)) s += tree_[i];
    return s;
  }

  std::size_t pick(double u) const {
    double target = u * total();
    std::size_t pos = 0;
    std::size_t step = 1;
    while (step * 2 <= weights_.size()) step *= 2;
    for (; step > 0; step /= 2) {
      if (pos + step <= weights_.size() && tree_[pos + step] <= target) {
        pos += step;
        target -= tree_[pos];
      }
    }
    // Rounding can land on a zero-weight slot; move to the nearest live one.
    if (pos >= weights_.size() || weights_[pos] == 0.0) {
      std::size_t fwd = std::min(pos, weights_.size());
      while (fwd < weights_.size() && weights_[fwd] == 0.0) ++fwd;
      if (fwd < weights_.size()) return fwd;
      std::size_t back = std::min(pos, weights_.size());
      while (back > 0 && weights_[back - 1] == 0.0) --back;
      return back - 1;
    }
    return pos;
  }

  std::size_t pick_uniform(Rng& rng) const { return remaining_[rng.below(remaining_.size())]; }

  void remove(std::size_t i) {
    if (weights_[i] > 0.0) {
      add(i, -weights_[i]);
      weights_[i] = 0.0;
      --positive_;
    }
    std::size_t p = position_[i];
    std::size_t last = remaining_.back();
    remaining_[p] = last;
    position_[last] = p;
    remaining_.pop_back();
  }

 private:
  void add(std::size_t i, double delta) {
    for (std::size_t j = i + 1; j < tree_.size(); j += j & (~j + 1)) tree_[j] += delta;
  }

  std::vector<double> weights_;
  std::vector<double> tree_;
  std::vector<std::size_t> remaining_;
  std::vector<std::size_t> position_;
  std::size_t positive_ = 0;
};

// First pair of each problem, in pool order.
std::vector<const TrainingPair*> distinct_problems(std::span<const TrainingPair> pool) {
  std::unordered_set<SampleId> seen;
  std::vector<const TrainingPair*> out;
  for (const auto& p : pool) {
    if (seen.insert(p.problem_id).second) out.push_back(&p);
  }
  return out;
}

TrainingPair make_pair(const ArchiveRecord& r, std::size_t rollout) {
  TrainingPair p;
  p.problem_id = r.id;
  p.rollout_index = rollout;
  p.problem = r.problem;
  p.verification = r.rollouts[rollout].text;
  p.intended_answer = r.answer;
  p.original_solution = r.solution;
  p.solve_rate = *r.solve_rate;
  p.quality = r.quality;
  p.skills = r.skills;
  p.parent_id = r.parent_id;
  p.round = r.round;
  return p;
}

bool eligible(const ArchiveRecord& r) {
  return r.kind == RecordKind::generated && r.quality > 0.0 && r.solve_rate.has_value();
}

// Niches of the candidates in greedy max-coverage order, members in
// candidate order.
std::vector<std::vector<std::size_t>> niches_in_greedy_order(
    const std::vector<const TrainingPair*>& candidates) {
  std::map<SkillSet, std::vector<std::size_t>> by_niche;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    by_niche[candidates[i]->skills].push_back(i);
  }
  std::vector<SkillSet> keys;
  std::vector<std::vector<std::size_t>> members;
  for (auto& [key, idx] : by_niche) {
    keys.push_back(key);
    members.push_back(std::move(idx));
  }
  std::vector<std::vector<std::size_t>> ordered;
  for (std::size_t i : max_unique_skill_order(keys, keys.size())) {
    ordered.push_back(std::move(members[i]));
  }
  return ordered;
}

// Round-robin over niches, taking take(niche) from each non-empty niche per
// pass, until `budget` picks.
template <typename Take>
std::vector<std::size_t> round_robin(std::vector<std::vector<std::size_t>>& niches,
                                     std::size_t budget, Take take) {
  std::vector<std::size_t> picks;
  while (picks.size() < budget) {
    bool progressed = false;
    for (auto& niche : niches) {
      if (picks.size() >= budget) break;
      if (niche.empty()) continue;
      picks.push_back(take(niche));
      progressed = true;
    }
    if (!progressed) break;
  }
  return picks;
}

}  // namespace

std::string_view to_string(FilterStrategy strategy) {
  switch (strategy) {
    case FilterStrategy::quality_gaussian: return "quality";
    case FilterStrategy::diversity: return "diversity";
    case FilterStrategy::qd: return "qd";
    case FilterStrategy::random: return "random";
  }
  return "unknown";
}

std::optional<FilterStrategy> parse_filter_strategy(std::string_view name) {
  if (name == "quality" || name == "quality_gaussian") return FilterStrategy::quality_gaussian;
  if (name == "diversity") return FilterStrategy::diversity;
  if (name == "qd") return FilterStrategy::qd;
  if (name == "random") return FilterStrategy::random;
  return std::nullopt;
}

void FilterSpec::validate() const {
  if (budget < 1) throw std::invalid_argument("budget must be >= 1");
  if (strategy == FilterStrategy::quality_gaussian) {
    if (!(mean > 0.0 && mean < 1.0)) throw std::invalid_argument("mean must be in (0, 1)");
    if (!(sd > 0.0)) throw std::invalid_argument("sd must be > 0");
  }
}

BudgetExceedsPool::BudgetExceedsPool(std::size_t budget, std::size_t available)
    : std::runtime_error("budget " + std::to_string(budget) + " exceeds the pool: only " +
                         std::to_string(available) + " distinct problems available"),
      available_(available) {}

std::vector<TrainingPair> build_training_pairs(std::span<const ArchiveRecord> archive) {
  std::vector<TrainingPair> out;
  for (const auto& r : archive) {
    if (!eligible(r)) continue;
    for (std::size_t i : r.successful_rollouts()) out.push_back(make_pair(r, i));
  }
  return out;
}

std::vector<TrainingPair> build_unique_pool(std::span<const ArchiveRecord> archive) {
  std::vector<TrainingPair> out;
  for (const auto& r : archive) {
    if (!eligible(r)) continue;
    auto successes = r.successful_rollouts();
    if (!successes.empty()) out.push_back(make_pair(r, successes.front()));
  }
  return out;
}

std::vector<TrainingPair> downsample_easy(std::span<const TrainingPair> pairs,
                                          double easy_threshold, double keep_fraction,
                                          std::uint64_t seed) {
  if (!(keep_fraction >= 0.0 && keep_fraction <= 1.0)) {
    throw std::invalid_argument("keep_fraction must be in [0, 1]");
  }
  std::map<SampleId, std::vector<std::size_t>> by_problem;
  for (std::size_t i = 0; i < pairs.size(); ++i) by_problem[pairs[i].problem_id].push_back(i);

  std::vector<char> keep(pairs.size(), 1);
  for (const auto& [problem, idx] : by_problem) {
    if (pairs[idx.front()].solve_rate.value() < easy_threshold) continue;
    const std::size_t n = idx.size();
    // Tolerance keeps products like 0.1 * 30 from rounding up past an integer.
    auto kept = static_cast<std::size_t>(std::ceil(keep_fraction * static_cast<double>(n) - 1e-9));
    kept = std::min(kept, n);
    std::vector<std::size_t> order = idx;
    Rng rng(derive_seed(seed, problem));
    for (std::size_t i = 0; i < kept; ++i) {
      std::swap(order[i], order[i + rng.below(n - i)]);
    }
    for (std::size_t i = kept; i < n; ++i) keep[order[i]] = 0;
  }
  std::vector<TrainingPair> out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (keep[i]) out.push_back(pairs[i]);
  }
  return out;
}

double gaussian_weight(double quality, double mean, double sd) {
  double z = (quality - mean) / sd;
  return std::exp(-0.5 * z * z);
}

std::size_t weighted_pick(std::span<const double> weights, double u) {
  WeightedSampler sampler(weights);
  if (!sampler.has_positive()) throw std::invalid_argument("no positive weight to pick");
  return sampler.pick(u);
}

std::vector<std::size_t> weighted_draws_without_replacement(std::span<const double> weights,
                                                            std::size_t k, std::uint64_t seed) {
  if (k > weights.size()) throw BudgetExceedsPool(k, weights.size());
  WeightedSampler sampler(weights);
  Rng rng(seed);
  std::vector<std::size_t> out;
  out.reserve(k);
  while (out.size() < k) {
    std::size_t i = sampler.has_positive() ? sampler.pick(rng.uniform()) : sampler.pick_uniform(rng);
    out.push_back(i);
    sampler.remove(i);
  }
  return out;
}

std::vector<TrainingPair> filter_subset(std::span<const TrainingPair> pool,
                                        const FilterSpec& spec) {
  spec.validate();
  auto candidates = distinct_problems(pool);
  if (spec.budget > candidates.size()) throw BudgetExceedsPool(spec.budget, candidates.size());

  std::vector<std::size_t> picks;
  switch (spec.strategy) {
    case FilterStrategy::random: {
      Rng rng(spec.seed);
      std::vector<std::size_t> order(candidates.size());
      std::iota(order.begin(), order.end(), 0);
      for (std::size_t i = 0; i < spec.budget; ++i) {
        std::swap(order[i], order[i + rng.below(order.size() - i)]);
      }
      picks.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(spec.budget));
      break;
    }
    case FilterStrategy::quality_gaussian: {
      std::vector<double> weights;
      weights.reserve(candidates.size());
      for (const auto* c : candidates) weights.push_back(gaussian_weight(c->quality, spec.mean, spec.sd));
      picks = weighted_draws_without_replacement(weights, spec.budget, spec.seed);
      break;
    }
    case FilterStrategy::diversity: {
      auto niches = niches_in_greedy_order(candidates);
      Rng rng(spec.seed);
      picks = round_robin(niches, spec.budget, [&](std::vector<std::size_t>& niche) {
        std::size_t j = rng.below(niche.size());
        std::size_t chosen = niche[j];
        niche.erase(niche.begin() + static_cast<std::ptrdiff_t>(j));
        return chosen;
      });
      break;
    }
    case FilterStrategy::qd: {
      auto niches = niches_in_greedy_order(candidates);
      for (auto& niche : niches) {
        // Best last, so picking pops from the back.
        std::sort(niche.begin(), niche.end(), [&](std::size_t a, std::size_t b) {
          if (candidates[a]->quality != candidates[b]->quality) {
            return candidates[a]->quality < candidates[b]->quality;
          }
          return candidates[a]->problem_id > candidates[b]->problem_id;
        });
      }
      picks = round_robin(niches, spec.budget, [](std::vector<std::size_t>& niche) {
        std::size_t chosen = niche.back();
        niche.pop_back();
        return chosen;
      });
      break;
    }
  }

  std::vector<TrainingPair> out;
  out.reserve(picks.size());
  for (std::size_t i : picks) out.push_back(*candidates[i]);
  return out;
}

std::string pair_to_json_line(const TrainingPair& p, ExportFormat format) {
  if (format == ExportFormat::plain) {
    return json{{"problem", p.problem}, {"solution", p.verification}}.dump();
  }
  json lineage = {{"problem_id", p.problem_id},
                  {"rollout_index", p.rollout_index},
                  {"parent_id", p.parent_id ? json(*p.parent_id) : json(nullptr)},
                  {"round", p.round}};
  return json{{"problem", p.problem},
              {"solution", p.verification},
              {"answer", p.intended_answer},
              {"solve_rate", p.solve_rate.to_string()},
              {"quality", p.quality},
              {"skills", p.skills.labels()},
              {"lineage", lineage}}
      .dump();
}

TrainingPair pair_from_json_line(std::string_view line) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded()) throw std::runtime_error("dataset line is not JSON");
  try {
    TrainingPair p;
    p.problem = j.at("problem").get<std::string>();
    p.verification = j.at("solution").get<std::string>();
    if (j.contains("answer")) p.intended_answer = j.at("answer").get<std::string>();
    if (j.contains("solve_rate")) {
      auto rate = SolveRate::parse(j.at("solve_rate").get<std::string>());
      if (!rate) throw std::runtime_error("malformed solve_rate");
      p.solve_rate = *rate;
    }
    p.quality = j.value("quality", 0.0);
    p.skills = SkillSet::from_labels(j.value("skills", std::vector<std::string>{}));
    if (j.contains("lineage")) {
      const auto& l = j.at("lineage");
      p.problem_id = l.at("problem_id").get<SampleId>();
      p.rollout_index = l.at("rollout_index").get<std::size_t>();
      if (!l.at("parent_id").is_null()) p.parent_id = l.at("parent_id").get<SampleId>();
      p.round = l.at("round").get<std::uint64_t>();
    }
    return p;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("malformed dataset line: ") + e.what());
  }
}

void write_dataset(const std::filesystem::path& path, std::span<const TrainingPair> pairs,
                   ExportFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write dataset " + path.string());
  for (const auto& p : pairs) out << pair_to_json_line(p, format) << '\n';
  if (!out) throw std::runtime_error("dataset write failed for " + path.string());
}

}  // namespace qdgen
