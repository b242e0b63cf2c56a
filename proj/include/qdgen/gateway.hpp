#pragma once

// Uniform access to the generator, student, skill classifier and validity
// oracle over a shared backend.

#include "qdgen/answer.hpp"
#include "qdgen/backend.hpp"
#include "qdgen/prompts.hpp"
#include "qdgen/sample.hpp"

#include <array>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace qdgen {

struct RetryPolicy {
  int transport_retries = 3;
  int parse_retries = 1;
  std::chrono::milliseconds initial_backoff{0};
  double backoff_multiplier = 2.0;
  std::chrono::milliseconds max_backoff{10000};
};

struct GatewayConfig {
  std::array<RoleConfig, 4> roles{
      default_role_config(ModelRoleKind::generator), default_role_config(ModelRoleKind::student),
      default_role_config(ModelRoleKind::skill_classifier),
      default_role_config(ModelRoleKind::validity_oracle)};
  PromptTemplates prompts;
  RetryPolicy retry;
  std::size_t verify_fanout = 1;
  NormalizationProfile normalization = NormalizationProfile::standard;
  bool oracle_configured = true;

  RoleConfig& role(ModelRoleKind kind) { return roles[static_cast<std::size_t>(kind)]; }
  const RoleConfig& role(ModelRoleKind kind) const {
    return roles[static_cast<std::size_t>(kind)];
  }
};

struct MutationOutcome {
  std::optional<Sample> child;  // empty on parse failure
  std::string failure_reason;
  int attempts = 0;
};

// Splits "<problem>..</problem><solution>..</solution>"; nullopt if either
// pair of tags is missing or out of order.
struct TaggedMutation {
  std::string problem;
  std::string solution;
};
std::optional<TaggedMutation> parse_mutation_tags(std::string_view completion);

// Contents of <skills>...</skills>, split on commas, lowercased and trimmed,
// at most k. nullopt if the tags are missing.
std::optional<std::vector<std::string>> parse_skill_tags(std::string_view completion,
                                                         std::size_t k);

class ModelGateway {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  ModelGateway(std::shared_ptr<Backend> backend, GatewayConfig cfg);

  // One completion with transport retries. Retry attempt r uses a seed
  // derived from (substream_seed, r). Throws BackendError.
  std::string complete(ModelRoleKind role, std::string_view prompt, std::uint64_t substream_seed);

  // Single-parent mutation. The child gets `child_id`, `round`, and the
  // parent's id as lineage. Throws BackendError on transport failure.
  MutationOutcome mutate(const Sample& parent, std::uint64_t substream_seed, SampleId child_id,
                         std::uint64_t round);

  // K student rollouts scored against the sample's intended answer. A
  // rollout whose transport fails is kept, scored 0 and flagged; more than
  // half flagged marks the whole set unusable.
  VerificationSet verify(const Sample& problem, std::uint32_t k, std::uint64_t substream_seed);

  // At most k raw labels; empty after a failed retry.
  std::vector<std::string> classify_skills(const Sample& sample, std::size_t k,
                                           std::uint64_t substream_seed);

  // The oracle's independent final answer; nullopt if none could be read.
  // Throws BackendError on transport failure.
  std::optional<FinalAnswer> oracle_answer(const Sample& sample, std::uint64_t substream_seed);

  const GatewayConfig& config() const { return cfg_; }
  const Backend& backend() const { return *backend_; }

  void set_sleeper(Sleeper sleeper) { sleeper_ = std::move(sleeper); }

 private:
  std::shared_ptr<Backend> backend_;
  GatewayConfig cfg_;
  std::array<std::unique_ptr<TokenBucket>, 4> buckets_;
  Sleeper sleeper_;
};

}  // namespace qdgen
