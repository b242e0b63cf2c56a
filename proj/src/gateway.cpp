#include "qdgen/gateway.hpp"

#include "qdgen/parallel.hpp"
#include "qdgen/rng.hpp"
#include "qdgen/skills.hpp"

#include <algorithm>
#include <cctype>
#include <thread>

namespace qdgen {

namespace {

constexpr std::uint64_t kTransportRetryKey = 0x7E7A000000000000ULL;
constexpr std::uint64_t kParseRetryKey = 0x5EED000000000000ULL;

std::uint64_t attempt_seed(std::uint64_t seed, std::uint64_t key, int attempt) {
  return attempt == 0 ? seed : derive_seed(seed, key + static_cast<std::uint64_t>(attempt));
}

std::string trim(std::string_view s) {
  auto not_space = [](unsigned char c) { return std::isspace(c) == 0; };
  auto first = std::find_if(s.begin(), s.end(), not_space);
  auto last = std::find_if(s.rbegin(), s.rend(), not_space).base();
  return first < last ? std::string(first, last) : std::string{};
}

// Contents between the first `open` and the next `close` after it.
std::optional<std::string> between(std::string_view text, std::string_view open,
                                   std::string_view close, std::size_t from = 0) {
  std::size_t a = text.find(open, from);
  if (a == std::string_view::npos) return std::nullopt;
  std::size_t body = a + open.size();
  std::size_t b = text.find(close, body);
  if (b == std::string_view::npos) return std::nullopt;
  return std::string(text.substr(body, b - body));
}

}  // namespace

std::optional<TaggedMutation> parse_mutation_tags(std::string_view completion) {
  auto problem = between(completion, "<problem>", "</problem>");
  if (!problem) return std::nullopt;
  std::size_t after = completion.find("</problem>");
  auto solution = between(completion, "<solution>", "</solution>", after);
  if (!solution) return std::nullopt;
  TaggedMutation out{trim(*problem), trim(*solution)};
  if (out.problem.empty() || out.solution.empty()) return std::nullopt;
  return out;
}

std::optional<std::vector<std::string>> parse_skill_tags(std::string_view completion,
                                                         std::size_t k) {
  auto body = between(completion, "<skills>", "</skills>");
  if (!body) return std::nullopt;
  std::vector<std::string> labels;
  std::string_view rest = *body;
  while (labels.size() < k) {
    std::size_t comma = rest.find(',');
    std::string label = normalize_skill_label(rest.substr(0, comma));
    if (!label.empty()) labels.push_back(std::move(label));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return labels;
}

ModelGateway::ModelGateway(std::shared_ptr<Backend> backend, GatewayConfig cfg)
    : backend_(std::move(backend)), cfg_(std::move(cfg)) {
  if (!backend_) throw std::invalid_argument("model gateway needs a backend");
  for (std::size_t i = 0; i < cfg_.roles.size(); ++i) {
    if (cfg_.roles[i].requests_per_second > 0.0) {
      buckets_[i] = std::make_unique<TokenBucket>(cfg_.roles[i].requests_per_second,
                                                  cfg_.roles[i].requests_per_second);
    }
  }
  sleeper_ = [](std::chrono::milliseconds d) {
    if (d.count() > 0) std::this_thread::sleep_for(d);
  };
}

std::string ModelGateway::complete(ModelRoleKind role, std::string_view prompt,
                                   std::uint64_t substream_seed) {
  if (prompt.empty()) throw std::invalid_argument("prompt must be non-empty");
  const RoleConfig& rc = cfg_.role(role);
  auto& bucket = buckets_[static_cast<std::size_t>(role)];
  auto backoff = cfg_.retry.initial_backoff;
  int attempts = 0;
  for (;;) {
    if (bucket) bucket->acquire();
    ++attempts;
    try {
      return backend_->complete(rc, prompt,
                                attempt_seed(substream_seed, kTransportRetryKey, attempts - 1));
    } catch (const TransportError& e) {
      if (attempts > cfg_.retry.transport_retries) {
        throw BackendError(role, attempts, true, e.what());
      }
    } catch (const ProtocolError& e) {
      throw BackendError(role, attempts, false, e.what());
    }
    sleeper_(backoff);
    auto next = std::chrono::duration_cast<std::chrono::milliseconds>(
        backoff * cfg_.retry.backoff_multiplier);
    backoff = std::min(next, cfg_.retry.max_backoff);
  }
}

MutationOutcome ModelGateway::mutate(const Sample& parent, std::uint64_t substream_seed,
                                     SampleId child_id, std::uint64_t round) {
  std::string prompt = render_template(
      cfg_.prompts.mutation, {{"problem", parent.problem}, {"solution", parent.solution}});
  MutationOutcome outcome;
  for (int attempt = 0; attempt <= cfg_.retry.parse_retries; ++attempt) {
    ++outcome.attempts;
    std::string text = complete(ModelRoleKind::generator, prompt,
                                attempt_seed(substream_seed, kParseRetryKey, attempt));
    auto tagged = parse_mutation_tags(text);
    if (!tagged) {
      outcome.failure_reason = "missing or unbalanced <problem>/<solution> tags";
      continue;
    }
    auto answer = extract_final_answer(tagged->solution, cfg_.normalization);
    if (!answer) {
      outcome.failure_reason = "solution has no balanced \\boxed{} answer";
      continue;
    }
    Sample child;
    child.id = child_id;
    child.problem = std::move(tagged->problem);
    child.solution = std::move(tagged->solution);
    child.answer = std::move(*answer);
    child.parent_id = parent.id;
    child.round = round;
    child.origin = Origin::generated;
    outcome.child = std::move(child);
    outcome.failure_reason.clear();
    return outcome;
  }
  return outcome;
}

VerificationSet ModelGateway::verify(const Sample& problem, std::uint32_t k,
                                     std::uint64_t substream_seed) {
  if (k < 1) throw std::invalid_argument("verification needs K >= 1");
  std::string prompt = render_template(cfg_.prompts.student, {{"problem", problem.problem}});
  VerificationSet vs;
  vs.rollouts.resize(k);
  parallel_for(k, cfg_.verify_fanout, [&](std::size_t i) {
    Rollout& r = vs.rollouts[i];
    try {
      r.text = complete(ModelRoleKind::student, prompt, derive_seed(substream_seed, i));
      r.correct = is_correct(problem.answer, r.text, cfg_.normalization) == 1;
    } catch (const BackendError& e) {
      r.text.clear();
      r.correct = false;
      r.infrastructure_failure = true;
    }
  });
  vs.unusable = 2 * vs.infrastructure_failures() > vs.size();
  return vs;
}

std::vector<std::string> ModelGateway::classify_skills(const Sample& sample, std::size_t k,
                                                       std::uint64_t substream_seed) {
  if (k < 1) throw std::invalid_argument("skill classification needs k >= 1");
  std::string k_text = std::to_string(k);
  std::string prompt = render_template(
      cfg_.prompts.skill_classification,
      {{"problem", sample.problem}, {"solution", sample.solution}, {"k", k_text}});
  for (int attempt = 0; attempt <= cfg_.retry.parse_retries; ++attempt) {
    std::string text = complete(ModelRoleKind::skill_classifier, prompt,
                                attempt_seed(substream_seed, kParseRetryKey, attempt));
    if (auto labels = parse_skill_tags(text, k)) return *labels;
  }
  return {};
}

std::optional<FinalAnswer> ModelGateway::oracle_answer(const Sample& sample,
                                                       std::uint64_t substream_seed) {
  std::string prompt =
      render_template(cfg_.prompts.validity_oracle, {{"problem", sample.problem}});
  std::string text = complete(ModelRoleKind::validity_oracle, prompt, substream_seed);
  return extract_final_answer(text, cfg_.normalization);
}

}  // namespace qdgen
