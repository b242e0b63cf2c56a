#include "qdgen/sim_backend.hpp"

#include "qdgen/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>

namespace qdgen {

namespace {

constexpr std::string_view kTagOpen = "[sim ";

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::size_t skill_index(std::string_view label) {
  constexpr std::string_view kPrefix = "skill-";
  if (label.substr(0, kPrefix.size()) != kPrefix) return std::string::npos;
  std::size_t index = 0;
  auto digits = label.substr(kPrefix.size());
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), index);
  if (ec != std::errc{} || ptr != digits.data() + digits.size()) return std::string::npos;
  return index;
}

}  // namespace

std::string sim_skill_label(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "skill-%03zu", index);
  return buf;
}

std::string SimProblemPayload::tag() const {
  std::string out(kTagOpen);
  out += "d=" + format_double(difficulty);
  out += " a=" + std::to_string(true_answer);
  out += valid ? " v=1" : " v=0";
  out += " s=";
  for (std::size_t i = 0; i < skills.size(); ++i) {
    if (i) out += ';';
    out += skills[i];
  }
  out += ']';
  return out;
}

std::optional<SimProblemPayload> SimProblemPayload::find_in(std::string_view text) {
  std::size_t start = text.find(kTagOpen);
  if (start == std::string_view::npos) return std::nullopt;
  std::size_t end = text.find(']', start);
  if (end == std::string_view::npos) return std::nullopt;
  std::string_view body = text.substr(start + kTagOpen.size(), end - start - kTagOpen.size());

  SimProblemPayload p;
  bool have_d = false;
  bool have_a = false;
  while (!body.empty()) {
    std::size_t space = body.find(' ');
    std::string_view field = body.substr(0, space);
    body = space == std::string_view::npos ? std::string_view{} : body.substr(space + 1);
    if (field.size() < 2 || field[1] != '=') continue;
    std::string_view value = field.substr(2);
    const char* first = value.data();
    const char* last = value.data() + value.size();
    switch (field[0]) {
      case 'd': have_d = std::from_chars(first, last, p.difficulty).ec == std::errc{}; break;
      case 'a': have_a = std::from_chars(first, last, p.true_answer).ec == std::errc{}; break;
      case 'v': p.valid = value != "0"; break;
      case 's':
        while (!value.empty()) {
          std::size_t semi = value.find(';');
          if (semi != 0) p.skills.emplace_back(value.substr(0, semi));
          value = semi == std::string_view::npos ? std::string_view{} : value.substr(semi + 1);
        }
        break;
      default: break;
    }
  }
  if (!have_d || !have_a) return std::nullopt;
  return p;
}

std::string sim_problem_text(const SimProblemPayload& payload, std::uint64_t nonce) {
  return "Synthetic problem " + hex(nonce) + ": determine the hidden quantity. " + payload.tag();
}

std::string sim_solution_text(const SimProblemPayload& payload) {
  return "Working through the construction step by step, the value is $\\boxed{" +
         std::to_string(payload.true_answer) + "}$.";
}

std::string SimBackend::complete(const RoleConfig& role, std::string_view prompt,
                                 std::uint64_t substream_seed) {
  if (cfg_.transport_failure_rate > 0.0) {
    Rng fault(derive_seed(substream_seed, 0xFA11ULL));
    if (fault.bernoulli(cfg_.transport_failure_rate)) {
      throw TransportError("simulated transport failure");
    }
  }
  auto payload = SimProblemPayload::find_in(prompt);
  if (!payload) throw ProtocolError("simulated backend: prompt carries no sim payload");
  switch (role.role) {
    case ModelRoleKind::student: return student(*payload, substream_seed);
    case ModelRoleKind::generator: return generator(*payload, substream_seed);
    case ModelRoleKind::skill_classifier: return classifier(*payload, substream_seed);
    case ModelRoleKind::validity_oracle: return oracle(*payload, substream_seed);
  }
  throw ProtocolError("simulated backend: unknown role");
}

std::string SimBackend::student(const SimProblemPayload& p, std::uint64_t seed) const {
  Rng rng(seed);
  if (rng.bernoulli(1.0 - p.difficulty)) {
    return "Let me work through this. The answer is \\boxed{" + std::to_string(p.true_answer) +
           "}.";
  }
  std::int64_t wrong = p.true_answer + 1 + static_cast<std::int64_t>(rng.below(9));
  return "After some attempts I get \\boxed{" + std::to_string(wrong) + "}.";
}

// Draw order is fixed: gaussian step, malformed check, answer, validity,
// skill swap, nonce.
std::string SimBackend::generator(const SimProblemPayload& p, std::uint64_t seed) const {
  Rng rng(seed);
  SimProblemPayload child;
  child.difficulty =
      std::clamp(p.difficulty + cfg_.difficulty_drift + rng.gaussian(0.0, cfg_.mutation_sd), 0.0,
                 1.0);
  bool malformed = rng.bernoulli(cfg_.malformed_mutation_rate);
  child.true_answer = static_cast<std::int64_t>(rng.below(1000));
  child.valid = !rng.bernoulli(cfg_.invalidity_slope * child.difficulty);
  child.skills = p.skills;
  if (!child.skills.empty() && rng.bernoulli(cfg_.skill_swap_probability)) {
    std::size_t slot = rng.below(child.skills.size());
    std::size_t index = skill_index(child.skills[slot]);
    bool up = rng.bernoulli(0.5);
    if (index != std::string::npos && cfg_.skill_universe > 0) {
      std::size_t n = cfg_.skill_universe;
      std::size_t neighbour = up ? (index + 1) % n : (index + n - 1) % n;
      std::string label = sim_skill_label(neighbour);
      if (std::find(child.skills.begin(), child.skills.end(), label) == child.skills.end()) {
        child.skills[slot] = std::move(label);
      }
    }
  }
  std::uint64_t nonce = rng.next_u64();

  std::string problem = sim_problem_text(child, nonce);
  std::string solution = sim_solution_text(child);
  if (malformed) return "<problem>" + problem + "</problem>\n<solution>" + solution;
  return "<problem>" + problem + "</problem>\n<solution>" + solution + "</solution>";
}

std::string SimBackend::classifier(const SimProblemPayload& p, std::uint64_t seed) const {
  Rng rng(seed);
  if (rng.bernoulli(cfg_.garbled_classification_rate)) return "skills: unsure";
  std::string out = "<skills>";
  for (std::size_t i = 0; i < p.skills.size(); ++i) {
    if (i) out += ',';
    out += p.skills[i];
  }
  return out + "</skills>";
}

std::string SimBackend::oracle(const SimProblemPayload& p, std::uint64_t seed) const {
  Rng rng(seed);
  if (rng.bernoulli(cfg_.oracle_unscorable_rate)) return "I could not settle on an answer.";
  std::int64_t answer = p.valid ? p.true_answer : p.true_answer + 7;
  return "Independent derivation gives \\boxed{" + std::to_string(answer) + "}.";
}

std::vector<SeedItem> make_sim_seeds(const SimSeedOptions& options, std::uint64_t seed) {
  std::vector<SeedItem> items;
  items.reserve(options.count);
  std::size_t pool = options.skill_pool == 0 ? options.skill_universe
                                             : std::min(options.skill_pool, options.skill_universe);
  for (std::size_t i = 0; i < options.count; ++i) {
    Rng rng(derive_seed(seed, {purpose_key(Purpose::seed_init), i}));
    SimProblemPayload p;
    p.difficulty = options.min_difficulty +
                   (options.max_difficulty - options.min_difficulty) * rng.uniform();
    p.true_answer = static_cast<std::int64_t>(rng.below(1000));
    p.valid = true;
    std::size_t n_skills =
        std::min(pool, 1 + rng.below(std::max<std::size_t>(1, options.max_skills)));
    while (p.skills.size() < n_skills) {
      std::string label = sim_skill_label(rng.below(pool));
      if (std::find(p.skills.begin(), p.skills.end(), label) == p.skills.end()) {
        p.skills.push_back(std::move(label));
      }
    }
    items.push_back({sim_problem_text(p, rng.next_u64()), sim_solution_text(p)});
  }
  return items;
}

}  // namespace qdgen
