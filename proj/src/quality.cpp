#include "qdgen/quality.hpp"

#include <charconv>

namespace qdgen {

std::size_t VerificationSet::correct_count() const {
  std::size_t n = 0;
  for (const auto& r : rollouts) n += r.correct ? 1 : 0;
  return n;
}

std::size_t VerificationSet::infrastructure_failures() const {
  std::size_t n = 0;
  for (const auto& r : rollouts) n += r.infrastructure_failure ? 1 : 0;
  return n;
}

std::vector<std::size_t> VerificationSet::successful_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < rollouts.size(); ++i) {
    if (rollouts[i].correct) out.push_back(i);
  }
  return out;
}

SolveRate::SolveRate(std::uint32_t correct, std::uint32_t total)
    : correct_(correct), total_(total) {
  if (total == 0 || correct > total) {
    throw std::invalid_argument("solve rate needs 0 <= correct <= total, total >= 1");
  }
}

std::string SolveRate::to_string() const {
  return std::to_string(correct_) + "/" + std::to_string(total_);
}

std::optional<SolveRate> SolveRate::parse(std::string_view text) {
  std::size_t slash = text.find('/');
  if (slash == std::string_view::npos) return std::nullopt;
  std::uint32_t n = 0;
  std::uint32_t k = 0;
  auto [p1, e1] = std::from_chars(text.data(), text.data() + slash, n);
  auto [p2, e2] = std::from_chars(text.data() + slash + 1, text.data() + text.size(), k);
  if (e1 != std::errc{} || e2 != std::errc{} || p1 != text.data() + slash ||
      p2 != text.data() + text.size() || k == 0 || n > k) {
    return std::nullopt;
  }
  return SolveRate(n, k);
}

void QualityConfig::validate() const {
  if (!(0.0 < lower && lower < upper && upper < 1.0)) {
    throw std::invalid_argument("quality thresholds must satisfy 0 < T_l < T_u < 1");
  }
  if (rollouts < 1) throw std::invalid_argument("K must be >= 1");
}

SolveRate solve_rate(const VerificationSet& vs) {
  if (vs.unusable) throw UnusableVerification("verification set is unusable");
  if (vs.rollouts.empty()) throw UnusableVerification("verification set is empty");
  return SolveRate(static_cast<std::uint32_t>(vs.correct_count()),
                   static_cast<std::uint32_t>(vs.size()));
}

double quality(double solve_rate, const QualityConfig& cfg) {
  if (cfg.lower <= solve_rate && solve_rate <= cfg.upper) return 1.0 - solve_rate;
  return 0.0;
}

double quality(const SolveRate& rate, const QualityConfig& cfg) {
  return quality(rate.value(), cfg);
}

}  // namespace qdgen
