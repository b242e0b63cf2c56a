#pragma once

// Solve-rate and thresholded quality.

#include "qdgen/sample.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace qdgen {

// Exact fraction correct/total with total >= 1.
class SolveRate {
 public:
  SolveRate(std::uint32_t correct, std::uint32_t total);

  std::uint32_t correct() const { return correct_; }
  std::uint32_t total() const { return total_; }
  double value() const { return static_cast<double>(correct_) / static_cast<double>(total_); }

  // "n/K"
  std::string to_string() const;
  static std::optional<SolveRate> parse(std::string_view text);

  friend bool operator==(const SolveRate&, const SolveRate&) = default;

 private:
  std::uint32_t correct_;
  std::uint32_t total_;
};

struct QualityConfig {
  double lower = 0.1;  // T_l
  double upper = 0.9;  // T_u
  std::uint32_t rollouts = 16;  // K

  // Throws std::invalid_argument unless 0 < lower < upper < 1 and rollouts >= 1.
  void validate() const;
};

class UnusableVerification : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Throws UnusableVerification for an unusable or empty set.
SolveRate solve_rate(const VerificationSet& vs);

// 1 - solve_rate inside [lower, upper] (both inclusive), else 0.
double quality(double solve_rate, const QualityConfig& cfg);
double quality(const SolveRate& rate, const QualityConfig& cfg);

}  // namespace qdgen
