#pragma once

// Model backends: one completion per call, keyed by a substream seed.

#include <chrono>
#include <cstdint>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qdgen {

enum class ModelRoleKind { generator, student, skill_classifier, validity_oracle };

std::string_view to_string(ModelRoleKind role);
std::optional<ModelRoleKind> parse_role(std::string_view name);

struct DecodeParams {
  double temperature = 1.0;
  int max_tokens = 1024;
  std::vector<std::string> stop;
};

struct RoleConfig {
  ModelRoleKind role = ModelRoleKind::generator;
  std::string model;
  DecodeParams decode;
  double requests_per_second = 0.0;  // 0 disables rate limiting
};

RoleConfig default_role_config(ModelRoleKind role);

// Retryable: connection failures, timeouts, throttling, 5xx.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Not retryable: the endpoint answered with something we cannot use.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A completion that failed for good, with the role and attempts made.
class BackendError : public std::runtime_error {
 public:
  BackendError(ModelRoleKind role, int attempts, bool retryable, const std::string& what);

  ModelRoleKind role() const { return role_; }
  int attempts() const { return attempts_; }
  bool retryable() const { return retryable_; }

 private:
  ModelRoleKind role_;
  int attempts_;
  bool retryable_;
};

class Backend {
 public:
  virtual ~Backend() = default;

  // Throws TransportError or ProtocolError. Must be safe to call concurrently.
  virtual std::string complete(const RoleConfig& role, std::string_view prompt,
                               std::uint64_t substream_seed) = 0;

  virtual std::string identity() const = 0;
};

// Token bucket: `rate` tokens per second, bursts up to `capacity`.
class TokenBucket {
 public:
  TokenBucket(double rate, double capacity);

  void acquire();

 private:
  using Clock = std::chrono::steady_clock;

  std::mutex mutex_;
  double rate_;
  double capacity_;
  double tokens_;
  Clock::time_point last_;
};

}  // namespace qdgen
