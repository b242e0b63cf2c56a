#include "qdgen/backend.hpp"

#include <algorithm>
#include <thread>

namespace qdgen {

std::string_view to_string(ModelRoleKind role) {
  switch (role) {
    case ModelRoleKind::generator: return "generator";
    case ModelRoleKind::student: return "student";
    case ModelRoleKind::skill_classifier: return "skill_classifier";
    case ModelRoleKind::validity_oracle: return "validity_oracle";
  }
  return "unknown";
}

std::optional<ModelRoleKind> parse_role(std::string_view name) {
  for (auto role : {ModelRoleKind::generator, ModelRoleKind::student,
                    ModelRoleKind::skill_classifier, ModelRoleKind::validity_oracle}) {
    if (to_string(role) == name) return role;
  }
  return std::nullopt;
}

RoleConfig default_role_config(ModelRoleKind role) {
  RoleConfig cfg;
  cfg.role = role;
  switch (role) {
    case ModelRoleKind::generator: cfg.decode.temperature = 1.0; break;
    case ModelRoleKind::student: cfg.decode.temperature = 0.7; break;
    case ModelRoleKind::skill_classifier: cfg.decode.temperature = 0.0; break;
    case ModelRoleKind::validity_oracle: cfg.decode.temperature = 0.0; break;
  }
  return cfg;
}

BackendError::BackendError(ModelRoleKind role, int attempts, bool retryable,
                           const std::string& what)
    : std::runtime_error(std::string(to_string(role)) + " failed after " +
                         std::to_string(attempts) + " attempt(s): " + what),
      role_(role),
      attempts_(attempts),
      retryable_(retryable) {}

TokenBucket::TokenBucket(double rate, double capacity)
    : rate_(rate), capacity_(std::max(1.0, capacity)), tokens_(capacity_), last_(Clock::now()) {}

void TokenBucket::acquire() {
  if (rate_ <= 0.0) return;
  std::unique_lock lock(mutex_);
  for (;;) {
    auto now = Clock::now();
    double elapsed = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    tokens_ = std::min(capacity_, tokens_ + elapsed * rate_);
    if (tokens_ >= 1.0) {
      tokens_ -= 1.0;
      return;
    }
    auto wait = std::chrono::duration<double>((1.0 - tokens_) / rate_);
    lock.unlock();
    std::this_thread::sleep_for(wait);
    lock.lock();
  }
}

}  // namespace qdgen
