#pragma once

// Run configuration: one INI file with sections
//
//   [run] [quality] [skills] [engine] [backend] [sim] [remote] [answer]
//   [prompts] [role.generator] [role.student] [role.skill_classifier]
//   [role.validity_oracle]
//
// Relative paths resolve against the config file's directory. Secrets never
// live here; the remote backend reads its key from the environment variable
// named by [remote] api_key_env. The validity oracle is configured when
// [role.validity_oracle] has at least one key.

#include "qdgen/backend.hpp"
#include "qdgen/engine.hpp"
#include "qdgen/gateway.hpp"
#include "qdgen/remote_backend.hpp"
#include "qdgen/sim_backend.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace qdgen {

enum class BackendKind { sim, remote };

struct RunConfig {
  std::filesystem::path source;  // the config file itself
  std::filesystem::path seeds;
  std::filesystem::path run_dir;
  std::optional<std::filesystem::path> vocabulary;
  EngineConfig engine;
  GatewayConfig gateway;
  BackendKind backend = BackendKind::sim;
  SimConfig sim;
  RemoteConfig remote;
};

// Every problem found in a config, one "section.key: message" per entry.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> diagnostics);
  const std::vector<std::string>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<std::string> diagnostics_;
};

RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

// Result-affecting settings outside EngineConfig (backend, roles, prompts,
// normalization, seed file hash) as a canonical string for
// EngineConfig::fingerprint.
std::string run_fingerprint(const RunConfig& cfg, const std::string& seed_file_sha256);

std::shared_ptr<Backend> make_backend(const RunConfig& cfg);

}  // namespace qdgen
