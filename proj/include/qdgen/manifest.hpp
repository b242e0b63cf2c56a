#pragma once

// Run manifests and per-output manifests. Every file a command writes gets a
// sibling "<file>.manifest.json" recording its SHA-256.

#include "qdgen/archive.hpp"
#include "qdgen/engine.hpp"

#include <json.hpp>

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace qdgen {

struct RunManifest {
  int schema_version = kArchiveSchemaVersion;
  std::string config_hash;
  std::uint64_t root_seed = 0;
  std::string backend_identity;
  std::string vocabulary_sha256;
  std::string archive_sha256;
  std::string created_at;
  std::string updated_at;
  std::uint64_t rounds_completed = 0;
  std::size_t mutations = 0;
  std::size_t parse_failures = 0;
  std::size_t quality_positive = 0;
  std::size_t exact_duplicates = 0;

  nlohmann::json to_json() const;
  static RunManifest from_json(const nlohmann::json& j);
};

// UTC, ISO 8601.
std::string utc_timestamp();

RunManifest make_run_manifest(const Engine& engine, const std::string& backend_identity,
                              const std::filesystem::path& run_dir);

// Empty when the counters match the records; otherwise one message per
// mismatching counter.
std::vector<std::string> reconcile(const RunManifest& manifest,
                                   std::span<const ArchiveRecord> records);

std::filesystem::path run_manifest_path(const std::filesystem::path& run_dir);
void write_run_manifest(const std::filesystem::path& run_dir, const RunManifest& manifest);
RunManifest read_run_manifest(const std::filesystem::path& run_dir);

std::filesystem::path output_manifest_path(const std::filesystem::path& output);

// Writes the sibling manifest for `output` with its hash, size and the
// command parameters that produced it.
void write_output_manifest(const std::filesystem::path& output, const std::string& command,
                           const nlohmann::json& parameters);

// True when the sibling manifest exists and its hash matches the file.
bool output_matches_manifest(const std::filesystem::path& output);

// Writes `content` to `path` and its manifest.
void write_output(const std::filesystem::path& path, const std::string& content,
                  const std::string& command, const nlohmann::json& parameters);

}  // namespace qdgen
