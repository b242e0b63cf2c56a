#include "qdgen/manifest.hpp"

#include "qdgen/hashing.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

namespace qdgen {

using nlohmann::json;

json RunManifest::to_json() const {
  return {{"schema", schema_version},
          {"config_hash", config_hash},
          {"root_seed", root_seed},
          {"backend", backend_identity},
          {"vocabulary_sha256", vocabulary_sha256},
          {"archive_sha256", archive_sha256},
          {"created_at", created_at},
          {"updated_at", updated_at},
          {"counters",
           {{"rounds_completed", rounds_completed},
            {"mutations", mutations},
            {"parse_failures", parse_failures},
            {"quality_positive", quality_positive},
            {"exact_duplicates", exact_duplicates}}}};
}

RunManifest RunManifest::from_json(const json& j) {
  RunManifest m;
  m.schema_version = j.at("schema").get<int>();
  m.config_hash = j.at("config_hash").get<std::string>();
  m.root_seed = j.at("root_seed").get<std::uint64_t>();
  m.backend_identity = j.at("backend").get<std::string>();
  m.vocabulary_sha256 = j.at("vocabulary_sha256").get<std::string>();
  m.archive_sha256 = j.at("archive_sha256").get<std::string>();
  m.created_at = j.at("created_at").get<std::string>();
  m.updated_at = j.at("updated_at").get<std::string>();
  const auto& c = j.at("counters");
  m.rounds_completed = c.at("rounds_completed").get<std::uint64_t>();
  m.mutations = c.at("mutations").get<std::size_t>();
  m.parse_failures = c.at("parse_failures").get<std::size_t>();
  m.quality_positive = c.at("quality_positive").get<std::size_t>();
  m.exact_duplicates = c.at("exact_duplicates").get<std::size_t>();
  return m;
}

std::string utc_timestamp() {
  std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::filesystem::path run_manifest_path(const std::filesystem::path& run_dir) {
  return run_dir / "manifest.json";
}

RunManifest make_run_manifest(const Engine& engine, const std::string& backend_identity,
                              const std::filesystem::path& run_dir) {
  RunManifest m;
  m.config_hash = engine.config().config_hash();
  m.root_seed = engine.config().root_seed;
  m.backend_identity = backend_identity;
  m.vocabulary_sha256 = sha256_hex(engine.vocabulary().serialize());
  m.archive_sha256 = sha256_file(Engine::archive_path(run_dir));
  m.updated_at = utc_timestamp();
  m.created_at = m.updated_at;
  if (std::filesystem::exists(run_manifest_path(run_dir))) {
    try {
      m.created_at = read_run_manifest(run_dir).created_at;
    } catch (const std::exception&) {
    }
  }
  auto c = engine.counters();
  m.rounds_completed = c.rounds_completed;
  m.mutations = c.mutations;
  m.parse_failures = c.parse_failures;
  m.quality_positive = c.quality_positive;
  m.exact_duplicates = c.exact_duplicates;
  return m;
}

std::vector<std::string> reconcile(const RunManifest& manifest,
                                   std::span<const ArchiveRecord> records) {
  std::size_t generated = 0, failures = 0, positive = 0;
  std::uint64_t last_round = 0;
  for (const auto& r : records) {
    if (r.kind == RecordKind::parse_failure) {
      ++failures;
    } else if (r.kind == RecordKind::generated) {
      ++generated;
      if (r.quality > 0.0) ++positive;
    }
    last_round = std::max(last_round, r.round);
  }
  std::vector<std::string> out;
  auto check = [&](const char* name, std::uint64_t expected, std::uint64_t actual) {
    if (expected != actual) {
      out.push_back(std::string(name) + ": manifest " + std::to_string(expected) + ", archive " +
                    std::to_string(actual));
    }
  };
  check("mutations", manifest.mutations, generated + failures);
  check("parse_failures", manifest.parse_failures, failures);
  check("quality_positive", manifest.quality_positive, positive);
  if (!records.empty()) check("rounds_completed", manifest.rounds_completed, last_round);
  return out;
}

void write_run_manifest(const std::filesystem::path& run_dir, const RunManifest& manifest) {
  auto path = run_manifest_path(run_dir);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << manifest.to_json().dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

RunManifest read_run_manifest(const std::filesystem::path& run_dir) {
  auto path = run_manifest_path(run_dir);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw std::runtime_error(path.string() + " is not JSON");
  try {
    return RunManifest::from_json(j);
  } catch (const json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

std::filesystem::path output_manifest_path(const std::filesystem::path& output) {
  auto p = output;
  p += ".manifest.json";
  return p;
}

void write_output_manifest(const std::filesystem::path& output, const std::string& command,
                           const json& parameters) {
  json j = {{"file", output.filename().string()},
            {"sha256", sha256_file(output)},
            {"bytes", std::filesystem::file_size(output)},
            {"command", command},
            {"parameters", parameters},
            {"created_at", utc_timestamp()}};
  auto path = output_manifest_path(output);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

bool output_matches_manifest(const std::filesystem::path& output) {
  std::ifstream in(output_manifest_path(output), std::ios::binary);
  if (!in) return false;
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.contains("sha256")) return false;
  return std::filesystem::exists(output) && j.at("sha256").get<std::string>() == sha256_file(output);
}

void write_output(const std::filesystem::path& path, const std::string& content,
                  const std::string& command, const json& parameters) {
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) throw std::runtime_error("cannot write " + path.string());
  }
  write_output_manifest(path, command, parameters);
}

}  // namespace qdgen
