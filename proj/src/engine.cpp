#include "qdgen/engine.hpp"

#include "qdgen/hashing.hpp"
#include "qdgen/parallel.hpp"
#include "qdgen/rng.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace qdgen {

using nlohmann::json;

namespace {

constexpr std::uint64_t kRequeueKey = 0xAE0000ULL;

void write_file_atomically(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void EngineConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw std::invalid_argument(field + ": " + why);
  };
  if (batch_size < 1) fail("batch_size", "must be >= 1");
  if (rounds < 1) fail("rounds", "must be >= 1");
  try {
    quality.validate();
  } catch (const std::invalid_argument& e) {
    fail("quality", e.what());
  }
  if (max_skills < 1) fail("k", "must be >= 1");
  if (vocabulary_size < 1) fail("M", "must be >= 1");
  if (working_set_cap < 1) fail("T", "must be >= 1");
  if (niche_cap && *niche_cap < 1) fail("T_phi", "must be >= 1");
  if (workers < 1) fail("workers", "must be >= 1");
  if (verify_requeue < 0) fail("verify_requeue", "must be >= 0");
}

std::string EngineConfig::config_hash() const {
  json j = {
      {"batch_size", batch_size},
      {"T_l", quality.lower},
      {"T_u", quality.upper},
      {"K", quality.rollouts},
      {"k", max_skills},
      {"M", vocabulary_size},
      {"vocabulary_mode", vocabulary_mode == VocabularyMode::bounded ? "bounded" : "unbounded"},
      {"policy", std::string(to_string(policy))},
      {"T", working_set_cap},
      {"T_phi", effective_niche_cap()},
      {"niche_selection", std::string(to_string(niche_selection))},
      {"max_div_niches", max_div_niches},
      {"root_seed", root_seed},
      {"verify_requeue", verify_requeue},
      {"fingerprint", fingerprint},
  };
  return sha256_hex(j.dump());
}

Engine::Engine(EngineConfig cfg, ModelGateway& gateway, std::filesystem::path run_dir)
    : cfg_(std::move(cfg)),
      gateway_(&gateway),
      run_dir_(std::move(run_dir)),
      working_set_(cfg_.policy, cfg_.working_set_cap, cfg_.effective_niche_cap()) {
  cfg_.validate();
}

std::filesystem::path Engine::archive_path(const std::filesystem::path& run_dir) {
  return run_dir / "archive.jsonl";
}
std::filesystem::path Engine::seeds_path(const std::filesystem::path& run_dir) {
  return run_dir / "seeds.jsonl";
}
std::filesystem::path Engine::vocabulary_path(const std::filesystem::path& run_dir) {
  return run_dir / "vocabulary.txt";
}
std::filesystem::path Engine::checkpoint_dir(const std::filesystem::path& run_dir) {
  return run_dir / "checkpoint";
}

ScoredSample Engine::score(const Sample& sample, const std::vector<std::string>& raw_skills,
                           const VerificationSet& vs) const {
  ScoredSample s;
  s.sample = sample;
  s.skills = canonical_skill_set(raw_skills, vocabulary_, cfg_.max_skills);
  if (!vs.unusable && vs.size() > 0) {
    s.solve_rate = solve_rate(vs);
    s.quality = quality(*s.solve_rate, cfg_.quality);
  }
  return s;
}

VerificationSet Engine::verify_with_requeue(const Sample& sample, std::uint64_t seed) {
  VerificationSet vs;
  for (int attempt = 0; attempt <= cfg_.verify_requeue; ++attempt) {
    std::uint64_t s = attempt == 0 ? seed : derive_seed(seed, kRequeueKey + attempt);
    vs = gateway_->verify(sample, cfg_.quality.rollouts, s);
    if (!vs.unusable) break;
  }
  return vs;
}

void Engine::initialize(const std::vector<SeedInput>& seeds,
                        std::optional<SkillVocabulary> vocabulary) {
  if (seeds.empty()) throw SeedDataError("seed dataset is empty");
  std::vector<Sample> samples;
  std::string missing;
  const auto profile = gateway_->config().normalization;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    auto answer = extract_final_answer(seeds[i].solution, profile);
    if (!answer) {
      missing += (missing.empty() ? "" : ", ") + std::to_string(i);
      continue;
    }
    Sample s;
    s.id = i;
    s.problem = seeds[i].problem;
    s.solution = seeds[i].solution;
    s.answer = std::move(*answer);
    s.origin = Origin::seed;
    samples.push_back(std::move(s));
  }
  if (!missing.empty()) {
    throw SeedDataError("seed items without an extractable \\boxed answer (0-based lines): " +
                        missing);
  }

  const std::uint64_t root = cfg_.root_seed;
  const std::uint64_t init = purpose_key(Purpose::seed_init);
  std::vector<std::vector<std::string>> raw(samples.size());
  parallel_for(samples.size(), cfg_.workers, [&](std::size_t i) {
    raw[i] = gateway_->classify_skills(
        samples[i], cfg_.max_skills, derive_seed(root, {init, purpose_key(Purpose::classify), i}));
  });

  if (vocabulary) {
    vocabulary_ = std::move(*vocabulary);
  } else if (cfg_.vocabulary_mode == VocabularyMode::unbounded) {
    vocabulary_ = SkillVocabulary::unbounded();
  } else {
    vocabulary_ = build_vocabulary(raw, cfg_.vocabulary_size).vocabulary;
  }

  std::vector<VerificationSet> sets(samples.size());
  parallel_for(samples.size(), cfg_.workers, [&](std::size_t i) {
    sets[i] = verify_with_requeue(samples[i],
                                  derive_seed(root, {init, purpose_key(Purpose::verify), i}));
  });

  seeds_.clear();
  std::string seed_log;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    seeds_.push_back(score(samples[i], raw[i], sets[i]));
    if (!run_dir_.empty()) {
      seed_log += record_to_json_line(
          make_generated_record(seeds_.back(), sets[i], raw[i], i, RecordKind::seed));
      seed_log += '\n';
    }
  }
  working_set_.initialize(seeds_);
  round_ = 0;
  ws_history_ = {working_set_.mean_quality()};

  if (!run_dir_.empty()) {
    std::filesystem::create_directories(run_dir_);
    write_file_atomically(seeds_path(run_dir_), seed_log);
    if (vocabulary_.mode() == VocabularyMode::bounded) {
      write_file_atomically(vocabulary_path(run_dir_), vocabulary_.serialize());
    } else {
      std::filesystem::remove(vocabulary_path(run_dir_));
    }
    std::ofstream(archive_path(run_dir_), std::ios::binary | std::ios::trunc);
    archive_.attach_log(archive_path(run_dir_));
    checkpoint();
  }
}

const Sample& Engine::parent_sample(SampleId id) const {
  const auto* member = working_set_.find(id);
  if (!member) throw std::logic_error("selected parent is not in the working set");
  return member->scored.sample;
}

Engine::SlotResult Engine::run_slot(std::uint64_t round, std::size_t slot, const Sample& parent) {
  const std::uint64_t root = cfg_.root_seed;
  const SampleId id = seeds_.size() + (round - 1) * cfg_.batch_size + slot;
  auto seed_for = [&](Purpose p) { return derive_seed(root, {round, slot, purpose_key(p)}); };

  SlotResult result;
  MutationOutcome outcome = gateway_->mutate(parent, seed_for(Purpose::mutate), id, round);
  if (!outcome.child) {
    ArchiveRecord& r = result.record;
    r.kind = RecordKind::parse_failure;
    r.id = id;
    r.round = round;
    r.slot = slot;
    r.parent_id = parent.id;
    r.failure_reason = outcome.failure_reason;
    r.attempts = outcome.attempts;
    return result;
  }
  const Sample& child = *outcome.child;
  auto raw = gateway_->classify_skills(child, cfg_.max_skills, seed_for(Purpose::classify));
  VerificationSet vs = verify_with_requeue(child, seed_for(Purpose::verify));
  ScoredSample scored = score(child, raw, vs);
  result.record = make_generated_record(scored, vs, std::move(raw), slot);
  result.record.attempts = outcome.attempts;
  result.scored = std::move(scored);
  return result;
}

void Engine::step() {
  const std::uint64_t round = round_ + 1;
  auto parents = working_set_.select_parents(
      cfg_.batch_size, derive_seed(cfg_.root_seed, {round, purpose_key(Purpose::select)}),
      cfg_.niche_selection, cfg_.max_div_niches);

  std::vector<SlotResult> results(parents.size());
  try {
    parallel_for(parents.size(), cfg_.workers, [&](std::size_t slot) {
      results[slot] = run_slot(round, slot, parent_sample(parents[slot]));
    });
  } catch (const BackendError& e) {
    if (!run_dir_.empty()) checkpoint();
    throw EngineHalted(std::string("backend failure in round ") + std::to_string(round) + ": " +
                           e.what(),
                       round_);
  }

  std::vector<ArchiveRecord> batch;
  std::vector<ScoredSample> scored;
  batch.reserve(results.size());
  for (auto& r : results) {
    batch.push_back(std::move(r.record));
    if (r.scored) scored.push_back(std::move(*r.scored));
  }
  archive_.append(std::move(batch));
  working_set_.update(scored);
  round_ = round;
  ws_history_.push_back(working_set_.mean_quality());

  if (!run_dir_.empty() && cfg_.checkpoint_every > 0 && round_ % cfg_.checkpoint_every == 0) {
    checkpoint();
  }
}

void Engine::run(std::optional<std::uint64_t> max_rounds) {
  std::uint64_t done = 0;
  while (round_ < cfg_.rounds && (!max_rounds || done < *max_rounds)) {
    step();
    ++done;
  }
  if (!run_dir_.empty()) checkpoint();
}

void Engine::checkpoint() const {
  if (run_dir_.empty()) return;
  auto dir = checkpoint_dir(run_dir_);
  std::filesystem::create_directories(dir);
  std::string members;
  for (const auto* m : working_set_.members()) {
    members += member_to_json_line(*m);
    members += '\n';
  }
  write_file_atomically(dir / "working_set.jsonl", members);
  json manifest = {
      {"schema", kArchiveSchemaVersion},
      {"config_hash", cfg_.config_hash()},
      {"round", round_},
      {"archive_records", archive_.size()},
      {"archive_bytes", archive_.log_bytes()},
      {"next_insertion", working_set_.next_insertion()},
      {"working_set_sha256", sha256_hex(members)},
      {"working_set_quality_history", ws_history_},
  };
  write_file_atomically(dir / "manifest.json", manifest.dump(2) + "\n");
}

Engine Engine::resume(EngineConfig cfg, ModelGateway& gateway,
                      const std::filesystem::path& run_dir) {
  auto dir = checkpoint_dir(run_dir);
  json manifest = json::parse(read_file(dir / "manifest.json"), nullptr, false);
  if (manifest.is_discarded()) throw std::runtime_error("checkpoint manifest is not JSON");
  std::string expected = manifest.at("config_hash").get<std::string>();
  if (expected != cfg.config_hash()) {
    throw CheckpointMismatch("checkpoint config hash " + expected.substr(0, 12) +
                             " does not match current config hash " +
                             cfg.config_hash().substr(0, 12) +
                             "; refusing to resume with a different configuration");
  }

  Engine engine(std::move(cfg), gateway, run_dir);
  const auto profile = gateway.config().normalization;

  if (engine.cfg_.vocabulary_mode == VocabularyMode::unbounded) {
    engine.vocabulary_ = SkillVocabulary::unbounded();
  } else {
    engine.vocabulary_ = SkillVocabulary::load(vocabulary_path(run_dir));
  }
  for (auto& r : read_archive_log(seeds_path(run_dir)).records) {
    engine.seeds_.push_back(r.to_scored(profile));
  }

  std::string members_text = read_file(dir / "working_set.jsonl");
  if (sha256_hex(members_text) != manifest.at("working_set_sha256").get<std::string>()) {
    throw std::runtime_error("working-set snapshot does not match its checkpoint manifest");
  }
  std::vector<WorkingSetMember> members;
  std::istringstream lines(members_text);
  std::string line;
  while (std::getline(lines, line)) {
    if (!line.empty()) members.push_back(member_from_json_line(line, profile));
  }
  engine.working_set_.restore(std::move(members),
                              manifest.at("next_insertion").get<std::uint64_t>());

  // Drop anything appended after the checkpoint.
  auto log = archive_path(run_dir);
  auto bytes = manifest.at("archive_bytes").get<std::uintmax_t>();
  std::filesystem::resize_file(log, bytes);
  auto load = read_archive_log(log);
  if (load.corrupt_lines > 0 ||
      load.records.size() != manifest.at("archive_records").get<std::size_t>()) {
    throw std::runtime_error("archive log does not match its checkpoint manifest");
  }
  engine.archive_.adopt(std::move(load.records));
  engine.archive_.attach_log(log);
  engine.round_ = manifest.at("round").get<std::uint64_t>();
  engine.ws_history_ = manifest.at("working_set_quality_history").get<std::vector<double>>();
  return engine;
}

EngineCounters Engine::counters() const {
  return {round_, archive_.generated_count() + archive_.parse_failure_count(),
          archive_.parse_failure_count(),
          archive_.quality_positive_count(), archive_.exact_duplicate_count()};
}

std::vector<SeedInput> read_seed_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SeedDataError("cannot read seed file " + path.string());
  std::vector<SeedInput> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("problem") ||
        !j.contains("solution") || !j["problem"].is_string() || !j["solution"].is_string()) {
      throw SeedDataError("seed file line " + std::to_string(number) +
                          ": expected {\"problem\": string, \"solution\": string}");
    }
    out.push_back({j["problem"].get<std::string>(), j["solution"].get<std::string>()});
  }
  return out;
}

}  // namespace qdgen
