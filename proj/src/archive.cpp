#include "qdgen/archive.hpp"

#include <json.hpp>

#include <stdexcept>

namespace qdgen {

using nlohmann::json;

namespace {

json parent_json(const std::optional<SampleId>& parent) {
  return parent ? json(*parent) : json(nullptr);
}

std::optional<SampleId> parent_from(const json& j) {
  if (!j.contains("parent_id") || j.at("parent_id").is_null()) return std::nullopt;
  return j.at("parent_id").get<SampleId>();
}

std::optional<RecordKind> parse_kind(std::string_view name) {
  for (auto k : {RecordKind::seed, RecordKind::generated, RecordKind::parse_failure}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

}  // namespace

std::string_view to_string(RecordKind kind) {
  switch (kind) {
    case RecordKind::seed: return "seed";
    case RecordKind::generated: return "generated";
    case RecordKind::parse_failure: return "parse_failure";
  }
  return "unknown";
}

bool ArchiveRecord::has_flag(std::string_view flag) const {
  for (const auto& f : flags) {
    if (f == flag) return true;
  }
  return false;
}

std::vector<std::size_t> ArchiveRecord::successful_rollouts() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < rollouts.size(); ++i) {
    if (rollouts[i].correct) out.push_back(i);
  }
  return out;
}

ScoredSample ArchiveRecord::to_scored(NormalizationProfile profile) const {
  ScoredSample s;
  s.sample.id = id;
  s.sample.problem = problem;
  s.sample.solution = solution;
  s.sample.answer = FinalAnswer(answer, profile);
  s.sample.parent_id = parent_id;
  s.sample.round = round;
  s.sample.origin = kind == RecordKind::seed ? Origin::seed : Origin::generated;
  s.solve_rate = solve_rate;
  s.quality = quality;
  s.skills = skills;
  return s;
}

std::string record_to_json_line(const ArchiveRecord& r) {
  json j;
  j["schema"] = kArchiveSchemaVersion;
  j["kind"] = std::string(to_string(r.kind));
  j["id"] = r.id;
  j["round"] = r.round;
  j["slot"] = r.slot;
  j["parent_id"] = parent_json(r.parent_id);
  if (r.kind == RecordKind::parse_failure) {
    j["reason"] = r.failure_reason;
    j["attempts"] = r.attempts;
    return j.dump();
  }
  j["problem"] = r.problem;
  j["solution"] = r.solution;
  j["answer"] = r.answer;
  j["skills"] = r.skills.labels();
  j["raw_skills"] = r.raw_skills;
  j["solve_rate"] = r.solve_rate ? json(r.solve_rate->to_string()) : json(nullptr);
  j["quality"] = r.quality;
  json rollouts = json::array();
  for (const auto& ro : r.rollouts) {
    rollouts.push_back({{"text", ro.text}, {"correct", ro.correct},
                        {"infra", ro.infrastructure_failure}});
  }
  j["rollouts"] = std::move(rollouts);
  j["flags"] = r.flags;
  j["attempts"] = r.attempts;
  return j.dump();
}

ArchiveRecord record_from_json_line(std::string_view line) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw std::runtime_error("record is not a JSON object");
  try {
    if (j.at("schema").get<int>() != kArchiveSchemaVersion) {
      throw std::runtime_error("unsupported archive schema version");
    }
    auto kind = parse_kind(j.at("kind").get<std::string>());
    if (!kind) throw std::runtime_error("unknown record kind");
    ArchiveRecord r;
    r.kind = *kind;
    r.id = j.at("id").get<SampleId>();
    r.round = j.at("round").get<std::uint64_t>();
    r.slot = j.at("slot").get<std::uint64_t>();
    r.parent_id = parent_from(j);
    r.attempts = j.value("attempts", 0);
    if (r.kind == RecordKind::parse_failure) {
      r.failure_reason = j.value("reason", "");
      return r;
    }
    r.problem = j.at("problem").get<std::string>();
    r.solution = j.at("solution").get<std::string>();
    r.answer = j.at("answer").get<std::string>();
    r.skills = SkillSet::from_labels(j.at("skills").get<std::vector<std::string>>());
    r.raw_skills = j.value("raw_skills", std::vector<std::string>{});
    if (!j.at("solve_rate").is_null()) {
      auto rate = SolveRate::parse(j.at("solve_rate").get<std::string>());
      if (!rate) throw std::runtime_error("malformed solve_rate");
      r.solve_rate = rate;
    }
    r.quality = j.at("quality").get<double>();
    for (const auto& ro : j.at("rollouts")) {
      r.rollouts.push_back({ro.at("text").get<std::string>(), ro.at("correct").get<bool>(),
                            ro.value("infra", false)});
    }
    r.flags = j.value("flags", std::vector<std::string>{});
    return r;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("malformed archive record: ") + e.what());
  }
}

ArchiveLoad read_archive_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read archive log " + path.string());
  ArchiveLoad load;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      load.records.push_back(record_from_json_line(line));
    } catch (const std::runtime_error&) {
      ++load.corrupt_lines;
    }
  }
  return load;
}

void Archive::attach_log(const std::filesystem::path& path) {
  log_.open(path, std::ios::binary | std::ios::app);
  if (!log_) throw std::runtime_error("cannot open archive log " + path.string());
  std::error_code ec;
  log_bytes_ = std::filesystem::file_size(path, ec);
  if (ec) log_bytes_ = 0;
}

void Archive::count(const ArchiveRecord& r) {
  if (r.kind == RecordKind::parse_failure) {
    ++parse_failures_;
    return;
  }
  ++generated_;
  if (r.quality > 0.0) ++quality_positive_;
  if (!problems_seen_.insert(r.problem).second) ++duplicates_;
}

void Archive::append(std::vector<ArchiveRecord> batch) {
  if (log_.is_open()) {
    std::string chunk;
    for (const auto& r : batch) {
      chunk += record_to_json_line(r);
      chunk += '\n';
    }
    log_ << chunk;
    log_.flush();
    if (!log_) throw std::runtime_error("archive log write failed");
    log_bytes_ += chunk.size();
  }
  for (auto& r : batch) {
    count(r);
    records_.push_back(std::move(r));
  }
}

void Archive::adopt(std::vector<ArchiveRecord> existing) {
  for (auto& r : existing) {
    count(r);
    records_.push_back(std::move(r));
  }
}

ArchiveRecord make_generated_record(const ScoredSample& scored, const VerificationSet& vs,
                                    std::vector<std::string> raw_skills, std::uint64_t slot,
                                    RecordKind kind) {
  ArchiveRecord r;
  r.kind = kind;
  r.id = scored.sample.id;
  r.round = scored.sample.round;
  r.slot = slot;
  r.parent_id = scored.sample.parent_id;
  r.problem = scored.sample.problem;
  r.solution = scored.sample.solution;
  r.answer = scored.sample.answer.raw();
  r.skills = scored.skills;
  r.raw_skills = std::move(raw_skills);
  r.solve_rate = scored.solve_rate;
  r.quality = scored.quality;
  r.rollouts = vs.rollouts;
  if (vs.unusable) r.flags.push_back("verification_unusable");
  if (vs.infrastructure_failures() > 0) r.flags.push_back("infrastructure_failure");
  if (scored.skills.is_unclassified()) r.flags.push_back("unclassified");
  return r;
}

std::string member_to_json_line(const WorkingSetMember& m) {
  const auto& s = m.scored;
  json j;
  j["insertion"] = m.insertion;
  j["id"] = s.sample.id;
  j["origin"] = s.sample.origin == Origin::seed ? "seed" : "generated";
  j["round"] = s.sample.round;
  j["parent_id"] = parent_json(s.sample.parent_id);
  j["problem"] = s.sample.problem;
  j["solution"] = s.sample.solution;
  j["answer"] = s.sample.answer.raw();
  j["skills"] = s.skills.labels();
  j["solve_rate"] = s.solve_rate ? json(s.solve_rate->to_string()) : json(nullptr);
  j["quality"] = s.quality;
  return j.dump();
}

WorkingSetMember member_from_json_line(std::string_view line, NormalizationProfile profile) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded()) throw std::runtime_error("working-set snapshot line is not JSON");
  try {
    WorkingSetMember m;
    m.insertion = j.at("insertion").get<std::uint64_t>();
    auto& s = m.scored;
    s.sample.id = j.at("id").get<SampleId>();
    s.sample.origin = j.at("origin").get<std::string>() == "seed" ? Origin::seed
                                                                   : Origin::generated;
    s.sample.round = j.at("round").get<std::uint64_t>();
    s.sample.parent_id = parent_from(j);
    s.sample.problem = j.at("problem").get<std::string>();
    s.sample.solution = j.at("solution").get<std::string>();
    s.sample.answer = FinalAnswer(j.at("answer").get<std::string>(), profile);
    s.skills = SkillSet::from_labels(j.at("skills").get<std::vector<std::string>>());
    if (!j.at("solve_rate").is_null()) {
      s.solve_rate = SolveRate::parse(j.at("solve_rate").get<std::string>());
    }
    s.quality = j.at("quality").get<double>();
    return m;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("malformed working-set snapshot: ") + e.what());
  }
}

}  // namespace qdgen
