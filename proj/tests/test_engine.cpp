#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "qdgen/engine.hpp"
#include "qdgen/hashing.hpp"
#include "qdgen/manifest.hpp"
#include "qdgen/sim_backend.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

using namespace qdgen;
namespace fs = std::filesystem;

namespace {

// SimBackend that starts failing with transport errors once `fail_after`
// calls have gone through, until `healthy` is set again.
class FlakyBackend final : public Backend {
 public:
  explicit FlakyBackend(SimConfig cfg) : sim_(cfg) {}

  std::string complete(const RoleConfig& role, std::string_view prompt,
                       std::uint64_t seed) override {
    if (!healthy && calls.fetch_add(1) >= fail_after) throw TransportError("connection reset");
    return sim_.complete(role, prompt, seed);
  }
  std::string identity() const override { return "sim"; }

  std::atomic<bool> healthy{false};
  std::atomic<long> calls{0};
  long fail_after = 0;

 private:
  SimBackend sim_;
};

std::vector<SeedInput> sim_seeds(std::size_t count, std::uint64_t seed = 3) {
  SimSeedOptions opt;
  opt.count = count;
  opt.skill_universe = 20;
  opt.skill_pool = 12;
  std::vector<SeedInput> out;
  for (auto& s : make_sim_seeds(opt, seed)) out.push_back({s.problem, s.solution});
  return out;
}

SimConfig sim_config() {
  SimConfig c;
  c.skill_universe = 20;
  c.malformed_mutation_rate = 0.3;
  return c;
}

GatewayConfig gateway_config() {
  GatewayConfig g;
  g.retry.transport_retries = 0;
  g.retry.initial_backoff = std::chrono::milliseconds(0);
  return g;
}

EngineConfig engine_config(Policy policy = Policy::dynamic_diverse) {
  EngineConfig e;
  e.batch_size = 4;
  e.rounds = 10;
  e.policy = policy;
  e.working_set_cap = 6;
  e.niche_cap = 2;
  e.vocabulary_size = 15;
  e.root_seed = 17;
  return e;
}

struct Harness {
  std::shared_ptr<Backend> backend;
  ModelGateway gateway;
  explicit Harness(std::shared_ptr<Backend> b = std::make_shared<SimBackend>(sim_config()))
      : backend(b), gateway(b, gateway_config()) {}
};

fs::path fresh_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("qdgen_engine_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("every mutation attempt is accounted for") {
  Harness h;
  auto cfg = engine_config();
  Engine engine(cfg, h.gateway);
  engine.initialize(sim_seeds(20));
  engine.run();
  const auto& archive = engine.archive();
  CHECK(archive.size() == cfg.batch_size * cfg.rounds);
  CHECK(archive.generated_count() + archive.parse_failure_count() == 40);
  CHECK(archive.parse_failure_count() > 0);
  auto c = engine.counters();
  CHECK(c.mutations == 40);
  CHECK(c.rounds_completed == 10);
  for (const auto& r : archive.records()) {
    if (r.kind == RecordKind::parse_failure) {
      CHECK(r.attempts == 2);
      CHECK_FALSE(r.failure_reason.empty());
    }
  }
}

TEST_CASE("archive ids are unique and lineage is closed") {
  Harness h;
  Engine engine(engine_config(), h.gateway);
  engine.initialize(sim_seeds(20));
  engine.run();
  std::map<SampleId, std::uint64_t> round_of;
  for (const auto& s : engine.seeds()) round_of[s.sample.id] = 0;
  for (const auto& r : engine.archive().records()) {
    CHECK(round_of.emplace(r.id, r.round).second);
  }
  for (const auto& r : engine.archive().records()) {
    REQUIRE(r.parent_id.has_value());
    auto it = round_of.find(*r.parent_id);
    REQUIRE(it != round_of.end());
    CHECK(it->second < r.round);
  }
}

TEST_CASE("replay is byte-identical across worker counts") {
  std::string reference;
  for (std::size_t workers : {1, 3, 8}) {
    Harness h;
    auto cfg = engine_config();
    cfg.workers = workers;
    auto dir = fresh_dir("workers" + std::to_string(workers));
    Engine engine(cfg, h.gateway, dir);
    engine.initialize(sim_seeds(20));
    engine.run();
    std::string bytes = slurp(Engine::archive_path(dir));
    CHECK_FALSE(bytes.empty());
    if (reference.empty()) {
      reference = bytes;
    } else {
      CHECK(bytes == reference);
    }
    fs::remove_all(dir);
  }
}

TEST_CASE("a different root seed changes the run") {
  Harness h;
  auto a_cfg = engine_config();
  auto b_cfg = engine_config();
  b_cfg.root_seed = 18;
  Engine a(a_cfg, h.gateway), b(b_cfg, h.gateway);
  a.initialize(sim_seeds(20));
  b.initialize(sim_seeds(20));
  a.run();
  b.run();
  CHECK(record_to_json_line(a.archive().records().back()) !=
        record_to_json_line(b.archive().records().back()));
}

TEST_CASE("resume equals an uninterrupted run") {
  for (auto policy : {Policy::static_uniform, Policy::dynamic_uniform, Policy::dynamic_diverse}) {
    CAPTURE(to_string(policy));
    auto cfg = engine_config(policy);
    auto full_dir = fresh_dir("full");
    auto split_dir = fresh_dir("split");
    {
      Harness h;
      Engine engine(cfg, h.gateway, full_dir);
      engine.initialize(sim_seeds(20));
      engine.run();
    }
    {
      Harness h;
      Engine engine(cfg, h.gateway, split_dir);
      engine.initialize(sim_seeds(20));
      engine.run(4);
      CHECK(engine.rounds_completed() == 4);
    }
    Harness h;
    auto resumed = Engine::resume(cfg, h.gateway, split_dir);
    CHECK(resumed.rounds_completed() == 4);
    resumed.run();
    CHECK(slurp(Engine::archive_path(full_dir)) == slurp(Engine::archive_path(split_dir)));
    CHECK(slurp(Engine::checkpoint_dir(full_dir) / "working_set.jsonl") ==
          slurp(Engine::checkpoint_dir(split_dir) / "working_set.jsonl"));
    fs::remove_all(full_dir);
    fs::remove_all(split_dir);
  }
}

TEST_CASE("resume refuses a different configuration") {
  auto cfg = engine_config();
  auto dir = fresh_dir("mismatch");
  Harness h;
  {
    Engine engine(cfg, h.gateway, dir);
    engine.initialize(sim_seeds(20));
    engine.run(2);
  }
  auto altered = cfg;
  altered.working_set_cap = 7;
  altered.niche_cap = 3;
  CHECK_THROWS_AS(Engine::resume(altered, h.gateway, dir), CheckpointMismatch);

  // Rounds and workers may change.
  auto extended = cfg;
  extended.rounds = 12;
  extended.workers = 2;
  CHECK_NOTHROW(Engine::resume(extended, h.gateway, dir));
  fs::remove_all(dir);
}

TEST_CASE("resuming a finished run is a no-op") {
  auto cfg = engine_config();
  auto dir = fresh_dir("noop");
  Harness h;
  {
    Engine engine(cfg, h.gateway, dir);
    engine.initialize(sim_seeds(20));
    engine.run();
  }
  auto before = slurp(Engine::archive_path(dir));
  auto resumed = Engine::resume(cfg, h.gateway, dir);
  resumed.run();
  CHECK(resumed.rounds_completed() == cfg.rounds);
  CHECK(slurp(Engine::archive_path(dir)) == before);
  fs::remove_all(dir);
}

TEST_CASE("a backend outage halts and the run resumes cleanly") {
  auto cfg = engine_config();
  auto reference_dir = fresh_dir("outage_ref");
  auto dir = fresh_dir("outage");
  {
    Harness h;
    Engine engine(cfg, h.gateway, reference_dir);
    engine.initialize(sim_seeds(20));
    engine.run();
  }
  auto flaky = std::make_shared<FlakyBackend>(sim_config());
  flaky->healthy = true;
  Harness h(flaky);
  {
    Engine engine(cfg, h.gateway, dir);
    engine.initialize(sim_seeds(20));
    engine.run(3);
    flaky->calls = 0;
    flaky->fail_after = 50;
    flaky->healthy = false;
    bool halted = false;
    try {
      engine.run();
    } catch (const EngineHalted& e) {
      halted = true;
      CHECK(e.round() >= 3);
      CHECK(e.round() < cfg.rounds);
    }
    CHECK(halted);
  }
  flaky->healthy = true;
  auto resumed = Engine::resume(cfg, h.gateway, dir);
  resumed.run();
  CHECK(slurp(Engine::archive_path(dir)) == slurp(Engine::archive_path(reference_dir)));
  fs::remove_all(dir);
  fs::remove_all(reference_dir);
}

TEST_CASE("seed items without an answer are reported together") {
  Harness h;
  Engine engine(engine_config(), h.gateway);
  auto seeds = sim_seeds(5);
  seeds[1].solution = "no answer here";
  seeds[3].solution = "still nothing";
  try {
    engine.initialize(seeds);
    FAIL("expected SeedDataError");
  } catch (const SeedDataError& e) {
    std::string what = e.what();
    CHECK(what.find("1, 3") != std::string::npos);
  }
  CHECK_THROWS_AS(engine.initialize({}), SeedDataError);
}

TEST_CASE("dynamic uniform holds the top T of everything admitted") {
  Harness h;
  auto cfg = engine_config(Policy::dynamic_uniform);
  cfg.rounds = 15;
  Engine engine(cfg, h.gateway);
  engine.initialize(sim_seeds(4));
  engine.run();

  struct Entry {
    double q;
    std::size_t order;
    SampleId id;
  };
  std::vector<Entry> admitted;
  for (const auto& s : engine.seeds()) admitted.push_back({s.quality, admitted.size(), s.sample.id});
  for (const auto& r : engine.archive().records()) {
    if (r.kind == RecordKind::generated && r.quality > 0) {
      admitted.push_back({r.quality, admitted.size(), r.id});
    }
  }
  std::stable_sort(admitted.begin(), admitted.end(),
                   [](const Entry& a, const Entry& b) { return a.q > b.q; });
  std::set<SampleId> expected;
  for (std::size_t i = 0; i < std::min(admitted.size(), cfg.working_set_cap); ++i) {
    expected.insert(admitted[i].id);
  }
  auto ids = engine.working_set().member_ids();
  CHECK(std::set<SampleId>(ids.begin(), ids.end()) == expected);

  // Once full, mean quality never drops.
  const auto& history = engine.working_set_quality_history();
  CHECK(history.size() == cfg.rounds + 1);
  for (std::size_t i = 1; i < history.size(); ++i) CHECK(history[i] >= history[i - 1] - 1e-12);
}

TEST_CASE("run manifest reconciles with the archive") {
  auto dir = fresh_dir("manifest");
  Harness h;
  Engine engine(engine_config(), h.gateway, dir);
  engine.initialize(sim_seeds(20));
  engine.run();
  auto m = make_run_manifest(engine, h.backend->identity(), dir);
  CHECK(reconcile(m, engine.archive().records()).empty());
  CHECK(m.archive_sha256 == sha256_file(Engine::archive_path(dir)));
  m.mutations += 1;
  CHECK(reconcile(m, engine.archive().records()).size() == 1);
  fs::remove_all(dir);
}

TEST_CASE("engine config validation") {
  auto cfg = engine_config();
  CHECK_NOTHROW(cfg.validate());
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = engine_config();
  cfg.quality.lower = 0.95;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = engine_config();
  auto other = cfg;
  other.rounds = 99;
  other.workers = 4;
  CHECK(cfg.config_hash() == other.config_hash());
  other.fingerprint = "different backend";
  CHECK(cfg.config_hash() != other.config_hash());
}

TEST_CASE("seed file reader") {
  auto dir = fresh_dir("seedfile");
  fs::create_directories(dir);
  auto path = dir / "seeds.jsonl";
  {
    std::ofstream out(path);
    out << R"({"problem":"1+1?","solution":"\\boxed{2}"})" << "\n\n";
    out << R"({"problem":"2+2?","solution":"\\boxed{4}"})" << "\n";
  }
  auto seeds = read_seed_file(path);
  REQUIRE(seeds.size() == 2);
  CHECK(seeds[1].solution == "\\boxed{4}");
  {
    std::ofstream out(path, std::ios::app);
    out << "not json\n";
  }
  CHECK_THROWS_AS(read_seed_file(path), SeedDataError);
  CHECK_THROWS_AS(read_seed_file(dir / "missing.jsonl"), SeedDataError);
  fs::remove_all(dir);
}
