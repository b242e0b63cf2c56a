#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "qdgen/archive.hpp"
#include "qdgen/config.hpp"
#include "qdgen/hashing.hpp"
#include "qdgen/manifest.hpp"

#include <json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace qdgen;
namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "qdgen_cli_test";

int run_cli(const std::string& args) {
  std::string cmd = std::string(QDGEN_CLI) + " " + args + " >>" + (kWork / "cli.log").string() +
                    " 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

std::string config_text(const std::string& seeds, const std::string& extra = "") {
  return "[run]\nseeds = " + seeds +
         "\nrun_dir = run\nroot_seed = 3\nrounds = 6\ncheckpoint_every = 2\n"
         "[engine]\nbatch_size = 8\npolicy = dynamic_diverse\nniche_cap = 3\n"
         "[skills]\nvocabulary_size = 30\n"
         "[backend]\nkind = sim\n" +
         extra;
}

// Generates a small run once for the whole file.
struct Fixture {
  Fixture() {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
    REQUIRE(run_cli("make-sim-seeds --count 40 --seed 5 --skill-universe 30 --out " +
                    (kWork / "seeds.jsonl").string()) == 0);
    write(kWork / "run.ini", config_text("seeds.jsonl", "[role.validity_oracle]\nenabled = true\n"));
    REQUIRE(run_cli("generate --config " + (kWork / "run.ini").string()) == 0);
  }
};

const Fixture& fixture() {
  static Fixture f;
  return f;
}

std::string run_dir() { return (kWork / "run").string(); }

}  // namespace

TEST_CASE("config parses with defaults and relative paths") {
  auto cfg = parse_run_config(config_text("seeds.jsonl"), "/base");
  CHECK(cfg.seeds == fs::path("/base/seeds.jsonl"));
  CHECK(cfg.run_dir == fs::path("/base/run"));
  CHECK(cfg.engine.batch_size == 8);
  CHECK(cfg.engine.quality.rollouts == 16);
  CHECK(cfg.engine.quality.lower == 0.1);
  CHECK(cfg.engine.max_skills == 3);
  CHECK(cfg.engine.effective_niche_cap() == 3);
  CHECK(cfg.backend == BackendKind::sim);
  CHECK_FALSE(cfg.gateway.oracle_configured);
}

TEST_CASE("config reports every problem at once") {
  std::string bad =
      "[run]\nrun_dir = x\nrounds = many\n"
      "[quality]\nlower = 0.95\n"
      "[engine]\npolicy = greedy\n"
      "[mystery]\nkey = 1\n"
      "[backend]\nkind = sim\ncolour = blue\n";
  try {
    parse_run_config(bad, "/");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    std::string all;
    for (const auto& d : e.diagnostics()) all += d + "\n";
    CAPTURE(all);
    CHECK(e.diagnostics().size() >= 5);
    CHECK(all.find("seeds") != std::string::npos);
    CHECK(all.find("rounds") != std::string::npos);
    CHECK(all.find("policy") != std::string::npos);
    CHECK(all.find("mystery") != std::string::npos);
    CHECK(all.find("colour") != std::string::npos);
  }
}

TEST_CASE("remote config needs a base url and models") {
  std::string text = "[run]\nseeds = s\nrun_dir = r\n[backend]\nkind = remote\n";
  CHECK_THROWS_AS(parse_run_config(text, "/"), ConfigError);
  text +=
      "[remote]\nbase_url = http://127.0.0.1:9\n"
      "[role.generator]\nmodel = g\n[role.student]\nmodel = s\n"
      "[role.skill_classifier]\nmodel = c\n";
  auto cfg = parse_run_config(text, "/");
  CHECK(cfg.backend == BackendKind::remote);
  CHECK(cfg.gateway.role(ModelRoleKind::student).model == "s");
}

TEST_CASE("fingerprint tracks result-affecting settings") {
  auto a = parse_run_config(config_text("s"), "/");
  auto b = parse_run_config(config_text("s", "[sim]\nmutation_sd = 0.3\n"), "/");
  CHECK(run_fingerprint(a, "x") != run_fingerprint(b, "x"));
  CHECK(run_fingerprint(a, "x") != run_fingerprint(a, "y"));
  CHECK(run_fingerprint(a, "x") == run_fingerprint(a, "x"));
}

TEST_CASE("generate writes a reconcilable run") {
  fixture();
  auto manifest = read_run_manifest(run_dir());
  auto load = read_archive_log(fs::path(run_dir()) / "archive.jsonl");
  CHECK(load.corrupt_lines == 0);
  CHECK(load.records.size() == 6 * 8);
  CHECK(reconcile(manifest, load.records).empty());
  CHECK(manifest.rounds_completed == 6);
  CHECK(manifest.archive_sha256 == sha256_file(fs::path(run_dir()) / "archive.jsonl"));
  CHECK(manifest.backend_identity == "sim");
}

TEST_CASE("generate refuses to clobber a run and resumes on request") {
  fixture();
  auto ini = (kWork / "run.ini").string();
  CHECK(run_cli("generate --config " + ini) == 2);
  auto before = slurp(fs::path(run_dir()) / "archive.jsonl");
  CHECK(run_cli("generate --config " + ini + " --resume") == 0);
  CHECK(slurp(fs::path(run_dir()) / "archive.jsonl") == before);
  CHECK(run_cli("generate --config " + ini + " --resume --rounds 8") == 0);
  auto extended = read_archive_log(fs::path(run_dir()) / "archive.jsonl");
  CHECK(extended.records.size() == 8 * 8);
  CHECK(reconcile(read_run_manifest(run_dir()), extended.records).empty());
  // Reference: a fresh 8-round run produces the same bytes.
  auto extended_bytes = slurp(fs::path(run_dir()) / "archive.jsonl");
  CHECK(run_cli("generate --config " + ini + " --fresh --rounds 8") == 0);
  CHECK(slurp(fs::path(run_dir()) / "archive.jsonl") == extended_bytes);
  // Leave the 6-round run in place for the other cases.
  CHECK(run_cli("generate --config " + ini + " --fresh") == 0);
}

TEST_CASE("exit codes") {
  fixture();
  write(kWork / "missing.ini", config_text("nope.jsonl"));
  CHECK(run_cli("generate --config " + (kWork / "missing.ini").string()) == 2);
  write(kWork / "broken.ini", "[run]\nseeds = x\n");
  CHECK(run_cli("generate --config " + (kWork / "broken.ini").string()) == 2);
  CHECK(run_cli("frobnicate") == 2);

  auto out = (kWork / "ds.jsonl").string();
  CHECK(run_cli("filter --archive " + run_dir() + " --budget 0 --out " + out) == 2);
  CHECK(run_cli("filter --archive " + run_dir() + " --budget 100000 --out " + out) == 4);
  CHECK(run_cli("filter --archive " + run_dir() + " --strategy best --budget 3 --out " + out) == 2);
  CHECK(run_cli("filter --archive " + (kWork / "absent.jsonl").string() + " --budget 3 --out " + out) ==
        2);
  CHECK(run_cli("analyze --archive " + run_dir() + " --report nonsense") == 2);

  write(kWork / "no_oracle.ini", config_text("seeds.jsonl"));
  CHECK(run_cli("analyze --archive " + run_dir() + " --report validity --config " +
                (kWork / "no_oracle.ini").string() + " --out " + (kWork / "v.csv").string()) == 2);
}

TEST_CASE("filter output is idempotent and carries a manifest") {
  fixture();
  auto a = (kWork / "a.jsonl").string();
  auto b = (kWork / "b.jsonl").string();
  for (const auto& strategy : {"qd", "diversity", "random", "quality"}) {
    CAPTURE(strategy);
    std::string args = "filter --archive " + run_dir() + " --strategy " + strategy +
                       " --budget 10 --seed 4 --easy-keep 0.5 --out ";
    REQUIRE(run_cli(args + a) == 0);
    REQUIRE(run_cli(args + b) == 0);
    CHECK(slurp(a) == slurp(b));
    CHECK(sha256_file(a) == sha256_file(b));
    auto manifest = nlohmann::json::parse(slurp(output_manifest_path(a)));
    CHECK(manifest.at("sha256").get<std::string>() == sha256_file(a));
    CHECK(output_matches_manifest(a));
    std::istringstream lines(slurp(a));
    std::string line;
    std::size_t n = 0;
    while (std::getline(lines, line)) ++n;
    CHECK(n == 10);
  }
}

TEST_CASE("analysis reports") {
  fixture();
  auto cov = kWork / "coverage.csv";
  REQUIRE(run_cli("analyze --archive " + run_dir() + " --report coverage --stride 10 --out " +
                  cov.string()) == 0);
  CHECK(slurp(cov).rfind("problems_generated,", 0) == 0);
  CHECK(output_matches_manifest(cov));

  auto hist = kWork / "hist.csv";
  REQUIRE(run_cli("analyze --archive " + run_dir() + " --report histogram --out " + hist.string()) ==
          0);
  std::istringstream lines(slurp(hist));
  std::string line;
  std::size_t rows = 0;
  while (std::getline(lines, line)) ++rows;
  CHECK(rows == 18);

  auto val = kWork / "validity.csv";
  REQUIRE(run_cli("analyze --archive " + run_dir() + " --report validity --config " +
                  (kWork / "run.ini").string() + " --samples 20 --bins 4 --out " + val.string()) ==
          0);
  CHECK(slurp(val).rfind("bin_lower,bin_upper,count,mean_validity", 0) == 0);
  CHECK(fs::exists(val.string() + ".labels.csv"));

  auto per = kWork / "perturbation.csv";
  REQUIRE(run_cli("analyze --archive " + run_dir() + " --report perturbation --config " +
                  (kWork / "run.ini").string() + " --parents 2 --n 4 --out " + per.string()) == 0);
  std::istringstream plines(slurp(per));
  rows = 0;
  while (std::getline(plines, line)) ++rows;
  CHECK(rows == 3);
}
