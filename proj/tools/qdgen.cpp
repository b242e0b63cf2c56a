// qdgen command-line entry point.
//
//   qdgen generate --config run.ini [--rounds N] [--resume | --fresh] [--workers W]
//   qdgen filter   --archive run/archive.jsonl --strategy qd --budget 4096 --out data.jsonl
//   qdgen analyze  --archive run/archive.jsonl --report coverage --out coverage.csv
//   qdgen make-sim-seeds --count 200 --out seeds.jsonl
//
// Exit codes: 0 ok, 2 usage or config, 3 backend, 4 data.

#include "qdgen/analysis.hpp"
#include "qdgen/config.hpp"
#include "qdgen/engine.hpp"
#include "qdgen/filters.hpp"
#include "qdgen/hashing.hpp"
#include "qdgen/manifest.hpp"
#include "qdgen/rng.hpp"
#include "qdgen/sim_backend.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <set>

using namespace qdgen;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 2;
constexpr int kBackend = 3;
constexpr int kData = 4;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::filesystem::path archive_file(const std::filesystem::path& p) {
  return std::filesystem::is_directory(p) ? Engine::archive_path(p) : p;
}

std::vector<ArchiveRecord> load_archive(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw UsageError("archive not found: " + path.string());
  ArchiveLoad load;
  try {
    load = read_archive_log(path);
  } catch (const std::runtime_error& e) {
    throw DataError(e.what());
  }
  if (load.corrupt_lines > 0) {
    std::cerr << "warning: skipped " << load.corrupt_lines << " corrupt archive line(s)\n";
  }
  return std::move(load.records);
}

// ---- generate

struct GenerateArgs {
  std::string config;
  std::optional<std::uint64_t> rounds;
  std::optional<std::size_t> workers;
  bool resume = false;
  bool fresh = false;
};

void finish_run(const Engine& engine, const RunConfig& cfg, const Backend& backend) {
  write_run_manifest(cfg.run_dir, make_run_manifest(engine, backend.identity(), cfg.run_dir));
  write_output_manifest(Engine::archive_path(cfg.run_dir), "generate",
                        {{"config", cfg.source.string()},
                         {"config_hash", engine.config().config_hash()},
                         {"rounds_completed", engine.rounds_completed()}});
}

int cmd_generate(const GenerateArgs& args) {
  RunConfig cfg = load_run_config(args.config);
  if (args.rounds) cfg.engine.rounds = *args.rounds;
  if (args.workers) cfg.engine.workers = *args.workers;
  if (!std::filesystem::exists(cfg.seeds)) {
    throw UsageError("run.seeds: seed file not found: " + cfg.seeds.string());
  }
  cfg.engine.fingerprint = run_fingerprint(cfg, sha256_file(cfg.seeds));

  auto backend = make_backend(cfg);
  ModelGateway gateway(backend, cfg.gateway);
  std::filesystem::create_directories(cfg.run_dir);

  const bool has_run = std::filesystem::exists(Engine::checkpoint_dir(cfg.run_dir) / "manifest.json");
  std::optional<Engine> engine;
  if (args.resume) {
    if (!has_run) throw UsageError("--resume: no checkpoint in " + cfg.run_dir.string());
    engine.emplace(Engine::resume(cfg.engine, gateway, cfg.run_dir));
    std::cerr << "resumed at round " << engine->rounds_completed() << "\n";
  } else {
    if (has_run && !args.fresh) {
      throw UsageError(cfg.run_dir.string() +
                       " already holds a run; pass --resume to continue or --fresh to overwrite");
    }
    std::optional<SkillVocabulary> vocab;
    if (cfg.vocabulary) vocab = SkillVocabulary::load(*cfg.vocabulary);
    engine.emplace(cfg.engine, gateway, cfg.run_dir);
    engine->initialize(read_seed_file(cfg.seeds), std::move(vocab));
  }

  try {
    engine->run();
  } catch (const EngineHalted& e) {
    finish_run(*engine, cfg, *backend);
    std::cerr << "error: " << e.what() << "\nhalted after round " << e.round()
              << "; rerun with --resume to continue\n";
    return kBackend;
  }
  finish_run(*engine, cfg, *backend);
  auto c = engine->counters();
  std::cout << "rounds " << c.rounds_completed << ", mutations " << c.mutations
            << ", parse failures " << c.parse_failures << ", quality>0 " << c.quality_positive
            << ", exact duplicates " << c.exact_duplicates << "\n";
  return kOk;
}

// ---- filter

struct FilterArgs {
  std::string archive;
  std::string pairs = "unique";
  double easy_keep = 1.0;
  double easy_threshold = 0.5;
  std::string strategy = "random";
  std::size_t budget = 0;
  double mean = 0.8;
  double sd = 0.1;
  std::uint64_t seed = 0;
  std::string out;
  std::string format = "full";
};

int cmd_filter(const FilterArgs& args) {
  FilterSpec spec;
  auto strategy = parse_filter_strategy(args.strategy);
  if (!strategy) throw UsageError("--strategy: unknown strategy '" + args.strategy + "'");
  spec.strategy = *strategy;
  spec.budget = args.budget;
  spec.mean = args.mean;
  spec.sd = args.sd;
  spec.seed = args.seed;
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("--") + e.what());
  }
  if (args.pairs != "all" && args.pairs != "unique") {
    throw UsageError("--pairs: expected all or unique");
  }
  if (!(args.easy_keep >= 0.0 && args.easy_keep <= 1.0)) {
    throw UsageError("--easy-keep: must be in [0, 1]");
  }
  ExportFormat format = ExportFormat::full;
  if (args.format == "plain") {
    format = ExportFormat::plain;
  } else if (args.format != "full") {
    throw UsageError("--format: expected full or plain");
  }

  auto path = archive_file(args.archive);
  auto records = load_archive(path);
  auto pool = args.pairs == "all" ? build_training_pairs(records) : build_unique_pool(records);
  if (args.easy_keep < 1.0) {
    pool = downsample_easy(pool, args.easy_threshold, args.easy_keep,
                           derive_seed(args.seed, purpose_key(Purpose::filter)));
  }
  std::vector<TrainingPair> subset;
  try {
    subset = filter_subset(pool, spec);
  } catch (const BudgetExceedsPool& e) {
    throw DataError(std::string(e.what()));
  }
  write_dataset(args.out, subset, format);
  write_output_manifest(args.out, "filter",
                        {{"archive", path.string()},
                         {"archive_sha256", sha256_file(path)},
                         {"pairs", args.pairs},
                         {"pool_size", pool.size()},
                         {"easy_keep", args.easy_keep},
                         {"easy_threshold", args.easy_threshold},
                         {"strategy", std::string(to_string(spec.strategy))},
                         {"budget", spec.budget},
                         {"mean", spec.mean},
                         {"sd", spec.sd},
                         {"seed", spec.seed},
                         {"format", args.format}});
  std::cout << "wrote " << subset.size() << " pairs from a pool of " << pool.size() << " to "
            << args.out << "\n";
  return kOk;
}

// ---- analyze

struct AnalyzeArgs {
  std::string archive;
  std::string report;
  std::string out;
  std::string config;
  std::size_t stride = 100;
  std::optional<std::uint32_t> k;
  std::size_t n = 16;
  std::size_t parents = 100;
  std::size_t samples = 1000;
  std::size_t bins = 10;
  std::optional<double> window_lower;
  std::optional<double> window_upper;
  std::uint64_t seed = 0;
  int votes = 1;
};

void emit(const AnalyzeArgs& args, const std::string& csv, const json& params) {
  if (args.out.empty()) {
    std::cout << csv;
    return;
  }
  write_output(args.out, csv, "analyze", params);
}

int cmd_analyze(const AnalyzeArgs& args) {
  static const std::set<std::string> reports = {"coverage", "histogram", "validity",
                                                "perturbation"};
  if (!reports.count(args.report)) throw UsageError("--report: unknown report '" + args.report + "'");
  auto path = archive_file(args.archive);
  if (!std::filesystem::exists(path)) throw UsageError("archive not found: " + path.string());
  json params = {{"archive", path.string()}, {"archive_sha256", sha256_file(path)},
                 {"report", args.report}};

  if (args.report == "coverage") {
    auto curve = coverage_curve(path, args.stride);
    if (curve.corrupt_lines > 0) {
      std::cerr << "warning: skipped " << curve.corrupt_lines << " corrupt archive line(s)\n";
    }
    params["stride"] = args.stride;
    emit(args, coverage_csv(curve), params);
    return kOk;
  }

  auto records = load_archive(path);
  if (args.report == "histogram") {
    std::uint32_t k = 0;
    if (args.k) {
      k = *args.k;
    } else {
      for (const auto& r : records) {
        if (r.solve_rate) {
          k = r.solve_rate->total();
          break;
        }
      }
      if (k == 0) throw DataError("archive has no scored records; pass --k");
    }
    std::vector<HistogramRow> rows;
    try {
      rows = solve_rate_histogram(records, k);
    } catch (const std::invalid_argument& e) {
      throw DataError(e.what());
    }
    params["k"] = k;
    emit(args, histogram_csv(rows), params);
    return kOk;
  }

  // validity and perturbation need models.
  if (args.config.empty()) throw UsageError("--report " + args.report + " needs --config");
  RunConfig cfg = load_run_config(args.config);
  auto backend = make_backend(cfg);
  ModelGateway gateway(backend, cfg.gateway);
  const auto profile = cfg.gateway.normalization;
  params["config"] = args.config;
  params["seed"] = args.seed;

  if (args.report == "validity") {
    if (!cfg.gateway.oracle_configured) {
      throw UsageError("role.validity_oracle: no validity oracle configured in " + args.config);
    }
    std::vector<ArchiveRecord> candidates = records;
    if (args.window_lower || args.window_upper) {
      candidates = solve_rate_window(records, args.window_lower.value_or(0.0),
                                     args.window_upper.value_or(1.0));
    }
    auto chosen = sample_quality_positive(candidates, args.samples, args.seed);
    std::vector<Sample> samples;
    std::vector<ScoredSample> scored;
    for (const auto& r : chosen) {
      scored.push_back(r.to_scored(profile));
      samples.push_back(scored.back().sample);
    }
    auto labels = label_validity(gateway, samples, args.seed, args.votes, cfg.engine.workers);
    auto bins = validity_by_solve_rate(labels, scored, args.bins);
    params["samples"] = samples.size();
    params["bins"] = args.bins;
    params["votes"] = args.votes;
    emit(args, validity_bins_csv(bins), params);
    if (!args.out.empty()) {
      write_output(args.out + ".labels.csv", validity_labels_csv(labels), "analyze", params);
    }
    return kOk;
  }

  PerturbationOptions options;
  options.children = args.n;
  options.quality = cfg.engine.quality;
  options.verify_requeue = cfg.engine.verify_requeue;
  auto parents = sample_quality_positive(records, args.parents, args.seed);
  std::vector<PerturbationReport> rows(parents.size());
  for (std::size_t i = 0; i < parents.size(); ++i) {
    rows[i] = perturbative_report(gateway, parents[i].to_scored(profile), options, args.seed);
  }
  params["n"] = args.n;
  params["parents"] = parents.size();
  emit(args, perturbation_csv(rows), params);
  return kOk;
}

// ---- make-sim-seeds

struct SeedArgs {
  SimSeedOptions options;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_make_sim_seeds(const SeedArgs& args) {
  std::string content;
  for (const auto& item : make_sim_seeds(args.options, args.seed)) {
    content += json{{"problem", item.problem}, {"solution", item.solution}}.dump() + "\n";
  }
  write_output(args.out, content, "make-sim-seeds",
               {{"count", args.options.count},
                {"seed", args.seed},
                {"max_skills", args.options.max_skills},
                {"skill_universe", args.options.skill_universe},
                {"skill_pool", args.options.skill_pool},
                {"min_difficulty", args.options.min_difficulty},
                {"max_difficulty", args.options.max_difficulty}});
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quality-diversity synthetic problem generation"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Run the generation loop");
  generate->add_option("--config", gen.config, "Run config (INI)")->required();
  generate->add_option("--rounds", gen.rounds, "Total rounds to reach");
  generate->add_option("--workers", gen.workers, "Parallel workers");
  auto* resume = generate->add_flag("--resume", gen.resume, "Continue from the last checkpoint");
  generate->add_flag("--fresh", gen.fresh, "Overwrite an existing run")->excludes(resume);

  FilterArgs fil;
  auto* filter = app.add_subcommand("filter", "Build a training dataset from an archive");
  filter->add_option("--archive", fil.archive, "Archive log or run directory")->required();
  filter->add_option("--pairs", fil.pairs, "all | unique");
  filter->add_option("--easy-keep", fil.easy_keep, "Fraction of pairs kept per easy problem");
  filter->add_option("--easy-threshold", fil.easy_threshold, "Solve rate at which a problem is easy");
  filter->add_option("--strategy", fil.strategy, "quality | diversity | qd | random");
  filter->add_option("--budget", fil.budget, "Number of pairs N")->required();
  filter->add_option("--mean", fil.mean, "Target quality for the quality strategy");
  filter->add_option("--sd", fil.sd, "Spread for the quality strategy");
  filter->add_option("--seed", fil.seed, "Seed");
  filter->add_option("--out", fil.out, "Dataset output (JSONL)")->required();
  filter->add_option("--format", fil.format, "full | plain");

  AnalyzeArgs ana;
  auto* analyze = app.add_subcommand("analyze", "Diagnostic reports as CSV");
  analyze->add_option("--archive", ana.archive, "Archive log or run directory")->required();
  analyze->add_option("--report", ana.report, "coverage | histogram | validity | perturbation")
      ->required();
  analyze->add_option("--out", ana.out, "CSV output (stdout if omitted)");
  analyze->add_option("--config,--oracle", ana.config, "Run config with model roles");
  analyze->add_option("--stride", ana.stride, "Coverage sampling stride");
  analyze->add_option("--k", ana.k, "Rollouts per problem for the histogram");
  analyze->add_option("--n", ana.n, "Children per parent for perturbation");
  analyze->add_option("--parents", ana.parents, "Parents for perturbation");
  analyze->add_option("--samples", ana.samples, "Problems to label for validity");
  analyze->add_option("--bins", ana.bins, "Solve-rate bins for validity");
  analyze->add_option("--window-lower", ana.window_lower, "Only label solve rates >= this");
  analyze->add_option("--window-upper", ana.window_upper, "Only label solve rates <= this");
  analyze->add_option("--votes", ana.votes, "Oracle completions per label");
  analyze->add_option("--seed", ana.seed, "Seed");

  SeedArgs sd;
  auto* seeds = app.add_subcommand("make-sim-seeds", "Write simulated seed problems");
  seeds->add_option("--count", sd.options.count);
  seeds->add_option("--seed", sd.seed);
  seeds->add_option("--max-skills", sd.options.max_skills);
  seeds->add_option("--skill-universe", sd.options.skill_universe);
  seeds->add_option("--skill-pool", sd.options.skill_pool);
  seeds->add_option("--min-difficulty", sd.options.min_difficulty);
  seeds->add_option("--max-difficulty", sd.options.max_difficulty);
  seeds->add_option("--out", sd.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*generate) return cmd_generate(gen);
    if (*filter) return cmd_filter(fil);
    if (*analyze) return cmd_analyze(ana);
    if (*seeds) return cmd_make_sim_seeds(sd);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const CheckpointMismatch& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const BackendError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBackend;
  } catch (const EngineHalted& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBackend;
  } catch (const SeedDataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
