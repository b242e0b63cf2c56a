#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "qdgen/analysis.hpp"
#include "qdgen/sim_backend.hpp"

#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>

using namespace qdgen;

namespace {

class ScriptedBackend final : public Backend {
 public:
  using Fn = std::function<std::string(const RoleConfig&, std::string_view, int)>;
  explicit ScriptedBackend(Fn fn) : fn_(std::move(fn)) {}

  std::string complete(const RoleConfig& role, std::string_view prompt, std::uint64_t) override {
    int n;
    {
      std::lock_guard lock(mutex_);
      n = calls++;
    }
    return fn_(role, prompt, n);
  }
  std::string identity() const override { return "scripted"; }

  int calls = 0;

 private:
  Fn fn_;
  std::mutex mutex_;
};

GatewayConfig quiet_gateway() {
  GatewayConfig g;
  g.retry.transport_retries = 0;
  g.retry.initial_backoff = std::chrono::milliseconds(0);
  return g;
}

Sample sim_sample(SampleId id, double difficulty, std::int64_t answer, bool valid) {
  SimProblemPayload p{difficulty, answer, valid, {"skill-001"}};
  Sample s;
  s.id = id;
  s.problem = sim_problem_text(p, id);
  s.solution = sim_solution_text(p);
  s.answer = *extract_final_answer(s.solution);
  return s;
}

ArchiveRecord generated(SampleId id, std::vector<std::string> skills, double quality,
                        std::uint32_t correct = 8, std::uint32_t k = 16) {
  ArchiveRecord r;
  r.kind = RecordKind::generated;
  r.id = id;
  r.round = 1;
  r.problem = "p" + std::to_string(id);
  r.skills = SkillSet::from_labels(std::move(skills));
  r.quality = quality;
  r.solve_rate = SolveRate(correct, k);
  return r;
}

ScoredSample scored(SampleId id, std::uint32_t correct, std::uint32_t k = 10) {
  ScoredSample s;
  s.sample.id = id;
  s.solve_rate = SolveRate(correct, k);
  return s;
}

}  // namespace

TEST_CASE("perturbation summary example") {
  auto r = summarize_perturbation(7, 0.5, {0.5, 0.3, 0.0, 0.2});
  CHECK(r.mean_diff == doctest::Approx(0.25));
  CHECK(r.child_failure_rate == doctest::Approx(0.25));
  CHECK(r.requested == 4);
  auto empty = summarize_perturbation(1, 0.5, {});
  CHECK(empty.mean_diff == 0.0);
}

TEST_CASE("perturbative report draws n children and redraws parse failures") {
  SimConfig sim;
  sim.malformed_mutation_rate = 0.3;
  auto backend = std::make_shared<SimBackend>(sim);
  ModelGateway gateway(backend, quiet_gateway());
  ScoredSample parent;
  parent.sample = sim_sample(3, 0.5, 12, true);
  parent.quality = 0.5;
  PerturbationOptions opt;
  opt.children = 16;
  auto r = perturbative_report(gateway, parent, opt, 99);
  CHECK(r.requested == 16);
  CHECK(r.child_qualities.size() == 16);
  CHECK(r.parent_id == 3);
  for (double q : r.child_qualities) CHECK((q == 0.0 || (q >= 0.1 && q <= 0.9)));
  auto again = perturbative_report(gateway, parent, opt, 99);
  CHECK(again.child_qualities == r.child_qualities);
  CHECK(again.parse_failures == r.parse_failures);

  // Every mutation malformed: the budget runs out and the report is short.
  SimConfig broken;
  broken.malformed_mutation_rate = 1.0;
  ModelGateway bad(std::make_shared<SimBackend>(broken), quiet_gateway());
  opt.children = 4;
  opt.parse_retry_budget = 2;
  auto shortr = perturbative_report(bad, parent, opt, 1);
  CHECK(shortr.child_qualities.empty());
  CHECK(shortr.parse_failures == 3);
  CHECK(shortr.requested == 4);
}

TEST_CASE("validity labels from the oracle") {
  auto backend = std::make_shared<SimBackend>();
  ModelGateway gateway(backend, quiet_gateway());
  std::vector<Sample> samples{sim_sample(1, 0.3, 10, true), sim_sample(2, 0.3, 10, false)};
  auto labels = label_validity(gateway, samples, 5);
  REQUIRE(labels.size() == 2);
  CHECK(labels[0].label == Validity::valid);
  CHECK(labels[1].label == Validity::invalid);
  REQUIRE(labels[1].oracle_answer.has_value());
  CHECK(labels[1].oracle_answer->raw() == "17");
  CHECK_FALSE(labels[0].transport_failure);
}

TEST_CASE("unreadable oracle output is unscorable") {
  auto backend = std::make_shared<ScriptedBackend>(
      [](const RoleConfig&, std::string_view, int) { return std::string("no idea"); });
  ModelGateway gateway(backend, quiet_gateway());
  std::vector<Sample> samples{sim_sample(1, 0.3, 10, true)};
  auto labels = label_validity(gateway, samples, 5);
  CHECK(labels[0].label == Validity::unscorable);
  CHECK_FALSE(labels[0].transport_failure);
}

TEST_CASE("oracle transport failure is flagged") {
  auto backend = std::make_shared<ScriptedBackend>(
      [](const RoleConfig&, std::string_view, int) -> std::string {
        throw TransportError("timeout");
      });
  ModelGateway gateway(backend, quiet_gateway());
  std::vector<Sample> samples{sim_sample(1, 0.3, 10, true)};
  auto labels = label_validity(gateway, samples, 5);
  CHECK(labels[0].label == Validity::unscorable);
  CHECK(labels[0].transport_failure);
}

TEST_CASE("majority vote over scorable votes") {
  // Votes cycle: right, wrong, unreadable, right ...
  auto backend = std::make_shared<ScriptedBackend>(
      [](const RoleConfig&, std::string_view, int n) -> std::string {
        switch (n % 3) {
          case 0: return "\\boxed{10}";
          case 1: return "\\boxed{11}";
          default: return "hmm";
        }
      });
  ModelGateway gateway(backend, quiet_gateway());
  std::vector<Sample> samples{sim_sample(1, 0.3, 10, true)};
  // Three votes: one right, one wrong, one unscorable -> tie -> invalid.
  CHECK(label_validity(gateway, samples, 5, 3)[0].label == Validity::invalid);
  backend->calls = 0;
  // Four votes: right, wrong, unscorable, right -> valid.
  CHECK(label_validity(gateway, samples, 5, 4)[0].label == Validity::valid);
}

TEST_CASE("validity by solve-rate bin") {
  std::vector<ScoredSample> scores{scored(1, 0), scored(2, 1), scored(3, 5), scored(4, 9),
                                   scored(5, 10), scored(6, 6)};
  ScoredSample unscored;
  unscored.sample.id = 7;
  scores.push_back(unscored);
  std::vector<ValidityLabel> labels{
      {1, std::nullopt, Validity::valid, false},   {2, std::nullopt, Validity::invalid, false},
      {3, std::nullopt, Validity::valid, false},   {4, std::nullopt, Validity::valid, false},
      {5, std::nullopt, Validity::invalid, false}, {6, std::nullopt, Validity::unscorable, false},
      {7, std::nullopt, Validity::valid, false}};
  auto bins = validity_by_solve_rate(labels, scores, 2);
  REQUIRE(bins.size() == 2);
  CHECK(bins[0].lower == 0.0);
  CHECK(bins[0].upper == 0.5);
  CHECK(bins[0].count == 2);
  CHECK(*bins[0].mean_validity == doctest::Approx(0.5));
  CHECK(bins[1].count == 3);
  CHECK(*bins[1].mean_validity == doctest::Approx(2.0 / 3.0));

  auto five = validity_by_solve_rate(labels, scores, 5);
  CHECK(five[2].count == 1);
  CHECK_FALSE(five[1].mean_validity.has_value());
  CHECK_THROWS(validity_by_solve_rate(labels, scores, 1));
}

TEST_CASE("solve-rate window and quality-positive sampling") {
  std::vector<ArchiveRecord> records{generated(1, {"a"}, 0.5, 8), generated(2, {"a"}, 0.0, 16),
                                     generated(3, {"b"}, 0.75, 4), generated(4, {"b"}, 0.0, 0)};
  auto window = solve_rate_window(records, 0.25, 0.5);
  REQUIRE(window.size() == 2);
  CHECK(window[0].id == 1);
  CHECK(window[1].id == 3);
  auto picks = sample_quality_positive(records, 5, 1);
  std::set<SampleId> ids;
  for (const auto& r : picks) ids.insert(r.id);
  CHECK(ids == std::set<SampleId>{1, 3});
  CHECK(sample_quality_positive(records, 1, 1).size() == 1);
}

TEST_CASE("coverage stays flat for a single skill") {
  std::vector<ArchiveRecord> records;
  for (SampleId i = 0; i < 10; ++i) records.push_back(generated(i, {"only"}, 0.5));
  auto curve = coverage_curve(records, 3);
  REQUIRE(curve.points.size() == 4);
  for (const auto& p : curve.points) {
    CHECK(p.archive_unique_skills == 1);
    CHECK(p.train_unique_skills == 1);
    CHECK(p.archive_skill_sets == 1);
  }
  CHECK(curve.points.back().problems_generated == 10);
}

TEST_CASE("coverage counts distinct skill sets and the trainable subset") {
  std::vector<ArchiveRecord> records;
  for (SampleId i = 0; i < 10; ++i) records.push_back(generated(i, {"s" + std::to_string(i)}, 0.0));
  ArchiveRecord failure;
  failure.kind = RecordKind::parse_failure;
  records.push_back(failure);
  records.push_back(generated(20, {}, 0.5));
  auto curve = coverage_curve(records, 100);
  REQUIRE(curve.points.size() == 1);
  const auto& p = curve.points.back();
  CHECK(p.problems_generated == 11);
  CHECK(p.archive_skill_sets == 10);
  CHECK(p.archive_unique_skills == 10);
  CHECK(p.train_skill_sets == 0);
  CHECK(p.train_unique_skills == 0);
}

TEST_CASE("coverage from a log skips corrupt lines") {
  auto path = std::filesystem::temp_directory_path() / "qdgen_test_coverage.jsonl";
  {
    std::ofstream out(path);
    out << record_to_json_line(generated(1, {"a", "b"}, 0.5)) << "\n";
    out << "{not json\n";
    out << record_to_json_line(generated(2, {"c"}, 0.0)) << "\n";
  }
  auto curve = coverage_curve(path, 1);
  CHECK(curve.corrupt_lines == 1);
  REQUIRE(curve.points.size() == 2);
  CHECK(curve.points.back().archive_unique_skills == 3);
  CHECK(curve.points.back().train_unique_skills == 2);
  std::filesystem::remove(path);
}

TEST_CASE("solve-rate histogram has K + 1 buckets") {
  std::vector<ArchiveRecord> records{generated(1, {}, 0.5, 0, 4), generated(2, {}, 0.5, 4, 4),
                                     generated(3, {}, 0.5, 2, 4), generated(4, {}, 0.5, 2, 4)};
  ArchiveRecord failure;
  failure.kind = RecordKind::parse_failure;
  records.push_back(failure);
  auto rows = solve_rate_histogram(records, 4);
  REQUIRE(rows.size() == 5);
  std::size_t total = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].value == SolveRate(static_cast<std::uint32_t>(i), 4));
    total += rows[i].count;
  }
  CHECK(total == 4);
  CHECK(rows[2].count == 2);
  records.push_back(generated(5, {}, 0.5, 1, 16));
  CHECK_THROWS_AS(solve_rate_histogram(records, 4), std::invalid_argument);
}

TEST_CASE("csv headers") {
  auto starts = [](const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; };
  std::vector<ValidityLabel> labels{{1, std::nullopt, Validity::valid, false}};
  CHECK(starts(validity_labels_csv(labels), "id,label,oracle_answer,transport_failure\n"));
  std::vector<ValidityBin> bins{{0.0, 0.5, 0, std::nullopt}};
  CHECK(starts(validity_bins_csv(bins), "bin_lower,bin_upper,count,mean_validity\n"));
  std::vector<PerturbationReport> reports{summarize_perturbation(1, 0.5, {0.5})};
  CHECK(starts(perturbation_csv(reports), "parent_id,parent_quality,n,"));
  CoverageCurve curve;
  curve.points.push_back({});
  CHECK(starts(coverage_csv(curve), "problems_generated,"));
  std::vector<HistogramRow> rows{{SolveRate(1, 4), 3}};
  auto h = histogram_csv(rows);
  CHECK(h == "solve_rate,value,count\n1/4,0.25,3\n");
}
