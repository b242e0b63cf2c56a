#include "qdgen/analysis.hpp"

#include "qdgen/parallel.hpp"
#include "qdgen/rng.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace qdgen {

namespace {

constexpr std::uint64_t kRequeueKey = 0xAE0000;

// Shortest text that reads back to the same double.
std::string fmt_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

// Quotes a CSV field when needed.
std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

struct CoverageState {
  std::unordered_set<std::string> archive_sets, train_sets, archive_skills, train_skills;
  std::size_t generated = 0;

  void add(const ArchiveRecord& r) {
    if (r.kind != RecordKind::generated) return;
    ++generated;
    if (r.skills.is_unclassified()) return;
    archive_sets.insert(r.skills.key());
    for (const auto& s : r.skills.labels()) archive_skills.insert(s);
    if (r.quality > 0.0) {
      train_sets.insert(r.skills.key());
      for (const auto& s : r.skills.labels()) train_skills.insert(s);
    }
  }

  CoveragePoint point() const {
    return {generated, archive_sets.size(), train_sets.size(), archive_skills.size(),
            train_skills.size()};
  }
};

void feed(CoverageState& state, CoverageCurve& curve, const ArchiveRecord& r, std::size_t stride) {
  std::size_t before = state.generated;
  state.add(r);
  if (state.generated != before && state.generated % stride == 0) {
    curve.points.push_back(state.point());
  }
}

void finish(const CoverageState& state, CoverageCurve& curve) {
  if (curve.points.empty() || curve.points.back().problems_generated != state.generated) {
    curve.points.push_back(state.point());
  }
}

}  // namespace

std::string_view to_string(Validity v) {
  switch (v) {
    case Validity::valid: return "valid";
    case Validity::invalid: return "invalid";
    case Validity::unscorable: return "unscorable";
  }
  return "unknown";
}

std::vector<ValidityLabel> label_validity(ModelGateway& gateway, std::span<const Sample> samples,
                                          std::uint64_t substream_seed, int votes,
                                          std::size_t workers) {
  if (votes < 1) throw std::invalid_argument("votes must be >= 1");
  std::vector<ValidityLabel> labels(samples.size());
  parallel_for(samples.size(), workers, [&](std::size_t i) {
    const Sample& s = samples[i];
    ValidityLabel& label = labels[i];
    label.id = s.id;
    int agree = 0, scorable = 0;
    for (int v = 0; v < votes; ++v) {
      std::uint64_t seed = derive_seed(
          substream_seed, {purpose_key(Purpose::oracle), s.id, static_cast<std::uint64_t>(v)});
      std::optional<FinalAnswer> answer;
      try {
        answer = gateway.oracle_answer(s, seed);
      } catch (const BackendError&) {
        label.transport_failure = true;
        continue;
      }
      if (!answer) continue;
      ++scorable;
      if (answers_equal(s.answer, *answer)) ++agree;
      if (!label.oracle_answer) label.oracle_answer = std::move(answer);
    }
    if (scorable == 0) {
      label.label = Validity::unscorable;
    } else {
      label.label = 2 * agree > scorable ? Validity::valid : Validity::invalid;
    }
  });
  return labels;
}

std::vector<ValidityBin> validity_by_solve_rate(std::span<const ValidityLabel> labels,
                                                std::span<const ScoredSample> scored,
                                                std::size_t bins) {
  if (bins < 2) throw std::invalid_argument("bins must be >= 2");
  std::unordered_map<SampleId, const ScoredSample*> by_id;
  for (const auto& s : scored) by_id[s.sample.id] = &s;

  std::vector<std::size_t> counts(bins, 0), valid(bins, 0);
  for (const auto& l : labels) {
    if (l.label == Validity::unscorable) continue;
    auto it = by_id.find(l.id);
    if (it == by_id.end() || !it->second->solve_rate) continue;
    const SolveRate& rate = *it->second->solve_rate;
    // Integer arithmetic so that boundaries like 8/16 land in a fixed bin.
    std::size_t bin = static_cast<std::size_t>(rate.correct()) * bins / rate.total();
    bin = std::min(bin, bins - 1);
    ++counts[bin];
    if (l.label == Validity::valid) ++valid[bin];
  }
  std::vector<ValidityBin> out(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    out[b].lower = static_cast<double>(b) / static_cast<double>(bins);
    out[b].upper = static_cast<double>(b + 1) / static_cast<double>(bins);
    out[b].count = counts[b];
    if (counts[b] > 0) {
      out[b].mean_validity = static_cast<double>(valid[b]) / static_cast<double>(counts[b]);
    }
  }
  return out;
}

std::vector<ArchiveRecord> solve_rate_window(std::span<const ArchiveRecord> records,
                                             double lower, double upper) {
  std::vector<ArchiveRecord> out;
  for (const auto& r : records) {
    if (!r.solve_rate) continue;
    double v = r.solve_rate->value();
    if (v >= lower && v <= upper) out.push_back(r);
  }
  return out;
}

std::vector<ArchiveRecord> sample_quality_positive(std::span<const ArchiveRecord> records,
                                                   std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].kind == RecordKind::generated && records[i].quality > 0.0) pool.push_back(i);
  }
  count = std::min(count, pool.size());
  Rng rng(derive_seed(seed, purpose_key(Purpose::sample)));
  for (std::size_t i = 0; i < count; ++i) {
    std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
  }
  std::vector<ArchiveRecord> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(records[pool[i]]);
  return out;
}

PerturbationReport summarize_perturbation(SampleId parent_id, double parent_quality,
                                          std::vector<double> child_qualities) {
  PerturbationReport r;
  r.parent_id = parent_id;
  r.parent_quality = parent_quality;
  r.child_qualities = std::move(child_qualities);
  r.requested = r.child_qualities.size();
  const std::size_t n = r.child_qualities.size();
  if (n == 0) return r;
  double diff = 0.0;
  std::size_t zero = 0;
  for (double q : r.child_qualities) {
    diff += parent_quality - q;
    if (q == 0.0) ++zero;
  }
  r.mean_diff = diff / static_cast<double>(n);
  r.child_failure_rate = static_cast<double>(zero) / static_cast<double>(n);
  return r;
}

PerturbationReport perturbative_report(ModelGateway& gateway, const ScoredSample& parent,
                                       const PerturbationOptions& options,
                                       std::uint64_t substream_seed) {
  if (options.children < 1) throw std::invalid_argument("children must be >= 1");
  options.quality.validate();
  const std::size_t budget = options.parse_retry_budget < 0
                                 ? options.children
                                 : static_cast<std::size_t>(options.parse_retry_budget);
  std::vector<double> qualities;
  std::size_t failures = 0;
  for (std::uint64_t draw = 0; qualities.size() < options.children && failures <= budget;
       ++draw) {
    auto seed_for = [&](Purpose p) {
      return derive_seed(substream_seed, {parent.sample.id, draw, purpose_key(p)});
    };
    MutationOutcome outcome = gateway.mutate(parent.sample, seed_for(Purpose::mutate), 0, 0);
    if (!outcome.child) {
      ++failures;
      continue;
    }
    VerificationSet vs;
    for (int attempt = 0; attempt <= options.verify_requeue; ++attempt) {
      std::uint64_t s = seed_for(Purpose::verify);
      if (attempt > 0) s = derive_seed(s, kRequeueKey + static_cast<std::uint64_t>(attempt));
      vs = gateway.verify(*outcome.child, options.quality.rollouts, s);
      if (!vs.unusable) break;
    }
    if (vs.unusable) {
      ++failures;
      continue;
    }
    qualities.push_back(quality(solve_rate(vs), options.quality));
  }
  PerturbationReport report =
      summarize_perturbation(parent.sample.id, parent.quality, std::move(qualities));
  report.requested = options.children;
  report.parse_failures = failures;
  return report;
}

CoverageCurve coverage_curve(std::span<const ArchiveRecord> records, std::size_t stride) {
  if (stride < 1) throw std::invalid_argument("stride must be >= 1");
  CoverageState state;
  CoverageCurve curve;
  for (const auto& r : records) feed(state, curve, r, stride);
  finish(state, curve);
  return curve;
}

CoverageCurve coverage_curve(const std::filesystem::path& archive_log, std::size_t stride) {
  if (stride < 1) throw std::invalid_argument("stride must be >= 1");
  std::ifstream in(archive_log, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read archive log " + archive_log.string());
  CoverageState state;
  CoverageCurve curve;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ArchiveRecord r;
    try {
      r = record_from_json_line(line);
    } catch (const std::runtime_error&) {
      ++curve.corrupt_lines;
      continue;
    }
    feed(state, curve, r, stride);
  }
  finish(state, curve);
  return curve;
}

std::vector<HistogramRow> solve_rate_histogram(std::span<const ArchiveRecord> records,
                                               std::uint32_t k) {
  if (k < 1) throw std::invalid_argument("K must be >= 1");
  std::vector<HistogramRow> rows;
  for (std::uint32_t n = 0; n <= k; ++n) rows.push_back({SolveRate(n, k), 0});
  for (const auto& r : records) {
    if (!r.solve_rate) continue;
    if (r.solve_rate->total() != k) {
      throw std::invalid_argument("record " + std::to_string(r.id) + " was scored with K=" +
                                  std::to_string(r.solve_rate->total()));
    }
    ++rows[r.solve_rate->correct()].count;
  }
  return rows;
}

std::string validity_labels_csv(std::span<const ValidityLabel> labels) {
  std::string out = "id,label,oracle_answer,transport_failure\n";
  for (const auto& l : labels) {
    out += std::to_string(l.id) + ',' + std::string(to_string(l.label)) + ',' +
           csv_field(l.oracle_answer ? l.oracle_answer->raw() : "") + ',' +
           (l.transport_failure ? "1" : "0") + '\n';
  }
  return out;
}

std::string validity_bins_csv(std::span<const ValidityBin> bins) {
  std::string out = "bin_lower,bin_upper,count,mean_validity\n";
  for (const auto& b : bins) {
    out += fmt_double(b.lower) + ',' + fmt_double(b.upper) + ',' + std::to_string(b.count) + ',' +
           (b.mean_validity ? fmt_double(*b.mean_validity) : "") + '\n';
  }
  return out;
}

std::string perturbation_csv(std::span<const PerturbationReport> reports) {
  std::string out = "parent_id,parent_quality,n,requested,parse_failures,mean_diff,child_failure_rate\n";
  for (const auto& r : reports) {
    out += std::to_string(r.parent_id) + ',' + fmt_double(r.parent_quality) + ',' +
           std::to_string(r.child_qualities.size()) + ',' + std::to_string(r.requested) + ',' +
           std::to_string(r.parse_failures) + ',' + fmt_double(r.mean_diff) + ',' +
           fmt_double(r.child_failure_rate) + '\n';
  }
  return out;
}

std::string coverage_csv(const CoverageCurve& curve) {
  std::string out =
      "problems_generated,archive_skill_sets,train_skill_sets,archive_unique_skills,"
      "train_unique_skills\n";
  for (const auto& p : curve.points) {
    out += std::to_string(p.problems_generated) + ',' + std::to_string(p.archive_skill_sets) +
           ',' + std::to_string(p.train_skill_sets) + ',' +
           std::to_string(p.archive_unique_skills) + ',' + std::to_string(p.train_unique_skills) +
           '\n';
  }
  return out;
}

std::string histogram_csv(std::span<const HistogramRow> rows) {
  std::string out = "solve_rate,value,count\n";
  for (const auto& r : rows) {
    out += r.value.to_string() + ',' + fmt_double(r.value.value()) + ',' +
           std::to_string(r.count) + '\n';
  }
  return out;
}

}  // namespace qdgen
