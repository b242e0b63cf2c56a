#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "qdgen/rng.hpp"
#include "qdgen/skills.hpp"

#include <algorithm>
#include <filesystem>
#include <set>

using namespace qdgen;

namespace {

SkillSet ss(std::vector<std::string> labels) { return SkillSet::from_labels(std::move(labels)); }

std::size_t covered(const std::vector<SkillSet>& picks) { return coverage(picks); }

// Best coverage over all n-subsets.
std::size_t brute_force_best(const std::vector<SkillSet>& pool, std::size_t n) {
  std::size_t best = 0;
  std::size_t m = pool.size();
  for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) != n) continue;
    std::vector<SkillSet> picks;
    for (std::size_t i = 0; i < m; ++i) {
      if (mask & (1u << i)) picks.push_back(pool[i]);
    }
    best = std::max(best, coverage(picks));
  }
  return best;
}

}  // namespace

TEST_CASE("vocabulary takes the top M by frequency") {
  std::vector<std::vector<std::string>> labels{{"a", "b"}, {"a", "c"}, {"a", "b"}};
  auto built = build_vocabulary(labels, 2);
  CHECK(built.vocabulary.labels() == std::vector<std::string>{"a", "b"});
  CHECK_FALSE(built.warning.has_value());
}

TEST_CASE("vocabulary ties break lexicographically") {
  std::vector<std::vector<std::string>> labels{{"b"}, {"a"}};
  auto built = build_vocabulary(labels, 1);
  CHECK(built.vocabulary.labels() == std::vector<std::string>{"a"});
}

TEST_CASE("vocabulary with fewer labels than M warns") {
  std::vector<std::vector<std::string>> labels{{"a"}, {"b"}};
  auto built = build_vocabulary(labels, 5);
  CHECK(built.vocabulary.size() == 2);
  CHECK(built.warning.has_value());
}

TEST_CASE("vocabulary normalises labels") {
  std::vector<std::vector<std::string>> labels{{"  Algebra "}, {"algebra"}, {"Geometry"}};
  auto built = build_vocabulary(labels, 1);
  CHECK(built.vocabulary.labels() == std::vector<std::string>{"algebra"});
  CHECK(normalize_skill_label("  Number Theory\t") == "number theory");
}

TEST_CASE("vocabulary save and load") {
  auto path = std::filesystem::temp_directory_path() / "qdgen_test_vocab.txt";
  SkillVocabulary v({"algebra", "geometry"}, VocabularyMode::bounded);
  v.save(path);
  auto back = SkillVocabulary::load(path);
  CHECK(back.labels() == v.labels());
  CHECK(back.contains("geometry"));
  CHECK_FALSE(back.contains("pigeonhole"));
  std::filesystem::remove(path);
}

TEST_CASE("canonical skill set examples") {
  SkillVocabulary vocab({"algebra", "pigeonhole", "a"}, VocabularyMode::bounded);
  std::vector<std::string> raw1{"pigeonhole", "algebra"};
  CHECK(canonical_skill_set(raw1, vocab, 3) == ss({"algebra", "pigeonhole"}));

  std::vector<std::string> raw2{"x", "x", "a"};
  SkillVocabulary only_a({"a"}, VocabularyMode::bounded);
  CHECK(canonical_skill_set(raw2, only_a, 3) == ss({"a"}));

  std::vector<std::string> raw3{"z"};
  auto out = canonical_skill_set(raw3, only_a, 3);
  CHECK(out.is_unclassified());
  CHECK(out.key() == "unclassified");
}

TEST_CASE("canonical skill set keeps the first k by relevance") {
  auto vocab = SkillVocabulary::unbounded();
  std::vector<std::string> raw{"zeta", "beta", "alpha", "gamma"};
  CHECK(canonical_skill_set(raw, vocab, 2) == ss({"beta", "zeta"}));
  std::vector<std::string> dup{"zeta", "zeta", "alpha"};
  CHECK(canonical_skill_set(dup, vocab, 2) == ss({"alpha", "zeta"}));
}

TEST_CASE("canonical skill set is idempotent and sorted") {
  SkillVocabulary vocab({"a", "b", "c", "d", "e"}, VocabularyMode::bounded);
  Rng rng(11);
  std::vector<std::string> pool{"a", "b", "c", "d", "e", "q", "r"};
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::string> raw;
    std::size_t len = rng.below(8);
    for (std::size_t i = 0; i < len; ++i) raw.push_back(pool[rng.below(pool.size())]);
    std::size_t k = 1 + rng.below(4);
    auto once = canonical_skill_set(raw, vocab, k);
    auto twice = canonical_skill_set(once.labels(), vocab, k);
    CHECK(once == twice);
    CHECK(once.size() <= k);
    CHECK(std::is_sorted(once.labels().begin(), once.labels().end()));
    CHECK(std::adjacent_find(once.labels().begin(), once.labels().end()) == once.labels().end());
    for (const auto& l : once.labels()) CHECK(vocab.contains(l));
  }
}

TEST_CASE("skill set key") {
  CHECK(ss({"b", "a", "b"}).key() == "a|b");
  CHECK(ss({}).key() == "unclassified");
}

TEST_CASE("coverage counts distinct labels") {
  std::vector<SkillSet> sets{ss({"a", "b"}), ss({"b", "c"}), ss({})};
  CHECK(coverage(sets) == 3);
  std::vector<SkillSet> none;
  CHECK(coverage(none) == 0);
}

TEST_CASE("max unique skill subset example") {
  std::vector<SkillSet> niches{ss({"a", "b"}), ss({"b", "c"}), ss({"c", "d"}), ss({"a", "d"})};
  auto picks = max_unique_skill_subset(niches, 2);
  REQUIRE(picks.size() == 2);
  CHECK(picks[0] == ss({"a", "b"}));
  CHECK(picks[1] == ss({"c", "d"}));
  CHECK(coverage(picks) == 4);
}

TEST_CASE("max unique skill subset with duplicates") {
  std::vector<SkillSet> niches{ss({"a"}), ss({"a"}), ss({"b"})};
  auto order = max_unique_skill_order(niches, 3);
  REQUIRE(order.size() == 3);
  CHECK(order[0] == 0);
  CHECK(order[1] == 2);
  CHECK(order[2] == 1);
}

TEST_CASE("greedy coverage is within 1 - 1/e of the optimum") {
  Rng rng(2024);
  std::vector<std::string> universe{"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"};
  const double bound = 1.0 - 1.0 / std::exp(1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t m = 1 + rng.below(12);
    std::vector<SkillSet> pool;
    for (std::size_t i = 0; i < m; ++i) {
      std::vector<std::string> labels;
      std::size_t len = 1 + rng.below(3);
      for (std::size_t j = 0; j < len; ++j) labels.push_back(universe[rng.below(universe.size())]);
      pool.push_back(ss(labels));
    }
    std::size_t n = 1 + rng.below(m);
    auto picks = max_unique_skill_subset(pool, n);
    CHECK(picks.size() == n);
    double greedy = static_cast<double>(covered(picks));
    double best = static_cast<double>(brute_force_best(pool, n));
    CHECK(greedy >= bound * best - 1e-12);
    // Distinct positions.
    auto order = max_unique_skill_order(pool, n);
    std::set<std::size_t> uniq(order.begin(), order.end());
    CHECK(uniq.size() == n);
  }
}

TEST_CASE("max unique skill subset rejects n larger than the pool") {
  std::vector<SkillSet> niches{ss({"a"})};
  CHECK_THROWS(max_unique_skill_subset(niches, 2));
}
