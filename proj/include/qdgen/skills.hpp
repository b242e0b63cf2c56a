#pragma once

// Skill vocabularies, canonical skill-sets (the niche key) and the
// unique-skill coverage measure.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace qdgen {

// Labels strictly ascending. An empty label list is the reserved
// `unclassified` niche.
class SkillSet {
 public:
  SkillSet() = default;

  // Sorts and dedupes; labels are taken as already normalised.
  static SkillSet from_labels(std::vector<std::string> labels);
  static SkillSet unclassified() { return SkillSet{}; }

  bool is_unclassified() const { return labels_.empty(); }
  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }

  // "a|b|c", or "unclassified".
  std::string key() const;

  friend auto operator<=>(const SkillSet&, const SkillSet&) = default;
  friend bool operator==(const SkillSet&, const SkillSet&) = default;

 private:
  std::vector<std::string> labels_;
};

struct SkillSetHash {
  std::size_t operator()(const SkillSet& s) const;
};

enum class VocabularyMode { bounded, unbounded };

class SkillVocabulary {
 public:
  SkillVocabulary() = default;
  SkillVocabulary(std::vector<std::string> labels, VocabularyMode mode);

  static SkillVocabulary unbounded() { return SkillVocabulary({}, VocabularyMode::unbounded); }

  VocabularyMode mode() const { return mode_; }
  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }
  bool contains(std::string_view label) const;

  // Newline-delimited label file.
  void save(const std::filesystem::path& path) const;
  static SkillVocabulary load(const std::filesystem::path& path);
  std::string serialize() const;

 private:
  std::vector<std::string> labels_;
  std::unordered_set<std::string> lookup_;
  VocabularyMode mode_ = VocabularyMode::bounded;
};

struct VocabularyBuild {
  SkillVocabulary vocabulary;
  std::optional<std::string> warning;
};

// Lowercase and trim.
std::string normalize_skill_label(std::string_view label);

// Top-M labels by frequency; ties broken lexicographically.
VocabularyBuild build_vocabulary(std::span<const std::vector<std::string>> classifications,
                                 std::size_t m);

// Bounded: drop out-of-vocabulary labels. Both modes: dedupe, keep the first
// k in listed (relevance) order, sort. Empty result is `unclassified`.
SkillSet canonical_skill_set(std::span<const std::string> raw, const SkillVocabulary& vocab,
                             std::size_t k);

// Number of distinct labels across all skill-sets.
std::size_t coverage(std::span<const SkillSet> skill_sets);

// Greedy maximum coverage: picks n niches, each step taking the niche with the
// most uncovered labels (ties: smallest tuple, then earliest position).
// Returned in selection order. Requires n <= niches.size().
std::vector<SkillSet> max_unique_skill_subset(std::span<const SkillSet> niches, std::size_t n);

// Same, returning positions into `niches`.
std::vector<std::size_t> max_unique_skill_order(std::span<const SkillSet> niches, std::size_t n);

}  // namespace qdgen
