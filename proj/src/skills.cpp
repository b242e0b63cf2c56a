#include "qdgen/skills.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <map>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace qdgen {

SkillSet SkillSet::from_labels(std::vector<std::string> labels) {
  SkillSet s;
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  labels.erase(std::remove(labels.begin(), labels.end(), std::string{}), labels.end());
  s.labels_ = std::move(labels);
  return s;
}

std::string SkillSet::key() const {
  if (labels_.empty()) return "unclassified";
  std::string out;
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (i) out += '|';
    out += labels_[i];
  }
  return out;
}

std::size_t SkillSetHash::operator()(const SkillSet& s) const {
  std::size_t h = 0x345678;
  for (const auto& label : s.labels()) {
    h ^= std::hash<std::string>{}(label) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return h;
}

SkillVocabulary::SkillVocabulary(std::vector<std::string> labels, VocabularyMode mode)
    : labels_(std::move(labels)), lookup_(labels_.begin(), labels_.end()), mode_(mode) {
  if (lookup_.size() != labels_.size()) {
    throw std::invalid_argument("skill vocabulary labels must be distinct");
  }
}

bool SkillVocabulary::contains(std::string_view label) const {
  return mode_ == VocabularyMode::unbounded || lookup_.count(std::string(label)) > 0;
}

std::string SkillVocabulary::serialize() const {
  std::string out;
  for (const auto& label : labels_) {
    out += label;
    out += '\n';
  }
  return out;
}

void SkillVocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write vocabulary file " + path.string());
  out << serialize();
}

SkillVocabulary SkillVocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read vocabulary file " + path.string());
  std::vector<std::string> labels;
  std::string line;
  while (std::getline(in, line)) {
    std::string label = normalize_skill_label(line);
    if (!label.empty()) labels.push_back(std::move(label));
  }
  return SkillVocabulary(std::move(labels), VocabularyMode::bounded);
}

std::string normalize_skill_label(std::string_view label) {
  auto not_space = [](unsigned char c) { return std::isspace(c) == 0; };
  auto first = std::find_if(label.begin(), label.end(), not_space);
  auto last = std::find_if(label.rbegin(), label.rend(), not_space).base();
  std::string out;
  if (first < last) out.assign(first, last);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

VocabularyBuild build_vocabulary(std::span<const std::vector<std::string>> classifications,
                                 std::size_t m) {
  std::map<std::string, std::size_t> counts;
  for (const auto& labels : classifications) {
    for (const auto& raw : labels) {
      std::string label = normalize_skill_label(raw);
      if (!label.empty()) ++counts[label];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  VocabularyBuild result;
  if (ranked.size() < m) {
    result.warning = "only " + std::to_string(ranked.size()) +
                     " distinct skill labels available, fewer than M=" + std::to_string(m);
  }
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < ranked.size() && i < m; ++i) labels.push_back(ranked[i].first);
  result.vocabulary = SkillVocabulary(std::move(labels), VocabularyMode::bounded);
  return result;
}

SkillSet canonical_skill_set(std::span<const std::string> raw, const SkillVocabulary& vocab,
                             std::size_t k) {
  std::vector<std::string> kept;
  for (const auto& r : raw) {
    if (kept.size() >= k) break;
    std::string label = normalize_skill_label(r);
    if (label.empty() || !vocab.contains(label)) continue;
    if (std::find(kept.begin(), kept.end(), label) != kept.end()) continue;
    kept.push_back(std::move(label));
  }
  return SkillSet::from_labels(std::move(kept));
}

std::size_t coverage(std::span<const SkillSet> skill_sets) {
  std::unordered_set<std::string> seen;
  for (const auto& s : skill_sets) seen.insert(s.labels().begin(), s.labels().end());
  return seen.size();
}

std::vector<std::size_t> max_unique_skill_order(std::span<const SkillSet> niches, std::size_t n) {
  if (n > niches.size()) {
    throw std::invalid_argument("cannot choose " + std::to_string(n) + " niches out of " +
                                std::to_string(niches.size()));
  }
  std::unordered_set<std::string> covered;
  auto gain_of = [&](std::size_t i) {
    std::size_t g = 0;
    for (const auto& label : niches[i].labels()) g += covered.count(label) ? 0 : 1;
    return g;
  };

  // Lazy greedy: gains only shrink as coverage grows, so a stale entry that
  // still tops the heap after refresh is the true maximum.
  struct Entry {
    std::size_t gain;
    std::size_t index;
    std::size_t stamp;
  };
  auto worse = [&](const Entry& a, const Entry& b) {
    if (a.gain != b.gain) return a.gain < b.gain;
    if (niches[a.index] != niches[b.index]) return niches[b.index] < niches[a.index];
    return a.index > b.index;
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(worse)> heap(worse);
  for (std::size_t i = 0; i < niches.size(); ++i) heap.push({niches[i].size(), i, 0});

  std::vector<std::size_t> order;
  order.reserve(n);
  std::size_t stamp = 0;
  while (order.size() < n) {
    Entry top = heap.top();
    heap.pop();
    if (top.stamp != stamp) {
      top.gain = gain_of(top.index);
      top.stamp = stamp;
      heap.push(top);
      continue;
    }
    order.push_back(top.index);
    covered.insert(niches[top.index].labels().begin(), niches[top.index].labels().end());
    ++stamp;
  }
  return order;
}

std::vector<SkillSet> max_unique_skill_subset(std::span<const SkillSet> niches, std::size_t n) {
  std::vector<SkillSet> out;
  for (std::size_t i : max_unique_skill_order(niches, n)) out.push_back(niches[i]);
  return out;
}

}  // namespace qdgen
