#pragma once

// Final-answer extraction and equivalence for model-written solutions.
//
// Answers are pulled from the last balanced \boxed{...} region and reduced to
// a canonical form: an exact rational, an ordered tuple of canonicals, or a
// normalised string. Two answers agree iff their canonical forms are equal.

#include <boost/multiprecision/cpp_int.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace qdgen {

using Rational = boost::multiprecision::cpp_rational;

enum class NormalizationProfile {
  standard,  // latex stripping, exact rationals, ordered tuples
  literal,   // whitespace removal only, plain string compare
};

std::optional<NormalizationProfile> parse_normalization_profile(std::string_view name);
std::string_view to_string(NormalizationProfile profile);

struct CanonicalAnswer;

struct CanonicalTuple {
  std::vector<CanonicalAnswer> elements;
};

struct CanonicalAnswer {
  std::variant<Rational, std::string, CanonicalTuple> value;

  bool is_numeric() const { return std::holds_alternative<Rational>(value); }
  bool is_tuple() const { return std::holds_alternative<CanonicalTuple>(value); }

  // Stable text form, e.g. "1/2", "str:x^2+4", "(3,5)".
  std::string to_string() const;
};

bool operator==(const CanonicalAnswer& a, const CanonicalAnswer& b);
bool operator==(const CanonicalTuple& a, const CanonicalTuple& b);

class FinalAnswer {
 public:
  explicit FinalAnswer(std::string raw,
                       NormalizationProfile profile = NormalizationProfile::standard);

  const std::string& raw() const { return raw_; }
  const CanonicalAnswer& canonical() const { return canonical_; }

 private:
  std::string raw_;
  CanonicalAnswer canonical_;
};

// Contents of the last balanced \boxed{...} region, unparsed.
std::optional<std::string> last_boxed_content(std::string_view text);

std::optional<FinalAnswer> extract_final_answer(
    std::string_view solution_text,
    NormalizationProfile profile = NormalizationProfile::standard);

bool answers_equal(const FinalAnswer& a, const FinalAnswer& b);

// 1 iff the rollout carries an extractable answer equal to the intended one.
int is_correct(const FinalAnswer& intended, std::string_view rollout_text,
               NormalizationProfile profile = NormalizationProfile::standard);

// Canonicalisation entry point, exposed for tests and tools.
CanonicalAnswer canonicalize(std::string_view raw, NormalizationProfile profile);

}  // namespace qdgen
