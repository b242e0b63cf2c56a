#include "qdgen/answer.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace qdgen {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::string remove_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (!is_space(c)) out.push_back(c);
  }
  return out;
}

// Index just past the brace group opening at `open` (s[open] == '{'), or npos.
// Escaped braces do not count towards depth.
std::size_t match_brace(std::string_view s, std::size_t open) {
  int depth = 0;
  for (std::size_t i = open; i < s.size(); ++i) {
    char c = s[i];
    if (c == '\\' && i + 1 < s.size() && (s[i + 1] == '{' || s[i + 1] == '}')) {
      ++i;
      continue;
    }
    if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
      if (depth < 0) return std::string_view::npos;
    }
  }
  return std::string_view::npos;
}

bool starts_with_command(std::string_view s, std::size_t pos, std::string_view cmd) {
  if (s.substr(pos, cmd.size()) != cmd) return false;
  // A command name ends at the first non-letter.
  std::size_t end = pos + cmd.size();
  bool cmd_is_word = std::isalpha(static_cast<unsigned char>(cmd.back())) != 0;
  return !cmd_is_word || end >= s.size() ||
         std::isalpha(static_cast<unsigned char>(s[end])) == 0;
}

std::string strip_latex(std::string_view in) {
  // Control spaces ("\ ") go before whitespace removal so "\ " never fuses
  // with the following token.
  std::string pre;
  pre.reserve(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (in[i] == '\\' && i + 1 < in.size() && is_space(in[i + 1])) {
      ++i;
      continue;
    }
    pre.push_back(in[i]);
  }
  std::string s = remove_whitespace(pre);

  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    char c = s[i];
    if (c == '$') {
      ++i;
      continue;
    }
    if (c == '\\') {
      if (starts_with_command(s, i, "\\left")) {
        i += 5;
        continue;
      }
      if (starts_with_command(s, i, "\\right")) {
        i += 6;
        continue;
      }
      if (i + 1 < s.size() && (s[i + 1] == ',' || s[i + 1] == ';')) {
        i += 2;
        continue;
      }
      if (starts_with_command(s, i, "\\text") && i + 5 < s.size() && s[i + 5] == '{') {
        std::size_t end = match_brace(s, i + 5);
        if (end != std::string::npos) {
          out += strip_latex(std::string_view(s).substr(i + 6, end - i - 7));
          i = end;
          continue;
        }
      }
    }
    out.push_back(c);
    ++i;
  }
  return out;
}

std::string_view unwrap_outer_braces(std::string_view s) {
  while (s.size() >= 2 && s.front() == '{' && match_brace(s, 0) == s.size()) {
    s = s.substr(1, s.size() - 2);
  }
  return s;
}

// Decimal digits to an integer. cpp_int's string constructor reads a leading
// 0 as an octal prefix, so leading zeros are dropped first.
boost::multiprecision::cpp_int decimal_digits(std::string_view digits) {
  std::size_t first = digits.find_first_not_of('0');
  if (first == std::string_view::npos) return 0;
  return boost::multiprecision::cpp_int{std::string(digits.substr(first))};
}

std::optional<Rational> parse_signed_integer(std::string_view s) {
  bool negative = false;
  if (!s.empty() && (s.front() == '+' || s.front() == '-')) {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  if (s.empty() || !std::all_of(s.begin(), s.end(), is_digit)) return std::nullopt;
  boost::multiprecision::cpp_int value = decimal_digits(s);
  return Rational(negative ? -value : value);
}

// [+-]digits[.digits] or [+-].digits, converted exactly.
std::optional<Rational> parse_decimal(std::string_view s) {
  bool negative = false;
  if (!s.empty() && (s.front() == '+' || s.front() == '-')) {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  std::size_t dot = s.find('.');
  std::string_view int_part = s.substr(0, dot);
  std::string_view frac_part =
      dot == std::string_view::npos ? std::string_view{} : s.substr(dot + 1);
  if (int_part.empty() && frac_part.empty()) return std::nullopt;
  if (dot != std::string_view::npos && frac_part.empty() && int_part.empty()) return std::nullopt;
  auto all_digits = [](std::string_view p) { return std::all_of(p.begin(), p.end(), is_digit); };
  if (!all_digits(int_part) || !all_digits(frac_part)) return std::nullopt;

  std::string digits = std::string(int_part) + std::string(frac_part);
  boost::multiprecision::cpp_int numerator = decimal_digits(digits);
  boost::multiprecision::cpp_int denominator = 1;
  for (std::size_t i = 0; i < frac_part.size(); ++i) denominator *= 10;
  Rational value(numerator, denominator);
  return negative ? Rational(-value) : value;
}

std::optional<Rational> parse_latex_fraction(std::string_view s) {
  bool negative = false;
  if (!s.empty() && (s.front() == '+' || s.front() == '-')) {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  constexpr std::array<std::string_view, 3> kFracs = {"\\frac", "\\dfrac", "\\tfrac"};
  for (std::string_view cmd : kFracs) {
    if (s.substr(0, cmd.size()) != cmd) continue;
    std::size_t num_open = cmd.size();
    if (num_open >= s.size() || s[num_open] != '{') return std::nullopt;
    std::size_t num_end = match_brace(s, num_open);
    if (num_end == std::string_view::npos || num_end >= s.size() || s[num_end] != '{') {
      return std::nullopt;
    }
    std::size_t den_end = match_brace(s, num_end);
    if (den_end != s.size()) return std::nullopt;
    auto num = parse_decimal(s.substr(num_open + 1, num_end - num_open - 2));
    auto den = parse_decimal(s.substr(num_end + 1, den_end - num_end - 2));
    if (!num || !den || *den == 0) return std::nullopt;
    Rational value = *num / *den;
    return negative ? Rational(-value) : value;
  }
  return std::nullopt;
}

std::optional<Rational> parse_number(std::string_view s) {
  if (auto d = parse_decimal(s)) return d;
  if (auto f = parse_latex_fraction(s)) return f;
  std::size_t slash = s.find('/');
  if (slash != std::string_view::npos && s.find('/', slash + 1) == std::string_view::npos) {
    auto num = parse_signed_integer(s.substr(0, slash));
    std::string_view den_text = s.substr(slash + 1);
    if (!den_text.empty() && (den_text.front() == '+' || den_text.front() == '-')) {
      return std::nullopt;
    }
    auto den = parse_signed_integer(den_text);
    if (num && den && *den != 0) return *num / *den;
  }
  return std::nullopt;
}

// Splits "(a,b,...)" at depth-0 commas; nullopt if not a parenthesised list.
std::optional<std::vector<std::string_view>> split_tuple(std::string_view s) {
  if (s.size() < 2 || s.front() != '(' || s.back() != ')') return std::nullopt;
  std::vector<std::string_view> parts;
  int depth = 0;
  std::size_t start = 1;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (c == '(' || c == '{' || c == '[') {
      ++depth;
    } else if (c == ')' || c == '}' || c == ']') {
      --depth;
      // The opening paren must close only at the very end.
      if (depth == 0 && i + 1 != s.size()) return std::nullopt;
    } else if (c == ',' && depth == 1) {
      parts.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  if (depth != 0 || parts.empty()) return std::nullopt;
  parts.push_back(s.substr(start, s.size() - 1 - start));
  return parts;
}

CanonicalAnswer canonicalize_stripped(std::string_view s) {
  s = unwrap_outer_braces(s);
  if (auto parts = split_tuple(s)) {
    CanonicalTuple tuple;
    tuple.elements.reserve(parts->size());
    for (std::string_view part : *parts) tuple.elements.push_back(canonicalize_stripped(part));
    return CanonicalAnswer{std::move(tuple)};
  }
  if (auto number = parse_number(s)) return CanonicalAnswer{*number};
  return CanonicalAnswer{std::string(s)};
}

}  // namespace

std::optional<NormalizationProfile> parse_normalization_profile(std::string_view name) {
  if (name == "standard") return NormalizationProfile::standard;
  if (name == "literal") return NormalizationProfile::literal;
  return std::nullopt;
}

std::string_view to_string(NormalizationProfile profile) {
  return profile == NormalizationProfile::standard ? "standard" : "literal";
}

std::string CanonicalAnswer::to_string() const {
  if (const auto* r = std::get_if<Rational>(&value)) {
    auto num = boost::multiprecision::numerator(*r);
    auto den = boost::multiprecision::denominator(*r);
    return den == 1 ? num.str() : num.str() + "/" + den.str();
  }
  if (const auto* s = std::get_if<std::string>(&value)) return "str:" + *s;
  const auto& tuple = std::get<CanonicalTuple>(value);
  std::string out = "(";
  for (std::size_t i = 0; i < tuple.elements.size(); ++i) {
    if (i) out += ",";
    out += tuple.elements[i].to_string();
  }
  return out + ")";
}

bool operator==(const CanonicalTuple& a, const CanonicalTuple& b) {
  return a.elements == b.elements;
}

bool operator==(const CanonicalAnswer& a, const CanonicalAnswer& b) {
  return a.value == b.value;
}

CanonicalAnswer canonicalize(std::string_view raw, NormalizationProfile profile) {
  if (profile == NormalizationProfile::literal) return CanonicalAnswer{remove_whitespace(raw)};
  return canonicalize_stripped(strip_latex(raw));
}

FinalAnswer::FinalAnswer(std::string raw, NormalizationProfile profile)
    : raw_(std::move(raw)), canonical_(canonicalize(raw_, profile)) {}

std::optional<std::string> last_boxed_content(std::string_view text) {
  constexpr std::string_view kBoxed = "\\boxed";
  std::optional<std::string> found;
  std::size_t pos = text.find(kBoxed);
  while (pos != std::string_view::npos) {
    std::size_t open = pos + kBoxed.size();
    while (open < text.size() && is_space(text[open])) ++open;
    if (open < text.size() && text[open] == '{') {
      std::size_t end = match_brace(text, open);
      // A broken last region means no final answer, even if an earlier
      // region was fine.
      found.reset();
      if (end != std::string_view::npos) {
        found = std::string(text.substr(open + 1, end - open - 2));
      }
    }
    pos = text.find(kBoxed, pos + 1);
  }
  return found;
}

std::optional<FinalAnswer> extract_final_answer(std::string_view solution_text,
                                                NormalizationProfile profile) {
  auto content = last_boxed_content(solution_text);
  if (!content) return std::nullopt;
  return FinalAnswer(std::move(*content), profile);
}

bool answers_equal(const FinalAnswer& a, const FinalAnswer& b) {
  return a.canonical() == b.canonical();
}

int is_correct(const FinalAnswer& intended, std::string_view rollout_text,
               NormalizationProfile profile) {
  auto answer = extract_final_answer(rollout_text, profile);
  return answer && answers_equal(intended, *answer) ? 1 : 0;
}

}  // namespace qdgen
