#include "qdgen/prompts.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace qdgen {

std::string_view default_mutation_template() {
  static constexpr std::string_view kText =
      R"(You are tasked with generating a mutation conditioned on a set of input problems. You will be shown the problems below.

{problem}

{solution}

Now generate a novel problem and solution. Enclose the problem in <problem>...</problem> tags and the solution in <solution>...</solution> tags.
Make sure to include the intended final answer in the solution enclosed in the \boxed{...} latex style. If there are multiple numerical answers, write them as a comma separated list \boxed{(n1, n2,...)}.)";
  return kText;
}

std::string_view default_skill_classification_template() {
  static constexpr std::string_view kText =
      R"(You will be a shown a reasoning problem below and solution below. Your job is to list the relevant skills/lemmas used in solving the problem. Enclose all skills in a comma separated list enclosed in the tags <skills>...</skills>. For example, if the problem is solved using a combination of arithmetic and pigeonhole-principle, write <skills>arithmetic,pigeonhole-principle</skills>. Only include up to {k} relevant skills.

{problem}

{solution})";
  return kText;
}

std::string_view default_student_template() {
  static constexpr std::string_view kText =
      R"(Solve the following math problem. Show your reasoning, then give the final answer enclosed in \boxed{...}.

{problem})";
  return kText;
}

std::string_view default_validity_oracle_template() {
  static constexpr std::string_view kText =
      R"(Solve the following problem carefully and independently. Give the final answer enclosed in \boxed{...}.

{problem})";
  return kText;
}

std::string read_template_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read prompt template " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string render_template(
    std::string_view tmpl,
    std::initializer_list<std::pair<std::string_view, std::string_view>> bindings) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      std::size_t close = tmpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        std::string_view name = tmpl.substr(i + 1, close - i - 1);
        bool replaced = false;
        for (const auto& [key, value] : bindings) {
          if (key == name) {
            out += value;
            replaced = true;
            break;
          }
        }
        if (replaced) {
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i]);
    ++i;
  }
  return out;
}

}  // namespace qdgen
