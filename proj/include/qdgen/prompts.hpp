#pragma once

#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>
#include <utility>

namespace qdgen {

// Built-in templates; identical to the files under prompts/.
std::string_view default_mutation_template();
std::string_view default_skill_classification_template();
std::string_view default_student_template();
std::string_view default_validity_oracle_template();

struct PromptTemplates {
  std::string mutation{default_mutation_template()};
  std::string skill_classification{default_skill_classification_template()};
  std::string student{default_student_template()};
  std::string validity_oracle{default_validity_oracle_template()};
};

std::string read_template_file(const std::filesystem::path& path);

// Single left-to-right pass: each "{name}" with a binding is replaced,
// everything else (including substituted text) is left alone.
std::string render_template(
    std::string_view tmpl,
    std::initializer_list<std::pair<std::string_view, std::string_view>> bindings);

}  // namespace qdgen
