#pragma once

#include <map>
#include <string>
#include <string_view>

#include "clipagent/types.hpp"

namespace clipagent::assets {

// Bumped whenever any file under assets/ changes meaning.
inline constexpr int kVersion = 1;

// Contents of assets/<name>; throws std::out_of_range for unknown names.
std::string_view get(std::string_view name);

// Replaces {key} for every key in `vars`; other braces are left alone.
// Lines prefixed with "[[suggestion]]" are kept (prefix stripped) only when
// `with_suggestion` is set, and dropped otherwise.
std::string render(std::string_view tmpl, const std::map<std::string, std::string>& vars,
                   bool with_suggestion = false);

std::string system_prompt(bool tools_enabled);
std::string user_prompt(const Sample& sample);

// One-line instruction describing the expected <answer> grammar for a task.
std::string_view answer_format_hint(TaskKind task);

}  // namespace clipagent::assets
