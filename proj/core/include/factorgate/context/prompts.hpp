#pragma once

#include <map>
#include <string>
#include <string_view>

namespace factorgate::context {

// Replaces every {{name}} with vars.at(name). Unknown names throw ConfigError.
std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& vars);

// Bundled prompt templates: judge_rubric, memory_update, factor_profile,
// market_state, decision_context.
std::string_view prompt_template(std::string_view name);

inline constexpr std::string_view kPromptVersion = "1";

}  // namespace factorgate::context
