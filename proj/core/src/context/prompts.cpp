#include "factorgate/context/prompts.hpp"

#include "factorgate/errors.hpp"

namespace factorgate::assets {
std::string_view prompt_judge_rubric();
std::string_view prompt_memory_update();
std::string_view prompt_factor_profile();
std::string_view prompt_market_state();
std::string_view prompt_decision_context();
}  // namespace factorgate::assets

namespace factorgate::context {

std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& vars) {
    std::string out;
    std::size_t pos = 0;
    while (true) {
        std::size_t open = tmpl.find("{{", pos);
        if (open == std::string_view::npos) break;
        std::size_t close = tmpl.find("}}", open + 2);
        if (close == std::string_view::npos) throw ConfigError("unterminated placeholder in prompt template");
        out.append(tmpl.substr(pos, open - pos));
        std::string key(tmpl.substr(open + 2, close - open - 2));
        auto it = vars.find(key);
        if (it == vars.end()) throw ConfigError("prompt template placeholder '" + key + "' has no value");
        out += it->second;
        pos = close + 2;
    }
    out.append(tmpl.substr(pos));
    return out;
}

std::string_view prompt_template(std::string_view name) {
    if (name == "judge_rubric") return assets::prompt_judge_rubric();
    if (name == "memory_update") return assets::prompt_memory_update();
    if (name == "factor_profile") return assets::prompt_factor_profile();
    if (name == "market_state") return assets::prompt_market_state();
    if (name == "decision_context") return assets::prompt_decision_context();
    throw ConfigError("unknown prompt template '" + std::string(name) + "'");
}

}  // namespace factorgate::context
