#include "clipagent/assets.hpp"

#include <span>
#include <stdexcept>
#include <utility>

#include "clipagent/json_io.hpp"

namespace clipagent::assets {

namespace detail {
extern const std::pair<std::string_view, std::string_view> kEmbedded[];
extern const std::size_t kEmbeddedCount;
}  // namespace detail

std::string_view get(std::string_view name) {
    for (const auto& [n, content] : std::span(detail::kEmbedded, detail::kEmbeddedCount))
        if (n == name) return content;
    throw std::out_of_range("no asset named '" + std::string(name) + "'");
}

std::string render(std::string_view tmpl, const std::map<std::string, std::string>& vars,
                   bool with_suggestion) {
    constexpr std::string_view kMarker = "[[suggestion]]";
    std::string filtered;
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        std::size_t nl = tmpl.find('\n', pos);
        std::string_view line = tmpl.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos + 1);
        pos = nl == std::string_view::npos ? tmpl.size() : nl + 1;
        if (line.starts_with(kMarker)) {
            if (!with_suggestion) continue;
            line.remove_prefix(kMarker.size());
        }
        filtered += line;
    }

    std::string out;
    out.reserve(filtered.size());
    for (std::size_t i = 0; i < filtered.size();) {
        bool replaced = false;
        if (filtered[i] == '{') {
            for (const auto& [key, value] : vars) {
                if (filtered.compare(i + 1, key.size(), key) == 0 && i + 1 + key.size() < filtered.size() &&
                    filtered[i + 1 + key.size()] == '}') {
                    out += value;
                    i += key.size() + 2;
                    replaced = true;
                    break;
                }
            }
        }
        if (!replaced) out += filtered[i++];
    }
    return out;
}

std::string system_prompt(bool tools_enabled) {
    if (!tools_enabled) return std::string(get("system_prompt_no_tools.txt"));
    Json schemas = Json::parse(get("tool_schemas.json"));
    std::string lines;
    for (const auto& s : schemas) lines += (lines.empty() ? "" : "\n") + s.dump();
    return render(get("system_prompt.txt"), {{"tool_schemas", lines}});
}

std::string_view answer_format_hint(TaskKind task) {
    switch (task) {
        case TaskKind::temporal_grounding:
            return R"(Answer with {"start": <seconds>, "end": <seconds>}.)";
        case TaskKind::grounded_vqa_mcq:
            return R"(Answer with {"start": <seconds>, "end": <seconds>, "answer": "<option letter>"}.)";
        case TaskKind::grounded_vqa_open:
            return R"(Answer with {"start": <seconds>, "end": <seconds>, "answer": "<text>"}.)";
        case TaskKind::vqa_mcq: return "Answer with the option letter only.";
        case TaskKind::vqa_number:
        case TaskKind::vqa_regression: return "Answer with a single number.";
        case TaskKind::vqa_open: return "Answer in a short sentence.";
        case TaskKind::vqa_ocr: return "Answer with the exact text shown in the video.";
    }
    return "";
}

std::string user_prompt(const Sample& sample) {
    return render(get("user_prompt.txt"), {{"duration", Json(sample.video.duration).dump()},
                                           {"question", sample.question},
                                           {"answer_format", std::string(answer_format_hint(sample.task))}});
}

}  // namespace clipagent::assets
