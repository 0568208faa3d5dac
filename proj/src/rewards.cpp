#include "clipagent/rewards.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <vector>

#include "clipagent/text_metrics.hpp"

namespace clipagent {

namespace {

bool is_alnum(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}
bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\n\r\f\v");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\n\r\f\v");
    return s.substr(first, last - first + 1);
}

std::optional<double> parse_full_number(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

// Decimal literals in reading order. A leading '-' counts as a sign only when
// it does not directly follow an alphanumeric, so "10-20" yields 10 and 20.
std::vector<double> numeric_literals(std::string_view s, std::size_t limit) {
    std::vector<double> out;
    std::size_t i = 0;
    while (i < s.size() && out.size() < limit) {
        const bool prev_alnum = i > 0 && is_alnum(s[i - 1]);
        const bool prev_digit = i > 0 && (is_digit(s[i - 1]) || s[i - 1] == '.');
        std::size_t begin = i;
        bool starts = false;
        if (is_digit(s[i])) {
            starts = !prev_digit;
        } else if (s[i] == '.' && i + 1 < s.size() && is_digit(s[i + 1])) {
            starts = !prev_digit;
        } else if (s[i] == '-' && !prev_alnum && i + 1 < s.size() &&
                   (is_digit(s[i + 1]) || (s[i + 1] == '.' && i + 2 < s.size() && is_digit(s[i + 2])))) {
            starts = true;
        }
        if (!starts) {
            ++i;
            continue;
        }
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(s.data() + begin, s.data() + s.size(), v);
        if (ec == std::errc() && std::isfinite(v)) {
            out.push_back(v);
            i = static_cast<std::size_t>(ptr - s.data());
        } else {
            i = begin + 1;
        }
    }
    return out;
}

std::optional<std::string> standalone_letter(std::string_view s) {
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (c < 'A' || c > 'E') continue;
        const bool left_ok = i == 0 || !is_alnum(s[i - 1]);
        const bool right_ok = i + 1 == s.size() || !is_alnum(s[i + 1]);
        if (left_ok && right_ok) return std::string(1, c);
    }
    return std::nullopt;
}

std::optional<std::string> canonical_letter(std::string_view s) {
    s = trim(s);
    if (s.size() != 1) return std::nullopt;
    const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    if (c < 'A' || c > 'E') return std::nullopt;
    return std::string(1, c);
}

std::optional<double> json_number(const Json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_number()) return std::nullopt;
    const double v = it->get<double>();
    return std::isfinite(v) ? std::optional<double>(v) : std::nullopt;
}

std::optional<TimeRange> json_range(const Json& obj) {
    auto s = json_number(obj, "start");
    auto e = json_number(obj, "end");
    if (!s || !e) return std::nullopt;
    return TimeRange{*s, *e};
}

std::optional<TimeRange> fallback_range(std::string_view s) {
    auto nums = numeric_literals(s, 2);
    if (nums.size() < 2) return std::nullopt;
    return TimeRange{nums[0], nums[1]};
}

bool valid_range(const TimeRange& r) {
    return std::isfinite(r.start) && std::isfinite(r.end) && r.start <= r.end;
}

std::optional<double> truth_number(const GroundTruth& gt) {
    if (gt.answer_number) return gt.answer_number;
    if (gt.answer_text) return parse_full_number(*gt.answer_text);
    return std::nullopt;
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

Prediction extract_prediction(std::string_view answer, TaskKind task) {
    Prediction p;
    const std::string_view body = trim(answer);

    if (has_time_range(task)) {
        Json j = Json::parse(body.begin(), body.end(), nullptr, false);
        if (!j.is_discarded() && j.is_object()) {
            p.time_range = json_range(j);
            if (auto a = j.find("answer"); a != j.end() && a->is_string()) p.answer_text = a->get<std::string>();
        }
        if (p.time_range || p.answer_text) {
            if (p.answer_text && task == TaskKind::grounded_vqa_mcq) {
                auto letter = canonical_letter(*p.answer_text);
                if (!letter) letter = standalone_letter(*p.answer_text);
                p.answer_text = letter;
            }
            if (task == TaskKind::temporal_grounding) p.answer_text.reset();
            return p;
        }
        p.time_range = fallback_range(body);
        if (task == TaskKind::grounded_vqa_mcq) p.answer_text = standalone_letter(body);
        else if (task == TaskKind::grounded_vqa_open && !body.empty()) p.answer_text = std::string(body);
        return p;
    }

    switch (task) {
        case TaskKind::vqa_mcq:
            p.answer_text = canonical_letter(body);
            if (!p.answer_text) p.answer_text = standalone_letter(body);
            break;
        case TaskKind::vqa_number:
        case TaskKind::vqa_regression:
            p.answer_number = parse_full_number(body);
            if (!p.answer_number) {
                auto nums = numeric_literals(body, 1);
                if (!nums.empty()) p.answer_number = nums.front();
            }
            break;
        case TaskKind::vqa_open:
        case TaskKind::vqa_ocr:
            if (!body.empty()) p.answer_text = std::string(body);
            break;
        default:
            break;
    }
    return p;
}

double iou(const TimeRange& a, const TimeRange& b) {
    const double inter = std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
    const double uni = (a.end - a.start) + (b.end - b.start) - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

bool exact_match(std::string_view prediction, std::string_view truth) {
    prediction = trim(prediction);
    truth = trim(truth);
    if (prediction.size() != truth.size()) return false;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(prediction[i])) !=
            std::tolower(static_cast<unsigned char>(truth[i])))
            return false;
    }
    return true;
}

bool numbers_match(double prediction, double truth) {
    if (!std::isfinite(prediction) || !std::isfinite(truth)) return false;
    return std::abs(prediction - truth) <= 1e-6 * std::max(std::abs(prediction), std::abs(truth));
}

AccuracyDetail accuracy_detail(TaskKind task, const Prediction& pred, const GroundTruth& gt) {
    AccuracyDetail d;
    if (pred.empty()) {
        if (has_time_range(task)) d.iou = 0.0;
        if (is_grounded_vqa(task)) d.text_score = 0.0;
        return d;
    }

    auto range_score = [&]() -> double {
        if (!pred.time_range || !gt.time_range || !valid_range(*pred.time_range)) return 0.0;
        return iou(*pred.time_range, *gt.time_range);
    };
    auto letter_score = [&]() -> double {
        if (!pred.answer_text || !gt.answer_text) return 0.0;
        return exact_match(*pred.answer_text, *gt.answer_text) ? 1.0 : 0.0;
    };
    auto rouge = [&]() -> double {
        if (!pred.answer_text || !gt.answer_text) return 0.0;
        return rouge_score(*pred.answer_text, *gt.answer_text);
    };

    switch (task) {
        case TaskKind::temporal_grounding:
            d.iou = range_score();
            d.accuracy = *d.iou;
            break;
        case TaskKind::vqa_mcq:
            d.accuracy = letter_score();
            break;
        case TaskKind::vqa_number: {
            auto y = truth_number(gt);
            d.accuracy = (pred.answer_number && y && numbers_match(*pred.answer_number, *y)) ? 1.0 : 0.0;
            break;
        }
        case TaskKind::vqa_open:
            d.accuracy = rouge();
            break;
        case TaskKind::vqa_ocr:
            if (pred.answer_text && gt.answer_text)
                d.accuracy = clamp01(1.0 - word_error_rate(*pred.answer_text, *gt.answer_text));
            break;
        case TaskKind::vqa_regression: {
            auto y = truth_number(gt);
            if (pred.answer_number && y) {
                if (*y == 0.0) d.accuracy = *pred.answer_number == 0.0 ? 1.0 : 0.0;
                else d.accuracy = clamp01(1.0 - std::abs(*pred.answer_number - *y) / std::abs(*y));
            }
            break;
        }
        case TaskKind::grounded_vqa_mcq:
            d.iou = range_score();
            d.text_score = letter_score();
            d.accuracy = (*d.iou + *d.text_score) / 2.0;
            break;
        case TaskKind::grounded_vqa_open:
            d.iou = range_score();
            d.text_score = rouge();
            d.accuracy = (*d.iou + *d.text_score) / 2.0;
            break;
    }
    return d;
}

double accuracy_reward(TaskKind task, const Prediction& pred, const GroundTruth& gt) {
    return accuracy_detail(task, pred, gt).accuracy;
}

double format_reward(const Trajectory& traj, bool tools_enabled, int max_tool_rounds) {
    if (!validate_format(traj.raw_texts, tools_enabled, max_tool_rounds)) return 0.0;
    return tools_enabled ? kToolFormatReward : kNoToolFormatReward;
}

double tool_reward(const Trajectory& traj, bool tools_enabled) {
    if (!tools_enabled) return 0.0;
    return traj.successful_tool_rounds() > 0 ? kToolReward : 0.0;
}

RewardComponents score_trajectory(const Trajectory& traj, const Sample& sample, bool tools_enabled,
                                  int max_tool_rounds) {
    RewardComponents c;
    const Prediction pred =
        traj.final_answer ? extract_prediction(*traj.final_answer, sample.task) : Prediction{};
    const AccuracyDetail d = accuracy_detail(sample.task, pred, sample.ground_truth);
    c.accuracy = d.accuracy;
    c.iou = d.iou;
    c.text_score = d.text_score;
    c.format = format_reward(traj, tools_enabled, max_tool_rounds);
    c.tool = tool_reward(traj, tools_enabled);
    return c;
}

Json to_json(const RewardRecord& r) {
    Json j;
    j["sample_id"] = r.sample_id;
    j["rollout"] = r.rollout;
    j["task"] = std::string(to_string(r.task));
    j["source"] = r.source;
    j["accuracy"] = r.components.accuracy;
    j["format"] = r.components.format;
    j["tool"] = r.components.tool;
    j["iou"] = r.components.iou ? Json(*r.components.iou) : Json(nullptr);
    j["text_score"] = r.components.text_score ? Json(*r.components.text_score) : Json(nullptr);
    j["total"] = r.components.total();
    return j;
}

RewardRecord reward_record_from_json(const Json& j) {
    if (!j.is_object()) throw SchemaError("record", "expected a JSON object");
    reject_unknown_fields(j, {"sample_id", "rollout", "task", "source", "accuracy", "format", "tool", "iou",
                              "text_score", "total"}, "");
    RewardRecord r;
    r.sample_id = require_string(j, "sample_id");
    const Json& rollout = require(j, "rollout");
    if (!rollout.is_number_integer()) throw SchemaError("rollout", "expected an integer");
    r.rollout = rollout.get<int>();
    const std::string task = require_string(j, "task");
    auto kind = task_kind_from_string(task);
    if (!kind) throw SchemaError("task", "unknown task kind '" + task + "'");
    r.task = *kind;
    r.source = require_string(j, "source");
    r.components.accuracy = require_number(j, "accuracy");
    r.components.format = require_number(j, "format");
    r.components.tool = require_number(j, "tool");
    auto opt = [&](const char* key) -> std::optional<double> {
        auto it = j.find(key);
        if (it == j.end() || it->is_null()) return std::nullopt;
        return require_number(j, key);
    };
    r.components.iou = opt("iou");
    r.components.text_score = opt("text_score");
    if (has_time_range(r.task) && !r.components.iou)
        throw SchemaError("iou", "required for task " + task);
    if (is_grounded_vqa(r.task) && !r.components.text_score)
        throw SchemaError("text_score", "required for task " + task);
    return r;
}

}  // namespace clipagent
