#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace clipagent {

enum class TaskKind {
    temporal_grounding,
    vqa_mcq,
    vqa_number,
    vqa_open,
    vqa_ocr,
    vqa_regression,
    grounded_vqa_mcq,
    grounded_vqa_open,
};

std::string_view to_string(TaskKind kind);
std::optional<TaskKind> task_kind_from_string(std::string_view name);

constexpr bool is_grounding(TaskKind k) { return k == TaskKind::temporal_grounding; }
constexpr bool is_grounded_vqa(TaskKind k) {
    return k == TaskKind::grounded_vqa_mcq || k == TaskKind::grounded_vqa_open;
}
// Tasks that need a predicted time range.
constexpr bool has_time_range(TaskKind k) { return is_grounding(k) || is_grounded_vqa(k); }
// Tasks whose answer is scored as right/wrong.
constexpr bool is_discrete_answer(TaskKind k) {
    return k == TaskKind::vqa_mcq || k == TaskKind::vqa_number || k == TaskKind::grounded_vqa_mcq;
}

struct TimeRange {
    double start = 0.0;
    double end = 0.0;

    double length() const { return end - start; }
    bool operator==(const TimeRange&) const = default;
};

struct VideoMeta {
    std::string video_id;
    double duration = 0.0;   // seconds
    double native_fps = 0.0;

    bool operator==(const VideoMeta&) const = default;
};

struct GroundTruth {
    std::optional<TimeRange> time_range;
    std::optional<std::string> answer_text;
    std::optional<double> answer_number;

    bool operator==(const GroundTruth&) const = default;
};

// Structured view of the text inside <answer>...</answer>.
struct Prediction {
    std::optional<TimeRange> time_range;
    std::optional<std::string> answer_text;
    std::optional<double> answer_number;

    bool empty() const { return !time_range && !answer_text && !answer_number; }
    bool operator==(const Prediction&) const = default;
};

struct Sample {
    std::string sample_id;
    TaskKind task = TaskKind::vqa_mcq;
    std::string source;
    VideoMeta video;
    std::string question;
    GroundTruth ground_truth;

    bool operator==(const Sample&) const = default;
};

// Throws std::invalid_argument naming the violated field.
void validate(const VideoMeta& video);
void validate(const GroundTruth& gt, TaskKind task);
void validate(const Sample& sample);

}  // namespace clipagent
