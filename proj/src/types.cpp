#include "clipagent/types.hpp"

#include <array>
#include <cmath>
#include <utility>

namespace clipagent {

namespace {

constexpr std::array<std::pair<TaskKind, std::string_view>, 8> kTaskNames{{
    {TaskKind::temporal_grounding, "temporal_grounding"},
    {TaskKind::vqa_mcq, "vqa_mcq"},
    {TaskKind::vqa_number, "vqa_number"},
    {TaskKind::vqa_open, "vqa_open"},
    {TaskKind::vqa_ocr, "vqa_ocr"},
    {TaskKind::vqa_regression, "vqa_regression"},
    {TaskKind::grounded_vqa_mcq, "grounded_vqa_mcq"},
    {TaskKind::grounded_vqa_open, "grounded_vqa_open"},
}};

}  // namespace

std::string_view to_string(TaskKind kind) {
    for (const auto& [k, name] : kTaskNames) {
        if (k == kind) return name;
    }
    return "unknown";
}

std::optional<TaskKind> task_kind_from_string(std::string_view name) {
    for (const auto& [k, n] : kTaskNames) {
        if (n == name) return k;
    }
    return std::nullopt;
}

void validate(const VideoMeta& video) {
    if (video.video_id.empty()) throw std::invalid_argument("video.video_id: must be non-empty");
    if (!(std::isfinite(video.duration) && video.duration > 0.0))
        throw std::invalid_argument("video.duration: must be a positive finite number");
    if (!(std::isfinite(video.native_fps) && video.native_fps > 0.0))
        throw std::invalid_argument("video.native_fps: must be a positive finite number");
}

void validate(const GroundTruth& gt, TaskKind task) {
    if (gt.time_range) {
        const auto& r = *gt.time_range;
        if (!(std::isfinite(r.start) && std::isfinite(r.end) && r.start < r.end))
            throw std::invalid_argument("ground_truth.time_range: requires finite start < end");
    }
    if (has_time_range(task) && !gt.time_range)
        throw std::invalid_argument("ground_truth.time_range: required for task " +
                                    std::string(to_string(task)));
    const bool has_answer = gt.answer_text.has_value() || gt.answer_number.has_value();
    if (task != TaskKind::temporal_grounding && !has_answer)
        throw std::invalid_argument("ground_truth.answer_text: required for task " +
                                    std::string(to_string(task)));
    if (gt.answer_number && !std::isfinite(*gt.answer_number))
        throw std::invalid_argument("ground_truth.answer_number: must be finite");
}

void validate(const Sample& sample) {
    if (sample.sample_id.empty()) throw std::invalid_argument("sample_id: must be non-empty");
    validate(sample.video);
    validate(sample.ground_truth, sample.task);
    if (const auto& r = sample.ground_truth.time_range; r && r->end > sample.video.duration)
        throw std::invalid_argument("ground_truth.time_range: end exceeds video.duration");
    if (const auto& r = sample.ground_truth.time_range; r && r->start < 0.0)
        throw std::invalid_argument("ground_truth.time_range: start is negative");
}

}  // namespace clipagent
