#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "clipagent/json_io.hpp"
#include "clipagent/protocol.hpp"
#include "clipagent/types.hpp"

namespace clipagent {

// Per-rollout reward parts. `iou` and `text_score` keep the two halves of the
// accuracy for tasks that have them, so the IoU half can be rescaled later.
struct RewardComponents {
    double accuracy = 0.0;
    double format = 0.0;
    double tool = 0.0;
    std::optional<double> iou;
    std::optional<double> text_score;

    double total() const { return accuracy + format + tool; }
    bool operator==(const RewardComponents&) const = default;
};

// Canonical grammar first (JSON for ranges, a bare letter or number otherwise),
// then a lenient fallback: the first two numeric literals form a range and the
// first standalone capital A-E is an option letter. Never throws.
Prediction extract_prediction(std::string_view answer, TaskKind task);

// |a ∩ b| / |a ∪ b|; 0 when the union is empty. Requires start <= end on both.
double iou(const TimeRange& a, const TimeRange& b);

// Case- and whitespace-insensitive comparison of option letters / short answers.
bool exact_match(std::string_view prediction, std::string_view truth);
// Relative tolerance 1e-6.
bool numbers_match(double prediction, double truth);

struct AccuracyDetail {
    double accuracy = 0.0;
    std::optional<double> iou;
    std::optional<double> text_score;
};

AccuracyDetail accuracy_detail(TaskKind task, const Prediction& pred, const GroundTruth& gt);
double accuracy_reward(TaskKind task, const Prediction& pred, const GroundTruth& gt);

inline constexpr double kToolFormatReward = 0.5;
inline constexpr double kNoToolFormatReward = 1.0;
inline constexpr double kToolReward = 0.5;

double format_reward(const Trajectory& traj, bool tools_enabled, int max_tool_rounds = 2);
double tool_reward(const Trajectory& traj, bool tools_enabled);

RewardComponents score_trajectory(const Trajectory& traj, const Sample& sample, bool tools_enabled,
                                  int max_tool_rounds = 2);

// Largest total reward any trajectory can earn in the given mode.
constexpr double max_total_reward(bool tools_enabled) {
    return tools_enabled ? 1.0 + kToolFormatReward + kToolReward : 1.0 + kNoToolFormatReward;
}

// One line of the reward report.
struct RewardRecord {
    std::string sample_id;
    int rollout = 0;
    TaskKind task = TaskKind::vqa_mcq;
    std::string source;
    RewardComponents components;

    bool operator==(const RewardRecord&) const = default;
};

Json to_json(const RewardRecord& r);
RewardRecord reward_record_from_json(const Json& j);

}  // namespace clipagent
