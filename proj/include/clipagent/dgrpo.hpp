#pragma once

#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "clipagent/rewards.hpp"

namespace clipagent {

// Knots of the clamped affine IoU rescaling. alpha < beta, both in [0, 1].
struct TaskDifficultyParams {
    double alpha = 0.2;
    double beta = 0.8;

    static TaskDifficultyParams checked(double alpha, double beta);
    bool operator==(const TaskDifficultyParams&) const = default;
};

// (alpha, beta) per (task, data source). Only tasks with a time range need an entry.
class AlphaBetaTable {
public:
    // Charades-STA / ActivityNet-MR (0.2, 0.8), VidChapters-7M (0.0, 0.5),
    // ReXTime / NExT-GQA (0.2, 0.8).
    static AlphaBetaTable defaults();

    // CSV with header "task,source,alpha,beta".
    static AlphaBetaTable from_csv(std::istream& in);

    void set(TaskKind task, const std::string& source, TaskDifficultyParams params);

    // nullopt for tasks without a time range; throws std::out_of_range for an
    // unknown source of a grounding or grounded-VQA task.
    std::optional<TaskDifficultyParams> lookup(TaskKind task, const std::string& source) const;

private:
    std::map<std::pair<TaskKind, std::string>, TaskDifficultyParams> entries_;
};

enum class WeightFunction { omega1, omega2, omega3, omega4 };
std::string_view to_string(WeightFunction f);
std::optional<WeightFunction> weight_function_from_string(std::string_view name);

// clamp((iou - alpha) / (beta - alpha), 0, 1)
double scale_grounding_reward(double iou, const TaskDifficultyParams& params);

// S1 + format + tool, where S1 is the rescaled IoU for grounding, the mean of
// rescaled IoU and text score for grounded VQA, and the raw accuracy otherwise.
// `params` may be empty only for tasks without a time range.
double scaled_reward(const RewardComponents& components, TaskKind task,
                     const std::optional<TaskDifficultyParams>& params);

//  omega1: clamp(2 - D, 0, 1) * 0.5 + 0.5
//  omega2: clamp(2 - D, 0, 1)
//  omega3: 1 - 0.25 D
//  omega4: 1 - 0.125 D^2
double difficulty_weight(double difficulty, WeightFunction f);

inline constexpr double kAdvantageEps = 1e-6;

// (R_k - mean) / (population std + eps); all zeros when every reward is equal.
std::vector<double> group_advantages(std::span<const double> final_rewards, double eps = kAdvantageEps);

struct DgrpoGroup {
    std::string sample_id;
    TaskKind task = TaskKind::vqa_mcq;
    std::vector<RewardComponents> components;
    std::vector<double> scaled_rewards;
    double difficulty = 0.0;
    std::vector<double> weights;
    std::vector<double> final_rewards;
    std::vector<double> advantages;
};

// Difficulty-aware reward calculation for one sample's G >= 2 rollouts.
// Throws std::invalid_argument when G < 2.
DgrpoGroup compute_group(std::span<const RewardComponents> components, TaskKind task,
                         const std::optional<TaskDifficultyParams>& params, WeightFunction f,
                         std::string sample_id = {});

// r - ln r - 1 with r = exp(logp_ref - logp_theta).
double kl_k3(double logp_theta, double logp_ref);

struct KlConfig {
    double beta_kl = 1e-2;
};

// Mean over groups of (1/G) sum_k (ratio_k * A_k - beta * kl_k). Diagnostic only.
// ratios / kls are indexed [group][rollout]; throws std::invalid_argument on shape mismatch.
double objective_estimate(std::span<const DgrpoGroup> groups, std::span<const std::vector<double>> ratios,
                          std::span<const std::vector<double>> kls, const KlConfig& cfg);

Json to_json(const DgrpoGroup& g);

}  // namespace clipagent
