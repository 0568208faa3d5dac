#include "clipagent/dgrpo.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace clipagent {

TaskDifficultyParams TaskDifficultyParams::checked(double alpha, double beta) {
    if (!(alpha >= 0.0 && alpha <= 1.0 && beta >= 0.0 && beta <= 1.0 && alpha < beta))
        throw std::invalid_argument("difficulty params require 0 <= alpha < beta <= 1");
    return {alpha, beta};
}

AlphaBetaTable AlphaBetaTable::defaults() {
    AlphaBetaTable t;
    t.set(TaskKind::temporal_grounding, "Charades-STA", {0.2, 0.8});
    t.set(TaskKind::temporal_grounding, "ActivityNet-MR", {0.2, 0.8});
    t.set(TaskKind::temporal_grounding, "VidChapters-7M", {0.0, 0.5});
    for (TaskKind k : {TaskKind::grounded_vqa_mcq, TaskKind::grounded_vqa_open}) {
        t.set(k, "ReXTime", {0.2, 0.8});
        t.set(k, "NExT-GQA", {0.2, 0.8});
    }
    return t;
}

AlphaBetaTable AlphaBetaTable::from_csv(std::istream& in) {
    AlphaBetaTable t;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            const auto b = cell.find_first_not_of(" \t");
            const auto e = cell.find_last_not_of(" \t");
            cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
        }
        if (!header_seen) {
            if (cells != std::vector<std::string>{"task", "source", "alpha", "beta"})
                throw SchemaError("header", "expected 'task,source,alpha,beta'", line_no);
            header_seen = true;
            continue;
        }
        if (cells.size() != 4) throw SchemaError("row", "expected 4 columns", line_no);
        auto task = task_kind_from_string(cells[0]);
        if (!task) throw SchemaError("task", "unknown task kind '" + cells[0] + "'", line_no);
        double alpha = 0.0, beta = 0.0;
        try {
            std::size_t ua = 0, ub = 0;
            alpha = std::stod(cells[2], &ua);
            beta = std::stod(cells[3], &ub);
            if (ua != cells[2].size() || ub != cells[3].size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw SchemaError("alpha/beta", "expected numbers", line_no);
        }
        try {
            t.set(*task, cells[1], TaskDifficultyParams::checked(alpha, beta));
        } catch (const std::invalid_argument& e) {
            throw SchemaError("alpha/beta", e.what(), line_no);
        }
    }
    if (!header_seen) throw SchemaError("header", "empty table");
    return t;
}

void AlphaBetaTable::set(TaskKind task, const std::string& source, TaskDifficultyParams params) {
    entries_[{task, source}] = params;
}

std::optional<TaskDifficultyParams> AlphaBetaTable::lookup(TaskKind task, const std::string& source) const {
    if (!has_time_range(task)) return std::nullopt;
    auto it = entries_.find({task, source});
    if (it == entries_.end())
        throw std::out_of_range("no alpha/beta for task " + std::string(to_string(task)) + ", source '" +
                                source + "'");
    return it->second;
}

std::string_view to_string(WeightFunction f) {
    switch (f) {
        case WeightFunction::omega1: return "omega1";
        case WeightFunction::omega2: return "omega2";
        case WeightFunction::omega3: return "omega3";
        case WeightFunction::omega4: return "omega4";
    }
    return "unknown";
}

std::optional<WeightFunction> weight_function_from_string(std::string_view name) {
    for (auto f : {WeightFunction::omega1, WeightFunction::omega2, WeightFunction::omega3, WeightFunction::omega4})
        if (to_string(f) == name) return f;
    return std::nullopt;
}

double scale_grounding_reward(double iou, const TaskDifficultyParams& params) {
    return std::clamp((iou - params.alpha) / (params.beta - params.alpha), 0.0, 1.0);
}

double scaled_reward(const RewardComponents& components, TaskKind task,
                     const std::optional<TaskDifficultyParams>& params) {
    double s1 = components.accuracy;
    if (has_time_range(task)) {
        if (!params) throw std::invalid_argument("alpha/beta required for " + std::string(to_string(task)));
        const double scaled_iou = scale_grounding_reward(components.iou.value_or(0.0), *params);
        s1 = is_grounded_vqa(task) ? (scaled_iou + components.text_score.value_or(0.0)) / 2.0 : scaled_iou;
    }
    return s1 + components.format + components.tool;
}

double difficulty_weight(double difficulty, WeightFunction f) {
    switch (f) {
        case WeightFunction::omega1: return std::clamp(2.0 - difficulty, 0.0, 1.0) * 0.5 + 0.5;
        case WeightFunction::omega2: return std::clamp(2.0 - difficulty, 0.0, 1.0);
        case WeightFunction::omega3: return 1.0 - 0.25 * difficulty;
        case WeightFunction::omega4: return 1.0 - 0.125 * difficulty * difficulty;
    }
    return 1.0;
}

std::vector<double> group_advantages(std::span<const double> final_rewards, double eps) {
    std::vector<double> adv(final_rewards.size(), 0.0);
    if (final_rewards.empty()) return adv;
    const auto [lo, hi] = std::minmax_element(final_rewards.begin(), final_rewards.end());
    if (*lo == *hi) return adv;

    const double n = static_cast<double>(final_rewards.size());
    double mean = 0.0;
    for (double r : final_rewards) mean += r;
    mean /= n;
    double var = 0.0;
    for (double r : final_rewards) var += (r - mean) * (r - mean);
    const double std_dev = std::sqrt(var / n);
    for (std::size_t k = 0; k < final_rewards.size(); ++k) adv[k] = (final_rewards[k] - mean) / (std_dev + eps);
    return adv;
}

DgrpoGroup compute_group(std::span<const RewardComponents> components, TaskKind task,
                         const std::optional<TaskDifficultyParams>& params, WeightFunction f,
                         std::string sample_id) {
    if (components.size() < 2) throw std::invalid_argument("a group needs at least 2 rollouts");
    DgrpoGroup g;
    g.sample_id = std::move(sample_id);
    g.task = task;
    g.components.assign(components.begin(), components.end());

    double sum = 0.0;
    for (const auto& c : components) {
        g.scaled_rewards.push_back(scaled_reward(c, task, params));
        sum += g.scaled_rewards.back();
    }
    g.difficulty = sum / static_cast<double>(components.size());

    const double w = difficulty_weight(g.difficulty, f);
    g.weights.assign(components.size(), w);
    for (double r : g.scaled_rewards) g.final_rewards.push_back(r * w);
    g.advantages = group_advantages(g.final_rewards);
    return g;
}

double kl_k3(double logp_theta, double logp_ref) {
    const double d = logp_ref - logp_theta;
    // r - ln r - 1 = expm1(d) - d, which keeps precision near d = 0.
    return std::max(0.0, std::expm1(d) - d);
}

double objective_estimate(std::span<const DgrpoGroup> groups, std::span<const std::vector<double>> ratios,
                          std::span<const std::vector<double>> kls, const KlConfig& cfg) {
    if (ratios.size() != groups.size() || kls.size() != groups.size())
        throw std::invalid_argument("ratios and kls must have one entry per group");
    if (groups.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < groups.size(); ++i) {
        const auto& adv = groups[i].advantages;
        if (ratios[i].size() != adv.size() || kls[i].size() != adv.size())
            throw std::invalid_argument("group " + std::to_string(i) + ": ratios/kls length differs from G");
        double s = 0.0;
        for (std::size_t k = 0; k < adv.size(); ++k) {
            if (!(ratios[i][k] > 0.0)) throw std::invalid_argument("ratios must be positive");
            s += ratios[i][k] * adv[k] - cfg.beta_kl * kls[i][k];
        }
        total += s / static_cast<double>(adv.size());
    }
    return total / static_cast<double>(groups.size());
}

Json to_json(const DgrpoGroup& g) {
    Json j;
    j["sample_id"] = g.sample_id;
    j["task"] = std::string(to_string(g.task));
    j["group_size"] = g.scaled_rewards.size();
    Json comps = Json::array();
    for (const auto& c : g.components) {
        Json cj;
        cj["accuracy"] = c.accuracy;
        cj["format"] = c.format;
        cj["tool"] = c.tool;
        cj["iou"] = c.iou ? Json(*c.iou) : Json(nullptr);
        cj["text_score"] = c.text_score ? Json(*c.text_score) : Json(nullptr);
        comps.push_back(std::move(cj));
    }
    j["components"] = std::move(comps);
    j["scaled_rewards"] = g.scaled_rewards;
    j["difficulty"] = g.difficulty;
    j["weights"] = g.weights;
    j["final_rewards"] = g.final_rewards;
    j["advantages"] = g.advantages;
    return j;
}

}  // namespace clipagent
