#include "clipagent/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "clipagent/rewards.hpp"
#include "clipagent/simd/iou_kernels.hpp"

namespace clipagent {

namespace {

bool usable(const std::optional<TimeRange>& r) {
    return r && std::isfinite(r->start) && std::isfinite(r->end) && r->start <= r->end;
}

std::string threshold_label(double t) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", t);
    return buf;
}

std::string percent(std::optional<double> v) {
    if (!v) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", *v * 100.0);
    return buf;
}

bool discrete_correct(const EvalPair& p) {
    const Prediction& pred = p.prediction;
    const GroundTruth& gt = p.truth;
    if (p.task == TaskKind::vqa_number) {
        const std::optional<double> y = gt.answer_number;
        return pred.answer_number && y && numbers_match(*pred.answer_number, *y);
    }
    return pred.answer_text && gt.answer_text && exact_match(*pred.answer_text, *gt.answer_text);
}

}  // namespace

std::vector<double> pair_ious(std::span<const EvalPair> pairs) {
    std::vector<double> ps, pe, gs, ge;
    for (const EvalPair& p : pairs) {
        if (!has_time_range(p.task)) continue;
        // +0.0 turns -0.0 into +0.0 so every kernel sees identical operands.
        const bool ok = usable(p.prediction.time_range);
        ps.push_back(ok ? p.prediction.time_range->start + 0.0 : 0.0);
        pe.push_back(ok ? p.prediction.time_range->end + 0.0 : 0.0);
        const bool gt_ok = usable(p.truth.time_range);
        gs.push_back(gt_ok ? p.truth.time_range->start + 0.0 : 0.0);
        ge.push_back(gt_ok ? p.truth.time_range->end + 0.0 : 0.0);
    }
    std::vector<double> out(ps.size());
    simd::iou_batch(ps.data(), pe.data(), gs.data(), ge.data(), out.data(), out.size());
    return out;
}

EvalResult evaluate(std::span<const EvalPair> pairs, std::span<const double> thresholds) {
    for (double t : thresholds)
        if (!(t > 0.0 && t <= 1.0)) throw std::invalid_argument("IoU thresholds must lie in (0, 1]");

    EvalResult r;
    r.n = pairs.size();
    const std::vector<double> ious = pair_ious(pairs);
    r.n_grounding = ious.size();
    if (!ious.empty()) {
        double sum = 0.0;
        for (double v : ious) sum += v;
        r.miou = sum / static_cast<double>(ious.size());
        for (double t : thresholds) {
            std::size_t hits = 0;
            for (double v : ious) hits += v >= t ? 1 : 0;
            r.recall_at[t] = static_cast<double>(hits) / static_cast<double>(ious.size());
        }
    }

    std::size_t correct = 0;
    for (const EvalPair& p : pairs) {
        if (!is_discrete_answer(p.task)) continue;
        ++r.n_discrete;
        correct += discrete_correct(p) ? 1 : 0;
    }
    if (r.n_discrete > 0) r.accuracy = static_cast<double>(correct) / static_cast<double>(r.n_discrete);
    return r;
}

Json to_json(const EvalResult& r) {
    Json j;
    j["n"] = r.n;
    j["n_grounding"] = r.n_grounding;
    j["n_discrete"] = r.n_discrete;
    j["miou"] = r.miou ? Json(*r.miou) : Json(nullptr);
    Json recall = Json::object();
    for (const auto& [t, v] : r.recall_at) recall["R@" + threshold_label(t)] = v;
    j["recall_at"] = std::move(recall);
    j["accuracy"] = r.accuracy ? Json(*r.accuracy) : Json(nullptr);
    return j;
}

std::string to_csv(const std::map<std::string, EvalResult>& rows, std::span<const double> thresholds) {
    std::ostringstream out;
    out << "name";
    for (double t : thresholds) out << ",R@" << threshold_label(t);
    out << ",mIoU\n";
    for (const auto& [name, r] : rows) {
        out << name;
        for (double t : thresholds) {
            auto it = r.recall_at.find(t);
            out << ',' << percent(it == r.recall_at.end() ? std::nullopt : std::optional<double>(it->second));
        }
        out << ',' << percent(r.miou) << '\n';
    }
    return out.str();
}

}  // namespace clipagent
