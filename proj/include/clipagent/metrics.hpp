#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clipagent/json_io.hpp"
#include "clipagent/types.hpp"

namespace clipagent {

struct EvalPair {
    Prediction prediction;
    GroundTruth truth;
    TaskKind task = TaskKind::temporal_grounding;
};

struct EvalResult {
    std::optional<double> miou;
    std::map<double, double> recall_at;  // threshold -> fraction with IoU >= threshold
    std::optional<double> accuracy;      // over discrete-answer pairs
    std::size_t n = 0;
    std::size_t n_grounding = 0;
    std::size_t n_discrete = 0;
};

inline const std::vector<double> kDefaultThresholds{0.3, 0.5, 0.7};

// mIoU and R@x over pairs that carry a time range (a missing or invalid
// predicted range scores IoU 0); accuracy over option-letter and number pairs.
// Throws std::invalid_argument for thresholds outside (0, 1].
EvalResult evaluate(std::span<const EvalPair> pairs, std::span<const double> thresholds = kDefaultThresholds);

// Per-pair IoU values in input order, through the batched kernel.
std::vector<double> pair_ious(std::span<const EvalPair> pairs);

Json to_json(const EvalResult& r);

// "name,R@0.3,R@0.5,R@0.7,mIoU" style table with values in percent, two decimals.
std::string to_csv(const std::map<std::string, EvalResult>& rows, std::span<const double> thresholds = kDefaultThresholds);

}  // namespace clipagent
