#include "clipagent/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "clipagent/assets.hpp"
#include "clipagent/parallel.hpp"
#include "clipagent/seed.hpp"

namespace clipagent {

namespace {

std::string lowercase(std::string_view s) {
    std::string out(s);
    for (char& c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
}

std::string format_number(double v) { return Json(v).dump(); }

// Ground-truth answer in the canonical <answer> grammar of the task.
std::string reference_answer(const Sample& s) {
    const GroundTruth& gt = s.ground_truth;
    if (has_time_range(s.task) && gt.time_range) {
        Json j;
        j["start"] = gt.time_range->start;
        j["end"] = gt.time_range->end;
        if (is_grounded_vqa(s.task) && gt.answer_text) j["answer"] = *gt.answer_text;
        return j.dump();
    }
    if (gt.answer_text) return *gt.answer_text;
    if (gt.answer_number) return format_number(*gt.answer_number);
    return {};
}

bool dangling_tool_call(const Trajectory& t) {
    return !t.rounds.empty() && t.rounds.back().output.tool_call && !t.rounds.back().tool_result;
}

std::size_t histogram_bin(double reward, double max_reward) {
    if (!(reward > 0.0)) return 0;
    const double x = reward / max_reward * kHistogramBins;
    return std::min(static_cast<std::size_t>(x), static_cast<std::size_t>(kHistogramBins - 1));
}

Json counts_json(const SourceCounts& c) {
    Json j;
    j["total"] = c.total;
    j["pass_all"] = c.pass_all;
    j["pass_none"] = c.pass_none;
    j["informative"] = c.informative;
    j["discarded_by_delta"] = c.discarded_by_delta;
    j["kept"] = c.kept;
    j["failed"] = c.failed;
    j["reward_histogram"] = c.reward_histogram;
    return j;
}

}  // namespace

// ---- rollout filter -------------------------------------------------------

std::string_view to_string(BatchClass c) {
    switch (c) {
        case BatchClass::pass_all: return "pass_all";
        case BatchClass::pass_none: return "pass_none";
        case BatchClass::informative: return "informative";
    }
    return "unknown";
}

RolloutBatchStats filter_sample(std::span<const double> rewards, double max_reward, double threshold) {
    if (rewards.empty()) throw std::invalid_argument("filter_sample: empty reward list");
    RolloutBatchStats s;
    s.rewards.assign(rewards.begin(), rewards.end());
    const auto [lo, hi] = std::minmax_element(rewards.begin(), rewards.end());
    s.delta = *hi - *lo;
    if (*lo >= max_reward) s.classification = BatchClass::pass_all;
    else if (*hi <= 0.0) s.classification = BatchClass::pass_none;
    else s.classification = BatchClass::informative;
    s.discard = s.delta <= threshold;
    return s;
}

// ---- suggestion -----------------------------------------------------------

Suggestion suggest_tool_params(const TimeRange& gt, double duration, double lambda, double u1, double u2) {
    if (!(0.0 <= gt.start && gt.start < gt.end && gt.end <= duration))
        throw std::invalid_argument("suggest_tool_params: requires 0 <= start < end <= duration");
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw std::invalid_argument("suggest_tool_params: lambda must be a finite non-negative number");
    if (!(u1 >= 0.0 && u1 <= 1.0 && u2 >= 0.0 && u2 <= 1.0))
        throw std::invalid_argument("suggest_tool_params: u1 and u2 must lie in [0, 1]");
    Suggestion s;
    s.lambda = lambda;
    s.start_suggest = std::clamp(gt.start - lambda * std::abs(gt.start) * u1, 0.0, duration);
    s.end_suggest = std::clamp(gt.end + lambda * std::abs(duration - gt.end) * u2, 0.0, duration);
    return s;
}

Suggestion suggest_tool_params(const TimeRange& gt, double duration, double lambda, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const double u1 = unit_double(rng());
    const double u2 = unit_double(rng());
    Suggestion s = suggest_tool_params(gt, duration, lambda, u1, u2);
    s.seed = seed;
    return s;
}

Json to_json(const Suggestion& s) {
    Json j;
    j["start_suggest"] = s.start_suggest;
    j["end_suggest"] = s.end_suggest;
    j["lambda"] = s.lambda;
    j["seed"] = s.seed;
    return j;
}

// ---- CoT post-processing --------------------------------------------------

std::string_view to_string(CotVerdict v) {
    switch (v) {
        case CotVerdict::keep: return "keep";
        case CotVerdict::reject_incomplete: return "reject_incomplete";
        case CotVerdict::reject_wrong_answer: return "reject_wrong_answer";
        case CotVerdict::reject_leak: return "reject_leak";
    }
    return "unknown";
}

std::optional<CotVerdict> cot_verdict_from_string(std::string_view name) {
    for (auto v : {CotVerdict::keep, CotVerdict::reject_incomplete, CotVerdict::reject_wrong_answer,
                   CotVerdict::reject_leak})
        if (to_string(v) == name) return v;
    return std::nullopt;
}

CotRecord postprocess_cot(const Sample& sample, const Trajectory& trajectory, const PostprocessConfig& cfg) {
    CotRecord r{sample, trajectory, CotVerdict::keep, {}};

    if (!trajectory.final_answer || trajectory.terminal_reason != TerminalReason::answered) {
        r.verdict = CotVerdict::reject_incomplete;
        r.reject_detail = "no final answer (" + std::string(to_string(trajectory.terminal_reason)) + ")";
        return r;
    }
    if (dangling_tool_call(trajectory)) {
        r.verdict = CotVerdict::reject_incomplete;
        r.reject_detail = "tool call without a result";
        return r;
    }

    const AccuracyDetail d =
        accuracy_detail(sample.task, extract_prediction(*trajectory.final_answer, sample.task), sample.ground_truth);
    std::string wrong;
    if (has_time_range(sample.task) && d.iou.value_or(0.0) < cfg.keep_threshold)
        wrong = "IoU " + format_number(d.iou.value_or(0.0)) + " below keep threshold";
    else if (sample.task == TaskKind::grounded_vqa_mcq && d.text_score.value_or(0.0) < 1.0)
        wrong = "answer does not match";
    else if (sample.task == TaskKind::grounded_vqa_open && d.text_score.value_or(0.0) < cfg.keep_threshold)
        wrong = "answer score " + format_number(d.text_score.value_or(0.0)) + " below keep threshold";
    else if (!has_time_range(sample.task)) {
        if (is_discrete_answer(sample.task) && d.accuracy < 1.0) wrong = "answer does not match";
        else if (!is_discrete_answer(sample.task) && d.accuracy < cfg.keep_threshold)
            wrong = "answer score " + format_number(d.accuracy) + " below keep threshold";
    }
    if (!wrong.empty()) {
        r.verdict = CotVerdict::reject_wrong_answer;
        r.reject_detail = std::move(wrong);
        return r;
    }

    for (const Round& round : trajectory.rounds) {
        for (const std::string& think : round.output.think_segments) {
            const std::string lowered = lowercase(think);
            for (const std::string& phrase : cfg.forbidden_phrases) {
                if (!phrase.empty() && lowered.find(lowercase(phrase)) != std::string::npos) {
                    r.verdict = CotVerdict::reject_leak;
                    r.reject_detail = "think text mentions \"" + phrase + "\"";
                    return r;
                }
            }
        }
    }
    return r;
}

CotRecord ingest_authored_cot(const Sample& sample, std::vector<std::string> emissions,
                              const EpisodeConfig& episode, const BackendRegistry& backends,
                              const PostprocessConfig& cfg) {
    Toolbox toolbox(episode.initial_budget, backends);
    toolbox.register_video(sample.video);
    ScriptedPolicy policy(std::move(emissions));
    return postprocess_cot(sample, run_episode(policy, sample, toolbox, episode), cfg);
}

Json to_json(const CotRecord& r) {
    Json j;
    j["sample"] = to_json(r.sample);
    j["trajectory"] = to_json(r.trajectory);
    j["verdict"] = std::string(to_string(r.verdict));
    j["reject_detail"] = r.reject_detail;
    return j;
}

CotRecord cot_record_from_json(const Json& j) {
    if (!j.is_object()) throw SchemaError("record", "expected a JSON object");
    reject_unknown_fields(j, {"sample", "trajectory", "verdict", "reject_detail"}, "");
    CotRecord r;
    try {
        r.sample = sample_from_json(require(j, "sample"));
    } catch (const SchemaError& e) {
        throw SchemaError("sample." + e.field(), e.message());
    }
    try {
        r.trajectory = trajectory_from_json(require(j, "trajectory"));
    } catch (const SchemaError& e) {
        throw SchemaError("trajectory." + e.field(), e.message());
    }
    const std::string verdict = require_string(j, "verdict");
    auto v = cot_verdict_from_string(verdict);
    if (!v) throw SchemaError("verdict", "unknown verdict '" + verdict + "'");
    r.verdict = *v;
    r.reject_detail = require_string(j, "reject_detail");
    if (r.trajectory.sample_id != r.sample.sample_id)
        throw SchemaError("trajectory.sample_id", "does not match sample.sample_id");
    return r;
}

// ---- dataset I/O ----------------------------------------------------------

void for_each_sample(std::istream& in, const std::function<void(Sample, std::size_t)>& fn) {
    for_each_jsonl(in, [&](const Json& j, std::size_t line) { fn(sample_from_json(j), line); });
}

std::vector<Sample> read_dataset(std::istream& in) {
    std::vector<Sample> out;
    for_each_sample(in, [&](Sample s, std::size_t) { out.push_back(std::move(s)); });
    return out;
}

void write_dataset(std::ostream& out, std::span<const Sample> samples) {
    for (const Sample& s : samples) out << dump_line(to_json(s)) << '\n';
    if (!out) throw IoError("failed to write dataset");
}

std::vector<CotRecord> read_cot_records(std::istream& in) {
    std::vector<CotRecord> out;
    for_each_jsonl(in, [&](const Json& j, std::size_t) { out.push_back(cot_record_from_json(j)); });
    return out;
}

void write_cot_records(std::ostream& out, std::span<const CotRecord> records) {
    for (const CotRecord& r : records) out << dump_line(to_json(r)) << '\n';
    if (!out) throw IoError("failed to write CoT records");
}

// ---- curation -------------------------------------------------------------

void SourceCounts::merge(const SourceCounts& o) {
    total += o.total;
    pass_all += o.pass_all;
    pass_none += o.pass_none;
    informative += o.informative;
    discarded_by_delta += o.discarded_by_delta;
    kept += o.kept;
    failed += o.failed;
    for (std::size_t i = 0; i < reward_histogram.size(); ++i) reward_histogram[i] += o.reward_histogram[i];
}

void CurationReport::merge(const CurationReport& o) {
    overall.merge(o.overall);
    for (const auto& [source, counts] : o.by_source) by_source[source].merge(counts);
    failures.insert(failures.end(), o.failures.begin(), o.failures.end());
}

Json to_json(const CurationReport& r) {
    Json j;
    j["max_reward"] = r.max_reward;
    j["overall"] = counts_json(r.overall);
    Json sources = Json::object();
    for (const auto& [source, counts] : r.by_source) sources[source] = counts_json(counts);
    j["by_source"] = std::move(sources);
    j["failures"] = r.failures;
    return j;
}

CurationOutcome curate_sample(const Sample& sample, const PolicySource& policy, const BackendRegistry& backends,
                              const CurationConfig& cfg) {
    if (cfg.k < 2) throw std::invalid_argument("curation needs k >= 2 rollouts");
    CurationOutcome out;
    out.sample = sample;
    const std::uint64_t sample_seed = derive_seed(cfg.seed, sample.sample_id);
    try {
        Toolbox toolbox(cfg.episode.initial_budget, backends);
        toolbox.register_video(sample.video);
        std::vector<double> rewards;
        for (int r = 0; r < cfg.k; ++r) {
            auto p = policy.open(sample, r, derive_seed(sample_seed, static_cast<std::uint64_t>(r)));
            Trajectory t = run_episode(*p, sample, toolbox, cfg.episode, r);
            const RewardComponents c =
                score_trajectory(t, sample, cfg.episode.tools_enabled, cfg.episode.max_num_turns);
            rewards.push_back(cfg.delta_on_total ? c.total() : c.accuracy);
            out.trajectories.push_back(std::move(t));
        }
        const double max_reward = cfg.delta_on_total ? max_total_reward(cfg.episode.tools_enabled) : 1.0;
        out.stats = filter_sample(rewards, max_reward, cfg.threshold);
        if (out.kept() && has_time_range(sample.task) && sample.ground_truth.time_range)
            out.suggestion = suggest_tool_params(*sample.ground_truth.time_range, sample.video.duration, cfg.lambda,
                                                 derive_seed(sample_seed, "suggestion"));
    } catch (const std::exception& e) {
        out.stats.reset();
        out.trajectories.clear();
        out.error = e.what();
    }
    return out;
}

Json cot_candidate(const CurationOutcome& outcome) {
    const Sample& s = outcome.sample;
    std::map<std::string, std::string> vars{{"duration", format_number(s.video.duration)},
                                            {"question", s.question},
                                            {"answer", reference_answer(s)}};
    Json j;
    j["sample"] = to_json(s);
    j["suggestion"] = outcome.suggestion ? to_json(*outcome.suggestion) : Json(nullptr);
    Json prompts = Json::array();
    if (outcome.suggestion) {
        vars["suggest_start"] = format_number(outcome.suggestion->start_suggest);
        vars["suggest_end"] = format_number(outcome.suggestion->end_suggest);
        prompts.push_back(assets::render(assets::get("cot_round1.txt"), vars));
        prompts.push_back(assets::render(assets::get("cot_round2.txt"), vars, true));
        prompts.push_back(assets::render(assets::get("cot_round3.txt"), vars));
    } else {
        prompts.push_back(assets::render(assets::get("cot_text_prompt.txt"), vars));
    }
    j["prompts"] = std::move(prompts);
    return j;
}

CurationReport run_curation(std::istream& in, const PolicySource& policy, const BackendRegistry& backends,
                            const CurationConfig& cfg, std::ostream& rl_split, std::ostream& cot_candidates) {
    CurationReport report;
    report.max_reward = cfg.delta_on_total ? max_total_reward(cfg.episode.tools_enabled) : 1.0;

    auto account = [&](const CurationOutcome& o) {
        SourceCounts c;
        c.total = 1;
        if (!o.stats) {
            c.failed = 1;
            report.failures.push_back(o.sample.sample_id + ": " + o.error);
        } else {
            switch (o.stats->classification) {
                case BatchClass::pass_all: c.pass_all = 1; break;
                case BatchClass::pass_none: c.pass_none = 1; break;
                case BatchClass::informative: c.informative = 1; break;
            }
            (o.stats->discard ? c.discarded_by_delta : c.kept) = 1;
            for (double r : o.stats->rewards) ++c.reward_histogram[histogram_bin(r, report.max_reward)];
            if (o.kept()) {
                rl_split << dump_line(to_json(o.sample)) << '\n';
                cot_candidates << dump_line(cot_candidate(o)) << '\n';
            }
        }
        report.overall.merge(c);
        report.by_source[o.sample.source].merge(c);
    };

    Batcher<Sample> batcher(cfg.batch_size, [&](std::vector<Sample>& batch) {
        const auto outcomes = parallel_map<CurationOutcome>(
            batch, cfg.jobs, [&](const Sample& s) { return curate_sample(s, policy, backends, cfg); });
        for (const CurationOutcome& o : outcomes) account(o);
    });
    for_each_sample(in, [&](Sample s, std::size_t) { batcher.push(std::move(s)); });
    batcher.finish();
    if (!rl_split || !cot_candidates) throw IoError("failed to write curation output");
    return report;
}

}  // namespace clipagent
