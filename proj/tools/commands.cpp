#include "commands.hpp"

#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>
#include <unordered_map>

#include <CLI11.hpp>

#include "clipagent/assets.hpp"
#include "clipagent/parallel.hpp"
#include "clipagent/seed.hpp"
#include "clipagent/simd/iou_kernels.hpp"

#ifndef CLIPAGENT_VERSION
#define CLIPAGENT_VERSION "0.0.0"
#endif

namespace clipagent::cli {

namespace {

class NullBuffer : public std::streambuf {
protected:
    int overflow(int c) override { return c; }
};

struct Input {
    std::unique_ptr<std::ifstream> file;
    std::istream* stream = nullptr;
};

Input open_input(const std::string& path) {
    Input in;
    if (path == "-") {
        in.stream = &std::cin;
        return in;
    }
    in.file = std::make_unique<std::ifstream>(path);
    if (!*in.file) throw IoError("cannot open '" + path + "' for reading");
    in.stream = in.file.get();
    return in;
}

struct Output {
    std::unique_ptr<std::ofstream> file;
    std::ostream* stream = nullptr;
    std::string path;

    void close() {
        if (file) file->close();
        if (file ? file->fail() : !*stream) throw IoError("failed to write '" + path + "'");
    }
};

Output open_output(const std::string& path, std::ostream& fallback) {
    Output out;
    out.path = path;
    if (path == "-" || path.empty()) {
        out.stream = &fallback;
        out.path = "<stdout>";
        return out;
    }
    out.file = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
    if (!*out.file) throw IoError("cannot open '" + path + "' for writing");
    out.stream = out.file.get();
    return out;
}

std::unordered_map<std::string, Sample> load_samples(std::istream& in) {
    std::unordered_map<std::string, Sample> samples;
    for_each_sample(in, [&](Sample s, std::size_t line) {
        const std::string id = s.sample_id;
        if (!samples.emplace(id, std::move(s)).second)
            throw SchemaError("sample_id", "duplicate sample '" + id + "'", line);
    });
    return samples;
}

const Sample& resolve(const std::unordered_map<std::string, Sample>& samples, const std::string& id,
                      std::size_t line) {
    auto it = samples.find(id);
    if (it == samples.end()) throw SchemaError("sample_id", "unknown sample '" + id + "'", line);
    return it->second;
}

void for_each_trajectory(std::istream& in, const std::function<void(const Trajectory&, std::size_t)>& fn) {
    for_each_jsonl(in, [&](const Json& j, std::size_t line) { fn(trajectory_from_json(j), line); });
}

void probe_if_endpoint(const PolicySource& policy) {
    if (auto* endpoint = dynamic_cast<const EndpointSource*>(&policy)) endpoint->probe();
}

AlphaBetaTable load_alpha_beta(const std::string& path) {
    if (path.empty()) return AlphaBetaTable::defaults();
    Input in = open_input(path);
    return AlphaBetaTable::from_csv(*in.stream);
}

struct RolloutResult {
    std::vector<Trajectory> trajectories;
    std::string error;
};

}  // namespace

EpisodeConfig RunConfig::episode() const {
    EpisodeConfig e;
    e.max_num_turns = max_num_turns;
    e.tools_enabled = tools_enabled;
    return e;
}

void RunConfig::validate() const {
    if (group_size < 2) throw std::invalid_argument("--group-size must be at least 2");
    if (max_num_turns < 0) throw std::invalid_argument("--max-turns must be non-negative");
    if (!(threshold >= 0.0)) throw std::invalid_argument("--threshold must be non-negative");
    if (batch_size == 0) throw std::invalid_argument("--batch-size must be positive");
    for (double t : thresholds)
        if (!(t > 0.0 && t <= 1.0)) throw std::invalid_argument("--iou-thresholds must lie in (0, 1]");
}

std::size_t cmd_rollout(const RunConfig& cfg, const PolicySource& policy, std::istream& samples, std::ostream& out,
                        std::ostream& log) {
    cfg.validate();
    const EpisodeConfig episode = cfg.episode();
    const BackendRegistry backends = BackendRegistry::with_stubs();
    std::size_t skipped = 0;

    Batcher<Sample> batcher(cfg.batch_size, [&](std::vector<Sample>& batch) {
        const auto results = parallel_map<RolloutResult>(batch, cfg.jobs, [&](const Sample& s) {
            RolloutResult r;
            try {
                Toolbox toolbox(episode.initial_budget, backends);
                toolbox.register_video(s.video);
                const std::uint64_t sample_seed = derive_seed(cfg.seed, s.sample_id);
                for (int k = 0; k < cfg.group_size; ++k) {
                    auto p = policy.open(s, k, derive_seed(sample_seed, static_cast<std::uint64_t>(k)));
                    r.trajectories.push_back(run_episode(*p, s, toolbox, episode, k));
                }
            } catch (const std::exception& e) {
                r.trajectories.clear();
                r.error = e.what();
            }
            return r;
        });
        for (std::size_t i = 0; i < batch.size(); ++i) {
            if (!results[i].error.empty()) {
                ++skipped;
                log << "rollout: sample '" << batch[i].sample_id << "' failed: " << results[i].error << '\n';
                continue;
            }
            for (const Trajectory& t : results[i].trajectories) out << render_trajectory(t) << '\n';
        }
    });
    for_each_sample(samples, [&](Sample s, std::size_t) { batcher.push(std::move(s)); });
    batcher.finish();
    return skipped;
}

void cmd_reward(const RunConfig& cfg, std::istream& trajectories, std::istream& samples, std::ostream& out) {
    cfg.validate();
    const auto by_id = load_samples(samples);
    for_each_trajectory(trajectories, [&](const Trajectory& t, std::size_t line) {
        const Sample& s = resolve(by_id, t.sample_id, line);
        RewardRecord r{t.sample_id, t.rollout, s.task, s.source,
                       score_trajectory(t, s, cfg.tools_enabled, cfg.max_num_turns)};
        out << dump_line(to_json(r)) << '\n';
    });
}

void cmd_dgrpo(const RunConfig& cfg, const AlphaBetaTable& table, std::istream& rewards, std::ostream& out) {
    cfg.validate();
    std::vector<RewardRecord> group;
    std::set<std::string> finished;
    std::size_t group_line = 0;

    auto flush = [&] {
        if (group.empty()) return;
        const RewardRecord& head = group.front();
        if (static_cast<int>(group.size()) != cfg.group_size)
            throw SchemaError("sample_id",
                              "group '" + head.sample_id + "' has " + std::to_string(group.size()) +
                                  " records, expected " + std::to_string(cfg.group_size),
                              group_line);
        std::vector<RewardComponents> comps;
        for (const RewardRecord& r : group) comps.push_back(r.components);
        std::optional<TaskDifficultyParams> params;
        try {
            params = table.lookup(head.task, head.source);
        } catch (const std::out_of_range& e) {
            throw SchemaError("source", e.what(), group_line);
        }
        out << dump_line(to_json(compute_group(comps, head.task, params, cfg.weight_fn, head.sample_id))) << '\n';
        finished.insert(head.sample_id);
        group.clear();
    };

    for_each_jsonl(rewards, [&](const Json& j, std::size_t line) {
        RewardRecord r = reward_record_from_json(j);
        if (!group.empty() && group.front().sample_id != r.sample_id) flush();
        if (group.empty()) {
            if (finished.count(r.sample_id))
                throw SchemaError("sample_id", "records of '" + r.sample_id + "' are not contiguous", line);
            group_line = line;
        } else if (r.task != group.front().task || r.source != group.front().source) {
            throw SchemaError("task", "records of '" + r.sample_id + "' disagree on task or source", line);
        }
        group.push_back(std::move(r));
    });
    flush();
}

CurationReport cmd_filter(const RunConfig& cfg, const PolicySource& policy, std::istream& samples,
                          std::ostream& rl_split, std::ostream& cot_candidates) {
    cfg.validate();
    CurationConfig cc;
    cc.k = cfg.group_size;
    cc.threshold = cfg.threshold;
    cc.delta_on_total = cfg.delta_on_total;
    cc.seed = cfg.seed;
    cc.episode = cfg.episode();
    cc.jobs = cfg.jobs;
    cc.batch_size = cfg.batch_size;
    return run_curation(samples, policy, BackendRegistry::with_stubs(), cc, rl_split, cot_candidates);
}

EvalReport cmd_eval(const RunConfig& cfg, std::istream& trajectories, std::istream& samples) {
    cfg.validate();
    const auto by_id = load_samples(samples);
    std::vector<EvalPair> all;
    std::map<std::string, std::vector<EvalPair>> per_source;
    for_each_trajectory(trajectories, [&](const Trajectory& t, std::size_t line) {
        const Sample& s = resolve(by_id, t.sample_id, line);
        EvalPair p{t.final_answer ? extract_prediction(*t.final_answer, s.task) : Prediction{}, s.ground_truth,
                   s.task};
        per_source[s.source].push_back(p);
        all.push_back(std::move(p));
    });
    EvalReport r;
    r.overall = evaluate(all, cfg.thresholds);
    for (const auto& [source, pairs] : per_source) r.by_source[source] = evaluate(pairs, cfg.thresholds);
    return r;
}

Json to_json(const EvalReport& r) {
    Json j;
    j["overall"] = clipagent::to_json(r.overall);
    Json sources = Json::object();
    for (const auto& [source, res] : r.by_source) sources[source] = clipagent::to_json(res);
    j["by_source"] = std::move(sources);
    return j;
}

Json version_info() {
    Json j;
    j["name"] = "clipagent";
    j["version"] = CLIPAGENT_VERSION;
    j["assets_version"] = assets::kVersion;
    j["iou_kernel"] = std::string(simd::to_string(simd::active_isa()));
    return j;
}

Json schema_info() {
    auto obj = [](std::initializer_list<std::pair<const char*, const char*>> fields) {
        Json j = Json::object();
        for (const auto& [k, v] : fields) j[k] = v;
        return j;
    };
    Json j;
    j["version"] = CLIPAGENT_VERSION;
    j["exit_codes"] = obj({{"0", "success"}, {"1", "schema or validation error"}, {"2", "I/O or transport error"}});
    j["records"] = {
        {"sample", obj({{"sample_id", "string"},
                        {"task", "temporal_grounding|vqa_mcq|vqa_number|vqa_open|vqa_ocr|vqa_regression|"
                                 "grounded_vqa_mcq|grounded_vqa_open"},
                        {"source", "string"},
                        {"video", "{video_id: string, duration: seconds, native_fps?: number}"},
                        {"question", "string"},
                        {"ground_truth", "{time_range?: {start, end}, answer_text?: string, answer_number?: number}"}})},
        {"trajectory", obj({{"sample_id", "string"},
                            {"rollout", "integer"},
                            {"rounds", "[{think: [string], tool_call: {name, arguments}|null, answer: string|null, "
                                       "tool_result: object|null}]"},
                            {"final_answer", "string|null"},
                            {"terminal_reason", "answered|parse_error|turn_limit|length_limit"},
                            {"raw_texts", "[string]"},
                            {"logprob_sums", "[number|null]"}})},
        {"reward", obj({{"sample_id", "string"},
                        {"rollout", "integer"},
                        {"task", "task kind"},
                        {"source", "string"},
                        {"accuracy", "number in [0, 1]"},
                        {"format", "number"},
                        {"tool", "number"},
                        {"iou", "number|null"},
                        {"text_score", "number|null"},
                        {"total", "number"}})},
        {"dgrpo_group", obj({{"sample_id", "string"},
                             {"task", "task kind"},
                             {"group_size", "integer >= 2"},
                             {"components", "[{accuracy, format, tool, iou, text_score}]"},
                             {"scaled_rewards", "[number]"},
                             {"difficulty", "number"},
                             {"weights", "[number]"},
                             {"final_rewards", "[number]"},
                             {"advantages", "[number]"}})},
        {"eval", obj({{"overall", "{n, n_grounding, n_discrete, miou, recall_at: {R@x: number}, accuracy}"},
                      {"by_source", "{source: eval result}"}})},
        {"cot_candidate", obj({{"sample", "sample"},
                               {"suggestion", "{start_suggest, end_suggest, lambda, seed}|null"},
                               {"prompts", "[string]"}})},
    };
    return j;
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const TransportError*>(&e)) return kExitIo;
    return kExitSchema;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Tool-augmented video reasoning rollouts, rewards and difficulty-aware group advantages"};
    app.require_subcommand(0, 1);
    bool show_version = false, show_schema = false;
    app.add_flag("--version", show_version, "Print version metadata as JSON");
    app.add_flag("--schema", show_schema, "Print record schemas as JSON");

    RunConfig cfg;
    std::string weight_fn = "omega1";
    std::string out_path = "-";

    auto common = [&](CLI::App* sub) {
        sub->add_option("--seed", cfg.seed, "Root seed")->envname("CLIPAGENT_SEED");
        sub->add_option("--group-size", cfg.group_size, "Rollouts per sample (G)")->envname("CLIPAGENT_GROUP_SIZE");
        sub->add_option("--max-turns", cfg.max_num_turns, "Tool rounds per episode")->envname("CLIPAGENT_MAX_TURNS");
        sub->add_flag("--tools,!--no-tools", cfg.tools_enabled, "Enable the tool protocol")
            ->envname("CLIPAGENT_TOOLS");
        sub->add_option("--out", out_path, "Output path, '-' for stdout");
        sub->add_option("--jobs", cfg.jobs, "Worker threads")->envname("CLIPAGENT_JOBS");
        sub->add_option("--batch-size", cfg.batch_size, "Samples held in memory at once");
    };
    auto with_policy = [&](CLI::App* sub) {
        sub->add_option("--policy", cfg.policy, "script:PATH | mock:k=v,... | endpoint:HOST:PORT")
            ->envname("CLIPAGENT_POLICY");
    };

    std::string samples_path, trajectories_path, rewards_path, cot_out_path, report_path, csv_path;

    auto* rollout = app.add_subcommand("rollout", "Run G episodes per sample and write trajectories");
    common(rollout);
    with_policy(rollout);
    rollout->add_option("--samples", samples_path, "Sample JSONL")->required();

    auto* reward = app.add_subcommand("reward", "Score trajectories");
    common(reward);
    reward->add_option("--trajectories", trajectories_path, "Trajectory JSONL")->required();
    reward->add_option("--samples", samples_path, "Sample JSONL")->required();

    auto* dgrpo = app.add_subcommand("dgrpo", "Difficulty-aware rewards and group advantages");
    common(dgrpo);
    dgrpo->add_option("--rewards", rewards_path, "Reward report JSONL")->required();
    dgrpo->add_option("--alpha-beta", cfg.alpha_beta_table, "CSV table task,source,alpha,beta")
        ->envname("CLIPAGENT_ALPHA_BETA");
    dgrpo->add_option("--weight-fn", weight_fn, "Weight function")
        ->envname("CLIPAGENT_WEIGHT_FN")
        ->check(CLI::IsMember({"omega1", "omega2", "omega3", "omega4"}));

    auto* filter = app.add_subcommand("filter", "Rollout filter: keep samples with reward spread above threshold");
    common(filter);
    with_policy(filter);
    filter->add_option("--samples", samples_path, "Sample JSONL")->required();
    filter->add_option("--threshold", cfg.threshold, "Discard when max - min <= threshold")
        ->envname("CLIPAGENT_THRESHOLD");
    filter->add_flag("--delta-on-total", cfg.delta_on_total, "Spread of the total reward instead of accuracy");
    filter->add_option("--cot-out", cot_out_path, "CoT candidate JSONL");
    filter->add_option("--report", report_path, "Curation report JSON (default: stderr)");

    auto* eval = app.add_subcommand("eval", "mIoU, recall at IoU thresholds and accuracy");
    common(eval);
    eval->add_option("--trajectories", trajectories_path, "Trajectory JSONL")->required();
    eval->add_option("--samples", samples_path, "Sample JSONL")->required();
    eval->add_option("--iou-thresholds", cfg.thresholds, "Comma-separated thresholds")->delimiter(',');
    eval->add_option("--csv", csv_path, "Also write a CSV table");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitSchema;
    }

    try {
        if (show_version) {
            out << version_info().dump() << '\n';
            return kExitOk;
        }
        if (show_schema) {
            out << schema_info().dump(2) << '\n';
            return kExitOk;
        }
        if (app.get_subcommands().empty()) {
            err << app.help();
            return kExitSchema;
        }
        cfg.weight_fn = *weight_function_from_string(weight_fn);
        cfg.validate();

        if (rollout->parsed()) {
            auto policy = make_policy_source(cfg.policy);
            probe_if_endpoint(*policy);
            Input in = open_input(samples_path);
            Output o = open_output(out_path, out);
            cmd_rollout(cfg, *policy, *in.stream, *o.stream, err);
            o.close();
        } else if (reward->parsed()) {
            Input t = open_input(trajectories_path);
            Input s = open_input(samples_path);
            Output o = open_output(out_path, out);
            cmd_reward(cfg, *t.stream, *s.stream, *o.stream);
            o.close();
        } else if (dgrpo->parsed()) {
            const AlphaBetaTable table = load_alpha_beta(cfg.alpha_beta_table);
            Input r = open_input(rewards_path);
            Output o = open_output(out_path, out);
            cmd_dgrpo(cfg, table, *r.stream, *o.stream);
            o.close();
        } else if (filter->parsed()) {
            auto policy = make_policy_source(cfg.policy);
            probe_if_endpoint(*policy);
            Input in = open_input(samples_path);
            Output o = open_output(out_path, out);
            NullBuffer null_buffer;
            std::ostream discard(&null_buffer);
            Output cot;
            if (!cot_out_path.empty()) cot = open_output(cot_out_path, out);
            const CurationReport report =
                cmd_filter(cfg, *policy, *in.stream, *o.stream, cot.stream ? *cot.stream : discard);
            o.close();
            if (cot.stream) cot.close();
            if (report_path.empty()) {
                err << to_json(report).dump() << '\n';
            } else {
                Output rep = open_output(report_path, out);
                *rep.stream << to_json(report).dump(2) << '\n';
                rep.close();
            }
        } else if (eval->parsed()) {
            Input t = open_input(trajectories_path);
            Input s = open_input(samples_path);
            const EvalReport report = cmd_eval(cfg, *t.stream, *s.stream);
            Output o = open_output(out_path, out);
            *o.stream << to_json(report).dump(2) << '\n';
            o.close();
            if (!csv_path.empty()) {
                std::map<std::string, EvalResult> rows = report.by_source;
                rows["overall"] = report.overall;
                Output c = open_output(csv_path, out);
                *c.stream << to_csv(rows, cfg.thresholds);
                c.close();
            }
        }
        return kExitOk;
    } catch (const SchemaError& e) {
        err << "error: " << e.what() << '\n';
        return kExitSchema;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_code_for(e);
    }
}

}  // namespace clipagent::cli
