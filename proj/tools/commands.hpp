#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "clipagent/dgrpo.hpp"
#include "clipagent/metrics.hpp"
#include "clipagent/pipeline.hpp"
#include "clipagent/policy.hpp"

namespace clipagent::cli {

// Stable process exit codes.
enum ExitCode : int { kExitOk = 0, kExitSchema = 1, kExitIo = 2 };

struct RunConfig {
    std::uint64_t seed = 0;
    int group_size = 8;
    int max_num_turns = 2;
    bool tools_enabled = true;
    std::string alpha_beta_table;  // empty: built-in table
    WeightFunction weight_fn = WeightFunction::omega1;
    std::string policy = "mock:";
    double threshold = kDefaultDeltaThreshold;
    bool delta_on_total = false;
    std::vector<double> thresholds = kDefaultThresholds;
    unsigned jobs = 1;
    std::size_t batch_size = 256;

    EpisodeConfig episode() const;
    void validate() const;
};

// Writes group_size trajectories per sample, in input order. Samples whose
// episodes fail are reported on `log` and skipped. Returns the number skipped.
std::size_t cmd_rollout(const RunConfig& cfg, const PolicySource& policy, std::istream& samples, std::ostream& out,
                        std::ostream& log);

// One reward record per trajectory line.
void cmd_reward(const RunConfig& cfg, std::istream& trajectories, std::istream& samples, std::ostream& out);

// One DgrpoGroup line per sample; records of a sample must be contiguous and number group_size.
void cmd_dgrpo(const RunConfig& cfg, const AlphaBetaTable& table, std::istream& rewards, std::ostream& out);

CurationReport cmd_filter(const RunConfig& cfg, const PolicySource& policy, std::istream& samples,
                          std::ostream& rl_split, std::ostream& cot_candidates);

struct EvalReport {
    EvalResult overall;
    std::map<std::string, EvalResult> by_source;
};

EvalReport cmd_eval(const RunConfig& cfg, std::istream& trajectories, std::istream& samples);
Json to_json(const EvalReport& r);

Json version_info();
Json schema_info();

// Exit code for an exception escaping a command.
int exit_code_for(const std::exception& e);

// Full command-line entry point.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace clipagent::cli
