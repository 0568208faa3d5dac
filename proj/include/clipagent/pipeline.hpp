#pragma once

#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clipagent/episode.hpp"
#include "clipagent/rewards.hpp"

namespace clipagent {

// ---- rollout filter -------------------------------------------------------

enum class BatchClass { pass_all, pass_none, informative };
std::string_view to_string(BatchClass c);

struct RolloutBatchStats {
    std::vector<double> rewards;
    double delta = 0.0;  // max - min
    BatchClass classification = BatchClass::informative;
    bool discard = false;  // delta <= threshold
};

inline constexpr double kDefaultDeltaThreshold = 0.05;

// pass_all: every reward equals max_reward; pass_none: every reward is 0.
// Throws std::invalid_argument on an empty list.
RolloutBatchStats filter_sample(std::span<const double> rewards, double max_reward,
                                double threshold = kDefaultDeltaThreshold);

// ---- tool-parameter suggestion --------------------------------------------

struct Suggestion {
    double start_suggest = 0.0;
    double end_suggest = 0.0;
    double lambda = 0.0;
    std::uint64_t seed = 0;
};

inline constexpr double kDefaultSuggestionLambda = 0.2;

// s' = clamp(s - lambda |s| u1, 0, L), e' = clamp(e + lambda |L - e| u2, 0, L).
// Requires 0 <= gt.start < gt.end <= duration, lambda >= 0, u1 and u2 in [0, 1].
Suggestion suggest_tool_params(const TimeRange& gt, double duration, double lambda, double u1, double u2);

// Draws u1 then u2 in [0, 1) from a generator seeded with `seed`.
Suggestion suggest_tool_params(const TimeRange& gt, double duration, double lambda, std::uint64_t seed);

Json to_json(const Suggestion& s);

// ---- CoT post-processing --------------------------------------------------

enum class CotVerdict { keep, reject_incomplete, reject_wrong_answer, reject_leak };
std::string_view to_string(CotVerdict v);
std::optional<CotVerdict> cot_verdict_from_string(std::string_view name);

struct PostprocessConfig {
    std::vector<std::string> forbidden_phrases{"ground truth", "suggestion"};
    double keep_threshold = 0.9;  // IoU, Rouge, 1 - WER and L1 scores below this are wrong
};

struct CotRecord {
    Sample sample;
    Trajectory trajectory;
    CotVerdict verdict = CotVerdict::keep;
    std::string reject_detail;
};

// First matching rule wins: incomplete, wrong answer, leaked hint in think text.
CotRecord postprocess_cot(const Sample& sample, const Trajectory& trajectory,
                          const PostprocessConfig& cfg = {});

// Replays annotator-authored emissions through the episode loop and post-processes the result.
CotRecord ingest_authored_cot(const Sample& sample, std::vector<std::string> emissions,
                              const EpisodeConfig& episode, const BackendRegistry& backends,
                              const PostprocessConfig& cfg = {});

Json to_json(const CotRecord& r);
CotRecord cot_record_from_json(const Json& j);

// ---- dataset I/O ----------------------------------------------------------

// Streams Sample records; every record is validated. Errors carry the line number.
void for_each_sample(std::istream& in, const std::function<void(Sample, std::size_t)>& fn);
std::vector<Sample> read_dataset(std::istream& in);
void write_dataset(std::ostream& out, std::span<const Sample> samples);

std::vector<CotRecord> read_cot_records(std::istream& in);
void write_cot_records(std::ostream& out, std::span<const CotRecord> records);

// ---- curation -------------------------------------------------------------

struct CurationConfig {
    int k = 8;
    double threshold = kDefaultDeltaThreshold;
    bool delta_on_total = false;  // spread of the total reward instead of accuracy
    double lambda = kDefaultSuggestionLambda;
    std::uint64_t seed = 0;
    EpisodeConfig episode;
    unsigned jobs = 1;              // worker threads per batch
    std::size_t batch_size = 256;   // samples held in memory at once
};

inline constexpr int kHistogramBins = 10;

struct SourceCounts {
    std::int64_t total = 0;
    std::int64_t pass_all = 0;
    std::int64_t pass_none = 0;
    std::int64_t informative = 0;
    std::int64_t discarded_by_delta = 0;
    std::int64_t kept = 0;
    std::int64_t failed = 0;
    // Rollout rewards over [0, max_reward] in kHistogramBins equal bins; the last bin is closed.
    std::vector<std::int64_t> reward_histogram = std::vector<std::int64_t>(kHistogramBins, 0);

    void merge(const SourceCounts& other);
    bool operator==(const SourceCounts&) const = default;
};

struct CurationReport {
    double max_reward = 1.0;
    SourceCounts overall;
    std::map<std::string, SourceCounts> by_source;
    std::vector<std::string> failures;  // "sample_id: message"

    void merge(const CurationReport& other);
};

Json to_json(const CurationReport& r);

struct CurationOutcome {
    Sample sample;
    std::vector<Trajectory> trajectories;
    std::optional<RolloutBatchStats> stats;  // empty when the sample failed
    std::optional<Suggestion> suggestion;    // kept samples with a time range
    std::string error;

    bool kept() const { return stats && !stats->discard; }
};

CurationOutcome curate_sample(const Sample& sample, const PolicySource& policy, const BackendRegistry& backends,
                              const CurationConfig& cfg);

// One cot_candidates line: the sample, its suggestion and the rendered annotation prompts.
Json cot_candidate(const CurationOutcome& outcome);

// Streams samples from `in`; kept samples go to `rl_split` as Sample lines and to
// `cot_candidates`. Per-sample failures are recorded in the report.
CurationReport run_curation(std::istream& in, const PolicySource& policy, const BackendRegistry& backends,
                            const CurationConfig& cfg, std::ostream& rl_split, std::ostream& cot_candidates);

}  // namespace clipagent
