// Runs every acceptance criterion once and prints one PASS/FAIL line each.
// Exit status is nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../tools/commands.hpp"
#include "clipagent/dgrpo.hpp"
#include "clipagent/metrics.hpp"
#include "clipagent/pipeline.hpp"
#include "clipagent/rewards.hpp"
#include "clipagent/text_metrics.hpp"
#include "support/answers.hpp"
#include "support/corpus.hpp"
#include "support/golden.hpp"
#include "support/oracles.hpp"

using namespace clipagent;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void fail(const std::string& why) {
        if (pass) detail = why;
        pass = false;
    }
    void expect(bool ok, const std::string& why) {
        if (!ok) fail(why);
    }
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

std::string fixture(const std::string& name) { return std::string(FIXTURE_DIR) + "/" + name; }

// ---- 1 ---------------------------------------------------------------------

Outcome golden_trace() {
    Outcome o;
    const auto t0 = Clock::now();
    const auto bad = testsupport::check_golden_group(fixture("golden_group.json"));
    const double dt = seconds_since(t0);
    if (!bad.empty())
        o.fail(std::to_string(bad.size()) + " mismatches, first " + bad[0].field + ": expected " + bad[0].expected +
               " got " + bad[0].actual);
    o.expect(dt < 1.0, "took " + fmt(dt) + " s");
    if (o.pass) o.detail = "G=8 trace matches at 9 decimals in " + fmt(dt) + " s";
    return o;
}

// ---- 2 ---------------------------------------------------------------------

Outcome omega_values() {
    Outcome o;
    const std::vector<std::pair<double, double>> table{{0, 1.0}, {1, 1.0}, {1.5, 0.75}, {2, 0.5}, {3, 0.5}};
    for (auto [d, w] : table) {
        const double got = difficulty_weight(d, WeightFunction::omega1);
        o.expect(std::abs(got - w) <= 1e-12, "omega1(" + fmt(d) + ") = " + fmt(got));
    }
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const double d = 3.0 * i / 99.0;
        const double c = d >= 2.0 ? 0.0 : (d <= 1.0 ? 1.0 : 2.0 - d);
        worst = std::max(worst, std::abs(difficulty_weight(d, WeightFunction::omega2) - c));
        worst = std::max(worst, std::abs(difficulty_weight(d, WeightFunction::omega3) - (1.0 - d / 4.0)));
        worst = std::max(worst, std::abs(difficulty_weight(d, WeightFunction::omega4) - (1.0 - d * d / 8.0)));
    }
    o.expect(worst <= 1e-12, "closed-form deviation " + fmt(worst));
    if (o.pass) o.detail = "max closed-form deviation " + fmt(worst);
    return o;
}

// ---- 3 ---------------------------------------------------------------------

Outcome scaling_knots() {
    Outcome o;
    const TaskDifficultyParams p{0.2, 0.8}, v{0.0, 0.5};
    const std::vector<std::tuple<double, TaskDifficultyParams, double>> cases{
        {0.2, p, 0.0}, {0.5, p, 0.5}, {0.8, p, 1.0}, {0.9, p, 1.0}, {0.25, v, 0.5}};
    for (auto [iou_v, params, want] : cases) {
        const double got = scale_grounding_reward(iou_v, params);
        o.expect(std::abs(got - want) <= 1e-12, "iou " + fmt(iou_v) + " -> " + fmt(got));
    }
    if (o.pass) o.detail = "5 knots within 1e-12";
    return o;
}

// ---- 4 ---------------------------------------------------------------------

// Builds a random emission script from well-formed and broken fragments,
// biased toward correct answers so the search reaches the top of the range.
std::vector<std::string> fuzz_script(std::mt19937_64& rng, const Sample& s) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto think = [&] {
        static const std::vector<std::string> bodies{"look", "", "compare frames", "x < y"};
        return "<think>" + bodies[rng() % bodies.size()] + "</think>";
    };
    auto call = [&] {
        const double a = u(rng) * s.video.duration, b = u(rng) * s.video.duration;
        static const std::vector<std::string> names{"video_clip", "clip_caption", "clip_qa", "zoom"};
        return "<tool_call>{\"name\":\"" + names[rng() % names.size()] + "\",\"arguments\":{\"start\":" +
               testsupport::num(std::min(a, b)) + ",\"end\":" + testsupport::num(std::max(a, b)) +
               ",\"question\":\"q\"}}</tool_call>";
    };
    auto answer = [&] {
        const double r = u(rng);
        if (r < 0.6) return "<answer>" + testsupport::perfect_answer(s) + "</answer>";
        if (r < 0.8) return std::string("<answer>B</answer>");
        return std::string("<answer>{\"start\":1,\"end\":2}</answer>");
    };
    std::vector<std::string> script;
    const int calls = static_cast<int>(rng() % 4);
    for (int i = 0; i < calls; ++i) script.push_back(think() + call());
    script.push_back(think() + answer());
    for (auto& e : script) {
        const double r = u(rng);
        if (r < 0.05) e = "noise " + e;
        else if (r < 0.08) e += e;
        else if (r < 0.10) e = e.substr(0, e.size() / 2);
        else if (r < 0.12) e = e.substr(e.find("</think>") + 8);
    }
    return script;
}

Outcome reward_caps() {
    Outcome o;
    const auto samples = testsupport::make_corpus(200, 41);
    std::mt19937_64 rng(2718);
    double best_on = 0.0, best_off = 0.0, worst_low = 0.0;
    Toolbox toolbox(SamplingBudget{}, BackendRegistry::with_stubs());
    for (const auto& s : samples) toolbox.register_video(s.video);
    for (int i = 0; i < 10000; ++i) {
        const Sample& s = samples[rng() % samples.size()];
        const bool tools = (i % 2) == 0;
        EpisodeConfig cfg;
        cfg.tools_enabled = tools;
        ScriptedPolicy policy(fuzz_script(rng, s));
        const Trajectory t = run_episode(policy, s, toolbox, cfg, i);
        const RewardComponents c = score_trajectory(t, s, tools, cfg.max_num_turns);
        const double total = c.total();
        worst_low = std::min(worst_low, std::min({c.accuracy, c.format, c.tool}));
        o.expect(c.accuracy <= 1.0, "accuracy " + fmt(c.accuracy));
        (tools ? best_on : best_off) = std::max(tools ? best_on : best_off, total);
    }
    o.expect(worst_low >= 0.0, "negative component " + fmt(worst_low));
    o.expect(best_on == 2.0 && max_total_reward(true) == 2.0, "max with tools " + fmt(best_on));
    o.expect(best_off == 2.0 && max_total_reward(false) == 2.0, "max without tools " + fmt(best_off));
    if (o.pass) o.detail = "10000 fuzzed trajectories, max " + fmt(best_on) + " / " + fmt(best_off);
    return o;
}

// ---- 5 ---------------------------------------------------------------------

Outcome format_corpus() {
    Outcome o;
    std::ifstream in(fixture("format_corpus.jsonl"));
    std::string line;
    int total = 0, agree = 0;
    bool has_tool_shape = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const Json j = Json::parse(line);
        const auto emissions = j.at("emissions").get<std::vector<std::string>>();
        const bool want = j.at("valid").get<bool>();
        const bool tools = j.at("tools_enabled").get<bool>();
        ++total;
        if (validate_format(emissions, tools) == want) ++agree;
        else o.fail("disagrees on: " + j.at("note").get<std::string>());
        if (want && tools && emissions.size() == 2 && emissions[0].find("<tool_call>") != std::string::npos)
            has_tool_shape = true;
    }
    o.expect(total >= 40, "only " + std::to_string(total) + " labeled cases");
    o.expect(has_tool_shape, "corpus lacks the think/tool_call/think/answer shape");
    if (o.pass) o.detail = std::to_string(agree) + "/" + std::to_string(total) + " agree";
    return o;
}

// ---- 6 ---------------------------------------------------------------------

std::vector<std::string> random_words(std::mt19937_64& rng) {
    static const std::vector<std::string> vocab{"the", "a", "man", "dog", "opens", "door", "runs", "cup", "red"};
    std::vector<std::string> w(rng() % 13);
    for (auto& x : w) x = vocab[rng() % vocab.size()];
    return w;
}

std::string join(const std::vector<std::string>& w) {
    std::string s;
    for (const auto& x : w) s += (s.empty() ? "" : " ") + x;
    return s;
}

Outcome metric_oracles() {
    Outcome o;
    std::mt19937_64 rng(606);
    std::uniform_real_distribution<double> pos(0.0, 600.0), len(5.0, 300.0);
    std::vector<EvalPair> pairs;
    std::vector<double> raster;
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const double a = pos(rng), b = std::min(600.0, a + len(rng));
        const double c = pos(rng), d = std::min(600.0, c + len(rng));
        if (b - a < 5.0 || d - c < 5.0) {
            --i;
            continue;
        }
        EvalPair p;
        p.prediction.time_range = TimeRange{a, b};
        p.truth.time_range = TimeRange{c, d};
        pairs.push_back(p);
        raster.push_back(oracle::raster_iou(a, b, c, d));
        worst = std::max(worst, std::abs(iou({a, b}, {c, d}) - raster.back()));
    }
    const auto batched = pair_ious(pairs);
    for (std::size_t i = 0; i < batched.size(); ++i) worst = std::max(worst, std::abs(batched[i] - raster[i]));
    o.expect(worst < 1e-3, "IoU deviation " + fmt(worst));

    int wer_bad = 0, rouge_bad = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto h = random_words(rng), r = random_words(rng);
        const std::string hs = join(h), rs = join(r);
        const double wer_oracle = r.empty() ? (h.empty() ? 0.0 : 1.0)
                                            : static_cast<double>(oracle::edit_distance(h, r)) /
                                                  static_cast<double>(r.size());
        if (word_error_rate(hs, rs) != wer_oracle) ++wer_bad;

        double rouge_oracle = 1.0;
        if (!h.empty() || !r.empty()) {
            const double r1 = oracle::rouge_n_bruteforce(h, r, 1);
            const double r2 = (h.size() < 2 && r.size() < 2) ? r1 : oracle::rouge_n_bruteforce(h, r, 2);
            const double rl = oracle::f1(oracle::lcs_exhaustive(h, r), h.size(), r.size());
            rouge_oracle = (r1 + r2 + rl) / 3.0;
        }
        if (rouge_score(hs, rs) != rouge_oracle) ++rouge_bad;
    }
    o.expect(wer_bad == 0, std::to_string(wer_bad) + " WER mismatches");
    o.expect(rouge_bad == 0, std::to_string(rouge_bad) + " Rouge mismatches");
    if (o.pass) o.detail = "IoU max |delta| " + fmt(worst) + "; WER and Rouge exact on 1000 pairs";
    return o;
}

// ---- 7 ---------------------------------------------------------------------

// Scale invariance is checked on the bare mean/std normalization (eps = 0).
// At the default eps the drift must equal its closed form A * eps (1 - w) / (w std + eps).
Outcome advantage_properties() {
    Outcome o;
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    double worst_sum = 0.0, worst_scale = 0.0, worst_eps_model = 0.0, largest_eps_drift = 0.0;
    for (int t = 0; t < 1000; ++t) {
        const std::size_t g = 2 + rng() % 15;
        std::vector<double> r(g);
        for (auto& x : r) x = u(rng);
        const auto adv = group_advantages(r);
        const double sum = std::accumulate(adv.begin(), adv.end(), 0.0);
        worst_sum = std::max(worst_sum, std::abs(sum) / static_cast<double>(g));

        const double mean = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(g);
        const double w = difficulty_weight(mean, WeightFunction::omega1);
        std::vector<double> scaled(r);
        for (auto& x : scaled) x *= w;

        const auto bare = group_advantages(r, 0.0);
        const auto bare_scaled = group_advantages(scaled, 0.0);
        for (std::size_t k = 0; k < g; ++k) worst_scale = std::max(worst_scale, std::abs(bare[k] - bare_scaled[k]));

        double var = 0.0;
        for (double x : r) var += (x - mean) * (x - mean);
        const double sd = std::sqrt(var / static_cast<double>(g));
        const auto adv_scaled = group_advantages(scaled);
        for (std::size_t k = 0; k < g; ++k) {
            const double drift = adv[k] - adv_scaled[k];
            const double model = adv[k] * kAdvantageEps * (1.0 - w) / (w * sd + kAdvantageEps);
            largest_eps_drift = std::max(largest_eps_drift, std::abs(drift));
            worst_eps_model = std::max(worst_eps_model, std::abs(drift - model));
        }

        std::vector<double> flat(g, u(rng));
        for (double a : group_advantages(flat)) o.expect(a == 0.0, "zero-variance group gave " + fmt(a));
    }
    o.expect(worst_sum < 1e-9, "|sum A| / G reached " + fmt(worst_sum));
    o.expect(worst_scale < 1e-9, "scaling by w moved normalized rewards by " + fmt(worst_scale));
    o.expect(worst_eps_model < 1e-9, "eps drift departs from its closed form by " + fmt(worst_eps_model));
    if (o.pass)
        o.detail = "max |sum|/G " + fmt(worst_sum) + ", scale drift " + fmt(worst_scale) +
                   " (eps=1e-6 adds up to " + fmt(largest_eps_drift) + ", matching its closed form)";
    return o;
}

// ---- 8 ---------------------------------------------------------------------

Outcome filter_rule() {
    Outcome o;
    std::vector<double> edge{0.0, 0.01, 0.03, 0.05, 0.0, 0.02, 0.0, 0.05};
    std::vector<double> above{0.0, 0.01, 0.03, 0.0500001, 0.0, 0.02, 0.0, 0.05};
    o.expect(filter_sample(edge, 1.0).discard, "delta 0.05 was kept");
    o.expect(!filter_sample(above, 1.0).discard, "delta 0.0500001 was discarded");
    std::mt19937_64 rng(8);
    for (int i = 0; i < 1000; ++i) {
        std::shuffle(edge.begin(), edge.end(), rng);
        std::shuffle(above.begin(), above.end(), rng);
        o.expect(filter_sample(edge, 1.0).discard, "shuffle changed the 0.05 decision");
        o.expect(!filter_sample(above, 1.0).discard, "shuffle changed the 0.0500001 decision");
    }
    if (o.pass) o.detail = "boundary inclusive, stable over 1000 shuffles";
    return o;
}

// ---- 9 ---------------------------------------------------------------------

Outcome suggestion_widening() {
    Outcome o;
    std::mt19937_64 rng(909);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 10000; ++i) {
        const double L = 1.0 + 1000.0 * u(rng);
        double s = L * u(rng), e = L * u(rng);
        if (s > e) std::swap(s, e);
        if (s == e) continue;
        const double lambda = 3.0 * u(rng);
        const auto sg = suggest_tool_params({s, e}, L, lambda, rng());
        o.expect(sg.start_suggest <= s && sg.end_suggest >= e, "suggestion narrowed the range");
        o.expect(sg.start_suggest >= 0.0 && sg.end_suggest <= L, "suggestion left [0, L]");
        const auto id = suggest_tool_params({s, e}, L, 0.0, rng());
        o.expect(id.start_suggest == s && id.end_suggest == e, "lambda 0 changed the range");
    }
    const auto ex = suggest_tool_params({10, 20}, 100, 0.2, 1.0, 1.0);
    o.expect(ex.start_suggest == 8.0 && ex.end_suggest == 36.0,
             "u=1 example gave (" + fmt(ex.start_suggest) + ", " + fmt(ex.end_suggest) + ")");
    if (o.pass) o.detail = "10000 draws widen only; (10,20,100,0.2,u=1) -> (8, 36)";
    return o;
}

// ---- 10 --------------------------------------------------------------------

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string pipeline_once(const std::string& samples, std::uint64_t seed) {
    cli::RunConfig cfg;
    cfg.seed = seed;
    const MockPolicySource mock(MockPolicyParams::parse("accuracy=0.5,sigma=0.1"));
    std::istringstream in(samples);
    std::ostringstream traj, log;
    cli::cmd_rollout(cfg, mock, in, traj, log);
    std::istringstream traj_in(traj.str()), samples_in(samples);
    std::ostringstream rewards;
    cli::cmd_reward(cfg, traj_in, samples_in, rewards);
    std::istringstream rewards_in(rewards.str());
    std::ostringstream groups;
    cli::cmd_dgrpo(cfg, AlphaBetaTable::defaults(), rewards_in, groups);
    return traj.str() + rewards.str() + groups.str();
}

Outcome end_to_end_determinism() {
    Outcome o;
    const std::string samples = slurp(fixture("corpus50.jsonl"));
    const auto t0 = Clock::now();
    const std::string a = pipeline_once(samples, 1234);
    const std::string b = pipeline_once(samples, 1234);
    const double dt = seconds_since(t0);
    o.expect(!a.empty(), "empty output");
    o.expect(a == b, "outputs differ between runs");
    o.expect(dt < 30.0, "took " + fmt(dt) + " s");
    if (o.pass) o.detail = std::to_string(a.size()) + " identical bytes twice in " + fmt(dt) + " s";
    return o;
}

// ---- 11 --------------------------------------------------------------------

double mean_weight(double accuracy) {
    cli::RunConfig cfg;
    cfg.seed = 11;
    const MockPolicySource mock(MockPolicyParams::parse("accuracy=" + fmt(accuracy)));
    std::ostringstream samples;
    write_dataset(samples, testsupport::make_corpus(500, 5));
    std::istringstream in(samples.str());
    std::ostringstream traj, log;
    cli::cmd_rollout(cfg, mock, in, traj, log);
    std::istringstream traj_in(traj.str()), samples_in(samples.str());
    std::ostringstream rewards;
    cli::cmd_reward(cfg, traj_in, samples_in, rewards);
    std::istringstream rewards_in(rewards.str());
    std::ostringstream groups;
    cli::cmd_dgrpo(cfg, AlphaBetaTable::defaults(), rewards_in, groups);

    std::istringstream lines(groups.str());
    std::string line;
    double sum = 0.0;
    int n = 0;
    while (std::getline(lines, line)) {
        sum += Json::parse(line).at("weights").at(0).get<double>();
        ++n;
    }
    return n == 0 ? std::nan("") : sum / n;
}

Outcome weight_sanity() {
    Outcome o;
    const std::vector<double> levels{0.2, 0.5, 0.9};
    std::vector<double> w;
    for (double a : levels) w.push_back(mean_weight(a));
    o.expect(w[0] > w[1] && w[1] > w[2], "mean weights " + fmt(w[0]) + ", " + fmt(w[1]) + ", " + fmt(w[2]));
    if (o.pass) o.detail = "mean w " + fmt(w[0]) + " > " + fmt(w[1]) + " > " + fmt(w[2]);
    return o;
}

// ---- 12 --------------------------------------------------------------------

Outcome episode_limits() {
    Outcome o;
    Sample s;
    s.sample_id = "limit";
    s.task = TaskKind::temporal_grounding;
    s.source = "Charades-STA";
    s.video = {"v", 60.0, 30.0};
    s.question = "q";
    s.ground_truth.time_range = TimeRange{10, 20};
    const std::string call =
        R"(<think>more</think><tool_call>{"name":"video_clip","arguments":{"start":5,"end":25}}</tool_call>)";
    ScriptedPolicy policy({call, call, call, R"(<think>t</think><answer>{"start":10,"end":20}</answer>)"});
    Toolbox toolbox(SamplingBudget{}, BackendRegistry::with_stubs());
    toolbox.register_video(s.video);
    EpisodeConfig cfg;
    cfg.max_num_turns = 2;
    const Trajectory t = run_episode(policy, s, toolbox, cfg);
    o.expect(t.successful_tool_rounds() == 2, std::to_string(t.successful_tool_rounds()) + " successful rounds");
    o.expect(t.terminal_reason == TerminalReason::turn_limit,
             "terminal_reason " + std::string(to_string(t.terminal_reason)));
    if (o.pass) o.detail = "2 tool rounds, turn_limit";
    return o;
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"golden_trace", golden_trace},
        {"omega_values", omega_values},
        {"scaling_knots", scaling_knots},
        {"reward_caps", reward_caps},
        {"format_corpus", format_corpus},
        {"metric_oracles", metric_oracles},
        {"advantage_properties", advantage_properties},
        {"filter_rule", filter_rule},
        {"suggestion_widening", suggestion_widening},
        {"end_to_end_determinism", end_to_end_determinism},
        {"weight_sanity", weight_sanity},
        {"episode_limits", episode_limits},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.fail(std::string("exception: ") + e.what());
        }
        if (!o.pass) ++failed;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  " << (i + 1) << ". " << criteria[i].first << " - "
                  << o.detail << std::endl;
    }
    std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " passed"
              << std::endl;
    return failed == 0 ? 0 : 1;
}
