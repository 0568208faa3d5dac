#include "clipagent/episode.hpp"

#include "clipagent/assets.hpp"

namespace clipagent {

std::vector<Message> initial_context(const Sample& sample, const EpisodeConfig& cfg) {
    std::vector<Message> ctx;
    ctx.push_back({Role::system, assets::system_prompt(cfg.tools_enabled), {}});

    Message user{Role::user, assets::user_prompt(sample), {}};
    if (auto whole = clip(sample.video, 0.0, sample.video.duration, cfg.initial_budget); whole.clip)
        user.attachments.push_back(std::move(*whole.clip));
    ctx.push_back(std::move(user));
    return ctx;
}

Trajectory run_episode(Policy& policy, const Sample& sample, const Toolbox& toolbox,
                       const EpisodeConfig& cfg, int rollout) {
    Trajectory traj;
    traj.sample_id = sample.sample_id;
    traj.rollout = rollout;

    std::vector<Message> context = initial_context(sample, cfg);
    const int turn_limit = cfg.tools_enabled ? cfg.max_num_turns : 0;
    int tool_rounds = 0;
    int parse_failures = 0;

    while (true) {
        PolicyOutput out = policy.generate(context, cfg.max_response_length);
        traj.raw_texts.push_back(out.text);
        traj.logprob_sums.push_back(out.logprob_sum);

        if (out.text.size() > cfg.max_response_length) {
            traj.terminal_reason = TerminalReason::length_limit;
            break;
        }
        context.push_back({Role::assistant, out.text, {}});

        ParseResult parsed = parse_model_output(out.text, cfg.thinking_mode);
        if (auto* err = std::get_if<ParseError>(&parsed)) {
            if (++parse_failures >= 2) {
                traj.terminal_reason = TerminalReason::parse_error;
                break;
            }
            context.push_back({Role::tool, dump_line(error_json(to_string(err->kind), err->detail)), {}});
            continue;
        }

        ParsedOutput& step = std::get<ParsedOutput>(parsed);
        if (step.answer) {
            traj.final_answer = step.answer;
            traj.rounds.push_back({std::move(step), std::nullopt});
            traj.terminal_reason = TerminalReason::answered;
            break;
        }
        if (tool_rounds >= turn_limit) {
            traj.rounds.push_back({std::move(step), std::nullopt});
            traj.terminal_reason = TerminalReason::turn_limit;
            break;
        }

        ToolResult result = toolbox.dispatch(*step.tool_call, sample.video.video_id);
        ++tool_rounds;
        Message tool_msg{Role::tool, tool_message_text(result), {}};
        if (result.clip) tool_msg.attachments.push_back(*result.clip);
        context.push_back(std::move(tool_msg));
        traj.rounds.push_back({std::move(step), std::move(result)});
    }
    return traj;
}

}  // namespace clipagent
