#pragma once

#include <cstddef>
#include <vector>

#include "clipagent/policy.hpp"
#include "clipagent/protocol.hpp"
#include "clipagent/toolbox.hpp"

namespace clipagent {

struct EpisodeConfig {
    int max_num_turns = 2;                 // dispatched tool rounds per episode
    std::size_t max_response_length = 4096;  // characters per emission
    bool thinking_mode = true;
    bool tools_enabled = true;
    SamplingBudget initial_budget{2.0, 64, 224 * 224};  // frames attached to the user message
};

// Initial context: system prompt (with tool schemas when enabled) and the user
// message carrying the question and the whole-video frame sequence.
std::vector<Message> initial_context(const Sample& sample, const EpisodeConfig& cfg);

// Runs one episode to completion. Policy, parse and tool failures end up in
// Trajectory::terminal_reason; only TransportError from an external policy propagates.
//
//  - a parse error is fed back once as a tool-role error dictionary; a second ends the episode
//  - after max_num_turns dispatched tool calls, a further tool call ends it with turn_limit
//  - an emission longer than max_response_length ends it with length_limit
Trajectory run_episode(Policy& policy, const Sample& sample, const Toolbox& toolbox,
                       const EpisodeConfig& cfg, int rollout = 0);

}  // namespace clipagent
