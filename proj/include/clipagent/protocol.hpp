#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "clipagent/toolbox.hpp"

namespace clipagent {

enum class Role { system, user, assistant, tool };
std::string_view to_string(Role role);
std::optional<Role> role_from_string(std::string_view name);

struct Message {
    Role role = Role::user;
    std::string text;
    // Only the initial user message and clip results carry video.
    std::vector<VideoClip> attachments;
};

Json to_json(const Message& m);
Message message_from_json(const Json& j);

struct ParsedOutput {
    std::vector<std::string> think_segments;
    std::optional<ToolCall> tool_call;
    std::optional<std::string> answer;

    bool operator==(const ParsedOutput&) const = default;
};

enum class ParseErrorKind { unbalanced_tags, bad_tag_order, malformed_json, no_terminal, duplicate_answer };
std::string_view to_string(ParseErrorKind kind);

struct ParseError {
    ParseErrorKind kind;
    std::string detail;

    bool operator==(const ParseError&) const = default;
};

using ParseResult = std::variant<ParsedOutput, ParseError>;

// Accepts exactly `<think>..</think><tool_call>{json}</tool_call>` or
// `<think>..</think><answer>..</answer>` (think optional when thinking_mode is off).
// Whitespace between tags is ignored; any other text outside tags, or any tag
// nested inside a block, is an error. Never throws.
ParseResult parse_model_output(std::string_view text, bool thinking_mode);

// True iff the concatenated emissions form think (tool_call think){0..max_tool_rounds} answer,
// and every emission parses on its own. With tools disabled only think answer is accepted.
bool validate_format(const std::vector<std::string>& raw_texts, bool tools_enabled,
                     int max_tool_rounds = 2);

enum class TerminalReason { answered, parse_error, turn_limit, length_limit };
std::string_view to_string(TerminalReason reason);
std::optional<TerminalReason> terminal_reason_from_string(std::string_view name);

struct Round {
    ParsedOutput output;
    std::optional<ToolResult> tool_result;

    bool operator==(const Round&) const = default;
};

struct Trajectory {
    std::string sample_id;
    int rollout = 0;
    std::vector<Round> rounds;
    std::optional<std::string> final_answer;
    TerminalReason terminal_reason = TerminalReason::answered;
    std::vector<std::string> raw_texts;
    std::vector<std::optional<double>> logprob_sums;

    int tool_rounds() const;
    int successful_tool_rounds() const;
    bool operator==(const Trajectory&) const = default;
};

Json to_json(const ParsedOutput& p);
Json to_json(const Trajectory& t);
Trajectory trajectory_from_json(const Json& j);

// Single-line JSON record with fixed key order.
std::string render_trajectory(const Trajectory& t);
Trajectory load_trajectory(std::string_view line);

}  // namespace clipagent
