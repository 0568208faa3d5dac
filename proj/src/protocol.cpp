#include "clipagent/protocol.hpp"

#include <algorithm>
#include <array>

namespace clipagent {

std::string_view to_string(Role role) {
    switch (role) {
        case Role::system: return "system";
        case Role::user: return "user";
        case Role::assistant: return "assistant";
        case Role::tool: return "tool";
    }
    return "unknown";
}

std::optional<Role> role_from_string(std::string_view name) {
    for (Role r : {Role::system, Role::user, Role::assistant, Role::tool})
        if (to_string(r) == name) return r;
    return std::nullopt;
}

Json to_json(const Message& m) {
    Json j;
    j["role"] = std::string(to_string(m.role));
    j["text"] = m.text;
    j["attachments"] = Json::array();
    for (const auto& clip : m.attachments) j["attachments"].push_back(to_json(clip));
    return j;
}

Message message_from_json(const Json& j) {
    Message m;
    const std::string role = require_string(j, "role");
    auto r = role_from_string(role);
    if (!r) throw SchemaError("role", "unknown role '" + role + "'");
    m.role = *r;
    m.text = require_string(j, "text");
    if (auto it = j.find("attachments"); it != j.end()) {
        if (!it->is_array()) throw SchemaError("attachments", "expected an array");
        for (const auto& a : *it) m.attachments.push_back(clip_from_json(a));
    }
    return m;
}

std::string_view to_string(ParseErrorKind kind) {
    switch (kind) {
        case ParseErrorKind::unbalanced_tags: return "unbalanced_tags";
        case ParseErrorKind::bad_tag_order: return "bad_tag_order";
        case ParseErrorKind::malformed_json: return "malformed_json";
        case ParseErrorKind::no_terminal: return "no_terminal";
        case ParseErrorKind::duplicate_answer: return "duplicate_answer";
    }
    return "unknown";
}

namespace {

enum class Tag { think, tool_call, answer };

struct TagSpec {
    Tag tag;
    std::string_view open;
    std::string_view close;
};

constexpr std::array<TagSpec, 3> kTags{{
    {Tag::think, "<think>", "</think>"},
    {Tag::tool_call, "<tool_call>", "</tool_call>"},
    {Tag::answer, "<answer>", "</answer>"},
}};

struct Block {
    Tag tag;
    std::string_view body;
};

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

bool starts_with(std::string_view s, std::size_t pos, std::string_view prefix) {
    return s.substr(pos, prefix.size()) == prefix;
}

// Position and identity of the next tag token (open or close) at or after `from`.
struct TagHit {
    std::size_t pos = std::string_view::npos;
    const TagSpec* spec = nullptr;
    bool closing = false;
};

TagHit next_tag(std::string_view s, std::size_t from) {
    TagHit hit;
    for (std::size_t p = s.find('<', from); p != std::string_view::npos; p = s.find('<', p + 1)) {
        for (const auto& spec : kTags) {
            if (starts_with(s, p, spec.open)) return {p, &spec, false};
            if (starts_with(s, p, spec.close)) return {p, &spec, true};
        }
    }
    return hit;
}

std::variant<std::vector<Block>, ParseError> tokenize(std::string_view s) {
    std::vector<Block> blocks;
    std::size_t pos = 0;
    while (true) {
        while (pos < s.size() && is_space(s[pos])) ++pos;
        if (pos >= s.size()) break;

        const TagSpec* open = nullptr;
        for (const auto& spec : kTags)
            if (starts_with(s, pos, spec.open)) open = &spec;
        if (!open) {
            TagHit stray = next_tag(s, pos);
            if (stray.pos == pos && stray.closing)
                return ParseError{ParseErrorKind::unbalanced_tags,
                                  "closing " + std::string(stray.spec->close) + " without opening tag"};
            return ParseError{ParseErrorKind::bad_tag_order,
                              "text outside tags at offset " + std::to_string(pos)};
        }
        const std::size_t body_begin = pos + open->open.size();
        TagHit hit = next_tag(s, body_begin);
        if (hit.pos == std::string_view::npos)
            return ParseError{ParseErrorKind::unbalanced_tags, "missing " + std::string(open->close)};
        if (!(hit.closing && hit.spec == open))
            return ParseError{ParseErrorKind::unbalanced_tags,
                              "unexpected tag inside " + std::string(open->open) + " block"};
        blocks.push_back({open->tag, s.substr(body_begin, hit.pos - body_begin)});
        pos = hit.pos + open->close.size();
    }
    return blocks;
}

std::variant<ToolCall, ParseError> parse_tool_call_body(std::string_view body) {
    Json j = Json::parse(body.begin(), body.end(), nullptr, false);
    if (j.is_discarded()) return ParseError{ParseErrorKind::malformed_json, "tool_call body is not valid JSON"};
    if (!j.is_object()) return ParseError{ParseErrorKind::malformed_json, "tool_call body is not a JSON object"};
    auto name = j.find("name");
    if (name == j.end() || !name->is_string())
        return ParseError{ParseErrorKind::malformed_json, "tool_call requires string field \"name\""};
    auto args = j.find("arguments");
    if (args == j.end() || !args->is_object())
        return ParseError{ParseErrorKind::malformed_json, "tool_call requires object field \"arguments\""};
    return ToolCall{name->get<std::string>(), *args};
}

}  // namespace

ParseResult parse_model_output(std::string_view text, bool thinking_mode) {
    auto tokens = tokenize(text);
    if (auto* err = std::get_if<ParseError>(&tokens)) return *err;
    const auto& blocks = std::get<std::vector<Block>>(tokens);

    const auto answers = std::count_if(blocks.begin(), blocks.end(),
                                       [](const Block& b) { return b.tag == Tag::answer; });
    if (answers > 1) return ParseError{ParseErrorKind::duplicate_answer, "more than one <answer> block"};
    const bool has_terminal = std::any_of(blocks.begin(), blocks.end(),
                                          [](const Block& b) { return b.tag != Tag::think; });
    if (!has_terminal) return ParseError{ParseErrorKind::no_terminal, "no <tool_call> or <answer> block"};

    const bool leading_think = !blocks.empty() && blocks.front().tag == Tag::think;
    const std::size_t expected = (thinking_mode || leading_think) ? 2 : 1;
    if (blocks.size() != expected || (expected == 2 && !leading_think) ||
        blocks.back().tag == Tag::think) {
        return ParseError{ParseErrorKind::bad_tag_order,
                          thinking_mode ? "expected <think> followed by exactly one <tool_call> or <answer>"
                                        : "expected an optional <think> and one <tool_call> or <answer>"};
    }

    ParsedOutput out;
    if (leading_think) out.think_segments.emplace_back(blocks.front().body);
    const Block& terminal = blocks.back();
    if (terminal.tag == Tag::answer) {
        out.answer = std::string(terminal.body);
    } else {
        auto call = parse_tool_call_body(terminal.body);
        if (auto* err = std::get_if<ParseError>(&call)) return *err;
        out.tool_call = std::move(std::get<ToolCall>(call));
    }
    return out;
}

bool validate_format(const std::vector<std::string>& raw_texts, bool tools_enabled, int max_tool_rounds) {
    std::string joined;
    for (const auto& t : raw_texts) joined += t;
    auto tokens = tokenize(joined);
    if (std::holds_alternative<ParseError>(tokens)) return false;
    const auto& blocks = std::get<std::vector<Block>>(tokens);

    // think (tool_call think)* answer
    if (blocks.size() < 2 || blocks.size() % 2 != 0) return false;
    if (blocks.front().tag != Tag::think || blocks.back().tag != Tag::answer) return false;
    for (std::size_t i = 1; i + 1 < blocks.size(); ++i) {
        const Tag want = (i % 2 == 1) ? Tag::tool_call : Tag::think;
        if (blocks[i].tag != want) return false;
    }
    const auto tool_rounds = static_cast<int>((blocks.size() - 2) / 2);
    if (tool_rounds > (tools_enabled ? max_tool_rounds : 0)) return false;

    return std::all_of(raw_texts.begin(), raw_texts.end(), [](const std::string& t) {
        return std::holds_alternative<ParsedOutput>(parse_model_output(t, true));
    });
}

std::string_view to_string(TerminalReason reason) {
    switch (reason) {
        case TerminalReason::answered: return "answered";
        case TerminalReason::parse_error: return "parse_error";
        case TerminalReason::turn_limit: return "turn_limit";
        case TerminalReason::length_limit: return "length_limit";
    }
    return "unknown";
}

std::optional<TerminalReason> terminal_reason_from_string(std::string_view name) {
    for (auto r : {TerminalReason::answered, TerminalReason::parse_error, TerminalReason::turn_limit,
                   TerminalReason::length_limit})
        if (to_string(r) == name) return r;
    return std::nullopt;
}

int Trajectory::tool_rounds() const {
    return static_cast<int>(std::count_if(rounds.begin(), rounds.end(),
                                          [](const Round& r) { return r.tool_result.has_value(); }));
}

int Trajectory::successful_tool_rounds() const {
    return static_cast<int>(std::count_if(rounds.begin(), rounds.end(), [](const Round& r) {
        return r.tool_result && r.tool_result->ok();
    }));
}

Json to_json(const ParsedOutput& p) {
    Json j;
    j["think"] = p.think_segments;
    j["tool_call"] = p.tool_call ? to_json(*p.tool_call) : Json(nullptr);
    j["answer"] = p.answer ? Json(*p.answer) : Json(nullptr);
    return j;
}

Json to_json(const Trajectory& t) {
    Json j;
    j["sample_id"] = t.sample_id;
    j["rollout"] = t.rollout;
    j["rounds"] = Json::array();
    for (const auto& r : t.rounds) {
        Json rj = to_json(r.output);
        rj["tool_result"] = r.tool_result ? to_json(*r.tool_result) : Json(nullptr);
        j["rounds"].push_back(std::move(rj));
    }
    j["final_answer"] = t.final_answer ? Json(*t.final_answer) : Json(nullptr);
    j["terminal_reason"] = std::string(to_string(t.terminal_reason));
    j["raw_texts"] = t.raw_texts;
    j["logprob_sums"] = Json::array();
    for (const auto& lp : t.logprob_sums) j["logprob_sums"].push_back(lp ? Json(*lp) : Json(nullptr));
    return j;
}

Trajectory trajectory_from_json(const Json& j) {
    if (!j.is_object()) throw SchemaError("record", "expected a JSON object");
    reject_unknown_fields(j, {"sample_id", "rollout", "rounds", "final_answer", "terminal_reason",
                              "raw_texts", "logprob_sums"}, "");
    Trajectory t;
    t.sample_id = require_string(j, "sample_id");
    if (auto it = j.find("rollout"); it != j.end()) {
        if (!it->is_number_integer()) throw SchemaError("rollout", "expected an integer");
        t.rollout = it->get<int>();
    }
    const Json& rounds = require(j, "rounds");
    if (!rounds.is_array()) throw SchemaError("rounds", "expected an array");
    for (const auto& rj : rounds) {
        Round r;
        const Json& think = require(rj, "think");
        if (!think.is_array()) throw SchemaError("rounds.think", "expected an array");
        for (const auto& s : think) {
            if (!s.is_string()) throw SchemaError("rounds.think", "expected strings");
            r.output.think_segments.push_back(s.get<std::string>());
        }
        if (const Json& tc = require(rj, "tool_call"); !tc.is_null()) r.output.tool_call = tool_call_from_json(tc);
        if (const Json& a = require(rj, "answer"); !a.is_null()) {
            if (!a.is_string()) throw SchemaError("rounds.answer", "expected a string");
            r.output.answer = a.get<std::string>();
        }
        if (const Json& tr = require(rj, "tool_result"); !tr.is_null())
            r.tool_result = tool_result_from_json(tr);
        t.rounds.push_back(std::move(r));
    }
    if (const Json& fa = require(j, "final_answer"); !fa.is_null()) {
        if (!fa.is_string()) throw SchemaError("final_answer", "expected a string");
        t.final_answer = fa.get<std::string>();
    }
    const std::string reason = require_string(j, "terminal_reason");
    auto tr = terminal_reason_from_string(reason);
    if (!tr) throw SchemaError("terminal_reason", "unknown value '" + reason + "'");
    t.terminal_reason = *tr;
    if (t.final_answer.has_value() != (t.terminal_reason == TerminalReason::answered))
        throw SchemaError("final_answer", "must be present iff terminal_reason is answered");

    const Json& raw = require(j, "raw_texts");
    if (!raw.is_array()) throw SchemaError("raw_texts", "expected an array");
    for (const auto& s : raw) {
        if (!s.is_string()) throw SchemaError("raw_texts", "expected strings");
        t.raw_texts.push_back(s.get<std::string>());
    }
    if (auto it = j.find("logprob_sums"); it != j.end()) {
        if (!it->is_array()) throw SchemaError("logprob_sums", "expected an array");
        for (const auto& v : *it) {
            if (v.is_null()) t.logprob_sums.emplace_back(std::nullopt);
            else if (v.is_number()) t.logprob_sums.emplace_back(v.get<double>());
            else throw SchemaError("logprob_sums", "expected numbers or null");
        }
    }
    return t;
}

std::string render_trajectory(const Trajectory& t) { return dump_line(to_json(t)); }

Trajectory load_trajectory(std::string_view line) {
    Json j = Json::parse(line.begin(), line.end(), nullptr, false);
    if (j.is_discarded()) throw SchemaError("record", "not valid JSON");
    return trajectory_from_json(j);
}

}  // namespace clipagent
