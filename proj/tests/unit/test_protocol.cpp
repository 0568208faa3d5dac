#include <doctest.h>

#include <random>

#include "clipagent/protocol.hpp"

using namespace clipagent;

namespace {

const ParsedOutput* ok(const ParseResult& r) { return std::get_if<ParsedOutput>(&r); }

ParseErrorKind kind(const ParseResult& r) {
    REQUIRE(std::holds_alternative<ParseError>(r));
    return std::get<ParseError>(r).kind;
}

const std::string kClip = R"(<tool_call>{"name":"video_clip","arguments":{"start":10,"end":20}}</tool_call>)";

}  // namespace

TEST_CASE("canonical shapes parse") {
    auto tool = parse_model_output("<think>find clip</think>" + kClip, true);
    REQUIRE(ok(tool));
    CHECK(ok(tool)->think_segments == std::vector<std::string>{"find clip"});
    REQUIRE(ok(tool)->tool_call);
    CHECK(ok(tool)->tool_call->name == "video_clip");
    CHECK(ok(tool)->tool_call->arguments["end"] == 20);
    CHECK_FALSE(ok(tool)->answer);

    auto ans = parse_model_output("<think>done</think><answer>B</answer>", true);
    REQUIRE(ok(ans));
    CHECK(*ok(ans)->answer == "B");

    auto spaced = parse_model_output("  <think>a</think>\n\n<answer> B </answer>\n", true);
    REQUIRE(ok(spaced));
    CHECK(*ok(spaced)->answer == " B ");
}

TEST_CASE("parse errors by kind") {
    CHECK(kind(parse_model_output("<answer>B</answer>", true)) == ParseErrorKind::bad_tag_order);
    CHECK(kind(parse_model_output("<think>x</think><tool_call>{bad json</tool_call>", true)) ==
          ParseErrorKind::malformed_json);
    CHECK(kind(parse_model_output(R"(<think>x</think><tool_call>{"name":3,"arguments":{}}</tool_call>)", true)) ==
          ParseErrorKind::malformed_json);
    CHECK(kind(parse_model_output(R"(<think>x</think><tool_call>{"name":"a","arguments":[]}</tool_call>)", true)) ==
          ParseErrorKind::malformed_json);
    CHECK(kind(parse_model_output("<think>x</think><tool_call>[1,2]</tool_call>", true)) ==
          ParseErrorKind::malformed_json);
    CHECK(kind(parse_model_output("<think>x</think>", true)) == ParseErrorKind::no_terminal);
    CHECK(kind(parse_model_output("", true)) == ParseErrorKind::no_terminal);
    CHECK(kind(parse_model_output("<think>x</think><answer>A</answer><answer>B</answer>", true)) ==
          ParseErrorKind::duplicate_answer);
    CHECK(kind(parse_model_output("<think>x<answer>B</answer>", true)) == ParseErrorKind::unbalanced_tags);
    CHECK(kind(parse_model_output("<think>x</think><answer>B", true)) == ParseErrorKind::unbalanced_tags);
    CHECK(kind(parse_model_output("</think><answer>B</answer>", true)) == ParseErrorKind::unbalanced_tags);
    CHECK(kind(parse_model_output("<think>x</think>so <answer>B</answer>", true)) == ParseErrorKind::bad_tag_order);
    CHECK(kind(parse_model_output("<think>x</think><answer>B</answer> trailing", true)) ==
          ParseErrorKind::bad_tag_order);
    CHECK(kind(parse_model_output("<Think>x</Think><answer>B</answer>", true)) == ParseErrorKind::bad_tag_order);
    CHECK(kind(parse_model_output("<think>x</think><answer><think>y</think></answer>", true)) ==
          ParseErrorKind::unbalanced_tags);
    CHECK(kind(parse_model_output("<think>a</think><think>b</think><answer>B</answer>", true)) ==
          ParseErrorKind::bad_tag_order);
    CHECK(kind(parse_model_output("<think>a</think>" + kClip + "<answer>B</answer>", true)) ==
          ParseErrorKind::bad_tag_order);
}

TEST_CASE("non-thinking mode accepts a bare terminal") {
    auto bare = parse_model_output("<answer>B</answer>", false);
    REQUIRE(ok(bare));
    CHECK(ok(bare)->think_segments.empty());
    CHECK(ok(parse_model_output("<think>a</think><answer>B</answer>", false)));
}

TEST_CASE("parser is total and deterministic on random bytes") {
    std::mt19937_64 rng(1234);
    const std::vector<std::string> pieces{"<think>", "</think>", "<answer>", "</answer>", "<tool_call>",
                                          "</tool_call>", "{", "}", "\"name\"", ":", "\"video_clip\"",
                                          "\"arguments\"", " ", "\n", "x", "<", ">", "/", "\xff", "\0"};
    for (int i = 0; i < 20000; ++i) {
        std::string s;
        const int n = static_cast<int>(rng() % 12);
        for (int k = 0; k < n; ++k) {
            if (rng() % 3 == 0) s.push_back(static_cast<char>(rng() & 0xff));
            else s += pieces[rng() % pieces.size()];
        }
        const auto a = parse_model_output(s, (i & 1) != 0);
        const auto b = parse_model_output(s, (i & 1) != 0);
        CHECK(a.index() == b.index());
        if (auto* pa = std::get_if<ParsedOutput>(&a)) CHECK(*pa == std::get<ParsedOutput>(b));
    }
}

TEST_CASE("validate_format shapes") {
    const std::string think = "<think>t</think>";
    const std::string answer = "<answer>B</answer>";
    CHECK(validate_format({think + answer}, true));
    CHECK(validate_format({think + answer}, false));
    CHECK(validate_format({think + kClip, think + answer}, true));
    CHECK_FALSE(validate_format({think + kClip, think + answer}, false));
    CHECK_FALSE(validate_format({think + kClip, answer}, true));
    CHECK(validate_format({think + kClip, think + kClip, think + answer}, true));
    CHECK_FALSE(validate_format({think + kClip, think + kClip, think + kClip, think + answer}, true));
    CHECK(validate_format({think + kClip, think + kClip, think + kClip, think + answer}, true, 3));
    CHECK_FALSE(validate_format({think + kClip + think + answer}, true));
    CHECK_FALSE(validate_format({}, true));
    CHECK_FALSE(validate_format({think + kClip}, true));
}

TEST_CASE("valid format implies every emission parses") {
    std::mt19937_64 rng(99);
    const std::vector<std::string> emissions{"<think>t</think><answer>B</answer>", "<think>t</think>" + kClip,
                                             "<answer>B</answer>", "<think>t</think>", kClip,
                                             "<think>t</think><answer>B", "</answer>", "junk"};
    for (int i = 0; i < 20000; ++i) {
        std::vector<std::string> raw;
        const int n = 1 + static_cast<int>(rng() % 4);
        for (int k = 0; k < n; ++k) raw.push_back(emissions[rng() % emissions.size()]);
        if (validate_format(raw, true)) {
            for (const auto& e : raw) CHECK(std::holds_alternative<ParsedOutput>(parse_model_output(e, true)));
        }
    }
}

TEST_CASE("trajectory render and load round-trip") {
    Trajectory empty;
    empty.sample_id = "s";
    empty.final_answer = "B";
    const std::string line = render_trajectory(empty);
    CHECK(line.find("\"rounds\":[]") != std::string::npos);
    CHECK(render_trajectory(load_trajectory(line)) == line);

    Trajectory t;
    t.sample_id = "s2";
    t.rollout = 3;
    auto first = std::get<ParsedOutput>(parse_model_output("<think>a</think>" + kClip, true));
    Round r1{first, ToolResult::failure("invalid_range", "empty window")};
    auto second = std::get<ParsedOutput>(parse_model_output("<think>b</think><answer>{\"start\":1,\"end\":2}</answer>", true));
    t.rounds = {r1, Round{second, std::nullopt}};
    t.final_answer = *second.answer;
    t.raw_texts = {"<think>a</think>" + kClip, "<think>b</think><answer>{\"start\":1,\"end\":2}</answer>"};
    t.logprob_sums = {-1.5, std::nullopt};
    const std::string rendered = render_trajectory(t);
    CHECK(rendered.find(R"({"name":"video_clip","arguments":{"start":10,"end":20}})") != std::string::npos);
    const Trajectory back = load_trajectory(rendered);
    CHECK(back == t);
    CHECK(render_trajectory(back) == rendered);
}

TEST_CASE("loader rejects inconsistent records") {
    Trajectory t;
    t.sample_id = "s";
    t.terminal_reason = TerminalReason::parse_error;
    std::string line = render_trajectory(t);
    CHECK_NOTHROW(load_trajectory(line));
    t.final_answer = "B";
    Json j = Json::parse(render_trajectory(t));
    CHECK_THROWS_AS(trajectory_from_json(j), SchemaError);
    CHECK_THROWS(load_trajectory("{nope"));
}
