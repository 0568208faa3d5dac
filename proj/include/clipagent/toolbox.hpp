#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "clipagent/json_io.hpp"
#include "clipagent/types.hpp"

namespace clipagent {

struct SamplingBudget {
    double sample_fps = 2.0;
    int max_frames = 64;
    std::int64_t max_pixels = 224 * 224;
};

// A clip is represented by its frame timestamps and per-frame pixel budget only.
struct VideoClip {
    std::string source;
    double start = 0.0;
    double end = 0.0;
    std::vector<double> frame_timestamps;
    std::int64_t pixels_per_frame = 0;

    bool operator==(const VideoClip&) const = default;
};

struct ToolCall {
    std::string name;
    Json arguments = Json::object();

    bool operator==(const ToolCall&) const = default;
};

namespace tool_error {
inline constexpr std::string_view invalid_range = "invalid_range";
inline constexpr std::string_view bad_arguments = "bad_arguments";
inline constexpr std::string_view unknown_tool = "unknown_tool";
inline constexpr std::string_view backend_unavailable = "backend_unavailable";
inline constexpr std::string_view backend_failure = "backend_failure";
inline constexpr std::string_view unknown_video = "unknown_video";
}  // namespace tool_error

struct ToolError {
    std::string kind;
    std::string detail;

    bool operator==(const ToolError&) const = default;
};

// Exactly one of clip / payload / error is set.
struct ToolResult {
    std::optional<VideoClip> clip;
    std::optional<Json> payload;
    std::optional<ToolError> error;

    bool ok() const { return !error.has_value(); }

    static ToolResult with_clip(VideoClip c);
    static ToolResult with_payload(Json p);
    static ToolResult failure(std::string_view kind, std::string detail);

    bool operator==(const ToolResult&) const = default;
};

// {"error": kind, "detail": text}
Json error_json(std::string_view kind, std::string_view detail);

// Wire form stored in trajectories: {"clip": {...}}, {"payload": {...}} or the error dictionary.
Json to_json(const VideoClip& clip);
Json to_json(const ToolResult& result);
Json to_json(const ToolCall& call);
VideoClip clip_from_json(const Json& j);
ToolResult tool_result_from_json(const Json& j);
ToolCall tool_call_from_json(const Json& j);

// Text handed back to the model in the tool-role message.
std::string tool_message_text(const ToolResult& result);

// Uniform 1/sample_fps spacing from `start`; when that exceeds max_frames the
// window is re-spread to exactly max_frames evenly spaced timestamps.
// Requires 0 <= start < end.
std::vector<double> sample_frames(double start, double end, const SamplingBudget& budget);

// Clamps [start, end] into [0, duration]; never throws.
ToolResult clip(const VideoMeta& video, double start, double end, const SamplingBudget& budget);

// Exact rational rate, tokens per pixel.
struct TokenRate {
    std::int64_t numerator = 1;
    std::int64_t denominator = 784;
};

// frames * ceil(pixels_per_frame * rate)
std::int64_t token_cost(const VideoClip& clip, TokenRate rate);

// Content generator behind clip_caption / clip_qa.
class ContentBackend {
public:
    virtual ~ContentBackend() = default;

    // Returns {"caption": ...} or {"answer": ...}. May throw; dispatch converts to an error.
    virtual Json run(const VideoMeta& video, double start, double end,
                     const std::optional<std::string>& question) = 0;
    virtual bool concurrency_safe() const { return false; }
};

// Deterministic placeholder content.
class StubBackend final : public ContentBackend {
public:
    explicit StubBackend(std::string key) : key_(std::move(key)) {}
    Json run(const VideoMeta&, double, double, const std::optional<std::string>&) override;
    bool concurrency_safe() const override { return true; }

private:
    std::string key_;
};

// Maps tool name to backend. Calls into backends that are not concurrency-safe are serialized.
class BackendRegistry {
public:
    void register_backend(const std::string& tool_name, std::shared_ptr<ContentBackend> backend);
    bool has(const std::string& tool_name) const;
    Json invoke(const std::string& tool_name, const VideoMeta& video, double start, double end,
                const std::optional<std::string>& question) const;

    // clip_caption and clip_qa wired to StubBackend.
    static BackendRegistry with_stubs();

private:
    struct Entry {
        std::shared_ptr<ContentBackend> backend;
        std::shared_ptr<std::mutex> lock;
    };
    std::map<std::string, Entry> entries_;
};

inline constexpr std::string_view kVideoClipTool = "video_clip";
inline constexpr std::string_view kClipCaptionTool = "clip_caption";
inline constexpr std::string_view kClipQaTool = "clip_qa";

// Total: every call yields a ToolResult, nothing escapes.
ToolResult dispatch(const ToolCall& call, const VideoMeta& video, const SamplingBudget& budget,
                    const BackendRegistry& backends);

// Video registry plus tool configuration, shared by concurrent episodes.
class Toolbox {
public:
    Toolbox(SamplingBudget budget, BackendRegistry backends)
        : budget_(budget), backends_(std::move(backends)) {}

    void register_video(const VideoMeta& video);
    const VideoMeta* find_video(const std::string& video_id) const;
    const SamplingBudget& budget() const { return budget_; }

    // Thread-safe once registration is finished.
    ToolResult dispatch(const ToolCall& call, const std::string& video_id) const;

private:
    SamplingBudget budget_;
    BackendRegistry backends_;
    std::map<std::string, VideoMeta> videos_;
};

// JSONL of VideoMeta records.
std::vector<VideoMeta> read_video_registry(std::istream& in);

}  // namespace clipagent
