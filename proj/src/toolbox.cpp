#include "clipagent/toolbox.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <variant>

namespace clipagent {

ToolResult ToolResult::with_clip(VideoClip c) {
    ToolResult r;
    r.clip = std::move(c);
    return r;
}

ToolResult ToolResult::with_payload(Json p) {
    ToolResult r;
    r.payload = std::move(p);
    return r;
}

ToolResult ToolResult::failure(std::string_view kind, std::string detail) {
    ToolResult r;
    r.error = ToolError{std::string(kind), std::move(detail)};
    return r;
}

Json error_json(std::string_view kind, std::string_view detail) {
    Json j;
    j["error"] = std::string(kind);
    j["detail"] = std::string(detail);
    return j;
}

Json to_json(const VideoClip& clip) {
    Json j;
    j["source"] = clip.source;
    j["start"] = clip.start;
    j["end"] = clip.end;
    j["frame_timestamps"] = clip.frame_timestamps;
    j["pixels_per_frame"] = clip.pixels_per_frame;
    return j;
}

Json to_json(const ToolResult& result) {
    if (result.error) return error_json(result.error->kind, result.error->detail);
    Json j;
    if (result.clip) j["clip"] = to_json(*result.clip);
    else j["payload"] = result.payload.value_or(Json::object());
    return j;
}

Json to_json(const ToolCall& call) {
    Json j;
    j["name"] = call.name;
    j["arguments"] = call.arguments;
    return j;
}

VideoClip clip_from_json(const Json& j) {
    reject_unknown_fields(j, {"source", "start", "end", "frame_timestamps", "pixels_per_frame"}, "clip");
    VideoClip c;
    c.source = require_string(j, "source");
    c.start = require_number(j, "start");
    c.end = require_number(j, "end");
    const Json& ts = require(j, "frame_timestamps");
    if (!ts.is_array()) throw SchemaError("clip.frame_timestamps", "expected an array");
    for (const auto& t : ts) {
        if (!t.is_number()) throw SchemaError("clip.frame_timestamps", "expected numbers");
        c.frame_timestamps.push_back(t.get<double>());
    }
    const Json& px = require(j, "pixels_per_frame");
    if (!px.is_number_integer()) throw SchemaError("clip.pixels_per_frame", "expected an integer");
    c.pixels_per_frame = px.get<std::int64_t>();
    return c;
}

ToolResult tool_result_from_json(const Json& j) {
    if (!j.is_object()) throw SchemaError("tool_result", "expected an object");
    if (j.contains("error")) {
        reject_unknown_fields(j, {"error", "detail"}, "tool_result");
        return ToolResult::failure(require_string(j, "error"), require_string(j, "detail"));
    }
    if (j.contains("clip")) {
        reject_unknown_fields(j, {"clip"}, "tool_result");
        return ToolResult::with_clip(clip_from_json(j.at("clip")));
    }
    if (j.contains("payload")) {
        reject_unknown_fields(j, {"payload"}, "tool_result");
        return ToolResult::with_payload(j.at("payload"));
    }
    throw SchemaError("tool_result", "expected one of clip, payload, error");
}

ToolCall tool_call_from_json(const Json& j) {
    if (!j.is_object()) throw SchemaError("tool_call", "expected an object");
    ToolCall c;
    c.name = require_string(j, "name");
    const Json& args = require(j, "arguments");
    if (!args.is_object()) throw SchemaError("tool_call.arguments", "expected an object");
    c.arguments = args;
    return c;
}

std::string tool_message_text(const ToolResult& result) {
    if (result.error) return dump_line(error_json(result.error->kind, result.error->detail));
    if (result.clip) {
        Json j;
        j["name"] = std::string(kVideoClipTool);
        j["start"] = result.clip->start;
        j["end"] = result.clip->end;
        j["num_frames"] = result.clip->frame_timestamps.size();
        return dump_line(j);
    }
    return dump_line(result.payload.value_or(Json::object()));
}

std::vector<double> sample_frames(double start, double end, const SamplingBudget& budget) {
    const double span = end - start;
    // Absorb representation error so e.g. 10 s at 2 fps is 20 frames, not 21.
    const double exact = span * budget.sample_fps;
    auto count = static_cast<std::int64_t>(std::ceil(exact - 1e-9));
    count = std::max<std::int64_t>(count, 1);

    std::vector<double> ts;
    if (count <= budget.max_frames) {
        ts.reserve(static_cast<std::size_t>(count));
        for (std::int64_t i = 0; i < count; ++i)
            ts.push_back(start + static_cast<double>(i) / budget.sample_fps);
    } else {
        const auto n = static_cast<std::size_t>(budget.max_frames);
        ts.reserve(n);
        for (std::size_t i = 0; i < n; ++i)
            ts.push_back(start + span * static_cast<double>(i) / static_cast<double>(n));
    }
    return ts;
}

ToolResult clip(const VideoMeta& video, double start, double end, const SamplingBudget& budget) {
    if (!std::isfinite(start) || !std::isfinite(end))
        return ToolResult::failure(tool_error::bad_arguments, "start and end must be finite numbers");
    const double s = std::clamp(start, 0.0, video.duration);
    const double e = std::clamp(end, 0.0, video.duration);
    if (!(s < e)) {
        return ToolResult::failure(tool_error::invalid_range,
                                   "empty window after clamping to [0, " +
                                       Json(video.duration).dump() + "]: start=" + Json(s).dump() +
                                       ", end=" + Json(e).dump());
    }
    VideoClip c;
    c.source = video.video_id;
    c.start = s;
    c.end = e;
    c.frame_timestamps = sample_frames(s, e, budget);
    c.pixels_per_frame = budget.max_pixels;
    return ToolResult::with_clip(std::move(c));
}

std::int64_t token_cost(const VideoClip& clip, TokenRate rate) {
    // ceil(p * n / d) for non-negative integers
    const std::int64_t scaled = clip.pixels_per_frame * rate.numerator;
    const std::int64_t per_frame = (scaled + rate.denominator - 1) / rate.denominator;
    return static_cast<std::int64_t>(clip.frame_timestamps.size()) * per_frame;
}

Json StubBackend::run(const VideoMeta&, double, double, const std::optional<std::string>&) {
    Json j;
    j[key_] = "<stub>";
    return j;
}

void BackendRegistry::register_backend(const std::string& tool_name,
                                       std::shared_ptr<ContentBackend> backend) {
    entries_[tool_name] = Entry{std::move(backend), std::make_shared<std::mutex>()};
}

bool BackendRegistry::has(const std::string& tool_name) const {
    auto it = entries_.find(tool_name);
    return it != entries_.end() && it->second.backend != nullptr;
}

Json BackendRegistry::invoke(const std::string& tool_name, const VideoMeta& video, double start,
                             double end, const std::optional<std::string>& question) const {
    const Entry& entry = entries_.at(tool_name);
    if (entry.backend->concurrency_safe()) return entry.backend->run(video, start, end, question);
    std::lock_guard guard(*entry.lock);
    return entry.backend->run(video, start, end, question);
}

BackendRegistry BackendRegistry::with_stubs() {
    BackendRegistry r;
    r.register_backend(std::string(kClipCaptionTool), std::make_shared<StubBackend>("caption"));
    r.register_backend(std::string(kClipQaTool), std::make_shared<StubBackend>("answer"));
    return r;
}

namespace {

// Accepts JSON numbers and numeric strings such as "12.5".
std::optional<double> coerce_seconds(const Json& v) {
    double d = 0.0;
    if (v.is_number()) {
        d = v.get<double>();
    } else if (v.is_string()) {
        const auto& s = v.get_ref<const std::string&>();
        auto first = s.find_first_not_of(" \t\n\r");
        auto last = s.find_last_not_of(" \t\n\r");
        if (first == std::string::npos) return std::nullopt;
        const char* b = s.data() + first;
        const char* e = s.data() + last + 1;
        if (*b == '+') ++b;
        auto [ptr, ec] = std::from_chars(b, e, d);
        if (ec != std::errc() || ptr != e) return std::nullopt;
    } else {
        return std::nullopt;
    }
    if (!std::isfinite(d)) return std::nullopt;
    return d;
}

struct Window {
    double start;
    double end;
};

std::variant<Window, ToolResult> read_window(const Json& args) {
    if (!args.is_object())
        return ToolResult::failure(tool_error::bad_arguments, "arguments must be a JSON object");
    auto s = args.find("start");
    auto e = args.find("end");
    if (s == args.end() || e == args.end())
        return ToolResult::failure(tool_error::bad_arguments, "missing 'start' or 'end'");
    auto start = coerce_seconds(*s);
    auto end = coerce_seconds(*e);
    if (!start || !end)
        return ToolResult::failure(tool_error::bad_arguments, "'start' and 'end' must be finite numbers");
    return Window{*start, *end};
}

ToolResult run_content_tool(const ToolCall& call, const VideoMeta& video,
                            const BackendRegistry& backends, bool needs_question) {
    auto window = read_window(call.arguments);
    if (auto* err = std::get_if<ToolResult>(&window)) return *err;
    const auto [start, end] = std::get<Window>(window);

    std::optional<std::string> question;
    if (needs_question) {
        auto q = call.arguments.find("question");
        if (q == call.arguments.end() || !q->is_string())
            return ToolResult::failure(tool_error::bad_arguments, "missing string argument 'question'");
        question = q->get<std::string>();
    }
    const double s = std::clamp(start, 0.0, video.duration);
    const double e = std::clamp(end, 0.0, video.duration);
    if (!(s < e)) return ToolResult::failure(tool_error::invalid_range, "empty window after clamping");
    if (!backends.has(call.name))
        return ToolResult::failure(tool_error::backend_unavailable,
                                   "no backend registered for '" + call.name + "'");
    try {
        Json payload = backends.invoke(call.name, video, s, e, question);
        if (!payload.is_object())
            return ToolResult::failure(tool_error::backend_failure, "backend returned a non-object");
        return ToolResult::with_payload(std::move(payload));
    } catch (const std::exception& ex) {
        return ToolResult::failure(tool_error::backend_failure, ex.what());
    } catch (...) {
        return ToolResult::failure(tool_error::backend_failure, "unknown backend exception");
    }
}

}  // namespace

ToolResult dispatch(const ToolCall& call, const VideoMeta& video, const SamplingBudget& budget,
                    const BackendRegistry& backends) {
    if (call.name == kVideoClipTool) {
        auto window = read_window(call.arguments);
        if (auto* err = std::get_if<ToolResult>(&window)) return *err;
        const auto [start, end] = std::get<Window>(window);
        return clip(video, start, end, budget);
    }
    if (call.name == kClipCaptionTool) return run_content_tool(call, video, backends, false);
    if (call.name == kClipQaTool) return run_content_tool(call, video, backends, true);
    return ToolResult::failure(tool_error::unknown_tool, "no tool named '" + call.name + "'");
}

void Toolbox::register_video(const VideoMeta& video) {
    validate(video);
    videos_[video.video_id] = video;
}

const VideoMeta* Toolbox::find_video(const std::string& video_id) const {
    auto it = videos_.find(video_id);
    return it == videos_.end() ? nullptr : &it->second;
}

ToolResult Toolbox::dispatch(const ToolCall& call, const std::string& video_id) const {
    const VideoMeta* video = find_video(video_id);
    if (!video) return ToolResult::failure(tool_error::unknown_video, "video '" + video_id + "' is not registered");
    return clipagent::dispatch(call, *video, budget_, backends_);
}

std::vector<VideoMeta> read_video_registry(std::istream& in) {
    std::vector<VideoMeta> videos;
    for_each_jsonl(in, [&](const Json& j, std::size_t) { videos.push_back(video_from_json(j)); });
    return videos;
}

}  // namespace clipagent
