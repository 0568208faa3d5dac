#include "clipagent/json_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace clipagent {

SchemaError::SchemaError(std::string field, const std::string& message, std::size_t line)
    : std::runtime_error((line ? "line " + std::to_string(line) + ": " : std::string()) + field +
                         ": " + message),
      field_(std::move(field)),
      message_(message),
      line_(line) {}

SchemaError SchemaError::at_line(std::size_t line) const { return SchemaError(field_, message_, line); }

const Json& require(const Json& obj, const char* field) {
    if (!obj.is_object()) throw SchemaError(field, "enclosing value is not an object");
    auto it = obj.find(field);
    if (it == obj.end()) throw SchemaError(field, "missing required field");
    return *it;
}

double require_number(const Json& obj, const char* field) {
    const Json& v = require(obj, field);
    if (!v.is_number()) throw SchemaError(field, "expected a number");
    double d = v.get<double>();
    if (!std::isfinite(d)) throw SchemaError(field, "expected a finite number");
    return d;
}

std::string require_string(const Json& obj, const char* field) {
    const Json& v = require(obj, field);
    if (!v.is_string()) throw SchemaError(field, "expected a string");
    return v.get<std::string>();
}

void reject_unknown_fields(const Json& obj, std::initializer_list<const char*> allowed,
                           const std::string& context) {
    for (const auto& [key, _] : obj.items()) {
        bool known = std::any_of(allowed.begin(), allowed.end(),
                                 [&](const char* a) { return key == a; });
        if (!known) throw SchemaError(context.empty() ? key : context + "." + key, "unknown field");
    }
}

namespace {

// Re-raises a nested SchemaError with its field prefixed by `parent`.
template <class Fn>
auto nested(const std::string& parent, Fn&& fn) {
    try {
        return fn();
    } catch (const SchemaError& e) {
        throw SchemaError(parent + "." + e.field(), e.message());
    }
}

std::optional<std::string> optional_string(const Json& obj, const char* field) {
    auto it = obj.find(field);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw SchemaError(field, "expected a string");
    return it->get<std::string>();
}

std::optional<double> optional_number(const Json& obj, const char* field) {
    auto it = obj.find(field);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    return require_number(obj, field);
}

// invalid_argument messages from validate() are "field: message".
[[noreturn]] void rethrow_as_schema(const std::invalid_argument& e) {
    std::string what = e.what();
    auto colon = what.find(": ");
    if (colon == std::string::npos) throw SchemaError("record", what);
    throw SchemaError(what.substr(0, colon), what.substr(colon + 2));
}

}  // namespace

Json to_json(const VideoMeta& video) {
    Json j;
    j["video_id"] = video.video_id;
    j["duration"] = video.duration;
    j["native_fps"] = video.native_fps;
    return j;
}

Json to_json(const TimeRange& range) {
    Json j;
    j["start"] = range.start;
    j["end"] = range.end;
    return j;
}

Json to_json(const GroundTruth& gt) {
    Json j = Json::object();
    if (gt.time_range) j["time_range"] = to_json(*gt.time_range);
    if (gt.answer_text) j["answer_text"] = *gt.answer_text;
    if (gt.answer_number) j["answer_number"] = *gt.answer_number;
    return j;
}

Json to_json(const Sample& sample) {
    Json j;
    j["sample_id"] = sample.sample_id;
    j["task"] = std::string(to_string(sample.task));
    j["source"] = sample.source;
    j["video"] = to_json(sample.video);
    j["question"] = sample.question;
    j["ground_truth"] = to_json(sample.ground_truth);
    return j;
}

VideoMeta video_from_json(const Json& j) {
    if (!j.is_object()) throw SchemaError("video", "expected an object");
    reject_unknown_fields(j, {"video_id", "duration", "native_fps"}, "");
    VideoMeta v;
    v.video_id = require_string(j, "video_id");
    v.duration = require_number(j, "duration");
    v.native_fps = require_number(j, "native_fps");
    try {
        validate(v);
    } catch (const std::invalid_argument& e) {
        std::string what = e.what();
        // validate() reports "video.<field>"; strip the prefix, nested() adds it back.
        auto colon = what.find(": ");
        throw SchemaError(what.substr(6, colon - 6), what.substr(colon + 2));
    }
    return v;
}

TimeRange range_from_json(const Json& j, const std::string& field) {
    if (!j.is_object()) throw SchemaError(field, "expected an object {\"start\", \"end\"}");
    return nested(field, [&] {
        reject_unknown_fields(j, {"start", "end"}, "");
        return TimeRange{require_number(j, "start"), require_number(j, "end")};
    });
}

GroundTruth ground_truth_from_json(const Json& j) {
    if (!j.is_object()) throw SchemaError("ground_truth", "expected an object");
    return nested("ground_truth", [&] {
        reject_unknown_fields(j, {"time_range", "answer_text", "answer_number"}, "");
        GroundTruth gt;
        if (auto it = j.find("time_range"); it != j.end() && !it->is_null())
            gt.time_range = range_from_json(*it, "time_range");
        gt.answer_text = optional_string(j, "answer_text");
        gt.answer_number = optional_number(j, "answer_number");
        return gt;
    });
}

Sample sample_from_json(const Json& j) {
    if (!j.is_object()) throw SchemaError("record", "expected a JSON object");
    reject_unknown_fields(j, {"sample_id", "task", "source", "video", "question", "ground_truth"}, "");
    Sample s;
    s.sample_id = require_string(j, "sample_id");
    const std::string task = require_string(j, "task");
    auto kind = task_kind_from_string(task);
    if (!kind) throw SchemaError("task", "unknown task kind '" + task + "'");
    s.task = *kind;
    s.source = require_string(j, "source");
    s.video = nested("video", [&] { return video_from_json(require(j, "video")); });
    s.question = require_string(j, "question");
    s.ground_truth = ground_truth_from_json(require(j, "ground_truth"));
    try {
        validate(s);
    } catch (const std::invalid_argument& e) {
        rethrow_as_schema(e);
    }
    return s;
}

std::string dump_line(const Json& j) { return j.dump(-1, ' ', false, Json::error_handler_t::replace); }

void for_each_jsonl(std::istream& in, const std::function<void(const Json&, std::size_t)>& fn) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); }))
            continue;
        Json j = Json::parse(line, nullptr, false);
        if (j.is_discarded()) throw SchemaError("record", "line is not valid JSON", line_no);
        try {
            fn(j, line_no);
        } catch (const SchemaError& e) {
            if (e.line() != 0) throw;
            throw e.at_line(line_no);
        } catch (const Json::exception& e) {
            throw SchemaError("record", e.what(), line_no);
        }
    }
}

}  // namespace clipagent
