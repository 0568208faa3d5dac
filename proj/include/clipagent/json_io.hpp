#pragma once

#include <cstddef>
#include <functional>
#include <istream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "clipagent/types.hpp"

namespace clipagent {

// File or stream could not be opened, read or written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// All records are emitted with insertion-ordered keys so output bytes are stable.
using Json = nlohmann::ordered_json;

// Schema violation in a JSON record. `line` is 1-based, 0 when unknown.
class SchemaError : public std::runtime_error {
public:
    SchemaError(std::string field, const std::string& message, std::size_t line = 0);

    const std::string& field() const { return field_; }
    const std::string& message() const { return message_; }
    std::size_t line() const { return line_; }

    SchemaError at_line(std::size_t line) const;

private:
    std::string field_;
    std::string message_;
    std::size_t line_;
};

// Strict field accessors: throw SchemaError naming `field` on absence or type mismatch.
const Json& require(const Json& obj, const char* field);
double require_number(const Json& obj, const char* field);
std::string require_string(const Json& obj, const char* field);
void reject_unknown_fields(const Json& obj, std::initializer_list<const char*> allowed,
                           const std::string& context);

Json to_json(const VideoMeta& video);
Json to_json(const TimeRange& range);
Json to_json(const GroundTruth& gt);
Json to_json(const Sample& sample);

VideoMeta video_from_json(const Json& j);
TimeRange range_from_json(const Json& j, const std::string& field);
GroundTruth ground_truth_from_json(const Json& j);
Sample sample_from_json(const Json& j);

// Single-line serialization; invalid UTF-8 is replaced rather than thrown on.
std::string dump_line(const Json& j);

// Calls `fn(json, line_number)` for every non-blank line. Parse failures and
// SchemaErrors raised by `fn` are rethrown with the line number attached.
void for_each_jsonl(std::istream& in, const std::function<void(const Json&, std::size_t)>& fn);

}  // namespace clipagent
