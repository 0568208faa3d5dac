#pragma once

#include <sstream>
#include <string>

#include "clipagent/types.hpp"

namespace testsupport {

inline std::string num(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

// Answer body that scores full accuracy on `s`.
inline std::string perfect_answer(const clipagent::Sample& s) {
    const auto& gt = s.ground_truth;
    if (gt.time_range) {
        std::string body = R"({"start":)" + num(gt.time_range->start) + R"(,"end":)" + num(gt.time_range->end);
        if (gt.answer_text) body += R"(,"answer":")" + *gt.answer_text + "\"";
        return body + "}";
    }
    if (gt.answer_number) return num(*gt.answer_number);
    return *gt.answer_text;
}

}  // namespace testsupport
