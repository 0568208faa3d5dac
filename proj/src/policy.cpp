#include "clipagent/policy.hpp"

#include <netdb.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

namespace clipagent {

// ---- scripted -------------------------------------------------------------

ScriptedPolicy::ScriptedPolicy(std::vector<std::string> emissions,
                               std::vector<std::optional<double>> logprobs)
    : emissions_(std::move(emissions)), logprobs_(std::move(logprobs)) {}

PolicyOutput ScriptedPolicy::generate(const std::vector<Message>&, std::size_t) {
    if (next_ >= emissions_.size()) return {};
    PolicyOutput out{emissions_[next_], std::nullopt};
    if (next_ < logprobs_.size()) out.logprob_sum = logprobs_[next_];
    ++next_;
    return out;
}

void ScriptSource::set(const std::string& sample_id, Rollouts rollouts) {
    if (rollouts.empty()) throw std::invalid_argument("script for '" + sample_id + "' has no rollouts");
    scripts_[sample_id] = std::move(rollouts);
}

ScriptSource ScriptSource::from_jsonl(std::istream& in) {
    ScriptSource src;
    for_each_jsonl(in, [&](const Json& j, std::size_t) {
        reject_unknown_fields(j, {"sample_id", "rollouts"}, "");
        const std::string id = require_string(j, "sample_id");
        const Json& rs = require(j, "rollouts");
        if (!rs.is_array() || rs.empty()) throw SchemaError("rollouts", "expected a non-empty array");
        Rollouts rollouts;
        for (const auto& r : rs) {
            if (!r.is_array()) throw SchemaError("rollouts", "each rollout must be an array of strings");
            std::vector<std::string> emissions;
            for (const auto& e : r) {
                if (!e.is_string()) throw SchemaError("rollouts", "each emission must be a string");
                emissions.push_back(e.get<std::string>());
            }
            rollouts.push_back(std::move(emissions));
        }
        src.set(id, std::move(rollouts));
    });
    return src;
}

std::unique_ptr<Policy> ScriptSource::open(const Sample& sample, int rollout, std::uint64_t) const {
    auto it = scripts_.find(sample.sample_id);
    if (it == scripts_.end()) it = scripts_.find("*");
    if (it == scripts_.end())
        throw std::invalid_argument("no script for sample '" + sample.sample_id + "'");
    const auto& rollouts = it->second;
    return std::make_unique<ScriptedPolicy>(rollouts[static_cast<std::size_t>(rollout) % rollouts.size()]);
}

// ---- mock -----------------------------------------------------------------

MockPolicyParams MockPolicyParams::parse(const std::string& spec) {
    MockPolicyParams p;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        auto eq = item.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("mock parameter '" + item + "' lacks '='");
        const std::string key = item.substr(0, eq);
        double value = 0.0;
        try {
            std::size_t used = 0;
            value = std::stod(item.substr(eq + 1), &used);
            if (used != item.size() - eq - 1) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw std::invalid_argument("mock parameter '" + key + "' is not a number");
        }
        if (key == "accuracy") p.accuracy = value;
        else if (key == "sigma") p.sigma = value;
        else if (key == "p_tool") p.p_tool = value;
        else if (key == "p_malformed") p.p_malformed = value;
        else throw std::invalid_argument("unknown mock parameter '" + key + "'");
    }
    auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!unit(p.accuracy) || !unit(p.p_tool) || !unit(p.p_malformed) || !(p.sigma >= 0.0))
        throw std::invalid_argument("mock probabilities must lie in [0, 1] and sigma must be >= 0");
    return p;
}

namespace {

class MockPolicy final : public Policy {
public:
    MockPolicy(const Sample& sample, const MockPolicyParams& params, std::uint64_t seed)
        : sample_(sample), params_(params), rng_(seed) {
        correct_ = bernoulli(params_.accuracy);
        use_tool_ = bernoulli(params_.p_tool);
    }

    PolicyOutput generate(const std::vector<Message>& context, std::size_t) override {
        const bool after_tool = !context.empty() && context.back().role == Role::tool;
        std::string text;
        if (bernoulli(params_.p_malformed)) {
            text = "<think>Let me answer directly.</think>The answer is unclear.";
        } else if (use_tool_ && !after_tool && calls_ == 0) {
            ++calls_;
            text = "<think>I need a closer look at the relevant part of the video.</think><tool_call>" +
                   dump_line(tool_call_json()) + "</tool_call>";
        } else {
            text = "<think>Based on what I have seen, I can answer now.</think><answer>" + answer_text() +
                   "</answer>";
        }
        std::normal_distribution<double> n01(0.0, 1.0);
        const double logprob = -0.02 * static_cast<double>(text.size()) - std::abs(n01(rng_));
        return {std::move(text), logprob};
    }

private:
    bool bernoulli(double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < p; }
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }

    TimeRange guess_range() {
        const double L = sample_.video.duration;
        const TimeRange gt = sample_.ground_truth.time_range.value_or(TimeRange{0.0, L});
        TimeRange r;
        if (correct_) {
            r = gt;
            if (const double sd = params_.sigma * gt.length(); sd > 0.0) {
                std::normal_distribution<double> noise(0.0, sd);
                r.start += noise(rng_);
                r.end += noise(rng_);
            }
        } else {
            const double len = uniform(0.05, 0.3) * L;
            const double s = uniform(0.0, L - len);
            r = {s, s + len};
        }
        r.start = std::clamp(r.start, 0.0, L);
        r.end = std::clamp(r.end, 0.0, L);
        if (r.start > r.end) std::swap(r.start, r.end);
        return r;
    }

    Json tool_call_json() {
        const double L = sample_.video.duration;
        TimeRange w{0.25 * L, 0.75 * L};
        if (const auto& gt = sample_.ground_truth.time_range) {
            const double pad = 0.2 * gt->length();
            w = {std::max(0.0, gt->start - pad), std::min(L, gt->end + pad)};
        }
        Json j;
        j["name"] = std::string(kVideoClipTool);
        j["arguments"] = {{"start", round_to(w.start)}, {"end", round_to(w.end)}};
        return j;
    }

    static double round_to(double v) { return std::round(v * 10.0) / 10.0; }

    std::string text_answer() {
        const std::string gt = sample_.ground_truth.answer_text.value_or("");
        if (correct_) return gt;
        std::istringstream words(gt);
        std::string w, out;
        while (words >> w) {
            if (!out.empty()) out += ' ';
            out += bernoulli(0.5) ? std::string("something") : w;
        }
        return out.empty() ? std::string("unknown") : out;
    }

    std::string letter_answer() {
        const std::string gt = sample_.ground_truth.answer_text.value_or("A");
        if (correct_) return gt;
        static constexpr char kLetters[] = {'A', 'B', 'C', 'D', 'E'};
        std::string wrong;
        do {
            wrong = std::string(1, kLetters[std::uniform_int_distribution<int>(0, 4)(rng_)]);
        } while (wrong == gt);
        return wrong;
    }

    double number_truth() const {
        if (sample_.ground_truth.answer_number) return *sample_.ground_truth.answer_number;
        try {
            return std::stod(sample_.ground_truth.answer_text.value_or("0"));
        } catch (const std::exception&) {
            return 0.0;
        }
    }

    std::string answer_text() {
        Json j;
        switch (sample_.task) {
            case TaskKind::temporal_grounding: {
                const TimeRange r = guess_range();
                j["start"] = round_to(r.start);
                j["end"] = round_to(r.end);
                return dump_line(j);
            }
            case TaskKind::grounded_vqa_mcq:
            case TaskKind::grounded_vqa_open: {
                const TimeRange r = guess_range();
                j["start"] = round_to(r.start);
                j["end"] = round_to(r.end);
                j["answer"] = sample_.task == TaskKind::grounded_vqa_mcq ? letter_answer() : text_answer();
                return dump_line(j);
            }
            case TaskKind::vqa_mcq: return letter_answer();
            case TaskKind::vqa_number: {
                const double y = number_truth();
                return Json(correct_ ? y : y + std::uniform_int_distribution<int>(1, 5)(rng_)).dump();
            }
            case TaskKind::vqa_regression: {
                const double y = number_truth();
                const double rel = correct_ ? std::normal_distribution<double>(0.0, 0.02)(rng_) : uniform(0.3, 1.5);
                return Json(y * (1.0 + rel)).dump();
            }
            case TaskKind::vqa_open:
            case TaskKind::vqa_ocr: return text_answer();
        }
        return "";
    }

    Sample sample_;
    MockPolicyParams params_;
    std::mt19937_64 rng_;
    bool correct_ = false;
    bool use_tool_ = false;
    int calls_ = 0;
};

}  // namespace

std::unique_ptr<Policy> MockPolicySource::open(const Sample& sample, int, std::uint64_t seed) const {
    return std::make_unique<MockPolicy>(sample, params_, seed);
}

// ---- stream ---------------------------------------------------------------

TcpLineTransport::TcpLineTransport(const std::string& host, int port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const std::string port_str = std::to_string(port);
    if (int rc = ::getaddrinfo(host.c_str(), port_str.c_str(), &hints, &res); rc != 0)
        throw TransportError("cannot resolve " + host + ": " + ::gai_strerror(rc));
    std::string last_error = "no addresses";
    for (addrinfo* ai = res; ai; ai = ai->ai_next) {
        int fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
            fd_ = fd;
            break;
        }
        last_error = std::strerror(errno);
        ::close(fd);
    }
    ::freeaddrinfo(res);
    if (fd_ < 0) throw TransportError("cannot connect to " + host + ":" + port_str + ": " + last_error);
}

TcpLineTransport::~TcpLineTransport() {
    if (fd_ >= 0) ::close(fd_);
}

void TcpLineTransport::send_line(const std::string& line) {
    std::string data = line + "\n";
    std::size_t sent = 0;
    while (sent < data.size()) {
        ssize_t n = ::send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw TransportError(std::string("send failed: ") + std::strerror(errno));
        }
        sent += static_cast<std::size_t>(n);
    }
}

std::string TcpLineTransport::recv_line() {
    while (true) {
        if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            return line;
        }
        char chunk[4096];
        ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
        if (n < 0 && errno == EINTR) continue;
        if (n < 0) throw TransportError(std::string("recv failed: ") + std::strerror(errno));
        if (n == 0) throw TransportError("connection closed by policy endpoint");
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

Json make_policy_request(const std::vector<Message>& context, std::size_t max_length) {
    Json j;
    j["context"] = Json::array();
    for (const auto& m : context) j["context"].push_back(to_json(m));
    j["max_length"] = max_length;
    return j;
}

PolicyOutput parse_policy_response(const std::string& line) {
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw TransportError("policy response is not a JSON object");
    auto text = j.find("text");
    if (text == j.end() || !text->is_string()) throw TransportError("policy response lacks string \"text\"");
    PolicyOutput out{text->get<std::string>(), std::nullopt};
    if (auto lp = j.find("logprob_sum"); lp != j.end() && !lp->is_null()) {
        if (!lp->is_number()) throw TransportError("policy response \"logprob_sum\" is not a number");
        out.logprob_sum = lp->get<double>();
    }
    return out;
}

PolicyOutput StreamPolicy::generate(const std::vector<Message>& context, std::size_t max_length) {
    transport_->send_line(dump_line(make_policy_request(context, max_length)));
    return parse_policy_response(transport_->recv_line());
}

EndpointSource::EndpointSource(const std::string& address) {
    auto colon = address.rfind(':');
    if (colon == std::string::npos || colon == 0)
        throw std::invalid_argument("endpoint must be HOST:PORT, got '" + address + "'");
    host_ = address.substr(0, colon);
    try {
        std::size_t used = 0;
        port_ = std::stoi(address.substr(colon + 1), &used);
        if (used != address.size() - colon - 1 || port_ <= 0 || port_ > 65535) throw std::out_of_range(address);
    } catch (const std::exception&) {
        throw std::invalid_argument("invalid endpoint port in '" + address + "'");
    }
}

std::unique_ptr<Policy> EndpointSource::open(const Sample&, int, std::uint64_t) const {
    return std::make_unique<StreamPolicy>(std::make_unique<TcpLineTransport>(host_, port_));
}

void EndpointSource::probe() const { TcpLineTransport probe(host_, port_); }

std::unique_ptr<PolicySource> make_policy_source(const std::string& spec) {
    auto colon = spec.find(':');
    const std::string scheme = spec.substr(0, colon);
    const std::string rest = colon == std::string::npos ? std::string() : spec.substr(colon + 1);
    if (scheme == "script") {
        std::ifstream in(rest);
        if (!in) throw IoError("cannot open policy script '" + rest + "'");
        return std::make_unique<ScriptSource>(ScriptSource::from_jsonl(in));
    }
    if (scheme == "mock") return std::make_unique<MockPolicySource>(MockPolicyParams::parse(rest));
    if (scheme == "endpoint") return std::make_unique<EndpointSource>(rest);
    throw std::invalid_argument("unknown policy scheme '" + scheme + "' (expected script:, mock: or endpoint:)");
}

}  // namespace clipagent
