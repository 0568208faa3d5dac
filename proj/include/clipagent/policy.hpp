#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "clipagent/protocol.hpp"

namespace clipagent {

struct PolicyOutput {
    std::string text;
    std::optional<double> logprob_sum;
};

// One instance drives one episode; instances are never shared across threads.
class Policy {
public:
    virtual ~Policy() = default;
    virtual PolicyOutput generate(const std::vector<Message>& context, std::size_t max_length) = 0;
};

// Creates the policy for rollout `rollout` of `sample`. Must be safe to call concurrently.
class PolicySource {
public:
    virtual ~PolicySource() = default;
    virtual std::unique_ptr<Policy> open(const Sample& sample, int rollout, std::uint64_t seed) const = 0;
};

// Raised when an external policy cannot be reached or misbehaves on the wire.
class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---- scripted replay ------------------------------------------------------

// Replays fixed emissions in order; once exhausted it emits empty text.
class ScriptedPolicy final : public Policy {
public:
    explicit ScriptedPolicy(std::vector<std::string> emissions,
                            std::vector<std::optional<double>> logprobs = {});
    PolicyOutput generate(const std::vector<Message>& context, std::size_t max_length) override;

private:
    std::vector<std::string> emissions_;
    std::vector<std::optional<double>> logprobs_;
    std::size_t next_ = 0;
};

// Script file: JSONL lines {"sample_id": id or "*", "rollouts": [[emission, ...], ...]}.
// Rollout k of a sample replays rollouts[k % n]; "*" matches samples without their own entry.
class ScriptSource final : public PolicySource {
public:
    using Rollouts = std::vector<std::vector<std::string>>;

    ScriptSource() = default;
    void set(const std::string& sample_id, Rollouts rollouts);
    static ScriptSource from_jsonl(std::istream& in);

    std::unique_ptr<Policy> open(const Sample& sample, int rollout, std::uint64_t seed) const override;

private:
    std::map<std::string, Rollouts> scripts_;
};

// ---- stochastic mock ------------------------------------------------------

struct MockPolicyParams {
    double accuracy = 0.5;      // probability the answer is drawn near / equal to the ground truth
    double sigma = 0.05;        // boundary noise for near-correct ranges, as a fraction of gt length
    double p_tool = 0.5;        // probability of calling video_clip before answering
    double p_malformed = 0.0;   // probability an emission is structurally broken

    // "accuracy=0.5,sigma=0.05,p_tool=0.5,p_malformed=0"
    static MockPolicyParams parse(const std::string& spec);
};

// Looks at the sample's ground truth to fabricate plausible emissions; seeded and deterministic.
class MockPolicySource final : public PolicySource {
public:
    explicit MockPolicySource(MockPolicyParams params) : params_(params) {}
    std::unique_ptr<Policy> open(const Sample& sample, int rollout, std::uint64_t seed) const override;
    const MockPolicyParams& params() const { return params_; }

private:
    MockPolicyParams params_;
};

// ---- external policy over newline-delimited JSON --------------------------

// Bidirectional line-oriented byte stream.
class LineTransport {
public:
    virtual ~LineTransport() = default;
    virtual void send_line(const std::string& line) = 0;
    virtual std::string recv_line() = 0;
};

class TcpLineTransport final : public LineTransport {
public:
    // Throws TransportError if the endpoint cannot be reached.
    TcpLineTransport(const std::string& host, int port);
    ~TcpLineTransport() override;
    TcpLineTransport(const TcpLineTransport&) = delete;
    TcpLineTransport& operator=(const TcpLineTransport&) = delete;

    void send_line(const std::string& line) override;
    std::string recv_line() override;

private:
    int fd_ = -1;
    std::string buffer_;
};

// Request {"context": [Message...], "max_length": N}; response {"text": ..., "logprob_sum": ...}.
Json make_policy_request(const std::vector<Message>& context, std::size_t max_length);
PolicyOutput parse_policy_response(const std::string& line);

class StreamPolicy final : public Policy {
public:
    explicit StreamPolicy(std::unique_ptr<LineTransport> transport) : transport_(std::move(transport)) {}
    PolicyOutput generate(const std::vector<Message>& context, std::size_t max_length) override;

private:
    std::unique_ptr<LineTransport> transport_;
};

// Opens one TCP connection per episode to "host:port".
class EndpointSource final : public PolicySource {
public:
    explicit EndpointSource(const std::string& address);
    std::unique_ptr<Policy> open(const Sample& sample, int rollout, std::uint64_t seed) const override;

    // Connects and disconnects once; throws TransportError when unreachable.
    void probe() const;

private:
    std::string host_;
    int port_ = 0;
};

// "script:PATH", "mock:k=v,..." or "endpoint:HOST:PORT".
std::unique_ptr<PolicySource> make_policy_source(const std::string& spec);

}  // namespace clipagent
