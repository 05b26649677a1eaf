#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "reflecsched/reflect.hpp"

namespace reflecsched {

struct ChatMessage {
    std::string role;
    std::string content;
    bool operator==(const ChatMessage&) const = default;
};

using Messages = std::vector<ChatMessage>;

struct TokenUsage {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;

    TokenUsage& operator+=(const TokenUsage& o) {
        prompt_tokens += o.prompt_tokens;
        completion_tokens += o.completion_tokens;
        return *this;
    }
    bool operator==(const TokenUsage&) const = default;
};

struct ModelEndpoint {
    std::string base_url;
    std::string model_name;
    // Name of the environment variable holding the key; the key itself is
    // never stored or logged.
    std::string api_key_env = "OPENAI_API_KEY";
    double timeout_s = 60.0;
    int max_retries = 3;
    int concurrency_cap = 4;
};

struct SamplingProfile {
    enum class Mode { Decision, DiagnosticVote };

    Mode mode = Mode::Decision;
    double temperature = 0.2;
    int samples = 1;

    static SamplingProfile decision() { return {Mode::Decision, 0.2, 1}; }
    static SamplingProfile diagnostic_vote() { return {Mode::DiagnosticVote, 0.8, 5}; }
    void validate() const;
};

enum class CallRole { Reflection, Decision };

std::string_view to_string(CallRole role);

class TokenLedger {
public:
    struct Call {
        CallRole role;
        TokenUsage usage;
    };

    void record(CallRole role, TokenUsage usage);
    std::vector<Call> calls() const;
    TokenUsage total(CallRole role) const;
    TokenUsage total() const;

private:
    mutable std::mutex mutex_;
    std::vector<Call> calls_;
};

struct ChatRequest {
    std::string model;
    Messages messages;
    double temperature = 0.2;
    std::optional<std::int64_t> seed;

    // OpenAI-compatible chat-completions body.
    nlohmann::json to_json() const;
    // Stable hash of the canonical body; keys cassette entries.
    std::string hash() const;
};

struct ChatReply {
    std::string text;
    TokenUsage usage;
};

class TransportError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ChatTransport {
public:
    virtual ~ChatTransport() = default;
    // Throws TransportError on failure.
    virtual ChatReply send(const ChatRequest& request) = 0;
    // True when the endpoint can be reached at all.
    virtual bool probe() { return true; }
};

// OpenAI-compatible HTTP(S) transport. The only network client in the code.
class HttpTransport final : public ChatTransport {
public:
    explicit HttpTransport(ModelEndpoint endpoint);
    ChatReply send(const ChatRequest& request) override;
    bool probe() override;

private:
    ModelEndpoint endpoint_;
};

// Offline stand-in: answers come from a callback.
class ScriptedTransport final : public ChatTransport {
public:
    using Script = std::function<ChatReply(const ChatRequest&, std::size_t call_index)>;

    explicit ScriptedTransport(Script script);
    // Cycles through fixed replies.
    explicit ScriptedTransport(std::vector<std::string> replies);

    ChatReply send(const ChatRequest& request) override;
    std::size_t calls() const;
    std::vector<ChatRequest> requests() const;

private:
    Script script_;
    mutable std::mutex mutex_;
    std::size_t calls_ = 0;
    std::vector<ChatRequest> requests_;
};

// Request-hash -> reply transcript stored as JSON lines. In Replay mode an
// unknown request is a TransportError; in Record mode it is forwarded to the
// inner transport and appended to the file.
class CassetteTransport final : public ChatTransport {
public:
    enum class Mode { Record, Replay };

    CassetteTransport(std::filesystem::path path, Mode mode, std::shared_ptr<ChatTransport> inner = nullptr);

    ChatReply send(const ChatRequest& request) override;
    bool probe() override;
    std::size_t size() const;

private:
    std::filesystem::path path_;
    Mode mode_;
    std::shared_ptr<ChatTransport> inner_;
    mutable std::mutex mutex_;
    std::map<std::string, ChatReply> entries_;
};

class ChatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ChatOutcome {
    // Reply of the first sample agreeing with the vote (or the only sample).
    std::string text;
    TokenUsage usage;
    // Parsed action; for DiagnosticVote, the majority over samples.
    std::optional<std::size_t> action;
    std::vector<std::string> samples;
};

// Counting semaphore with a runtime limit.
class InflightLimiter {
public:
    explicit InflightLimiter(int limit);
    void acquire();
    void release();

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    int available_;
};

class ChatClient {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    ChatClient(std::shared_ptr<ChatTransport> transport, ModelEndpoint endpoint, Sleeper sleeper = {});

    // Sends `profile.samples` requests. When num_actions > 0 each reply is
    // parsed with parse_action and the result majority-voted. Transport
    // failures are retried with exponential backoff; after max_retries the
    // call throws ChatError.
    ChatOutcome chat(const Messages& messages, const SamplingProfile& profile, CallRole role,
                     std::size_t num_actions = 0, std::uint64_t request_seed = 0, TokenLedger* ledger = nullptr);

    ChatTransport& transport() { return *transport_; }
    const ModelEndpoint& endpoint() const { return endpoint_; }

private:
    ChatReply send_with_retry(const ChatRequest& request);

    std::shared_ptr<ChatTransport> transport_;
    ModelEndpoint endpoint_;
    Sleeper sleeper_;
    std::shared_ptr<InflightLimiter> limiter_;
};

// Index from the last "ACTION: k" in the text, if 0 <= k < num_actions.
std::optional<std::size_t> parse_action(std::string_view text, std::size_t num_actions);

// Most frequent valid vote; ties go to the lowest index.
std::optional<std::size_t> majority_vote(const std::vector<std::optional<std::size_t>>& votes);

// Rule named by the last "PREFERRED_RULE: X" line, if it is in the pool.
std::optional<RuleId> parse_preferred_rule(std::string_view text, std::span<const RuleId> pool);

std::string render_digest(const TrajectoryDigest& digest, const Instance& instance);

Messages build_reflection_prompt(const TrajectoryDigest& best, const TrajectoryDigest& worst,
                                 const std::string& prior_text, int level, const Instance& instance,
                                 std::span<const RuleId> pool);

Messages build_decision_prompt(const std::string& state_summary, const std::vector<std::string>& action_lines,
                               const std::string& experience_text);

// Prompt of the direct baseline. An empty static block omits that section.
Messages build_direct_prompt(const std::string& static_block, const std::string& dynamic_summary,
                             const std::vector<std::string>& action_lines);

// Reflector backed by a chat model.
class RemoteReflector final : public Reflector {
public:
    RemoteReflector(std::shared_ptr<ChatClient> client, SamplingProfile profile, TokenLedger* ledger = nullptr);

    std::string name() const override { return "remote"; }
    Experience synthesize(const ReflectionRequest& request) override;

private:
    std::shared_ptr<ChatClient> client_;
    SamplingProfile profile_;
    TokenLedger* ledger_;
};

}  // namespace reflecsched
