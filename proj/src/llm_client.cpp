#include "reflecsched/llm_client.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "reflecsched/hash.hpp"
#include "reflecsched/io.hpp"

namespace reflecsched {

using nlohmann::json;

void SamplingProfile::validate() const {
    if (samples < 1) throw std::invalid_argument("samples must be >= 1");
    if (mode == Mode::DiagnosticVote && samples % 2 == 0) {
        throw std::invalid_argument("diagnostic vote needs an odd sample count");
    }
    if (mode == Mode::Decision && samples != 1) throw std::invalid_argument("decision mode draws one sample");
}

std::string_view to_string(CallRole role) { return role == CallRole::Reflection ? "reflection" : "decision"; }

void TokenLedger::record(CallRole role, TokenUsage usage) {
    std::lock_guard lock(mutex_);
    calls_.push_back({role, usage});
}

std::vector<TokenLedger::Call> TokenLedger::calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
}

TokenUsage TokenLedger::total(CallRole role) const {
    std::lock_guard lock(mutex_);
    TokenUsage sum;
    for (const auto& c : calls_) {
        if (c.role == role) sum += c.usage;
    }
    return sum;
}

TokenUsage TokenLedger::total() const {
    std::lock_guard lock(mutex_);
    TokenUsage sum;
    for (const auto& c : calls_) sum += c.usage;
    return sum;
}

json ChatRequest::to_json() const {
    json msgs = json::array();
    for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    json body = {{"model", model}, {"messages", std::move(msgs)}, {"temperature", temperature}};
    if (seed) body["seed"] = *seed;
    return body;
}

std::string ChatRequest::hash() const { return to_hex(fnv1a64(to_json().dump())); }

namespace {

struct ParsedUrl {
    std::string scheme_host_port;
    std::string path;
};

ParsedUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw std::invalid_argument("base_url needs a scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    ParsedUrl out;
    out.scheme_host_port = url.substr(0, path_start);
    out.path = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
    return out;
}

httplib::Headers auth_headers(const ModelEndpoint& endpoint) {
    httplib::Headers headers;
    if (!endpoint.api_key_env.empty()) {
        if (const char* key = std::getenv(endpoint.api_key_env.c_str()); key && *key) {
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }
    }
    return headers;
}

void configure(httplib::Client& client, const ModelEndpoint& endpoint) {
    const auto seconds = static_cast<time_t>(endpoint.timeout_s);
    const auto micros = static_cast<time_t>((endpoint.timeout_s - static_cast<double>(seconds)) * 1e6);
    client.set_connection_timeout(seconds, micros);
    client.set_read_timeout(seconds, micros);
    client.set_write_timeout(seconds, micros);
}

}  // namespace

HttpTransport::HttpTransport(ModelEndpoint endpoint) : endpoint_(std::move(endpoint)) {
    split_url(endpoint_.base_url);
}

ChatReply HttpTransport::send(const ChatRequest& request) {
    const auto url = split_url(endpoint_.base_url);
    httplib::Client client(url.scheme_host_port);
    configure(client, endpoint_);
    const auto res = client.Post(url.path + "/chat/completions", auth_headers(endpoint_), request.to_json().dump(),
                                 "application/json");
    if (!res) throw TransportError("request failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw TransportError("HTTP status " + std::to_string(res->status));
    try {
        const json body = json::parse(res->body);
        ChatReply reply;
        reply.text = body.at("choices").at(0).at("message").at("content").get<std::string>();
        if (const auto usage = body.find("usage"); usage != body.end() && usage->is_object()) {
            reply.usage.prompt_tokens = usage->value("prompt_tokens", std::int64_t{0});
            reply.usage.completion_tokens = usage->value("completion_tokens", std::int64_t{0});
        }
        return reply;
    } catch (const json::exception& e) {
        throw TransportError(std::string("malformed response: ") + e.what());
    }
}

bool HttpTransport::probe() {
    const auto url = split_url(endpoint_.base_url);
    httplib::Client client(url.scheme_host_port);
    configure(client, endpoint_);
    return static_cast<bool>(client.Get(url.path + "/models", auth_headers(endpoint_)));
}

ScriptedTransport::ScriptedTransport(Script script) : script_(std::move(script)) {}

ScriptedTransport::ScriptedTransport(std::vector<std::string> replies) {
    if (replies.empty()) throw std::invalid_argument("ScriptedTransport: no replies");
    script_ = [replies = std::move(replies)](const ChatRequest& req, std::size_t i) {
        ChatReply reply{replies[i % replies.size()], {}};
        for (const auto& m : req.messages) reply.usage.prompt_tokens += static_cast<std::int64_t>(m.content.size() / 4);
        reply.usage.completion_tokens = static_cast<std::int64_t>(reply.text.size() / 4);
        return reply;
    };
}

ChatReply ScriptedTransport::send(const ChatRequest& request) {
    std::size_t index = 0;
    {
        std::lock_guard lock(mutex_);
        index = calls_++;
        requests_.push_back(request);
    }
    return script_(request, index);
}

std::size_t ScriptedTransport::calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
}

std::vector<ChatRequest> ScriptedTransport::requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
}

CassetteTransport::CassetteTransport(std::filesystem::path path, Mode mode, std::shared_ptr<ChatTransport> inner)
    : path_(std::move(path)), mode_(mode), inner_(std::move(inner)) {
    if (mode_ == Mode::Record && !inner_) throw std::invalid_argument("CassetteTransport: recording needs a transport");
    if (!std::filesystem::exists(path_)) {
        if (mode_ == Mode::Replay) throw std::invalid_argument("cassette not found: " + path_.string());
        return;
    }
    std::ifstream in(path_);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const json entry = json::parse(line);
            const json& r = entry.at("response");
            ChatReply reply{r.at("text").get<std::string>(),
                            {r.value("prompt_tokens", std::int64_t{0}), r.value("completion_tokens", std::int64_t{0})}};
            entries_.emplace(entry.at("request_hash").get<std::string>(), std::move(reply));
        } catch (const json::exception& e) {
            throw FormatError(path_.string() + ":" + std::to_string(line_no), e.what());
        }
    }
}

ChatReply CassetteTransport::send(const ChatRequest& request) {
    const std::string key = request.hash();
    {
        std::lock_guard lock(mutex_);
        if (const auto it = entries_.find(key); it != entries_.end()) return it->second;
    }
    if (mode_ == Mode::Replay) throw TransportError("cassette has no reply for request " + key);

    ChatReply reply = inner_->send(request);
    std::lock_guard lock(mutex_);
    if (entries_.emplace(key, reply).second) {
        if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
        std::ofstream out(path_, std::ios::app);
        const json entry = {{"request_hash", key},
                            {"request", request.to_json()},
                            {"response",
                             {{"text", reply.text},
                              {"prompt_tokens", reply.usage.prompt_tokens},
                              {"completion_tokens", reply.usage.completion_tokens}}}};
        out << entry.dump() << '\n';
    }
    return reply;
}

bool CassetteTransport::probe() { return mode_ == Mode::Replay || inner_->probe(); }

std::size_t CassetteTransport::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

InflightLimiter::InflightLimiter(int limit) : available_(std::max(limit, 1)) {}

void InflightLimiter::acquire() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [this] { return available_ > 0; });
    --available_;
}

void InflightLimiter::release() {
    {
        std::lock_guard lock(mutex_);
        ++available_;
    }
    cv_.notify_one();
}

ChatClient::ChatClient(std::shared_ptr<ChatTransport> transport, ModelEndpoint endpoint, Sleeper sleeper)
    : transport_(std::move(transport)),
      endpoint_(std::move(endpoint)),
      sleeper_(std::move(sleeper)),
      limiter_(std::make_shared<InflightLimiter>(endpoint_.concurrency_cap)) {
    if (!transport_) throw std::invalid_argument("ChatClient: null transport");
    if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

ChatReply ChatClient::send_with_retry(const ChatRequest& request) {
    std::string last_error;
    for (int attempt = 0; attempt <= std::max(endpoint_.max_retries, 0); ++attempt) {
        if (attempt > 0) {
            const auto delay = std::chrono::milliseconds(std::min<std::int64_t>(500LL << (attempt - 1), 8000));
            sleeper_(delay);
        }
        limiter_->acquire();
        try {
            ChatReply reply = transport_->send(request);
            limiter_->release();
            return reply;
        } catch (const TransportError& e) {
            limiter_->release();
            last_error = e.what();
        }
    }
    throw ChatError("chat failed after " + std::to_string(std::max(endpoint_.max_retries, 0) + 1) +
                    " attempts: " + last_error);
}

ChatOutcome ChatClient::chat(const Messages& messages, const SamplingProfile& profile, CallRole role,
                             std::size_t num_actions, std::uint64_t request_seed, TokenLedger* ledger) {
    if (messages.empty()) throw std::invalid_argument("chat: no messages");
    profile.validate();
    ChatOutcome outcome;
    std::vector<std::optional<std::size_t>> votes;
    for (int s = 0; s < profile.samples; ++s) {
        ChatRequest request{endpoint_.model_name, messages, profile.temperature, std::nullopt};
        request.seed = static_cast<std::int64_t>(Rng::derive(request_seed, static_cast<std::uint64_t>(s)) >> 33);
        const ChatReply reply = send_with_retry(request);
        if (ledger) ledger->record(role, reply.usage);
        outcome.usage += reply.usage;
        outcome.samples.push_back(reply.text);
        if (num_actions > 0) votes.push_back(parse_action(reply.text, num_actions));
    }
    outcome.text = outcome.samples.front();
    if (num_actions > 0) {
        outcome.action = majority_vote(votes);
        if (outcome.action) {
            for (std::size_t s = 0; s < votes.size(); ++s) {
                if (votes[s] == outcome.action) {
                    outcome.text = outcome.samples[s];
                    break;
                }
            }
        }
    }
    return outcome;
}

std::optional<std::size_t> parse_action(std::string_view text, std::size_t num_actions) {
    static const std::regex pattern(R"(ACTION:\s*(-?\d+))");
    const std::string s(text);
    std::optional<std::string> last;
    for (auto it = std::sregex_iterator(s.begin(), s.end(), pattern); it != std::sregex_iterator(); ++it) {
        last = (*it)[1].str();
    }
    if (!last || last->front() == '-' || last->size() > 9) return std::nullopt;
    const auto k = static_cast<std::size_t>(std::stoul(*last));
    if (k >= num_actions) return std::nullopt;
    return k;
}

std::optional<std::size_t> majority_vote(const std::vector<std::optional<std::size_t>>& votes) {
    std::map<std::size_t, int> counts;
    for (const auto& v : votes) {
        if (v) counts[*v] += 1;
    }
    std::optional<std::size_t> winner;
    int best = 0;
    for (const auto& [index, count] : counts) {
        if (count > best) {
            winner = index;
            best = count;
        }
    }
    return winner;
}

std::optional<RuleId> parse_preferred_rule(std::string_view text, std::span<const RuleId> pool) {
    static const std::regex pattern(R"(PREFERRED_RULE:\s*([A-Z]+))");
    const std::string s(text);
    std::optional<RuleId> last;
    for (auto it = std::sregex_iterator(s.begin(), s.end(), pattern); it != std::sregex_iterator(); ++it) {
        const auto rule = parse_rule((*it)[1].str());
        if (rule && std::find(pool.begin(), pool.end(), *rule) != pool.end()) last = rule;
    }
    return last;
}

std::string render_digest(const TrajectoryDigest& d, const Instance& instance) {
    std::ostringstream os;
    os << "cost " << to_units(d.cost) << ", " << d.total_steps << " steps";
    if (d.total_steps > d.steps.size()) os << " (first " << d.steps.size() << " shown)";
    os << "\n";
    for (const auto& step : d.steps) {
        os << "  t=" << to_units(step.clock) << " " << to_string(step.action, instance);
        os << (step.rule ? " [" + std::string(to_string(*step.rule)) + "]" : std::string(" [seed]")) << "\n";
    }
    os << "  machine load:";
    for (std::size_t m = 0; m < d.machine_load.size(); ++m) os << " M" << m << "=" << to_units(d.machine_load[m]);
    os << "\n  rules used:";
    if (d.rule_counts.empty()) os << " none";
    for (const auto& [rule, n] : d.rule_counts) os << " " << to_string(rule) << "x" << n;
    os << "\n";
    return os.str();
}

Messages build_reflection_prompt(const TrajectoryDigest& best, const TrajectoryDigest& worst,
                                 const std::string& prior_text, int level, const Instance& instance,
                                 std::span<const RuleId> pool) {
    std::ostringstream sys;
    sys << "You are a strategic analyst for dynamic flexible job-shop scheduling. You compare simulated "
           "schedules and distill what separates good decisions from bad ones into short, actionable guidance.";

    std::ostringstream user;
    user << "Simulation level " << level << ". Two trajectories were simulated from the same shop state with "
         << "dispatching heuristics; no new jobs or breakdowns were assumed during the lookahead.\n\n";
    user << "BEST trajectory: " << render_digest(best, instance) << "\n";
    user << "WORST trajectory: " << render_digest(worst, instance) << "\n";
    user << "Cost gap: " << to_units(worst.cost - best.cost) << "\n\n";
    user << "Prior experience from the higher level:\n" << (prior_text.empty() ? "(none)" : prior_text) << "\n\n";
    user << "Identify the key distinguishing features between the best and the worst trajectory and write a "
            "strategic guideline of at most 120 words for the next dispatching decisions. If one heuristic should "
            "be favored, end with a line `PREFERRED_RULE: <name>` using one of:";
    for (RuleId r : pool) user << " " << to_string(r);
    user << ".";
    return {{"system", sys.str()}, {"user", user.str()}};
}

namespace {

std::string action_block(const std::vector<std::string>& action_lines) {
    std::ostringstream os;
    for (std::size_t i = 0; i < action_lines.size(); ++i) os << i << ": " << action_lines[i] << "\n";
    return os.str();
}

constexpr const char* kAnswerInstruction =
    "Think step by step about the consequences of each candidate action, then give your choice. "
    "The last line of your answer must be `ACTION: <index>` with the index of exactly one listed action.";

constexpr const char* kDispatcherRole =
    "You are the dispatcher of a flexible job shop. At each decision point you choose which operation to start on "
    "which idle machine so that the makespan of the whole schedule is minimized.";

}  // namespace

Messages build_decision_prompt(const std::string& state_summary, const std::vector<std::string>& action_lines,
                               const std::string& experience_text) {
    if (action_lines.empty()) throw std::invalid_argument("build_decision_prompt: no actions");
    std::ostringstream user;
    user << "Strategic experience:\n" << (experience_text.empty() ? "(none)" : experience_text) << "\n\n";
    user << "Current shop state:\n" << state_summary << "\n";
    user << "Available actions:\n" << action_block(action_lines) << "\n" << kAnswerInstruction;
    return {{"system", kDispatcherRole}, {"user", user.str()}};
}

Messages build_direct_prompt(const std::string& static_block, const std::string& dynamic_summary,
                             const std::vector<std::string>& action_lines) {
    if (action_lines.empty()) throw std::invalid_argument("build_direct_prompt: no actions");
    std::ostringstream user;
    if (!static_block.empty()) user << "Static shop data:\n" << static_block << "\n";
    user << "Dynamic status:\n" << dynamic_summary << "\n";
    user << "Available actions:\n" << action_block(action_lines) << "\n" << kAnswerInstruction;
    return {{"system", kDispatcherRole}, {"user", user.str()}};
}

RemoteReflector::RemoteReflector(std::shared_ptr<ChatClient> client, SamplingProfile profile, TokenLedger* ledger)
    : client_(std::move(client)), profile_(profile), ledger_(ledger) {
    if (!client_) throw std::invalid_argument("RemoteReflector: null client");
}

Experience RemoteReflector::synthesize(const ReflectionRequest& req) {
    const auto messages = build_reflection_prompt(req.best, req.worst, req.prior ? req.prior->text : std::string(),
                                                  req.level, req.state.instance(), req.pool);
    ChatOutcome outcome;
    try {
        outcome = client_->chat(messages, profile_, CallRole::Reflection, 0, req.seed, ledger_);
    } catch (const ChatError& e) {
        throw ReflectorError(e.what());
    }
    if (outcome.text.empty()) throw ReflectorError("empty reflection");
    Experience exp;
    exp.text = outcome.text;
    exp.source_level = req.level;
    if (const auto rule = parse_preferred_rule(outcome.text, req.pool)) exp.rule_preference[*rule] = 1.0;
    return exp;
}

}  // namespace reflecsched
