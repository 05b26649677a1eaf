#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "reflecsched/llm_client.hpp"
#include "reflecsched/pdr.hpp"
#include "reflecsched/reflect.hpp"
#include "reflecsched/sim.hpp"

namespace reflecsched {

// Prompt sections.
std::string describe_static(const ShopState& state);
std::string describe_dynamic(const ShopState& state);
std::vector<std::string> describe_actions(const ShopState& state, std::span<const Action> actions);

struct DecisionQuery {
    const ShopState& state;
    std::span<const Action> actions;
    const Experience* experience = nullptr;
    Messages messages;
    std::uint64_t request_seed = 0;
};

// Picks one of the offered actions by index. nullopt means the answer could
// not be interpreted.
class Decider {
public:
    virtual ~Decider() = default;
    virtual std::string name() const = 0;
    virtual std::optional<std::size_t> choose(const DecisionQuery& query) = 0;
};

class ChatDecider final : public Decider {
public:
    ChatDecider(std::shared_ptr<ChatClient> client, SamplingProfile profile, TokenLedger* ledger = nullptr);

    std::string name() const override { return "chat"; }
    std::optional<std::size_t> choose(const DecisionQuery& query) override;

private:
    std::shared_ptr<ChatClient> client_;
    SamplingProfile profile_;
    TokenLedger* ledger_;
};

// Follows the experience: its recommended action when legal, otherwise a
// vote of the pool rules weighted by the experience's rule preference.
// Without an experience it picks the EET action.
class FaithfulMockDecider final : public Decider {
public:
    explicit FaithfulMockDecider(std::vector<RuleId> pool = default_rule_pool()) : pool_(std::move(pool)) {}

    std::string name() const override { return "faithful-mock"; }
    std::optional<std::size_t> choose(const DecisionQuery& query) override;

private:
    std::vector<RuleId> pool_;
};

class ScriptedDecider final : public Decider {
public:
    using Script = std::function<std::optional<std::size_t>(const DecisionQuery&)>;

    explicit ScriptedDecider(Script script) : script_(std::move(script)) {}

    std::string name() const override { return "scripted"; }
    std::optional<std::size_t> choose(const DecisionQuery& query) override { return script_(query); }

private:
    Script script_;
};

struct DecisionResult {
    Action action;
    // Empty unless a retry or the EET fallback was used.
    std::string note;
};

// Asks the decider; an unusable answer is retried once with a corrective
// message, then replaced by the EET action.
DecisionResult resolve_decision(Decider& decider, DecisionQuery query);

struct ReflecSchedDecision {
    Action action;
    Experience experience;
    bool reflected = false;
    std::string note;
};

ReflecSchedDecision decide_reflecsched(const ShopState& state, std::span<const Action> actions,
                                       const std::optional<Experience>& cached, bool event_occurred,
                                       const ReflectionConfig& config, Reflector& reflector, Decider& decider,
                                       std::uint64_t seed, const std::optional<std::string>& trigger_event = {});

DecisionResult decide_llm_direct(const ShopState& state, std::span<const Action> actions, Decider& decider,
                                 bool include_static = true, std::uint64_t seed = 0);

Action decide_pure_rule(const ShopState& state, std::span<const Action> actions, RuleId rule, Rng* rng = nullptr);

class PureRulePolicy final : public Policy {
public:
    explicit PureRulePolicy(RuleId rule) : rule_(rule) {}

    std::string name() const override { return std::string(to_string(rule_)); }
    void begin_run(const Instance& instance, std::uint64_t seed) override;
    PolicyChoice decide(const ShopState& state, std::span<const Action> actions, const DecisionContext& ctx) override;

private:
    RuleId rule_;
    Rng rng_{0};
};

// The randomized base policy as a stand-alone dispatcher.
class BaseRandomizedPolicy final : public Policy {
public:
    explicit BaseRandomizedPolicy(std::vector<RuleId> pool = default_rule_pool());

    std::string name() const override { return "BaseRandomized"; }
    void begin_run(const Instance& instance, std::uint64_t seed) override;
    PolicyChoice decide(const ShopState& state, std::span<const Action> actions, const DecisionContext& ctx) override;

private:
    std::vector<RuleId> pool_;
    std::optional<BasePolicy> base_;
};

class LlmDirectPolicy final : public Policy {
public:
    LlmDirectPolicy(std::shared_ptr<Decider> decider, bool include_static = true);

    std::string name() const override { return include_static_ ? "LLM-Direct" : "LLM-Direct-NoStatic"; }
    void begin_run(const Instance& instance, std::uint64_t seed) override;
    PolicyChoice decide(const ShopState& state, std::span<const Action> actions, const DecisionContext& ctx) override;

private:
    std::shared_ptr<Decider> decider_;
    bool include_static_;
    std::uint64_t seed_ = 0;
};

class ReflecSchedPolicy final : public Policy {
public:
    ReflecSchedPolicy(ReflectionConfig config, std::shared_ptr<Reflector> reflector, std::shared_ptr<Decider> decider,
                      std::string name = "ReflecSched");

    std::string name() const override { return name_; }
    void begin_run(const Instance& instance, std::uint64_t seed) override;
    PolicyChoice decide(const ShopState& state, std::span<const Action> actions, const DecisionContext& ctx) override;

    std::size_t reflections() const { return reflections_; }
    const std::optional<Experience>& experience() const { return experience_; }

private:
    ReflectionConfig config_;
    std::shared_ptr<Reflector> reflector_;
    std::shared_ptr<Decider> decider_;
    std::string name_;
    std::uint64_t seed_ = 0;
    std::optional<Experience> experience_;
    std::size_t reflections_ = 0;
};

// Policy driven by a callback; used by tests and the Python bindings.
class FunctionPolicy final : public Policy {
public:
    using Fn = std::function<Action(const ShopState&, std::span<const Action>)>;

    FunctionPolicy(std::string name, Fn fn) : name_(std::move(name)), fn_(std::move(fn)) {}

    std::string name() const override { return name_; }
    PolicyChoice decide(const ShopState& state, std::span<const Action> actions, const DecisionContext&) override {
        return {fn_(state, actions), std::nullopt, {}};
    }

private:
    std::string name_;
    Fn fn_;
};

}  // namespace reflecsched
