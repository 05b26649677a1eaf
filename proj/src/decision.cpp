#include "reflecsched/decision.hpp"

#include <algorithm>
#include <sstream>

namespace reflecsched {

namespace {

std::string fmt_time(Time t) {
    std::ostringstream os;
    os << to_units(t);
    return os.str();
}

}  // namespace

std::string describe_static(const ShopState& state) {
    std::ostringstream os;
    os << "Machines: " << state.num_machines() << "\n";
    os << "Jobs:\n";
    for (JobIndex j = 0; j < state.num_jobs(); ++j) {
        if (!state.job_progress(j).revealed) continue;
        const Job& job = state.job(j);
        os << "  " << job.id << " (arrived " << fmt_time(job.arrival_time) << "):";
        for (std::size_t k = 0; k < job.operations.size(); ++k) {
            os << " op" << k << "{";
            bool first = true;
            for (const auto& [m, pt] : job.operations[k].eligible) {
                os << (first ? "" : ", ") << "M" << m << ":" << fmt_time(pt);
                first = false;
            }
            os << "}";
        }
        os << "\n";
    }
    return os.str();
}

std::string describe_dynamic(const ShopState& state) {
    std::ostringstream os;
    os << "Time: " << fmt_time(state.clock()) << "\n";
    os << "Machines:\n";
    for (std::size_t m = 0; m < state.num_machines(); ++m) {
        const auto status = state.machine_status(static_cast<MachineId>(m));
        os << "  M" << m << ": ";
        if (const auto* busy = std::get_if<MachineBusy>(&status.state)) {
            os << "busy with " << state.job(busy->job).id << ".op" << busy->op_index << ", " << fmt_time(busy->remaining)
               << " left";
        } else if (const auto* down = std::get_if<MachineDown>(&status.state)) {
            os << "down until " << fmt_time(down->until);
            if (down->suspended) {
                os << ", holding " << state.job(down->suspended->job).id << ".op" << down->suspended->op_index;
            }
        } else {
            os << "idle";
        }
        os << "\n";
    }
    os << "Jobs in progress:\n";
    for (JobIndex j = 0; j < state.num_jobs(); ++j) {
        const auto p = state.job_progress(j);
        if (!p.revealed || p.finished) continue;
        os << "  " << state.job(j).id << ": next op " << p.next_op << " of " << state.job(j).operations.size()
           << (p.in_process ? " (in process)" : "") << ", remaining work " << fmt_time(state.remaining_work(j))
           << "\n";
    }
    return os.str();
}

std::vector<std::string> describe_actions(const ShopState& state, std::span<const Action> actions) {
    std::vector<std::string> lines;
    lines.reserve(actions.size());
    for (const auto& a : actions) {
        std::ostringstream os;
        os << "start " << state.job(a.job).id << ".op" << a.op_index << " on M" << a.machine << " (processing "
           << fmt_time(state.processing_time(a)) << ", ends at " << fmt_time(state.completion_estimate(a)) << ")";
        lines.push_back(os.str());
    }
    return lines;
}

ChatDecider::ChatDecider(std::shared_ptr<ChatClient> client, SamplingProfile profile, TokenLedger* ledger)
    : client_(std::move(client)), profile_(profile), ledger_(ledger) {
    if (!client_) throw std::invalid_argument("ChatDecider: null client");
}

std::optional<std::size_t> ChatDecider::choose(const DecisionQuery& query) {
    try {
        return client_->chat(query.messages, profile_, CallRole::Decision, query.actions.size(), query.request_seed,
                             ledger_)
            .action;
    } catch (const ChatError&) {
        return std::nullopt;
    }
}

std::optional<std::size_t> FaithfulMockDecider::choose(const DecisionQuery& query) {
    const auto index_of = [&](const Action& a) -> std::optional<std::size_t> {
        const auto it = std::find(query.actions.begin(), query.actions.end(), a);
        if (it == query.actions.end()) return std::nullopt;
        return static_cast<std::size_t>(it - query.actions.begin());
    };
    if (!query.experience) return index_of(apply_rule(RuleId::EET, query.state, query.actions));
    const Experience& exp = *query.experience;
    if (exp.recommended_first_action) {
        if (const auto i = index_of(*exp.recommended_first_action)) return i;
    }

    // Each non-random pool rule nominates its action with the weight the
    // experience gives that rule; the heaviest action wins, lowest index on ties.
    std::vector<double> weight(query.actions.size(), 0.0);
    bool any = false;
    for (RuleId rule : pool_) {
        if (rule == RuleId::RANDOM) continue;
        const auto it = exp.rule_preference.find(rule);
        if (it == exp.rule_preference.end() || it->second <= 0.0) continue;
        weight[*index_of(apply_rule(rule, query.state, query.actions))] += it->second;
        any = true;
    }
    if (!any) return index_of(apply_rule(RuleId::EET, query.state, query.actions));
    return static_cast<std::size_t>(std::max_element(weight.begin(), weight.end()) - weight.begin());
}

DecisionResult resolve_decision(Decider& decider, DecisionQuery query) {
    const auto valid = [&](const std::optional<std::size_t>& i) { return i && *i < query.actions.size(); };
    auto first = decider.choose(query);
    if (valid(first)) return {query.actions[*first], {}};

    query.messages.push_back(
        {"user", "Your previous answer did not name a listed action. Reply again and end with `ACTION: <index>` where "
                 "index is between 0 and " +
                     std::to_string(query.actions.size() - 1) + "."});
    query.request_seed = Rng::derive(query.request_seed, 1);
    auto second = decider.choose(query);
    if (valid(second)) return {query.actions[*second], "retried after unusable answer"};

    return {apply_rule(RuleId::EET, query.state, query.actions), "fallback to EET after two unusable answers"};
}

ReflecSchedDecision decide_reflecsched(const ShopState& state, std::span<const Action> actions,
                                       const std::optional<Experience>& cached, bool event_occurred,
                                       const ReflectionConfig& config, Reflector& reflector, Decider& decider,
                                       std::uint64_t seed, const std::optional<std::string>& trigger_event) {
    if (actions.empty()) throw std::invalid_argument("decide_reflecsched: no actions");
    ReflecSchedDecision out;
    if (experience_cache_policy(cached, event_occurred) == CacheDecision::Recompute) {
        auto outcome = hierarchical_reflection(state, config, seed, reflector);
        out.experience = std::move(outcome.experience);
        out.experience.trigger_event = trigger_event;
        out.reflected = true;
        if (out.experience.fallback) out.note = "reflector fell back to faithful mock";
    } else {
        out.experience = *cached;
    }

    if (actions.size() == 1) {
        out.action = actions.front();
        return out;
    }

    // Only the immediate state and the experience; no static block.
    DecisionQuery query{state, actions, &out.experience,
                        build_decision_prompt(describe_dynamic(state), describe_actions(state, actions),
                                              out.experience.text),
                        Rng::derive(seed, 0xdec1)};
    auto resolved = resolve_decision(decider, std::move(query));
    out.action = resolved.action;
    if (!resolved.note.empty()) out.note = out.note.empty() ? resolved.note : out.note + "; " + resolved.note;
    return out;
}

DecisionResult decide_llm_direct(const ShopState& state, std::span<const Action> actions, Decider& decider,
                                 bool include_static, std::uint64_t seed) {
    if (actions.empty()) throw std::invalid_argument("decide_llm_direct: no actions");
    if (actions.size() == 1) return {actions.front(), {}};
    DecisionQuery query{state, actions, nullptr,
                        build_direct_prompt(include_static ? describe_static(state) : std::string(),
                                            describe_dynamic(state), describe_actions(state, actions)),
                        seed};
    return resolve_decision(decider, std::move(query));
}

Action decide_pure_rule(const ShopState& state, std::span<const Action> actions, RuleId rule, Rng* rng) {
    return apply_rule(rule, state, actions, rng);
}

void PureRulePolicy::begin_run(const Instance&, std::uint64_t seed) { rng_ = Rng(seed); }

PolicyChoice PureRulePolicy::decide(const ShopState& state, std::span<const Action> actions, const DecisionContext&) {
    return {decide_pure_rule(state, actions, rule_, &rng_), std::string(to_string(rule_)), {}};
}

BaseRandomizedPolicy::BaseRandomizedPolicy(std::vector<RuleId> pool) : pool_(std::move(pool)) {
    if (pool_.empty()) throw std::invalid_argument("BaseRandomizedPolicy: empty pool");
}

void BaseRandomizedPolicy::begin_run(const Instance&, std::uint64_t seed) { base_.emplace(pool_, Rng(seed)); }

PolicyChoice BaseRandomizedPolicy::decide(const ShopState& state, std::span<const Action> actions,
                                          const DecisionContext&) {
    if (!base_) base_.emplace(pool_, Rng(0));
    const auto [action, rule] = base_->step(state, actions);
    return {action, std::string(to_string(rule)), {}};
}

LlmDirectPolicy::LlmDirectPolicy(std::shared_ptr<Decider> decider, bool include_static)
    : decider_(std::move(decider)), include_static_(include_static) {
    if (!decider_) throw std::invalid_argument("LlmDirectPolicy: null decider");
}

void LlmDirectPolicy::begin_run(const Instance&, std::uint64_t seed) { seed_ = seed; }

PolicyChoice LlmDirectPolicy::decide(const ShopState& state, std::span<const Action> actions,
                                     const DecisionContext& ctx) {
    auto result = decide_llm_direct(state, actions, *decider_, include_static_, Rng::derive(seed_, ctx.index));
    return {result.action, std::nullopt, std::move(result.note)};
}

ReflecSchedPolicy::ReflecSchedPolicy(ReflectionConfig config, std::shared_ptr<Reflector> reflector,
                                     std::shared_ptr<Decider> decider, std::string name)
    : config_(std::move(config)), reflector_(std::move(reflector)), decider_(std::move(decider)), name_(std::move(name)) {
    config_.validate();
    if (!reflector_ || !decider_) throw std::invalid_argument("ReflecSchedPolicy: null reflector or decider");
}

void ReflecSchedPolicy::begin_run(const Instance&, std::uint64_t seed) {
    seed_ = seed;
    experience_.reset();
    reflections_ = 0;
}

PolicyChoice ReflecSchedPolicy::decide(const ShopState& state, std::span<const Action> actions,
                                       const DecisionContext& ctx) {
    std::optional<std::string> trigger;
    if (!ctx.new_events.empty()) trigger = ctx.new_events.back();
    auto d = decide_reflecsched(state, actions, experience_, !ctx.new_events.empty(), config_, *reflector_, *decider_,
                                Rng::derive(seed_, ctx.index), trigger);
    if (d.reflected) ++reflections_;
    experience_ = std::move(d.experience);
    return {d.action, std::nullopt, std::move(d.note)};
}

}  // namespace reflecsched
