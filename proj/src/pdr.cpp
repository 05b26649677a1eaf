#include "reflecsched/pdr.hpp"

#include <functional>
#include <stdexcept>

namespace reflecsched {

namespace {

struct RuleInfo {
    RuleId id;
    std::string_view name;
    std::string_view description;
};

constexpr RuleInfo kRules[] = {
    {RuleId::SPT, "SPT", "shortest processing time first"},
    {RuleId::LPT, "LPT", "longest processing time first"},
    {RuleId::FIFO, "FIFO", "earliest job arrival first"},
    {RuleId::MWKR, "MWKR", "most work remaining first"},
    {RuleId::LWKR, "LWKR", "least work remaining first"},
    {RuleId::MOPNR, "MOPNR", "most operations remaining first"},
    {RuleId::EET, "EET", "earliest end time first"},
    {RuleId::RANDOM, "RANDOM", "uniformly random action"},
};

// Smaller key wins.
template <typename Key>
Action argmin(std::span<const Action> actions, Key key) {
    const Action* best = &actions.front();
    auto best_key = key(*best);
    for (const auto& a : actions.subspan(1)) {
        auto k = key(a);
        if (k < best_key || (k == best_key && a < *best)) {
            best = &a;
            best_key = k;
        }
    }
    return *best;
}

}  // namespace

std::string_view to_string(RuleId rule) {
    for (const auto& info : kRules) {
        if (info.id == rule) return info.name;
    }
    return "?";
}

std::string_view describe(RuleId rule) {
    for (const auto& info : kRules) {
        if (info.id == rule) return info.description;
    }
    return "";
}

std::optional<RuleId> parse_rule(std::string_view name) {
    for (const auto& info : kRules) {
        if (info.name == name) return info.id;
    }
    return std::nullopt;
}

std::vector<RuleId> default_rule_pool() {
    std::vector<RuleId> pool;
    for (const auto& info : kRules) pool.push_back(info.id);
    return pool;
}

std::vector<RuleId> parse_rule_pool(const std::vector<std::string>& names) {
    std::vector<RuleId> pool;
    for (const auto& name : names) {
        const auto rule = parse_rule(name);
        if (!rule) throw std::invalid_argument("unknown dispatch rule '" + name + "'");
        for (RuleId existing : pool) {
            if (existing == *rule) throw std::invalid_argument("duplicate dispatch rule '" + name + "'");
        }
        pool.push_back(*rule);
    }
    if (pool.empty()) throw std::invalid_argument("rule pool must not be empty");
    return pool;
}

Action apply_rule(RuleId rule, const ShopState& state, std::span<const Action> actions, Rng* rng) {
    if (actions.empty()) throw std::invalid_argument("apply_rule: no actions");
    switch (rule) {
        case RuleId::SPT:
            return argmin(actions, [&](const Action& a) { return state.processing_time(a); });
        case RuleId::LPT:
            return argmin(actions, [&](const Action& a) { return -state.processing_time(a); });
        case RuleId::FIFO:
            return argmin(actions, [&](const Action& a) { return state.job(a.job).arrival_time; });
        case RuleId::MWKR:
            return argmin(actions, [&](const Action& a) { return -state.remaining_work(a.job); });
        case RuleId::LWKR:
            return argmin(actions, [&](const Action& a) { return state.remaining_work(a.job); });
        case RuleId::MOPNR:
            return argmin(actions, [&](const Action& a) { return -state.remaining_operations(a.job); });
        case RuleId::EET:
            return argmin(actions, [&](const Action& a) { return state.completion_estimate(a); });
        case RuleId::RANDOM:
            if (!rng) throw std::invalid_argument("apply_rule: RANDOM needs a random stream");
            return actions[rng->uniform_index(actions.size())];
    }
    throw std::invalid_argument("apply_rule: unknown rule");
}

BasePolicy::BasePolicy(std::vector<RuleId> pool, Rng rng) : pool_(std::move(pool)), rng_(rng) {
    if (pool_.empty()) throw std::invalid_argument("BasePolicy: empty rule pool");
}

std::pair<Action, RuleId> BasePolicy::step(const ShopState& state, std::span<const Action> actions) {
    const RuleId rule = pool_[rng_.uniform_index(pool_.size())];
    return {apply_rule(rule, state, actions, &rng_), rule};
}

}  // namespace reflecsched
