#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "reflecsched/rng.hpp"
#include "reflecsched/sim.hpp"

namespace reflecsched {

enum class RuleId { SPT, LPT, FIFO, MWKR, LWKR, MOPNR, EET, RANDOM };

std::string_view to_string(RuleId rule);
std::optional<RuleId> parse_rule(std::string_view name);
std::string_view describe(RuleId rule);

// SPT, LPT, FIFO, MWKR, LWKR, MOPNR, EET, RANDOM.
std::vector<RuleId> default_rule_pool();
std::vector<RuleId> parse_rule_pool(const std::vector<std::string>& names);

// Picks the action with the best priority key, ties going to the smallest
// (job, op, machine). RANDOM draws from `rng`, which it then requires.
Action apply_rule(RuleId rule, const ShopState& state, std::span<const Action> actions, Rng* rng = nullptr);

// Randomized base policy: a uniformly sampled rule per decision.
class BasePolicy {
public:
    BasePolicy(std::vector<RuleId> pool, Rng rng);

    std::pair<Action, RuleId> step(const ShopState& state, std::span<const Action> actions);

    const std::vector<RuleId>& pool() const { return pool_; }
    Rng& rng() { return rng_; }

private:
    std::vector<RuleId> pool_;
    Rng rng_;
};

}  // namespace reflecsched
