#include "reflecsched/reflect.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "parallel.hpp"
#include "reflecsched/hash.hpp"

namespace reflecsched {

void ReflectionConfig::validate() const {
    if (max_level < 0) throw std::invalid_argument("max_level must be >= 0");
    if (max_level > 30) throw std::invalid_argument("max_level too large");
    if (rollouts_per_level < 1) throw std::invalid_argument("rollouts_per_level must be >= 1");
    if (base_horizon < 1) throw std::invalid_argument("base_horizon must be >= 1");
    if (pool.empty()) throw std::invalid_argument("rule pool must not be empty");
    if (!(guidance_mix >= 0.0 && guidance_mix <= 1.0)) throw std::invalid_argument("guidance_mix must be in [0, 1]");
}

std::size_t steps(int base_horizon, int level) {
    if (base_horizon < 1 || level < 0 || level > 40) throw std::invalid_argument("steps: bad horizon or level");
    return static_cast<std::size_t>(base_horizon) << level;
}

std::optional<Action> Trajectory::first_action() const {
    if (steps.empty()) return std::nullopt;
    return steps.front().action;
}

std::optional<RuleId> Experience::preferred_rule(std::span<const RuleId> pool) const {
    std::optional<RuleId> best;
    double best_weight = -1.0;
    for (RuleId rule : pool) {
        const auto it = rule_preference.find(rule);
        if (it != rule_preference.end() && it->second > best_weight) {
            best = rule;
            best_weight = it->second;
        }
    }
    return best;
}

TrajectoryDigest digest_trajectory(const Trajectory& trajectory, const ShopState& root) {
    TrajectoryDigest d;
    d.level = trajectory.level;
    d.cost = trajectory.cost;
    d.total_steps = trajectory.steps.size();
    d.first_action = trajectory.first_action();
    d.machine_load.assign(root.num_machines(), 0);
    for (std::size_t i = 0; i < trajectory.steps.size(); ++i) {
        const auto& step = trajectory.steps[i];
        if (i < TrajectoryDigest::kMaxSteps) d.steps.push_back(step);
        d.machine_load[static_cast<std::size_t>(step.action.machine)] += root.processing_time(step.action);
        if (step.rule) d.rule_counts[*step.rule] += 1;
    }
    return d;
}

namespace {

RuleId sample_rule(const RulePreference& preference, Rng& rng) {
    double total = 0.0;
    for (const auto& [rule, w] : preference) total += w;
    double u = rng.uniform01() * total;
    for (const auto& [rule, w] : preference) {
        if (u < w) return rule;
        u -= w;
    }
    return preference.rbegin()->first;
}

std::string rule_list(const RulePreference& pref, std::span<const RuleId> pool, bool top) {
    std::vector<std::pair<double, RuleId>> ranked;
    for (RuleId r : pool) {
        if (const auto it = pref.find(r); it != pref.end()) ranked.emplace_back(it->second, r);
    }
    std::stable_sort(ranked.begin(), ranked.end(), [top](const auto& a, const auto& b) {
        return top ? a.first > b.first : a.first < b.first;
    });
    std::ostringstream os;
    for (std::size_t i = 0; i < std::min<std::size_t>(2, ranked.size()); ++i) {
        if (i) os << ", ";
        os << to_string(ranked[i].second);
    }
    return os.str();
}

}  // namespace

Experience FaithfulMockReflector::synthesize(const ReflectionRequest& req) {
    Experience exp;
    exp.source_level = req.level;

    // Rules over-represented in the best trajectory relative to the worst gain
    // weight; the prior preference is refined multiplicatively.
    RulePreference pref;
    double total = 0.0;
    for (RuleId rule : req.pool) {
        const auto in = [rule](const TrajectoryDigest& d) {
            const auto it = d.rule_counts.find(rule);
            return it == d.rule_counts.end() ? 0 : it->second;
        };
        double w = (1.0 + in(req.best)) / (1.0 + in(req.worst));
        if (req.prior) {
            const auto it = req.prior->rule_preference.find(rule);
            if (it != req.prior->rule_preference.end()) w *= it->second;
        }
        pref[rule] = w;
        total += w;
    }
    for (auto& [rule, w] : pref) w /= total;
    exp.rule_preference = std::move(pref);

    if (req.best.first_action &&
        std::find(req.legal_actions.begin(), req.legal_actions.end(), *req.best.first_action) !=
            req.legal_actions.end()) {
        exp.recommended_first_action = req.best.first_action;
    }

    std::size_t front_loaded = 0;
    Time widest = std::numeric_limits<Time>::min();
    for (std::size_t m = 0; m < req.best.machine_load.size(); ++m) {
        const Time diff = req.best.machine_load[m] - (m < req.worst.machine_load.size() ? req.worst.machine_load[m] : 0);
        if (diff > widest) {
            widest = diff;
            front_loaded = m;
        }
    }

    std::ostringstream os;
    os << "Level " << req.level << ": best trajectory cost " << to_units(req.best.cost) << " vs worst "
       << to_units(req.worst.cost) << " (gap " << to_units(req.worst.cost - req.best.cost) << ").";
    if (req.best.first_action) {
        os << " Best trajectory opened with " << to_string(*req.best.first_action, req.state.instance())
           << " and front-loaded machine M" << front_loaded << ".";
    }
    os << " Favor " << rule_list(exp.rule_preference, req.pool, true) << "; avoid "
       << rule_list(exp.rule_preference, req.pool, false) << ".";
    exp.text = os.str();
    return exp;
}

Trajectory rollout(const ShopState& projected, int level, std::size_t horizon, std::optional<Action> first_action,
                   BasePolicy& policy, const RulePreference* guidance, double guidance_mix) {
    ShopState sim = projected;
    Trajectory traj;
    traj.level = level;
    traj.seed_action = first_action;
    const bool guided = guidance && !guidance->empty() && guidance_mix > 0.0;

    sim.advance();
    while (traj.steps.size() < horizon && !sim.finished()) {
        const auto actions = sim.actions();
        TrajectoryStep step{sim.digest(), {}, std::nullopt, sim.clock()};
        if (traj.steps.empty() && first_action) {
            step.action = *first_action;
        } else if (guided && policy.rng().uniform01() < guidance_mix) {
            const RuleId rule = sample_rule(*guidance, policy.rng());
            step.action = apply_rule(rule, sim, actions, &policy.rng());
            step.rule = rule;
        } else {
            const auto [action, rule] = policy.step(sim, actions);
            step.action = action;
            step.rule = rule;
        }
        sim.apply(step.action);
        traj.steps.push_back(step);
        sim.advance();
    }
    traj.cost = sim.partial_makespan();
    return traj;
}

ExtremalPair select_extremal(std::span<const Trajectory> trajectories) {
    if (trajectories.empty()) throw std::invalid_argument("select_extremal: no trajectories");
    ExtremalPair pair;
    for (std::size_t i = 1; i < trajectories.size(); ++i) {
        if (trajectories[i].cost < trajectories[pair.best].cost) pair.best = i;
        if (trajectories[i].cost > trajectories[pair.worst].cost) pair.worst = i;
    }
    return pair;
}

Experience reflect_once(int level, const TrajectoryDigest& best, const TrajectoryDigest& worst,
                        const Experience* prior, Reflector& reflector, const ShopState& state,
                        std::span<const Action> legal_actions, std::span<const RuleId> pool,
                        std::uint64_t seed) {
    if (best.cost > worst.cost) throw std::invalid_argument("reflect_once: best costs more than worst");
    const ReflectionRequest request{best, worst, prior, level, legal_actions, pool, state, seed};
    Experience exp;
    try {
        exp = reflector.synthesize(request);
    } catch (const ReflectorError&) {
        FaithfulMockReflector mock;
        exp = mock.synthesize(request);
        exp.fallback = true;
    }
    if (exp.recommended_first_action &&
        std::find(legal_actions.begin(), legal_actions.end(), *exp.recommended_first_action) == legal_actions.end()) {
        exp.recommended_first_action.reset();
    }
    exp.source_level = level;
    exp.created_at_clock = state.clock();
    return exp;
}

ReflectionOutcome hierarchical_reflection(const ShopState& state, const ReflectionConfig& config,
                                          std::uint64_t seed, Reflector& reflector) {
    config.validate();
    const ShopState root = state.projection();
    const auto legal = root.actions();
    if (legal.empty()) throw std::invalid_argument("hierarchical_reflection: state has no legal action");

    ReflectionOutcome outcome;
    std::optional<Experience> running;
    const auto R = static_cast<std::size_t>(config.rollouts_per_level);

    auto run_level = [&](int level, std::size_t count, auto seed_action_of) {
        LevelRecord record;
        record.level = level;
        record.trajectories.resize(count);
        const std::uint64_t level_seed = Rng::derive(seed, static_cast<std::uint64_t>(level));
        const RulePreference* guidance = running ? &running->rule_preference : nullptr;
        detail::parallel_for(count, config.workers, [&](std::size_t i) {
            BasePolicy policy(config.pool, Rng(Rng::derive(level_seed, i)));
            record.trajectories[i] = rollout(root, level, steps(config.base_horizon, level), seed_action_of(i),
                                             policy, guidance, config.guidance_mix);
        });
        record.extremal = select_extremal(record.trajectories);
        const auto best = digest_trajectory(record.trajectories[record.extremal.best], root);
        const auto worst = digest_trajectory(record.trajectories[record.extremal.worst], root);
        record.experience = reflect_once(level, best, worst, running ? &*running : nullptr, reflector, root, legal,
                                         config.pool, level_seed);
        outcome.fallback = outcome.fallback || record.experience.fallback;
        outcome.rollouts += count;
        running = record.experience;
        outcome.levels.push_back(std::move(record));
    };

    for (int level = config.max_level; level >= 1; --level) {
        run_level(level, R, [](std::size_t) { return std::optional<Action>{}; });
    }
    const std::size_t per_action = std::max<std::size_t>(1, (R + legal.size() - 1) / legal.size());
    run_level(0, per_action * legal.size(),
              [&](std::size_t i) { return std::optional<Action>{legal[i / per_action]}; });

    outcome.experience = *running;
    outcome.experience.fallback = outcome.fallback;
    return outcome;
}

CacheDecision experience_cache_policy(const std::optional<Experience>& current, bool event_occurred) {
    return (!current || event_occurred) ? CacheDecision::Recompute : CacheDecision::Reuse;
}

std::string rollout_log_to_jsonl(const ReflectionOutcome& outcome, const Instance& instance) {
    std::string out;
    for (const auto& level : outcome.levels) {
        for (std::size_t i = 0; i < level.trajectories.size(); ++i) {
            const auto& t = level.trajectories[i];
            nlohmann::json steps = nlohmann::json::array();
            for (const auto& s : t.steps) {
                steps.push_back({{"digest", to_hex(s.state_digest)},
                                 {"action", to_string(s.action, instance)},
                                 {"rule", s.rule ? nlohmann::json(std::string(to_string(*s.rule))) : nlohmann::json()},
                                 {"clock", s.clock}});
            }
            nlohmann::json line = {{"level", t.level},
                                   {"index", i},
                                   {"cost", t.cost},
                                   {"best", i == level.extremal.best},
                                   {"worst", i == level.extremal.worst},
                                   {"steps", std::move(steps)}};
            out += line.dump();
            out += '\n';
        }
    }
    return out;
}

}  // namespace reflecsched
