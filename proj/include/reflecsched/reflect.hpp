#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "reflecsched/pdr.hpp"
#include "reflecsched/sim.hpp"

namespace reflecsched {

struct ReflectionConfig {
    int max_level = 6;
    int rollouts_per_level = 24;
    int base_horizon = 5;
    std::vector<RuleId> pool = default_rule_pool();
    // Fraction of rollout decisions whose rule is drawn from the running
    // experience's rule preference instead of uniformly from the pool.
    double guidance_mix = 0.5;
    // Rollouts of one level run on this many threads; <= 1 is sequential.
    unsigned workers = 1;

    void validate() const;
};

// Decision steps simulated by a rollout at `level`: base_horizon * 2^level.
std::size_t steps(int base_horizon, int level);

struct TrajectoryStep {
    std::uint64_t state_digest = 0;
    Action action;
    // Absent for the seeding action of a level-0 rollout.
    std::optional<RuleId> rule;
    Time clock = 0;
};

struct Trajectory {
    int level = 0;
    std::vector<TrajectoryStep> steps;
    // Makespan of the terminal partial schedule.
    Time cost = 0;
    // Set for action-seeded (level 0) rollouts.
    std::optional<Action> seed_action;

    std::optional<Action> first_action() const;
};

// Relative preference over dispatch rules, keyed by rule; sums to 1.
using RulePreference = std::map<RuleId, double>;

struct Experience {
    std::string text;
    std::optional<Action> recommended_first_action;
    RulePreference rule_preference;
    int source_level = 0;
    std::optional<std::string> trigger_event;
    Time created_at_clock = 0;
    // Set when the configured reflector failed and the faithful mock stood in.
    bool fallback = false;

    // Highest-weighted rule; earliest in `pool` on ties.
    std::optional<RuleId> preferred_rule(std::span<const RuleId> pool) const;
};

// Bounded description of a trajectory handed to a reflector.
struct TrajectoryDigest {
    static constexpr std::size_t kMaxSteps = 20;

    int level = 0;
    Time cost = 0;
    std::size_t total_steps = 0;
    std::vector<TrajectoryStep> steps;  // first kMaxSteps only
    std::optional<Action> first_action;
    // Processing time dispatched to each machine over the whole trajectory.
    std::vector<Time> machine_load;
    std::map<RuleId, int> rule_counts;
};

TrajectoryDigest digest_trajectory(const Trajectory& trajectory, const ShopState& root);

struct ReflectionRequest {
    const TrajectoryDigest& best;
    const TrajectoryDigest& worst;
    const Experience* prior = nullptr;
    int level = 0;
    // Legal actions of the state reflected upon.
    std::span<const Action> legal_actions;
    std::span<const RuleId> pool;
    const ShopState& state;
    // Per-request seed for stochastic reflectors.
    std::uint64_t seed = 0;
};

class ReflectorError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Turns an extremal trajectory pair into a strategic experience.
class Reflector {
public:
    virtual ~Reflector() = default;
    virtual std::string name() const = 0;
    // May throw ReflectorError.
    virtual Experience synthesize(const ReflectionRequest& request) = 0;
};

// Deterministic reflector that states exactly what separates the best
// trajectory from the worst: its first action and the rules it used.
class FaithfulMockReflector final : public Reflector {
public:
    std::string name() const override { return "faithful-mock"; }
    Experience synthesize(const ReflectionRequest& request) override;
};

// Runs one rollout from a projected state. With `first_action` the rollout is
// action-seeded; the remaining decisions come from `policy`.
Trajectory rollout(const ShopState& projected, int level, std::size_t horizon, std::optional<Action> first_action,
                   BasePolicy& policy, const RulePreference* guidance = nullptr, double guidance_mix = 0.0);

struct ExtremalPair {
    std::size_t best = 0;
    std::size_t worst = 0;
};

// argmin / argmax of cost; ties go to the earliest index.
ExtremalPair select_extremal(std::span<const Trajectory> trajectories);

// Asks the reflector; any ReflectorError falls back to the faithful mock and
// marks the experience.
Experience reflect_once(int level, const TrajectoryDigest& best, const TrajectoryDigest& worst,
                        const Experience* prior, Reflector& reflector, const ShopState& state,
                        std::span<const Action> legal_actions, std::span<const RuleId> pool,
                        std::uint64_t seed = 0);

struct LevelRecord {
    int level = 0;
    std::vector<Trajectory> trajectories;
    ExtremalPair extremal;
    Experience experience;
};

struct ReflectionOutcome {
    Experience experience;
    // Highest level first, level 0 last.
    std::vector<LevelRecord> levels;
    std::size_t rollouts = 0;
    bool fallback = false;
};

// Top-down simulate/reflect loop from config.max_level to 0. Deterministic in
// (state, config, seed) whenever the reflector is.
ReflectionOutcome hierarchical_reflection(const ShopState& state, const ReflectionConfig& config,
                                          std::uint64_t seed, Reflector& reflector);

enum class CacheDecision { Reuse, Recompute };

CacheDecision experience_cache_policy(const std::optional<Experience>& current, bool event_occurred);

// One JSON object per trajectory (level, cost, steps, first action).
std::string rollout_log_to_jsonl(const ReflectionOutcome& outcome, const Instance& instance);

}  // namespace reflecsched
