#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "reflecsched/model.hpp"
#include "reflecsched/pdr.hpp"

namespace reflecsched {

// Closed integer range [lo, hi].
struct IntRange {
    std::int64_t lo = 0;
    std::int64_t hi = 0;
    bool operator==(const IntRange&) const = default;
};

// Generator parameters. All times are whole units.
struct GenParams {
    ScaleTag scale = ScaleTag::Small;
    IntRange num_machines;
    IntRange initial_jobs;
    IntRange ops_per_job;
    IntRange eligible_machines;
    IntRange processing_time;
    IntRange arrivals;
    // Arrival times are drawn from [1, arrival_horizon].
    std::int64_t arrival_horizon = 0;
    IntRange breakdowns;
    // Breakdown starts are drawn from [1, breakdown_horizon].
    std::int64_t breakdown_horizon = 0;
    IntRange repair_duration;

    static GenParams small();
    static GenParams normal();
    static GenParams defaults(ScaleTag scale);

    // Throws std::invalid_argument for empty or infeasible ranges.
    void validate() const;
};

Instance generate_gen_instance(const GenParams& params, std::uint64_t seed, std::string id = {});

// Makespan of a pure dispatching-rule run. RANDOM uses `seed`.
Time rule_makespan(std::shared_ptr<const Instance> instance, RuleId rule, std::uint64_t seed = 0);

// Rules that take part in the dominance check: the pool without RANDOM.
std::vector<RuleId> dominance_pool(std::span<const RuleId> pool);

struct PdrBenchSpec {
    RuleId target = RuleId::MWKR;
    double margin = 0.02;
    int max_attempts = 2000;
    GenParams params = GenParams::small();
    std::vector<RuleId> pool = default_rule_pool();

    void validate() const;
};

struct DominanceCheck {
    bool holds = false;
    std::map<RuleId, Time> makespans;
    // Target makespan divided by the best competitor's.
    double ratio = 0.0;
};

// target <= (1 - margin) * other for every other non-random rule in the pool.
DominanceCheck check_dominance(std::shared_ptr<const Instance> instance, RuleId target, double margin,
                               std::span<const RuleId> pool, unsigned workers = 1);

class GenerationExhausted : public std::runtime_error {
public:
    GenerationExhausted(RuleId target, int attempts, double best_ratio, std::map<RuleId, int> winners);

    RuleId target() const { return target_; }
    int attempts() const { return attempts_; }
    // Smallest target/competitor ratio seen over all candidates.
    double best_ratio() const { return best_ratio_; }
    // How often each rule had the strictly smallest makespan.
    const std::map<RuleId, int>& winners() const { return winners_; }

private:
    RuleId target_;
    int attempts_;
    double best_ratio_;
    std::map<RuleId, int> winners_;
};

Instance generate_pdr_instance(const PdrBenchSpec& spec, std::uint64_t seed, std::string id = {});

enum class SuiteKind { Gen, Pdr };

std::string_view to_string(SuiteKind kind);
std::optional<SuiteKind> parse_suite_kind(std::string_view text);

struct SuiteOptions {
    // Defaults: gen 20 per scale; pdr 112 Normal, 12 Small.
    std::map<ScaleTag, int> counts;
    std::map<ScaleTag, GenParams> params;
    std::vector<RuleId> pool = default_rule_pool();
    // Designated rules of a PDR suite, assigned round-robin per scale. Scales
    // without an entry use default_pdr_targets. When a rule exhausts
    // max_attempts the slot goes to the next rule in the list and the
    // instance's metadata keeps the requested one.
    std::map<ScaleTag, std::vector<RuleId>> targets;
    double margin = 0.02;
    int max_attempts = 2000;
    unsigned workers = 1;

    static std::map<ScaleTag, int> default_counts(SuiteKind kind);
};

struct SuiteEntry {
    Instance instance;
    std::uint64_t seed = 0;
    std::optional<RuleId> designated;
};

struct Suite {
    SuiteKind kind = SuiteKind::Gen;
    std::uint64_t seed = 0;
    std::vector<SuiteEntry> entries;

    nlohmann::json manifest() const;
};

// Designated rules used for PDR suites when none are given. SPT and EET are
// absent: without breakdowns revealed ahead of time they make identical
// choices, so neither can beat the other.
std::vector<RuleId> default_pdr_targets(ScaleTag scale);

Suite generate_suite(SuiteKind kind, std::uint64_t seed, SuiteOptions options = {});

// Writes <dir>/instances/<id>.json and <dir>/manifest.json; returns the
// manifest path.
std::filesystem::path write_suite(const Suite& suite, const std::filesystem::path& dir);

struct LoadedSuite {
    SuiteKind kind = SuiteKind::Gen;
    std::vector<SuiteEntry> entries;
};

LoadedSuite load_suite(const std::filesystem::path& manifest_path);

}  // namespace reflecsched
