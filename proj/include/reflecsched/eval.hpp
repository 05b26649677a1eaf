#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "reflecsched/model.hpp"
#include "reflecsched/sim.hpp"

namespace reflecsched {

// 100 * (makespan - best) / best. Throws for best <= 0.
double rpd(double makespan, double best);

// Percentage of pairs with a strictly smaller than b.
double win_rate(std::span<const double> a, std::span<const double> b);

// Fraction of decision points whose chosen action is in the greedy set.
double gdr(std::span<const DecisionPoint> log);

struct WilcoxonResult {
    // min(W+, W-).
    double statistic = 0.0;
    double w_plus = 0.0;
    double w_minus = 0.0;
    // Pairs left after dropping zero differences.
    std::size_t n = 0;
    double p_two_sided = 1.0;
    // Alternative: differences tend to be positive.
    double p_greater = 1.0;
    // Alternative: differences tend to be negative.
    double p_less = 1.0;
    bool exact = false;
};

// Every difference was zero; no p-value exists.
struct WilcoxonNoSignal {
    std::size_t n = 0;
};

using WilcoxonOutcome = std::variant<WilcoxonNoSignal, WilcoxonResult>;

enum class WilcoxonMethod { Auto, Exact, Normal };

// Signed-rank test on paired differences. Auto is exact up to 20 non-zero
// differences and uses the normal approximation (tie and continuity
// corrected) beyond.
WilcoxonOutcome wilcoxon_signed_rank(std::span<const double> differences,
                                     WilcoxonMethod method = WilcoxonMethod::Auto);

// Differences a_i - b_i.
WilcoxonOutcome wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                     WilcoxonMethod method = WilcoxonMethod::Auto);

struct RunRecord {
    std::string instance_id;
    std::string policy;
    int run_index = 0;
    Time makespan = 0;
    std::optional<double> gdr;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    std::vector<std::string> flags;
    // Paths of the stored decision log and schedule, relative to the output
    // directory.
    std::string decision_log;
    std::string schedule;

    bool operator==(const RunRecord&) const = default;
};

nlohmann::json to_json(const RunRecord& record);
RunRecord run_record_from_json(const nlohmann::json& doc);

struct AggregateConfig {
    // Policy compared against all others for win rates and p-values. Empty
    // means every ordered pair.
    std::string reference;
};

struct PairStats {
    std::string a;
    std::string b;
    double win_rate = 0.0;
    std::optional<WilcoxonResult> wilcoxon;
    // Instances both policies were run on.
    std::size_t instances = 0;
};

struct MetricsReport {
    std::vector<std::string> policies;
    std::vector<std::string> instances;
    // Smallest makespan over all policies and runs, per instance (units).
    std::map<std::string, double> best;
    // rpd[instance][policy]: mean over runs of the per-run RPD.
    std::map<std::string, std::map<std::string, double>> rpd;
    // run_rpd[instance][policy][k]: RPD of the k-th run, in record order.
    std::map<std::string, std::map<std::string, std::vector<double>>> run_rpd;
    // mean_makespan[instance][policy], units.
    std::map<std::string, std::map<std::string, double>> mean_makespan;
    std::map<std::string, double> mean_rpd;
    std::map<std::string, double> mean_gdr;
    std::map<std::string, std::int64_t> tokens;
    std::vector<PairStats> pairs;
    // Missing policy x instance cells and fallback flags.
    std::vector<std::string> flags;
};

MetricsReport aggregate(std::span<const RunRecord> records, const AggregateConfig& config = {});

nlohmann::json report_to_json(const MetricsReport& report);
std::string report_to_csv(const MetricsReport& report);
// Bars for mean RPD per policy, a line for win rate against the reference.
std::string report_summary_svg(const MetricsReport& report);

// Throws std::invalid_argument when the schedule fails validation.
std::string export_gantt(const ScheduleRecord& schedule, const Instance& instance);

}  // namespace reflecsched
