#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "reflecsched/bench.hpp"
#include "reflecsched/decision.hpp"
#include "reflecsched/eval.hpp"
#include "reflecsched/llm_client.hpp"
#include "reflecsched/reflect.hpp"

namespace reflecsched {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class PolicyKind { Rule, BaseRandomized, LlmDirect, LlmDirectNoStatic, ReflecSched };

std::string_view to_string(PolicyKind kind);
std::optional<PolicyKind> parse_policy_kind(std::string_view text);

struct PolicySpec {
    PolicyKind kind = PolicyKind::ReflecSched;
    // Report label; derived from the kind and parameters when empty.
    std::string name;
    // Rule policies only.
    std::optional<RuleId> rule;
    // ReflecSched overrides of the experiment-wide reflection config.
    std::optional<int> max_level;
    std::optional<int> rollouts_per_level;
    std::optional<int> base_horizon;

    std::string label() const;
    bool needs_model() const { return kind != PolicyKind::Rule && kind != PolicyKind::BaseRandomized; }
};

// mock: faithful mock reflector and decider, no network.
// remote: HTTP endpoint. replay: answers from a cassette only.
// record: HTTP endpoint, every exchange appended to the cassette.
enum class BackendKind { Mock, Remote, Replay, Record };

std::string_view to_string(BackendKind kind);
std::optional<BackendKind> parse_backend_kind(std::string_view text);

struct BackendConfig {
    BackendKind kind = BackendKind::Mock;
    ModelEndpoint endpoint;
    std::filesystem::path cassette;
};

struct ExperimentConfig {
    std::filesystem::path suite;
    std::vector<PolicySpec> policies;
    int runs_per_pair = 3;
    ReflectionConfig reflection;
    BackendConfig backend;
    std::uint64_t seed = 0;
    std::filesystem::path out = "runs";
    // Cells executed concurrently.
    unsigned workers = 1;
    // Policy compared against the others in the report; the first ReflecSched
    // policy when empty.
    std::string reference;
    // Re-check the designated rule of PDR instances before use.
    bool verify_dominance = true;
    // Write a Gantt chart per cell.
    bool gantt = false;

    void validate() const;
    // Default policy set: ReflecSched, LLM-Direct, BaseRandomized and every
    // non-random pool rule.
    static std::vector<PolicySpec> default_policies(std::span<const RuleId> pool);
};

// Keys absent from the document keep their defaults. Relative paths are
// resolved against `base_dir`.
ExperimentConfig config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

struct Cell {
    std::string instance_id;
    std::string policy;
    int run_index = 0;
    std::uint64_t seed = 0;

    std::string key() const;
};

// Seed of a cell: depends on the master seed, the instance id and the run
// index only, so every policy sees the same seed on a given run.
std::uint64_t cell_seed(std::uint64_t master, const std::string& instance_id, int run_index);

// Builds policies, reflectors and deciders for the configured backend.
class PolicyFactory {
public:
    explicit PolicyFactory(const ExperimentConfig& config);
    // For tests: a ready transport replaces the configured backend.
    PolicyFactory(const ExperimentConfig& config, std::shared_ptr<ChatTransport> transport);

    // Fails fast when a model-backed policy is configured but the endpoint
    // cannot be reached.
    void check_reachable(std::span<const PolicySpec> specs) const;

    std::unique_ptr<Policy> make(const PolicySpec& spec, TokenLedger* ledger,
                                 SamplingProfile profile = SamplingProfile::decision()) const;

    bool uses_model() const { return client_ != nullptr; }

private:
    ExperimentConfig config_;
    std::shared_ptr<ChatTransport> transport_;
    std::shared_ptr<ChatClient> client_;
};

struct LoadedInstance {
    std::shared_ptr<const Instance> instance;
    std::optional<RuleId> designated;
};

// Loads the suite; PDR instances whose designated rule no longer dominates
// are dropped and reported in `flags`.
std::vector<LoadedInstance> load_experiment_suite(const ExperimentConfig& config, std::vector<std::string>& flags);

std::vector<Cell> execution_matrix(const ExperimentConfig& config, std::span<const LoadedInstance> instances);

struct RunSummary {
    std::filesystem::path report_json;
    std::filesystem::path report_csv;
    std::filesystem::path summary_svg;
    std::size_t executed = 0;
    std::size_t skipped = 0;
    std::vector<std::string> failures;
    MetricsReport report;

    bool ok() const { return failures.empty(); }
};

struct RunOptions {
    std::ostream* log = nullptr;
    // Stop after this many newly executed cells (simulates an interruption).
    std::optional<std::size_t> max_cells;
    // Replaces the configured backend.
    std::shared_ptr<ChatTransport> transport;
    SamplingProfile decision_profile = SamplingProfile::decision();
};

// Executes the whole matrix, skipping cells already in <out>/journal.jsonl,
// then writes report.json, report.csv and summary.svg.
RunSummary cmd_run(const ExperimentConfig& config, const RunOptions& options = {});

// Prints the execution matrix; touches nothing on disk.
void print_dry_run(const ExperimentConfig& config, std::ostream& os);

struct AblationOptions {
    std::vector<int> breadths = {1, 3, 6, 12, 24};
};

// L=0 at every breadth next to the configured full hierarchy; writes the
// run outputs plus ablation.json and ablation.svg under <out>.
RunSummary cmd_ablate(ExperimentConfig config, const AblationOptions& ablation = {}, const RunOptions& options = {});

// The three diagnostic probes; writes diagnose.json under <out>.
nlohmann::json cmd_diagnose(ExperimentConfig config, const RunOptions& options = {});

}  // namespace reflecsched
