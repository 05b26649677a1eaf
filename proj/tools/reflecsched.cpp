// reflecsched command-line driver.
#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <map>

#include "reflecsched/bench.hpp"
#include "reflecsched/eval.hpp"
#include "reflecsched/experiment.hpp"
#include "reflecsched/io.hpp"

using namespace reflecsched;

namespace {

struct Overrides {
    std::string config;
    std::string suite;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> runs;
    std::optional<unsigned> workers;
    std::string backend;
    std::string base_url;
    std::string model;
    std::string cassette;
    std::optional<int> max_level;
    std::optional<int> rollouts;
    std::optional<int> base_horizon;
    std::optional<unsigned> rollout_workers;
    std::vector<std::string> policies;
    bool gantt = false;
    bool no_verify = false;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config, "Experiment config (JSON)");
    cmd->add_option("--suite", o.suite, "Suite manifest");
    cmd->add_option("--out", o.out, "Output directory");
    cmd->add_option("--seed", o.seed, "Master seed");
    cmd->add_option("--runs", o.runs, "Runs per policy/instance pair");
    cmd->add_option("--workers", o.workers, "Cells run concurrently");
    cmd->add_option("--backend", o.backend, "mock | remote | replay | record");
    cmd->add_option("--base-url", o.base_url, "Chat endpoint base URL");
    cmd->add_option("--model", o.model, "Model name");
    cmd->add_option("--cassette", o.cassette, "Cassette file for replay/record");
    cmd->add_option("--L", o.max_level, "Top reflection level");
    cmd->add_option("--R", o.rollouts, "Rollouts per level");
    cmd->add_option("--h0", o.base_horizon, "Base rollout horizon");
    cmd->add_option("--rollout-workers", o.rollout_workers, "Threads for rollouts");
    cmd->add_option("--policy", o.policies, "Policy (repeatable); replaces the configured list");
    cmd->add_flag("--gantt", o.gantt, "Write a Gantt chart per cell");
    cmd->add_flag("--no-verify-dominance", o.no_verify, "Skip re-checking PDR instances");
}

ExperimentConfig build_config(const Overrides& o) {
    ExperimentConfig c;
    if (!o.config.empty()) {
        c = load_config(o.config);
    } else {
        c.policies = ExperimentConfig::default_policies(c.reflection.pool);
    }
    if (!o.suite.empty()) c.suite = o.suite;
    if (!o.out.empty()) c.out = o.out;
    if (o.seed) c.seed = *o.seed;
    if (o.runs) c.runs_per_pair = *o.runs;
    if (o.workers) c.workers = *o.workers;
    if (!o.backend.empty()) {
        const auto kind = parse_backend_kind(o.backend);
        if (!kind) throw ConfigError("unknown backend '" + o.backend + "'");
        c.backend.kind = *kind;
    }
    if (!o.base_url.empty()) c.backend.endpoint.base_url = o.base_url;
    if (!o.model.empty()) c.backend.endpoint.model_name = o.model;
    if (!o.cassette.empty()) c.backend.cassette = o.cassette;
    if (o.max_level) c.reflection.max_level = *o.max_level;
    if (o.rollouts) c.reflection.rollouts_per_level = *o.rollouts;
    if (o.base_horizon) c.reflection.base_horizon = *o.base_horizon;
    if (o.rollout_workers) c.reflection.workers = *o.rollout_workers;
    if (!o.policies.empty()) {
        nlohmann::json list = o.policies;
        c.policies = config_from_json({{"policies", list}}).policies;
    }
    if (o.gantt) c.gantt = true;
    if (o.no_verify) c.verify_dominance = false;
    return c;
}

int report(const RunSummary& s) {
    std::cout << "executed " << s.executed << " cells, skipped " << s.skipped << ", failed " << s.failures.size()
              << "\n";
    for (const auto& f : s.failures) std::cerr << "failed: " << f << "\n";
    if (!s.report_json.empty()) {
        std::cout << "report: " << s.report_json.string() << "\n";
        for (const auto& p : s.report.policies) {
            std::cout << "  " << p << ": mean RPD " << s.report.mean_rpd.at(p) << "\n";
        }
    }
    return s.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dynamic flexible job-shop scheduling with hierarchical reflection"};
    app.require_subcommand(1);

    // bench gen
    auto* bench = app.add_subcommand("bench", "Benchmark suites");
    bench->require_subcommand(1);
    auto* gen = bench->add_subcommand("gen", "Generate a suite and its manifest");
    std::string kind_text = "gen", gen_out = "suite";
    std::uint64_t gen_seed = 0;
    std::optional<int> n_small, n_normal, max_attempts;
    std::optional<double> margin;
    unsigned gen_workers = 1;
    gen->add_option("--kind", kind_text, "gen | pdr")->check(CLI::IsMember({"gen", "pdr"}));
    gen->add_option("--seed", gen_seed, "Suite seed");
    gen->add_option("--out", gen_out, "Output directory");
    gen->add_option("--small", n_small, "Small instances");
    gen->add_option("--normal", n_normal, "Normal instances");
    gen->add_option("--margin", margin, "Dominance margin (pdr)");
    gen->add_option("--max-attempts", max_attempts, "Candidates per instance (pdr)");
    gen->add_option("--workers", gen_workers, "Worker threads");

    Overrides run_o, ablate_o, diag_o;
    auto* run = app.add_subcommand("run", "Run the policy x instance x run matrix");
    add_overrides(run, run_o);
    bool dry_run = false;
    run->add_flag("--dry-run", dry_run, "Print the execution matrix and exit");

    auto* ablate = app.add_subcommand("ablate", "L=0 breadth sweep against the full hierarchy");
    add_overrides(ablate, ablate_o);
    std::vector<int> breadths;
    ablate->add_option("--breadths", breadths, "Search breadths for L=0")->delimiter(',');

    auto* diagnose = app.add_subcommand("diagnose", "Static-block, heuristic-utilization and GDR probes");
    add_overrides(diagnose, diag_o);

    auto* gantt = app.add_subcommand("gantt", "Render a schedule as SVG");
    std::string g_instance, g_schedule, g_policy, g_out = "gantt.svg";
    std::uint64_t g_seed = 0;
    gantt->add_option("--instance", g_instance, "Instance JSON")->required();
    auto* g_sched_opt = gantt->add_option("--schedule", g_schedule, "Schedule CSV");
    gantt->add_option("--policy", g_policy, "Rule to run instead of reading a schedule")->excludes(g_sched_opt);
    gantt->add_option("--seed", g_seed, "Seed for --policy");
    gantt->add_option("--out", g_out, "Output SVG");

    auto* validate = app.add_subcommand("validate", "Check an instance and optionally a schedule");
    std::string v_instance, v_schedule;
    validate->add_option("--instance", v_instance, "Instance JSON")->required();
    validate->add_option("--schedule", v_schedule, "Schedule CSV");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            const auto kind = *parse_suite_kind(kind_text);
            SuiteOptions opts;
            opts.counts = SuiteOptions::default_counts(kind);
            if (n_small) opts.counts[ScaleTag::Small] = *n_small;
            if (n_normal) opts.counts[ScaleTag::Normal] = *n_normal;
            if (margin) opts.margin = *margin;
            if (max_attempts) opts.max_attempts = *max_attempts;
            opts.workers = gen_workers;
            const auto suite = generate_suite(kind, gen_seed, opts);
            const auto manifest = write_suite(suite, gen_out);
            std::map<ScaleTag, int> per_scale;
            for (const auto& e : suite.entries) ++per_scale[e.instance.scale_tag];
            for (const auto& [scale, n] : per_scale) std::cout << to_string(scale) << ": " << n << "\n";
            std::cout << "manifest: " << manifest.string() << "\n";
            return 0;
        }
        if (run->parsed()) {
            const auto config = build_config(run_o);
            if (dry_run) {
                print_dry_run(config, std::cout);
                return 0;
            }
            return report(cmd_run(config, {.log = &std::cerr}));
        }
        if (ablate->parsed()) {
            AblationOptions ab;
            if (!breadths.empty()) ab.breadths = breadths;
            const auto config = build_config(ablate_o);
            const int rc = report(cmd_ablate(config, ab, {.log = &std::cerr}));
            std::cout << "ablation: " << (config.out / "ablation.json").string() << "\n";
            return rc;
        }
        if (diagnose->parsed()) {
            const auto config = build_config(diag_o);
            const auto doc = cmd_diagnose(config, {.log = &std::cerr});
            std::cout << doc.dump(2) << "\n";
            return doc["failures"].empty() ? 0 : 1;
        }
        if (gantt->parsed()) {
            auto instance = std::make_shared<const Instance>(read_instance(g_instance));
            ScheduleRecord schedule;
            if (!g_schedule.empty()) {
                schedule = schedule_from_csv(read_text(g_schedule), *instance);
            } else {
                const auto rule = parse_rule(g_policy.empty() ? "EET" : g_policy);
                if (!rule) throw ConfigError("unknown rule '" + g_policy + "'");
                PureRulePolicy policy(*rule);
                schedule = run_policy(instance, policy, g_seed).schedule;
            }
            write_text(g_out, export_gantt(schedule, *instance));
            std::cout << "gantt: " << g_out << "\n";
            return 0;
        }
        if (validate->parsed()) {
            const auto instance = read_instance(v_instance);
            const auto problems = check_instance(instance);
            for (const auto& p : problems) std::cout << "instance: " << p << "\n";
            bool ok = problems.empty();
            if (!v_schedule.empty()) {
                const auto schedule = schedule_from_csv(read_text(v_schedule), instance);
                const auto rep = validate_schedule(instance, schedule, {.require_complete = true});
                for (const auto& v : rep.violations) std::cout << to_string(v.kind) << ": " << v.detail << "\n";
                ok = ok && rep.valid();
                if (rep.valid()) std::cout << "makespan " << to_units(compute_makespan(schedule)) << "\n";
            }
            std::cout << (ok ? "valid" : "invalid") << "\n";
            return ok ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
