// Acceptance suite: one PASS/FAIL/SKIP line per criterion. Exit status is
// non-zero when any criterion fails.
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "reflecsched/bench.hpp"
#include "reflecsched/decision.hpp"
#include "reflecsched/eval.hpp"
#include "reflecsched/experiment.hpp"
#include "reflecsched/io.hpp"
#include "reflecsched/llm_client.hpp"
#include "reflecsched/rng.hpp"

using namespace reflecsched;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Outcome {
    enum class Status { Pass, Fail, Skip } status = Status::Fail;
    std::string detail;
};

Outcome pass(std::string d) { return {Outcome::Status::Pass, std::move(d)}; }
Outcome fail(std::string d) { return {Outcome::Status::Fail, std::move(d)}; }
Outcome skip(std::string d) { return {Outcome::Status::Skip, std::move(d)}; }
Outcome verdict(bool ok, std::string d) { return ok ? pass(std::move(d)) : fail(std::move(d)); }

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

unsigned threads() { return std::max(1u, std::thread::hardware_concurrency()); }

// Calls fn(i) for i in [0, n) on a few threads; the first exception wins.
void parallel(std::size_t n, const std::function<void(std::size_t)>& fn) {
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex m;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < std::min<std::size_t>(threads(), n); ++t) {
        pool.emplace_back([&] {
            for (std::size_t i; (i = next++) < n;) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(m);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

std::shared_ptr<const Instance> share(Instance inst) { return std::make_shared<const Instance>(std::move(inst)); }

ReflectionConfig reflection(int level, int rollouts, int horizon, unsigned workers = 1) {
    ReflectionConfig c;
    c.max_level = level;
    c.rollouts_per_level = rollouts;
    c.base_horizon = horizon;
    c.workers = workers;
    return c;
}

ReflecSchedPolicy mock_reflecsched(const ReflectionConfig& c) {
    return ReflecSchedPolicy(c, std::make_shared<FaithfulMockReflector>(), std::make_shared<FaithfulMockDecider>());
}

Time run_makespan(std::shared_ptr<const Instance> inst, Policy& p, std::uint64_t seed) {
    return run_policy(std::move(inst), p, seed).makespan;
}

std::string fingerprint(const RunResult& r, const Instance& inst) {
    return decision_log_to_jsonl(r.decision_log, inst) + "\n--\n" + schedule_to_csv(r.schedule, inst);
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("reflecsched_acceptance_" + std::to_string(::getpid())) / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// ---------------------------------------------------------------------------

Outcome schedule_validity() {
    const auto t0 = std::chrono::steady_clock::now();
    constexpr std::size_t n = 500;
    const auto rules = default_rule_pool();
    std::atomic<std::size_t> runs{0};
    std::mutex m;
    std::vector<std::string> problems;
    parallel(n, [&](std::size_t i) {
        const auto params = i % 2 == 0 ? GenParams::small() : GenParams::normal();
        const auto inst = share(generate_gen_instance(params, Rng::derive(1001, i)));
        for (RuleId rule : rules) {
            PureRulePolicy p(rule);
            const auto r = run_policy(inst, p, i);
            const auto report = validate_schedule(*inst, r.schedule, {.require_complete = true});
            auto oracle_problems = oracle::check_schedule(*inst, r.schedule);
            ++runs;
            if (!report.valid() || !oracle_problems.empty() || r.makespan != compute_makespan(r.schedule)) {
                std::lock_guard lock(m);
                problems.push_back(inst->id + "/" + std::string(to_string(rule)));
            }
        }
    });
    const double secs = seconds_since(t0);
    return verdict(problems.empty() && secs < 120.0,
                   fmt("%zu schedules, %zu invalid, %.1fs (target < 120s)", runs.load(), problems.size(), secs));
}

bool same_dirs(const fs::path& a, const fs::path& b, std::string& diff) {
    std::set<std::string> files;
    for (const auto& root : {a, b}) {
        for (const auto& e : fs::recursive_directory_iterator(root)) {
            if (!e.is_regular_file()) continue;
            const auto rel = fs::relative(e.path(), root).generic_string();
            // The journal is appended in completion order.
            if (rel == "journal.jsonl") continue;
            files.insert(rel);
        }
    }
    for (const auto& f : files) {
        if (!fs::exists(a / f) || !fs::exists(b / f) || read_text(a / f) != read_text(b / f)) {
            diff = f;
            return false;
        }
    }
    return true;
}

Outcome determinism() {
    std::vector<std::shared_ptr<const Instance>> instances;
    for (std::uint64_t s = 0; s < 8; ++s) instances.push_back(share(generate_gen_instance(GenParams::small(), 500 + s)));
    for (std::uint64_t s = 0; s < 2; ++s) instances.push_back(share(generate_gen_instance(GenParams::normal(), 600 + s)));

    using Maker = std::function<std::unique_ptr<Policy>()>;
    const std::vector<std::pair<std::string, Maker>> makers = {
        {"ReflecSched", [] { return std::make_unique<ReflecSchedPolicy>(mock_reflecsched(reflection(2, 8, 3, 1))); }},
        {"ReflecSched-w4", [] { return std::make_unique<ReflecSchedPolicy>(mock_reflecsched(reflection(2, 8, 3, 4))); }},
        {"LLM-Direct", [] { return std::make_unique<LlmDirectPolicy>(std::make_shared<FaithfulMockDecider>()); }},
        {"BaseRandomized", [] { return std::make_unique<BaseRandomizedPolicy>(); }},
        {"RANDOM", [] { return std::make_unique<PureRulePolicy>(RuleId::RANDOM); }},
    };
    std::size_t pairs = 0;
    std::vector<std::string> mismatches;
    for (std::size_t i = 0; i < instances.size(); ++i) {
        const auto& inst = instances[i];
        std::map<std::string, std::string> prints;
        for (const auto& [name, make] : makers) {
            auto p1 = make();
            auto p2 = make();
            const auto a = fingerprint(run_policy(inst, *p1, 77 + i), *inst);
            const auto b = fingerprint(run_policy(inst, *p2, 77 + i), *inst);
            ++pairs;
            if (a != b) mismatches.push_back(inst->id + "/" + name);
            prints[name] = a;
        }
        if (prints["ReflecSched"] != prints["ReflecSched-w4"]) mismatches.push_back(inst->id + "/workers");
    }

    // Whole experiment, sequential vs concurrent cells.
    const auto dir = scratch("determinism");
    Suite suite;
    suite.kind = SuiteKind::Gen;
    for (std::uint64_t s = 0; s < 3; ++s) {
        suite.entries.push_back({generate_gen_instance(GenParams::small(), 900 + s), 900 + s, std::nullopt});
    }
    ExperimentConfig cfg;
    cfg.suite = write_suite(suite, dir / "suite");
    cfg.policies = {{.kind = PolicyKind::ReflecSched},
                    {.kind = PolicyKind::LlmDirect},
                    {.kind = PolicyKind::BaseRandomized},
                    {.kind = PolicyKind::Rule, .rule = RuleId::EET}};
    cfg.reflection = reflection(1, 4, 3, 2);
    cfg.runs_per_pair = 2;
    cfg.seed = 42;
    cfg.out = dir / "seq";
    cfg.workers = 1;
    const auto s1 = cmd_run(cfg);
    cfg.out = dir / "par";
    cfg.workers = 4;
    const auto s2 = cmd_run(cfg);
    std::string diff;
    const bool dirs_equal = s1.ok() && s2.ok() && same_dirs(dir / "seq", dir / "par", diff);
    if (!dirs_equal) mismatches.push_back("cmd_run workers 1 vs 4: " + diff);

    return verdict(mismatches.empty(),
                   fmt("%zu repeated runs, rollout workers 4 vs 1, cmd_run workers 4 vs 1; %zu mismatches%s", pairs,
                       mismatches.size(), mismatches.empty() ? "" : (" first " + mismatches.front()).c_str()));
}

// Shared by criteria 3 and 4: 100 Small instances, six policies.
struct AblationData {
    static constexpr std::size_t kInstances = 100;
    std::vector<std::string> policies = {"BaseRandomized", "EET", "Full", "L0-R1", "L0-R8", "L0-R24"};
    // makespan[policy][instance], units.
    std::map<std::string, std::vector<double>> makespan;
    double seconds = 0;
};

const AblationData& ablation_data() {
    static const AblationData data = [] {
        AblationData d;
        const auto t0 = std::chrono::steady_clock::now();
        for (const auto& p : d.policies) d.makespan[p].assign(AblationData::kInstances, 0.0);
        std::mutex m;
        parallel(AblationData::kInstances, [&](std::size_t i) {
            const auto inst = share(generate_gen_instance(GenParams::small(), Rng::derive(2026, i)));
            const std::uint64_t seed = i;
            std::map<std::string, Time> ms;
            BaseRandomizedPolicy base;
            ms["BaseRandomized"] = run_makespan(inst, base, seed);
            PureRulePolicy eet(RuleId::EET);
            ms["EET"] = run_makespan(inst, eet, seed);
            auto full = mock_reflecsched(reflection(2, 8, 3));
            ms["Full"] = run_makespan(inst, full, seed);
            for (int r : {1, 8, 24}) {
                auto l0 = mock_reflecsched(reflection(0, r, 3));
                ms["L0-R" + std::to_string(r)] = run_makespan(inst, l0, seed);
            }
            std::lock_guard lock(m);
            for (const auto& [p, v] : ms) d.makespan[p][i] = to_units(v);
        });
        d.seconds = seconds_since(t0);
        return d;
    }();
    return data;
}

Outcome improvement_over_base() {
    const auto& d = ablation_data();
    const auto& full = d.makespan.at("Full");
    const auto& base = d.makespan.at("BaseRandomized");
    std::vector<double> diff(full.size());
    std::size_t better = 0, worse = 0;
    for (std::size_t i = 0; i < full.size(); ++i) {
        diff[i] = full[i] - base[i];
        better += diff[i] < 0;
        worse += diff[i] > 0;
    }
    const auto outcome = wilcoxon_signed_rank(diff);
    if (std::holds_alternative<WilcoxonNoSignal>(outcome)) return fail("all differences zero");
    const auto& w = std::get<WilcoxonResult>(outcome);
    const double mean_full = std::accumulate(full.begin(), full.end(), 0.0) / full.size();
    const double mean_base = std::accumulate(base.begin(), base.end(), 0.0) / base.size();
    return verdict(w.p_less < 0.05 && d.seconds < 600.0,
                   fmt("mean makespan %.2f vs base %.2f, better %zu / worse %zu, p_less=%.3g p_greater=%.3g, %.1fs",
                       mean_full, mean_base, better, worse, w.p_less, w.p_greater, d.seconds));
}

// Pooled-best RPD computed here, not by the library.
std::map<std::string, double> mean_pooled_rpd(const AblationData& d) {
    std::map<std::string, double> out;
    for (std::size_t i = 0; i < AblationData::kInstances; ++i) {
        double best = INFINITY;
        for (const auto& p : d.policies) best = std::min(best, d.makespan.at(p)[i]);
        for (const auto& p : d.policies) out[p] += 100.0 * (d.makespan.at(p)[i] - best) / best;
    }
    for (auto& [p, v] : out) v /= AblationData::kInstances;
    return out;
}

Outcome ablation_direction() {
    const auto rpd = mean_pooled_rpd(ablation_data());
    const double full = rpd.at("Full");
    const bool ok = full <= rpd.at("L0-R1") && full <= rpd.at("L0-R8") && full <= rpd.at("L0-R24");
    const double gain = rpd.at("L0-R8") - rpd.at("L0-R24");
    return verdict(ok, fmt("mean RPD full %.2f; L0 R1 %.2f, R8 %.2f, R24 %.2f (R8->R24 gain %.2f, reported only)",
                           full, rpd.at("L0-R1"), rpd.at("L0-R8"), rpd.at("L0-R24"), gain));
}

// Reads an instance file with plain JSON access, independent of the library
// reader.
Instance independent_load(const fs::path& path) {
    std::ifstream in(path);
    const json doc = json::parse(in);
    const auto job = [](const json& j) {
        Job out;
        out.id = j["job_id"].get<std::string>();
        out.arrival_time = j["arrival_time"].get<Time>();
        for (const auto& op : j["operations"]) {
            Operation o;
            for (const auto& [m, pt] : op["eligible"].items()) o.eligible[std::stoi(m)] = pt.get<Time>();
            out.operations.push_back(std::move(o));
        }
        return out;
    };
    Instance inst;
    inst.id = doc["instance_id"].get<std::string>();
    inst.num_machines = doc["num_machines"].get<int>();
    inst.scale_tag = doc["scale_tag"].get<std::string>() == "Small" ? ScaleTag::Small : ScaleTag::Normal;
    for (const auto& j : doc["jobs"]) inst.initial_jobs.push_back(job(j));
    for (const auto& e : doc["events"]) {
        DynamicEvent ev;
        ev.id = e["event_id"].get<std::string>();
        ev.reveal_time = e["reveal_time"].get<Time>();
        const auto& k = e["kind"];
        if (k["type"] == "job_arrival") {
            ev.kind = JobArrival{job(k["job"])};
        } else {
            ev.kind = MachineBreakdown{k["machine"].get<int>(), k["start_time"].get<Time>(),
                                       k["repair_duration"].get<Time>()};
        }
        inst.events.push_back(std::move(ev));
    }
    if (doc.contains("metadata")) inst.metadata = doc["metadata"].get<std::map<std::string, std::string>>();
    return inst;
}

Outcome pdr_dominance() {
    const auto t0 = std::chrono::steady_clock::now();
    SuiteOptions opts;
    opts.counts = {{ScaleTag::Small, 12}, {ScaleTag::Normal, 6}};
    opts.workers = threads();
    const auto suite = generate_suite(SuiteKind::Pdr, 2718, opts);
    const auto dir = scratch("pdr");
    const auto manifest_path = write_suite(suite, dir);

    std::ifstream in(manifest_path);
    const json manifest = json::parse(in);
    const auto rules = dominance_pool(default_rule_pool());
    std::size_t checked = 0;
    std::vector<std::string> problems;
    double worst_ratio = 0.0;
    for (const auto& item : manifest["instances"]) {
        const auto inst = share(independent_load(dir / item["file"].get<std::string>()));
        const auto designated = parse_rule(item["designated_rule"].get<std::string>());
        if (!designated) {
            problems.push_back(inst->id + ": no designated rule");
            continue;
        }
        std::map<RuleId, Time> ms;
        for (RuleId r : rules) {
            PureRulePolicy p(r);
            const auto result = run_policy(inst, p, 0);
            if (!oracle::check_schedule(*inst, result.schedule).empty()) problems.push_back(inst->id + ": invalid");
            ms[r] = result.makespan;
        }
        for (RuleId r : rules) {
            if (r == *designated) continue;
            const double ratio = static_cast<double>(ms[*designated]) / static_cast<double>(ms[r]);
            worst_ratio = std::max(worst_ratio, ratio);
            // Integer form of target <= 0.98 * other.
            if (ms[*designated] * 50 > ms[r] * 49) {
                problems.push_back(inst->id + ": " + std::string(to_string(*designated)) + " vs " +
                                   std::string(to_string(r)));
            }
        }
        ++checked;
    }
    return verdict(problems.empty() && checked == suite.entries.size(),
                   fmt("%zu instances re-read from disk, %zu violations, largest ratio %.4f, %.1fs", checked,
                       problems.size(), worst_ratio, seconds_since(t0)));
}

Outcome gdr_extremes() {
    std::size_t eet_runs = 0, eet_bad = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        const auto params = s % 2 == 0 ? GenParams::small() : GenParams::normal();
        const auto inst = share(generate_gen_instance(params, 3000 + s));
        PureRulePolicy eet(RuleId::EET);
        const auto r = run_policy(inst, eet, s);
        ++eet_runs;
        eet_bad += gdr(r.decision_log) != 1.0;
    }

    // Anti-greedy: latest completion estimate, recording whether every
    // decision point had at least two actions with pairwise distinct estimates.
    GenParams p;
    p.scale = ScaleTag::Small;
    p.num_machines = {2, 3};
    p.initial_jobs = {2, 4};
    p.ops_per_job = {1, 2};
    p.eligible_machines = {2, 2};
    p.processing_time = {1, 30};
    p.arrivals = {0, 1};
    p.arrival_horizon = 10;
    p.breakdowns = {0, 0};
    std::size_t kept = 0, anti_bad = 0, tried = 0;
    for (std::uint64_t s = 0; kept < 20 && tried < 20000; ++s, ++tried) {
        const auto inst = share(generate_gen_instance(p, 7000 + s));
        bool distinct = true;
        FunctionPolicy anti("anti-greedy", [&](const ShopState& st, std::span<const Action> acts) {
            std::set<Time> seen;
            for (const auto& a : acts) seen.insert(st.completion_estimate(a));
            if (acts.size() < 2 || seen.size() != acts.size()) distinct = false;
            return *std::max_element(acts.begin(), acts.end(), [&](const Action& a, const Action& b) {
                return st.completion_estimate(a) < st.completion_estimate(b);
            });
        });
        const auto r = run_policy(inst, anti, 0);
        if (!distinct) continue;
        ++kept;
        anti_bad += gdr(r.decision_log) != 0.0;
    }
    return verdict(eet_bad == 0 && kept > 0 && anti_bad == 0,
                   fmt("EET: %zu runs, %zu with GDR != 1; anti-greedy: %zu filtered instances (of %zu), %zu with "
                       "GDR != 0",
                       eet_runs, eet_bad, kept, tried, anti_bad));
}

Outcome myopia_gap() {
    const auto tiny = oracle::tiny_instances(200, 41);
    std::size_t gaps = 0;
    std::string example;
    for (const auto& inst : tiny) {
        auto shared_inst = share(inst);
        PureRulePolicy eet(RuleId::EET);
        const Time greedy = run_makespan(shared_inst, eet, 0);
        const Time opt = oracle::brute_force_optimum(inst);
        if (greedy > opt) {
            if (gaps++ == 0) {
                example = fmt("%s: EET %.0f vs optimum %.0f (%zu ops)", inst.id.c_str(), to_units(greedy),
                              to_units(opt), total_operations(inst));
            }
        }
    }
    return verdict(gaps > 0, fmt("%zu of %zu tiny instances show a gap; %s", gaps, tiny.size(), example.c_str()));
}

Outcome wilcoxon_correctness() {
    struct Row {
        int s1, s2, s3;
        double w_plus, p_greater, p_less, p_two;
    };
    // Signs applied to |d| = 1, 2, 3; 8 equally likely sign patterns.
    const Row table[] = {
        {+1, +1, +1, 6, 1.0 / 8, 8.0 / 8, 0.25}, {+1, +1, -1, 3, 5.0 / 8, 5.0 / 8, 1.0},
        {+1, -1, +1, 4, 3.0 / 8, 6.0 / 8, 0.75}, {+1, -1, -1, 1, 7.0 / 8, 2.0 / 8, 0.5},
        {-1, +1, +1, 5, 2.0 / 8, 7.0 / 8, 0.5},  {-1, +1, -1, 2, 6.0 / 8, 3.0 / 8, 0.75},
        {-1, -1, +1, 3, 5.0 / 8, 5.0 / 8, 1.0},  {-1, -1, -1, 0, 8.0 / 8, 1.0 / 8, 0.25},
    };
    std::size_t table_bad = 0;
    for (const auto& row : table) {
        const std::vector<double> d = {1.0 * row.s1, 2.0 * row.s2, 3.0 * row.s3};
        const auto out = wilcoxon_signed_rank(d, WilcoxonMethod::Exact);
        const auto* w = std::get_if<WilcoxonResult>(&out);
        const auto close = [](double a, double b) { return std::abs(a - b) < 1e-12; };
        if (!w || !close(w->w_plus, row.w_plus) || !close(w->p_greater, row.p_greater) ||
            !close(w->p_less, row.p_less) || !close(w->p_two_sided, row.p_two)) {
            ++table_bad;
        }
    }

    Rng rng(12);
    double max_gap = 0.0, max_enum_gap = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> d(12);
        for (auto& x : d) x = (rng.uniform01() - 0.4) * 10.0;
        const auto exact = std::get<WilcoxonResult>(wilcoxon_signed_rank(d, WilcoxonMethod::Exact));
        const auto approx = std::get<WilcoxonResult>(wilcoxon_signed_rank(d, WilcoxonMethod::Normal));
        const auto brute = oracle::signed_rank_enumerate(d);
        max_gap = std::max({max_gap, std::abs(exact.p_two_sided - approx.p_two_sided),
                            std::abs(exact.p_greater - approx.p_greater), std::abs(exact.p_less - approx.p_less)});
        max_enum_gap = std::max({max_enum_gap, std::abs(exact.p_two_sided - brute.p_two_sided),
                                 std::abs(exact.p_greater - brute.p_greater), std::abs(exact.p_less - brute.p_less)});
    }
    return verdict(table_bad == 0 && max_gap <= 0.02 && max_enum_gap < 1e-12,
                   fmt("n=3 table: %zu of 8 rows wrong; m=12 x 200: max |exact - normal| %.4f, max |exact - "
                       "enumeration| %.2g",
                       table_bad, max_gap, max_enum_gap));
}

Outcome metric_formulas() {
    const double r = rpd(110.0, 100.0);
    const std::vector<double> a = {5, 7, 9}, b = {5, 7, 9};
    const double w = win_rate(a, b);

    // Three runs per cell so that the pooled best is taken over runs too.
    std::vector<RunRecord> records;
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto inst = share(generate_gen_instance(GenParams::small(), 8100 + s));
        for (int run = 0; run < 3; ++run) {
            std::vector<std::pair<std::string, std::unique_ptr<Policy>>> ps;
            ps.emplace_back("BaseRandomized", std::make_unique<BaseRandomizedPolicy>());
            ps.emplace_back("RANDOM", std::make_unique<PureRulePolicy>(RuleId::RANDOM));
            ps.emplace_back("ReflecSched", std::make_unique<ReflecSchedPolicy>(mock_reflecsched(reflection(1, 4, 3))));
            for (auto& [name, p] : ps) {
                RunRecord rec;
                rec.instance_id = inst->id;
                rec.policy = name;
                rec.run_index = run;
                rec.makespan = run_makespan(inst, *p, cell_seed(7, inst->id, run));
                records.push_back(rec);
            }
        }
    }
    const auto report = aggregate(records);
    std::size_t without_zero = 0;
    for (const auto& inst : report.instances) {
        bool zero = false;
        for (const auto& [p, runs] : report.run_rpd.at(inst)) zero = zero || std::count(runs.begin(), runs.end(), 0.0);
        without_zero += !zero;
    }
    const bool ok = std::abs(r - 10.0) < 1e-12 && w == 0.0 && without_zero == 0 && !report.instances.empty();
    return verdict(ok, fmt("rpd(110,100)=%.6g, win_rate(ties)=%.6g, %zu of %zu instances lack a zero per-run RPD", r, w,
                           without_zero, report.instances.size()));
}

Outcome optimality_bound() {
    const auto tiny = oracle::tiny_instances(50, 97);
    std::size_t runs = 0;
    std::vector<std::string> beaten;
    for (const auto& inst : tiny) {
        const auto shared_inst = share(inst);
        const Time opt = oracle::brute_force_optimum(inst);
        std::vector<std::pair<std::string, Time>> ms;
        for (RuleId rule : default_rule_pool()) {
            PureRulePolicy p(rule);
            for (std::uint64_t seed = 0; seed < (rule == RuleId::RANDOM ? 5u : 1u); ++seed) {
                ms.emplace_back(std::string(to_string(rule)), run_makespan(shared_inst, p, seed));
            }
        }
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            auto rs = mock_reflecsched(reflection(2, 8, 3));
            ms.emplace_back("ReflecSched", run_makespan(shared_inst, rs, seed));
        }
        for (const auto& [name, m] : ms) {
            ++runs;
            if (m < opt) beaten.push_back(inst.id + "/" + name);
        }
    }
    return verdict(tiny.size() == 50 && beaten.empty(),
                   fmt("%zu tiny instances, %zu runs, %zu below the exhaustive optimum", tiny.size(), runs,
                       beaten.size()));
}

// Remote code path driven only by a scripted stub recorded to a cassette,
// then replayed with no inner transport at all.
Outcome offline_completeness() {
    const auto dir = scratch("offline");
    Suite suite;
    for (std::uint64_t s = 0; s < 2; ++s) {
        suite.entries.push_back({generate_gen_instance(GenParams::small(), 40 + s), 40 + s, std::nullopt});
    }
    ExperimentConfig cfg;
    cfg.suite = write_suite(suite, dir / "suite");
    cfg.policies = {{.kind = PolicyKind::ReflecSched}, {.kind = PolicyKind::LlmDirect}};
    cfg.reflection = reflection(1, 3, 2);
    cfg.runs_per_pair = 1;

    // Mock configs build no transport.
    const bool mock_offline = !PolicyFactory(cfg).uses_model();

    auto stub = std::make_shared<ScriptedTransport>([](const ChatRequest& req, std::size_t call) {
        ChatReply r;
        r.text = req.messages.back().content.find("PREFERRED_RULE") != std::string::npos
                     ? "Prefer short jobs.\nPREFERRED_RULE: SPT"
                     : "ACTION: " + std::to_string(call % 2);
        r.usage = {static_cast<std::int64_t>(req.messages.back().content.size() / 4), 7};
        return r;
    });
    const auto cassette = dir / "cassette.jsonl";
    cfg.out = dir / "record";
    RunOptions record;
    record.transport = std::make_shared<CassetteTransport>(cassette, CassetteTransport::Mode::Record, stub);
    const auto rec = cmd_run(cfg, record);

    cfg.backend.kind = BackendKind::Replay;
    cfg.backend.cassette = cassette;
    cfg.out = dir / "replay";
    const auto rep = cmd_run(cfg);
    const bool same = rec.ok() && rep.ok() && read_text(rec.report_json) == read_text(rep.report_json);
    return verdict(mock_offline && same && stub->calls() > 0,
                   fmt("mock backends build no transport: %s; %zu scripted calls recorded, replay without network "
                       "%s",
                       mock_offline ? "yes" : "no", stub->calls(), same ? "identical" : "differs"));
}

// Sums token usage on the wire so the ledger can be checked against it.
class CountingTransport final : public ChatTransport {
public:
    explicit CountingTransport(std::shared_ptr<ChatTransport> inner) : inner_(std::move(inner)) {}
    ChatReply send(const ChatRequest& request) override {
        auto reply = inner_->send(request);
        std::lock_guard lock(m_);
        total_ += reply.usage;
        return reply;
    }
    bool probe() override { return inner_->probe(); }
    TokenUsage total() const {
        std::lock_guard lock(m_);
        return total_;
    }

private:
    std::shared_ptr<ChatTransport> inner_;
    mutable std::mutex m_;
    TokenUsage total_;
};

Outcome remote_smoke() {
    const char* url = std::getenv("REFLECSCHED_REMOTE_URL");
    const char* model = std::getenv("REFLECSCHED_REMOTE_MODEL");
    if (!url || !*url || !model || !*model) return skip("set REFLECSCHED_REMOTE_URL and REFLECSCHED_REMOTE_MODEL");

    ExperimentConfig cfg;
    cfg.backend.kind = BackendKind::Remote;
    cfg.backend.endpoint.base_url = url;
    cfg.backend.endpoint.model_name = model;
    cfg.reflection = reflection(1, 4, 3);
    const PolicySpec spec{.kind = PolicyKind::ReflecSched};
    cfg.policies = {spec};
    auto wire = std::make_shared<CountingTransport>(std::make_shared<HttpTransport>(cfg.backend.endpoint));
    PolicyFactory factory(cfg, wire);
    try {
        factory.check_reachable(cfg.policies);
    } catch (const ConfigError& e) {
        return fail(e.what());
    }
    TokenLedger ledger;
    std::size_t decisions = 0, flagged = 0, illegal = 0;
    try {
        for (std::uint64_t s = 0; s < 3; ++s) {
            const auto inst = share(generate_gen_instance(GenParams::small(), 5000 + s));
            auto policy = factory.make(spec, &ledger);
            const auto r = run_policy(inst, *policy, s);
            for (const auto& d : r.decision_log) {
                ++decisions;
                illegal += std::find(d.available_actions.begin(), d.available_actions.end(), d.chosen) ==
                           d.available_actions.end();
                flagged += !d.note.empty();
            }
            if (!validate_schedule(*inst, r.schedule, {.require_complete = true}).valid()) ++illegal;
        }
    } catch (const std::exception& e) {
        return fail(std::string("run failed: ") + e.what());
    }
    const auto total = ledger.total();
    const bool exact = total == wire->total();
    return verdict(illegal == 0 && exact,
                   fmt("%zu decisions, %zu illegal, %zu fallback-flagged; ledger %lld+%lld tokens, wire %lld+%lld",
                       decisions, illegal, flagged, static_cast<long long>(total.prompt_tokens),
                       static_cast<long long>(total.completion_tokens),
                       static_cast<long long>(wire->total().prompt_tokens),
                       static_cast<long long>(wire->total().completion_tokens)));
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"schedule validity", schedule_validity},
        {"determinism", determinism},
        {"improvement over base policy", improvement_over_base},
        {"ablation direction", ablation_direction},
        {"PDR dominance", pdr_dominance},
        {"GDR extremes", gdr_extremes},
        {"myopia gap", myopia_gap},
        {"Wilcoxon correctness", wilcoxon_correctness},
        {"metric formulas", metric_formulas},
        {"optimality bound", optimality_bound},
        {"offline completeness", offline_completeness},
        {"remote smoke test", remote_smoke},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = fail(std::string("exception: ") + e.what());
        }
        const char* status = o.status == Outcome::Status::Pass ? "PASS" : o.status == Outcome::Status::Skip ? "SKIP"
                                                                                                             : "FAIL";
        failed += o.status == Outcome::Status::Fail;
        std::cout << "criterion " << (i + 1) << " " << status << " " << criteria[i].first << ": " << o.detail
                  << std::endl;
    }
    fs::remove_all(fs::temp_directory_path() / ("reflecsched_acceptance_" + std::to_string(::getpid())));
    return failed == 0 ? 0 : 1;
}
