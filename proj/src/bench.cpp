#include "reflecsched/bench.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <sstream>

#include "parallel.hpp"
#include "reflecsched/hash.hpp"
#include "reflecsched/io.hpp"
#include "reflecsched/rng.hpp"
#include "reflecsched/sim.hpp"

namespace reflecsched {

GenParams GenParams::small() {
    GenParams p;
    p.scale = ScaleTag::Small;
    p.num_machines = {3, 5};
    p.initial_jobs = {4, 6};
    p.ops_per_job = {2, 4};
    p.eligible_machines = {1, 3};
    p.processing_time = {1, 20};
    p.arrivals = {1, 2};
    p.arrival_horizon = 30;
    p.breakdowns = {0, 1};
    p.breakdown_horizon = 40;
    p.repair_duration = {3, 15};
    return p;
}

GenParams GenParams::normal() {
    GenParams p;
    p.scale = ScaleTag::Normal;
    p.num_machines = {8, 12};
    p.initial_jobs = {12, 20};
    p.ops_per_job = {3, 6};
    p.eligible_machines = {2, 5};
    p.processing_time = {1, 50};
    p.arrivals = {3, 6};
    p.arrival_horizon = 120;
    p.breakdowns = {1, 3};
    p.breakdown_horizon = 150;
    p.repair_duration = {5, 40};
    return p;
}

GenParams GenParams::defaults(ScaleTag scale) { return scale == ScaleTag::Small ? small() : normal(); }

void GenParams::validate() const {
    const auto check = [](const IntRange& r, std::int64_t min_lo, const char* name) {
        if (r.lo > r.hi) throw std::invalid_argument(std::string("GenParams: empty range ") + name);
        if (r.lo < min_lo) {
            throw std::invalid_argument(std::string("GenParams: ") + name + " must be >= " + std::to_string(min_lo));
        }
    };
    check(num_machines, 1, "num_machines");
    check(initial_jobs, 1, "initial_jobs");
    check(ops_per_job, 1, "ops_per_job");
    check(eligible_machines, 1, "eligible_machines");
    check(processing_time, 1, "processing_time");
    check(arrivals, 0, "arrivals");
    check(breakdowns, 0, "breakdowns");
    if (eligible_machines.hi > num_machines.lo) {
        throw std::invalid_argument("GenParams: eligible_machines exceeds the smallest machine count");
    }
    if (arrivals.hi > 0 && arrival_horizon < 1) throw std::invalid_argument("GenParams: arrival_horizon must be >= 1");
    if (breakdowns.hi > 0) {
        if (breakdown_horizon < 1) throw std::invalid_argument("GenParams: breakdown_horizon must be >= 1");
        check(repair_duration, 1, "repair_duration");
    }
}

namespace {

std::string seed_hex(std::uint64_t seed) { return to_hex(seed); }

Job make_job(const GenParams& p, Rng& rng, int num_machines, std::string id, Time arrival) {
    Job job;
    job.id = std::move(id);
    job.arrival_time = arrival;
    const auto ops = rng.uniform_int(p.ops_per_job.lo, p.ops_per_job.hi);
    std::vector<MachineId> machines(static_cast<std::size_t>(num_machines));
    std::iota(machines.begin(), machines.end(), 0);
    for (std::int64_t k = 0; k < ops; ++k) {
        const auto count = static_cast<std::size_t>(rng.uniform_int(p.eligible_machines.lo, p.eligible_machines.hi));
        // Partial Fisher-Yates: the first `count` slots become the sample.
        for (std::size_t i = 0; i < count; ++i) {
            std::swap(machines[i], machines[i + rng.uniform_index(machines.size() - i)]);
        }
        Operation op;
        for (std::size_t i = 0; i < count; ++i) {
            op.eligible[machines[i]] = units(rng.uniform_int(p.processing_time.lo, p.processing_time.hi));
        }
        job.operations.push_back(std::move(op));
    }
    return job;
}

}  // namespace

Instance generate_gen_instance(const GenParams& p, std::uint64_t seed, std::string id) {
    p.validate();
    Rng rng(seed);
    Instance inst;
    inst.id = id.empty() ? std::string("gen-") + std::string(to_string(p.scale)) + "-" + seed_hex(seed) : std::move(id);
    inst.scale_tag = p.scale;
    inst.num_machines = static_cast<int>(rng.uniform_int(p.num_machines.lo, p.num_machines.hi));

    const auto initial = rng.uniform_int(p.initial_jobs.lo, p.initial_jobs.hi);
    int next_job = 0;
    for (std::int64_t i = 0; i < initial; ++i) {
        inst.initial_jobs.push_back(make_job(p, rng, inst.num_machines, "J" + std::to_string(next_job++), 0));
    }

    std::vector<DynamicEvent> events;
    const auto arrivals = rng.uniform_int(p.arrivals.lo, p.arrivals.hi);
    for (std::int64_t i = 0; i < arrivals; ++i) {
        const Time at = units(rng.uniform_int(1, p.arrival_horizon));
        DynamicEvent ev;
        ev.id = "arrival-" + std::to_string(i);
        ev.reveal_time = at;
        ev.kind = JobArrival{make_job(p, rng, inst.num_machines, "J" + std::to_string(next_job++), at)};
        events.push_back(std::move(ev));
    }

    const auto breakdowns = rng.uniform_int(p.breakdowns.lo, p.breakdowns.hi);
    std::vector<std::vector<Interval>> windows(static_cast<std::size_t>(inst.num_machines));
    int placed = 0;
    for (std::int64_t i = 0; i < breakdowns; ++i) {
        // A bounded number of redraws; a breakdown that cannot be placed
        // without overlap is dropped.
        for (int attempt = 0; attempt < 64; ++attempt) {
            const auto m = static_cast<MachineId>(rng.uniform_index(static_cast<std::size_t>(inst.num_machines)));
            const Time start = units(rng.uniform_int(1, p.breakdown_horizon));
            const Time repair = units(rng.uniform_int(p.repair_duration.lo, p.repair_duration.hi));
            const Interval w{start, start + repair};
            auto& lane = windows[static_cast<std::size_t>(m)];
            if (std::any_of(lane.begin(), lane.end(), [&](const Interval& o) { return o.overlaps(w); })) continue;
            lane.push_back(w);
            DynamicEvent ev;
            ev.id = "breakdown-" + std::to_string(placed++);
            ev.reveal_time = start;
            ev.kind = MachineBreakdown{m, start, repair};
            events.push_back(std::move(ev));
            break;
        }
    }
    std::stable_sort(events.begin(), events.end(),
                     [](const DynamicEvent& a, const DynamicEvent& b) { return a.reveal_time < b.reveal_time; });
    inst.events = std::move(events);
    inst.metadata["generator"] = "gen";
    inst.metadata["seed"] = seed_hex(seed);
    return inst;
}

Time rule_makespan(std::shared_ptr<const Instance> instance, RuleId rule, std::uint64_t seed) {
    ShopState state(std::move(instance));
    Rng rng(seed);
    state.advance();
    while (!state.finished()) {
        const auto actions = state.actions();
        state.apply(apply_rule(rule, state, actions, &rng));
        state.advance();
    }
    return state.partial_makespan();
}

std::vector<RuleId> dominance_pool(std::span<const RuleId> pool) {
    std::vector<RuleId> out;
    for (RuleId r : pool) {
        if (r != RuleId::RANDOM) out.push_back(r);
    }
    return out;
}

void PdrBenchSpec::validate() const {
    params.validate();
    if (!(margin > 0.0 && margin < 1.0)) throw std::invalid_argument("PdrBenchSpec: margin must be in (0, 1)");
    if (max_attempts < 1) throw std::invalid_argument("PdrBenchSpec: max_attempts must be >= 1");
    if (target == RuleId::RANDOM) throw std::invalid_argument("PdrBenchSpec: RANDOM cannot be a designated rule");
    const auto rules = dominance_pool(pool);
    if (std::find(rules.begin(), rules.end(), target) == rules.end()) {
        throw std::invalid_argument("PdrBenchSpec: target rule " + std::string(to_string(target)) + " not in pool");
    }
    if (rules.size() < 2) throw std::invalid_argument("PdrBenchSpec: pool needs a competitor besides the target");
}

DominanceCheck check_dominance(std::shared_ptr<const Instance> instance, RuleId target, double margin,
                               std::span<const RuleId> pool, unsigned workers) {
    const auto rules = dominance_pool(pool);
    std::vector<Time> spans(rules.size());
    detail::parallel_for(rules.size(), workers, [&](std::size_t i) { spans[i] = rule_makespan(instance, rules[i]); });

    DominanceCheck out;
    for (std::size_t i = 0; i < rules.size(); ++i) out.makespans[rules[i]] = spans[i];
    const auto t_it = out.makespans.find(target);
    if (t_it == out.makespans.end()) throw std::invalid_argument("check_dominance: target not in pool");
    const long double t = static_cast<long double>(t_it->second);
    long double best_other = std::numeric_limits<long double>::max();
    out.holds = true;
    for (const auto& [rule, span] : out.makespans) {
        if (rule == target) continue;
        best_other = std::min(best_other, static_cast<long double>(span));
        if (t > (1.0L - static_cast<long double>(margin)) * static_cast<long double>(span)) out.holds = false;
    }
    out.ratio = best_other > 0 ? static_cast<double>(t / best_other) : 0.0;
    return out;
}

namespace {

std::string describe_exhaustion(RuleId target, int attempts, double best_ratio) {
    std::ostringstream os;
    os << "no instance with dominant rule " << to_string(target) << " after " << attempts
       << " attempts (best target/competitor ratio " << best_ratio << ")";
    return os.str();
}

}  // namespace

GenerationExhausted::GenerationExhausted(RuleId target, int attempts, double best_ratio,
                                         std::map<RuleId, int> winners)
    : std::runtime_error(describe_exhaustion(target, attempts, best_ratio)),
      target_(target),
      attempts_(attempts),
      best_ratio_(best_ratio),
      winners_(std::move(winners)) {}

Instance generate_pdr_instance(const PdrBenchSpec& spec, std::uint64_t seed, std::string id) {
    spec.validate();
    double best_ratio = std::numeric_limits<double>::infinity();
    std::map<RuleId, int> winners;
    for (int attempt = 0; attempt < spec.max_attempts; ++attempt) {
        const std::uint64_t candidate_seed = Rng::derive(seed, static_cast<std::uint64_t>(attempt));
        auto candidate = std::make_shared<Instance>(generate_gen_instance(spec.params, candidate_seed, id));
        const auto check = check_dominance(candidate, spec.target, spec.margin, spec.pool);
        best_ratio = std::min(best_ratio, check.ratio);

        Time lowest = std::numeric_limits<Time>::max();
        std::optional<RuleId> winner;
        for (const auto& [rule, span] : check.makespans) {
            if (span < lowest) {
                lowest = span;
                winner = rule;
            } else if (span == lowest) {
                winner.reset();
            }
        }
        if (winner) ++winners[*winner];

        if (check.holds) {
            Instance out = std::move(*candidate);
            if (id.empty()) out.id = std::string("pdr-") + std::string(to_string(out.scale_tag)) + "-" + seed_hex(seed);
            out.metadata["generator"] = "pdr";
            out.metadata["designated_rule"] = std::string(to_string(spec.target));
            out.metadata["margin"] = std::to_string(spec.margin);
            out.metadata["attempts"] = std::to_string(attempt + 1);
            return out;
        }
    }
    throw GenerationExhausted(spec.target, spec.max_attempts, best_ratio, std::move(winners));
}

std::string_view to_string(SuiteKind kind) { return kind == SuiteKind::Gen ? "gen" : "pdr"; }

std::optional<SuiteKind> parse_suite_kind(std::string_view text) {
    if (text == "gen") return SuiteKind::Gen;
    if (text == "pdr") return SuiteKind::Pdr;
    return std::nullopt;
}

std::map<ScaleTag, int> SuiteOptions::default_counts(SuiteKind kind) {
    if (kind == SuiteKind::Gen) return {{ScaleTag::Normal, 20}, {ScaleTag::Small, 20}};
    return {{ScaleTag::Normal, 112}, {ScaleTag::Small, 12}};
}

std::vector<RuleId> default_pdr_targets(ScaleTag scale) {
    if (scale == ScaleTag::Normal) return {RuleId::MWKR, RuleId::MOPNR, RuleId::FIFO};
    return {RuleId::LPT, RuleId::FIFO, RuleId::MWKR, RuleId::LWKR, RuleId::MOPNR};
}

nlohmann::json Suite::manifest() const {
    nlohmann::json list = nlohmann::json::array();
    std::map<std::string, int> per_scale;
    for (const auto& e : entries) {
        nlohmann::json item = {{"id", e.instance.id},
                               {"file", "instances/" + e.instance.id + ".json"},
                               {"seed", to_hex(e.seed)},
                               {"scale", std::string(to_string(e.instance.scale_tag))}};
        if (e.designated) item["designated_rule"] = std::string(to_string(*e.designated));
        list.push_back(std::move(item));
        ++per_scale[std::string(to_string(e.instance.scale_tag))];
    }
    return {{"kind", std::string(to_string(kind))}, {"seed", to_hex(seed)}, {"counts", per_scale},
            {"instances", std::move(list)}};
}

Suite generate_suite(SuiteKind kind, std::uint64_t seed, SuiteOptions options) {
    if (options.counts.empty()) options.counts = SuiteOptions::default_counts(kind);

    struct Cell {
        ScaleTag scale;
        int index;
    };
    std::vector<Cell> plan;
    // Normal first, then Small, matching the enum order.
    for (const auto& [scale, count] : options.counts) {
        if (count < 0) throw std::invalid_argument("generate_suite: negative count");
        for (int i = 0; i < count; ++i) plan.push_back({scale, i});
    }

    Suite suite;
    suite.kind = kind;
    suite.seed = seed;
    suite.entries.resize(plan.size());
    detail::parallel_for(plan.size(), options.workers, [&](std::size_t k) {
        const auto [scale, index] = plan[k];
        const auto it = options.params.find(scale);
        const GenParams params = it != options.params.end() ? it->second : GenParams::defaults(scale);
        const std::uint64_t inst_seed =
            Rng::derive(Rng::derive(seed, static_cast<std::uint64_t>(scale)), static_cast<std::uint64_t>(index));
        const std::string scale_name(to_string(scale));
        char suffix[8];
        std::snprintf(suffix, sizeof suffix, "%03d", index);
        SuiteEntry entry;
        entry.seed = inst_seed;
        if (kind == SuiteKind::Gen) {
            entry.instance = generate_gen_instance(params, inst_seed, "gen-" + scale_name + "-" + suffix);
        } else {
            PdrBenchSpec spec;
            const auto t = options.targets.find(scale);
            const auto targets = t != options.targets.end() && !t->second.empty() ? t->second
                                                                                  : default_pdr_targets(scale);
            spec.margin = options.margin;
            spec.max_attempts = options.max_attempts;
            spec.params = params;
            spec.pool = options.pool;
            const std::size_t first = static_cast<std::size_t>(index) % targets.size();
            // An exhausted target hands the slot to the next one in the list.
            for (std::size_t k = 0;; ++k) {
                spec.target = targets[(first + k) % targets.size()];
                try {
                    entry.instance = generate_pdr_instance(spec, inst_seed, "pdr-" + scale_name + "-" + suffix);
                    break;
                } catch (const GenerationExhausted&) {
                    if (k + 1 == targets.size()) throw;
                }
            }
            if (spec.target != targets[first]) {
                entry.instance.metadata["requested_rule"] = std::string(to_string(targets[first]));
            }
            entry.designated = spec.target;
        }
        suite.entries[k] = std::move(entry);
    });
    return suite;
}

std::filesystem::path write_suite(const Suite& suite, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir / "instances");
    for (const auto& e : suite.entries) write_instance(e.instance, dir / "instances" / (e.instance.id + ".json"));
    const auto path = dir / "manifest.json";
    write_text(path, suite.manifest().dump(2) + "\n");
    return path;
}

LoadedSuite load_suite(const std::filesystem::path& manifest_path) {
    const auto doc = nlohmann::json::parse(read_text(manifest_path));
    LoadedSuite out;
    const auto kind = parse_suite_kind(doc.at("kind").get<std::string>());
    if (!kind) throw FormatError("/kind", "unknown suite kind");
    out.kind = *kind;
    const auto base = manifest_path.parent_path();
    const auto& list = doc.at("instances");
    for (std::size_t i = 0; i < list.size(); ++i) {
        const auto& item = list[i];
        SuiteEntry e;
        e.instance = read_instance(base / item.at("file").get<std::string>());
        e.seed = std::stoull(item.at("seed").get<std::string>(), nullptr, 16);
        if (item.contains("designated_rule")) {
            const auto rule = parse_rule(item["designated_rule"].get<std::string>());
            if (!rule) throw FormatError("/instances/" + std::to_string(i) + "/designated_rule", "unknown rule");
            e.designated = *rule;
        }
        out.entries.push_back(std::move(e));
    }
    return out;
}

}  // namespace reflecsched
