#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "reflecsched/bench.hpp"

namespace oracle {

using namespace reflecsched;

namespace {

struct FlatJob {
    Time release = 0;
    const Job* job = nullptr;
};

std::vector<FlatJob> flatten(const Instance& inst) {
    std::vector<FlatJob> out;
    for (const auto& j : inst.initial_jobs) out.push_back({j.arrival_time, &j});
    for (const auto& e : inst.events) {
        if (const auto* a = e.arrival()) out.push_back({std::max(e.reveal_time, a->job.arrival_time), &a->job});
    }
    return out;
}

std::vector<std::vector<Interval>> windows_of(const Instance& inst) {
    std::vector<std::vector<Interval>> w(static_cast<std::size_t>(inst.num_machines));
    for (const auto& e : inst.events) {
        if (const auto* b = e.breakdown()) w[static_cast<std::size_t>(b->machine)].push_back(b->window());
    }
    for (auto& v : w) std::sort(v.begin(), v.end(), [](auto& a, auto& b) { return a.begin < b.begin; });
    return w;
}

bool down_at(Time t, std::span<const Interval> windows) {
    return std::any_of(windows.begin(), windows.end(), [&](const Interval& w) { return w.begin <= t && t < w.end; });
}

}  // namespace

Time resume_end(Time t, Time p, std::span<const Interval> windows) {
    Time cur = t, rem = p;
    for (const auto& w : windows) {
        if (w.end <= cur) continue;
        if (w.begin >= cur + rem) break;
        if (w.begin > cur) rem -= w.begin - cur;
        cur = w.end;
    }
    return cur + rem;
}

std::vector<std::string> check_schedule(const Instance& inst, const ScheduleRecord& schedule) {
    std::vector<std::string> bad;
    const auto jobs = flatten(inst);
    const auto windows = windows_of(inst);
    std::map<std::pair<std::size_t, int>, const ScheduleEntry*> seen;
    for (const auto& e : schedule.entries) {
        if (e.job >= jobs.size()) {
            bad.push_back("unknown job");
            continue;
        }
        const Job& job = *jobs[e.job].job;
        if (e.op_index < 0 || static_cast<std::size_t>(e.op_index) >= job.operations.size()) {
            bad.push_back("unknown op");
            continue;
        }
        if (!seen.emplace(std::pair{e.job, e.op_index}, &e).second) bad.push_back("duplicate " + job.id);
        const auto& op = job.operations[static_cast<std::size_t>(e.op_index)];
        const auto it = op.eligible.find(e.machine);
        if (it == op.eligible.end()) {
            bad.push_back("ineligible machine for " + job.id);
            continue;
        }
        if (e.start < jobs[e.job].release) bad.push_back("starts before release " + job.id);
        const auto& w = windows[static_cast<std::size_t>(e.machine)];
        if (down_at(e.start, w)) bad.push_back("starts on a down machine " + job.id);
        if (resume_end(e.start, it->second, w) != e.end) bad.push_back("wrong end " + job.id);
        std::vector<Interval> gaps;
        for (const auto& iv : w) {
            if (iv.begin > e.start && iv.begin < e.end) gaps.push_back(iv);
        }
        if (gaps != e.interruptions) bad.push_back("interruptions differ from breakdowns " + job.id);
    }
    for (std::size_t j = 0; j < jobs.size(); ++j) {
        const auto& ops = jobs[j].job->operations;
        for (std::size_t k = 0; k < ops.size(); ++k) {
            const auto it = seen.find({j, static_cast<int>(k)});
            if (it == seen.end()) {
                bad.push_back("missing " + jobs[j].job->id + "." + std::to_string(k));
                continue;
            }
            if (k > 0) {
                const auto prev = seen.find({j, static_cast<int>(k - 1)});
                if (prev != seen.end() && it->second->start < prev->second->end) bad.push_back("precedence");
            }
        }
    }
    // Machine capacity: entries on a machine may not overlap as [start, end).
    std::map<MachineId, std::vector<std::pair<Time, Time>>> per_machine;
    for (const auto& e : schedule.entries) per_machine[e.machine].push_back({e.start, e.end});
    for (auto& [m, v] : per_machine) {
        std::sort(v.begin(), v.end());
        for (std::size_t i = 1; i < v.size(); ++i) {
            if (v[i].first < v[i - 1].second) bad.push_back("overlap on machine " + std::to_string(m));
        }
    }
    return bad;
}

namespace {

struct Search {
    std::vector<FlatJob> jobs;
    std::vector<std::vector<Interval>> windows;
    std::map<std::string, Time> memo;

    struct State {
        Time t = 0;
        std::vector<Time> machine_free;
        std::vector<int> next_op;
        std::vector<Time> ready;
    };

    std::string key(const State& s) const {
        std::ostringstream os;
        os << s.t;
        for (Time f : s.machine_free) os << ',' << std::max(f, s.t);
        for (std::size_t j = 0; j < jobs.size(); ++j) os << ';' << s.next_op[j] << ':' << std::max(s.ready[j], s.t);
        return os.str();
    }

    bool done(const State& s) const {
        for (std::size_t j = 0; j < jobs.size(); ++j) {
            if (static_cast<std::size_t>(s.next_op[j]) < jobs[j].job->operations.size()) return false;
        }
        return true;
    }

    std::vector<std::tuple<std::size_t, MachineId, Time>> moves(const State& s) const {
        std::vector<std::tuple<std::size_t, MachineId, Time>> out;
        for (std::size_t j = 0; j < jobs.size(); ++j) {
            const auto& ops = jobs[j].job->operations;
            if (static_cast<std::size_t>(s.next_op[j]) >= ops.size()) continue;
            if (jobs[j].release > s.t || s.ready[j] > s.t) continue;
            for (const auto& [m, p] : ops[static_cast<std::size_t>(s.next_op[j])].eligible) {
                const auto mi = static_cast<std::size_t>(m);
                if (s.machine_free[mi] > s.t || down_at(s.t, windows[mi])) continue;
                out.emplace_back(j, m, p);
            }
        }
        return out;
    }

    Time next_time(const State& s) const {
        Time best = std::numeric_limits<Time>::max();
        const auto consider = [&](Time x) {
            if (x > s.t) best = std::min(best, x);
        };
        for (Time f : s.machine_free) consider(f);
        for (Time r : s.ready) consider(r);
        for (const auto& j : jobs) consider(j.release);
        for (const auto& w : windows) {
            for (const auto& iv : w) consider(iv.end);
        }
        return best;
    }

    // Minimum achievable makespan from s, given the makespan so far.
    Time solve(State s, Time so_far) {
        while (!done(s) && moves(s).empty()) s.t = next_time(s);
        if (done(s)) return so_far;
        const std::string k = key(s) + "#" + std::to_string(so_far);
        if (const auto it = memo.find(k); it != memo.end()) return it->second;
        Time best = std::numeric_limits<Time>::max();
        for (const auto& [j, m, p] : moves(s)) {
            State n = s;
            const auto mi = static_cast<std::size_t>(m);
            const Time end = resume_end(s.t, p, windows[mi]);
            n.machine_free[mi] = end;
            n.ready[j] = end;
            ++n.next_op[j];
            best = std::min(best, solve(std::move(n), std::max(so_far, end)));
        }
        memo[k] = best;
        return best;
    }
};

}  // namespace

Time brute_force_optimum(const Instance& inst) {
    Search search;
    search.jobs = flatten(inst);
    search.windows = windows_of(inst);
    Search::State s;
    s.machine_free.assign(static_cast<std::size_t>(inst.num_machines), 0);
    s.next_op.assign(search.jobs.size(), 0);
    for (const auto& j : search.jobs) s.ready.push_back(j.release);
    return search.solve(std::move(s), 0);
}

SignedRankP signed_rank_enumerate(std::span<const double> differences) {
    std::vector<double> d;
    for (double x : differences) {
        if (x != 0.0) d.push_back(x);
    }
    const std::size_t m = d.size();
    std::vector<std::size_t> order(m);
    for (std::size_t i = 0; i < m; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return std::abs(d[a]) < std::abs(d[b]); });
    std::vector<double> rank(m);
    for (std::size_t i = 0; i < m;) {
        std::size_t k = i;
        while (k + 1 < m && std::abs(d[order[k + 1]]) == std::abs(d[order[i]])) ++k;
        const double mid = (static_cast<double>(i + 1) + static_cast<double>(k + 1)) / 2.0;
        for (std::size_t r = i; r <= k; ++r) rank[order[r]] = mid;
        i = k + 1;
    }
    SignedRankP out;
    for (std::size_t i = 0; i < m; ++i) {
        if (d[i] > 0) out.w_plus += rank[i];
    }
    std::size_t ge = 0, le = 0;
    const std::size_t total = std::size_t{1} << m;
    for (std::size_t mask = 0; mask < total; ++mask) {
        double w = 0;
        for (std::size_t i = 0; i < m; ++i) {
            if (mask >> i & 1) w += rank[i];
        }
        if (w >= out.w_plus - 1e-9) ++ge;
        if (w <= out.w_plus + 1e-9) ++le;
    }
    out.p_greater = static_cast<double>(ge) / static_cast<double>(total);
    out.p_less = static_cast<double>(le) / static_cast<double>(total);
    out.p_two_sided = std::min(1.0, 2.0 * std::min(out.p_greater, out.p_less));
    return out;
}

std::vector<Instance> tiny_instances(std::size_t count, std::uint64_t seed, std::size_t max_ops) {
    GenParams p = GenParams::small();
    p.num_machines = {2, 3};
    p.initial_jobs = {2, 3};
    p.ops_per_job = {1, 2};
    p.eligible_machines = {1, 2};
    p.processing_time = {1, 9};
    p.arrivals = {0, 1};
    p.arrival_horizon = 8;
    p.breakdowns = {0, 1};
    p.breakdown_horizon = 10;
    p.repair_duration = {1, 5};
    std::vector<Instance> out;
    for (std::uint64_t i = 0; out.size() < count; ++i) {
        auto inst = generate_gen_instance(p, seed * 7919 + i);
        if (total_operations(inst) <= max_ops) out.push_back(std::move(inst));
    }
    return out;
}

}  // namespace oracle
