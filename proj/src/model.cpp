#include "reflecsched/model.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace reflecsched {

std::string_view to_string(ScaleTag tag) { return tag == ScaleTag::Normal ? "Normal" : "Small"; }

std::optional<ScaleTag> parse_scale_tag(std::string_view text) {
    if (text == "Normal") return ScaleTag::Normal;
    if (text == "Small") return ScaleTag::Small;
    return std::nullopt;
}

std::vector<std::reference_wrapper<const Job>> all_jobs(const Instance& instance) {
    std::vector<std::reference_wrapper<const Job>> jobs;
    jobs.reserve(instance.initial_jobs.size() + instance.events.size());
    for (const auto& job : instance.initial_jobs) jobs.emplace_back(job);
    for (const auto& event : instance.events) {
        if (const auto* arrival = event.arrival()) jobs.emplace_back(arrival->job);
    }
    return jobs;
}

std::optional<JobIndex> find_job(const Instance& instance, std::string_view job_id) {
    const auto jobs = all_jobs(instance);
    for (JobIndex j = 0; j < jobs.size(); ++j) {
        if (jobs[j].get().id == job_id) return j;
    }
    return std::nullopt;
}

std::vector<std::vector<Interval>> breakdown_windows(const Instance& instance) {
    std::vector<std::vector<Interval>> windows(static_cast<std::size_t>(std::max(instance.num_machines, 0)));
    for (const auto& event : instance.events) {
        if (const auto* b = event.breakdown()) {
            if (b->machine >= 0 && b->machine < instance.num_machines) {
                windows[static_cast<std::size_t>(b->machine)].push_back(b->window());
            }
        }
    }
    return windows;
}

std::size_t total_operations(const Instance& instance) {
    std::size_t n = 0;
    for (const Job& job : all_jobs(instance)) n += job.operations.size();
    return n;
}

std::vector<std::string> check_instance(const Instance& instance) {
    std::vector<std::string> problems;
    if (instance.num_machines <= 0) problems.push_back("num_machines must be positive");

    std::set<std::string> job_ids;
    auto check_job = [&](const Job& job, std::string_view where) {
        if (!job_ids.insert(job.id).second) problems.push_back("duplicate job id '" + job.id + "'");
        if (job.arrival_time < 0) problems.push_back(std::string(where) + ": negative arrival_time");
        if (job.operations.empty()) problems.push_back(std::string(where) + ": job has no operations");
        for (std::size_t k = 0; k < job.operations.size(); ++k) {
            const auto& op = job.operations[k];
            const std::string loc = std::string(where) + " op " + std::to_string(k);
            if (op.eligible.empty()) problems.push_back(loc + ": no eligible machine");
            for (const auto& [m, pt] : op.eligible) {
                if (m < 0 || m >= instance.num_machines) {
                    problems.push_back(loc + ": machine " + std::to_string(m) + " out of range");
                }
                if (pt <= 0) problems.push_back(loc + ": non-positive processing time");
            }
        }
    };

    for (const auto& job : instance.initial_jobs) {
        if (job.arrival_time != 0) problems.push_back("initial job '" + job.id + "' must arrive at 0");
        check_job(job, "job '" + job.id + "'");
    }

    std::set<std::string> event_ids;
    Time last_reveal = 0;
    for (const auto& event : instance.events) {
        const std::string where = "event '" + event.id + "'";
        if (!event_ids.insert(event.id).second) problems.push_back("duplicate event id '" + event.id + "'");
        if (event.reveal_time < 0) problems.push_back(where + ": negative reveal_time");
        if (event.reveal_time < last_reveal) problems.push_back(where + ": events not sorted by reveal_time");
        last_reveal = std::max(last_reveal, event.reveal_time);
        if (const auto* a = event.arrival()) {
            if (a->job.arrival_time != event.reveal_time) {
                problems.push_back(where + ": arrival_time differs from reveal_time");
            }
            check_job(a->job, where);
        } else if (const auto* b = event.breakdown()) {
            if (b->machine < 0 || b->machine >= instance.num_machines) {
                problems.push_back(where + ": machine out of range");
            }
            if (b->start_time < event.reveal_time) problems.push_back(where + ": start_time before reveal_time");
            if (b->repair_duration <= 0) problems.push_back(where + ": non-positive repair_duration");
        }
    }
    return problems;
}

Time ScheduleEntry::interrupted_time() const {
    Time total = 0;
    for (const auto& gap : interruptions) total += gap.length();
    return total;
}

std::vector<Interval> ScheduleEntry::active_intervals() const {
    std::vector<Interval> active;
    Time cursor = start;
    for (const auto& gap : interruptions) {
        if (gap.begin > cursor) active.push_back({cursor, gap.begin});
        cursor = std::max(cursor, gap.end);
    }
    if (end > cursor) active.push_back({cursor, end});
    return active;
}

Time compute_makespan(const ScheduleRecord& schedule) {
    Time makespan = 0;
    for (const auto& e : schedule.entries) makespan = std::max(makespan, e.end);
    return makespan;
}

std::string_view to_string(ViolationKind kind) {
    switch (kind) {
        case ViolationKind::UnknownReference: return "unknown_reference";
        case ViolationKind::DuplicateEntry: return "duplicate_entry";
        case ViolationKind::MalformedInterval: return "malformed_interval";
        case ViolationKind::DurationMismatch: return "duration_mismatch";
        case ViolationKind::ArrivalTime: return "arrival_time";
        case ViolationKind::Precedence: return "precedence";
        case ViolationKind::Capacity: return "capacity";
        case ViolationKind::BreakdownOverlap: return "breakdown_overlap";
        case ViolationKind::MissingOperation: return "missing_operation";
    }
    return "unknown";
}

std::size_t ValidityReport::count(ViolationKind kind) const {
    return static_cast<std::size_t>(
        std::count_if(violations.begin(), violations.end(), [kind](const Violation& v) { return v.kind == kind; }));
}

namespace {

std::string describe(const ScheduleEntry& e) {
    std::ostringstream os;
    os << "job#" << e.job << " op " << e.op_index << " on M" << e.machine << " [" << e.start << ", " << e.end << ")";
    return os.str();
}

}  // namespace

ValidityReport validate_schedule(const Instance& instance, const ScheduleRecord& schedule,
                                 ValidationOptions options) {
    ValidityReport report;
    auto flag = [&](ViolationKind kind, std::string detail) { report.violations.push_back({kind, std::move(detail)}); };

    const auto jobs = all_jobs(instance);
    // (job, op) -> entry index, for well-referenced entries only.
    std::map<std::pair<JobIndex, int>, std::size_t> located;
    std::vector<std::vector<std::size_t>> per_machine(static_cast<std::size_t>(std::max(instance.num_machines, 0)));

    for (std::size_t i = 0; i < schedule.entries.size(); ++i) {
        const auto& e = schedule.entries[i];
        if (e.job >= jobs.size()) {
            flag(ViolationKind::UnknownReference, describe(e) + ": unknown job");
            continue;
        }
        const Job& job = jobs[e.job];
        if (e.op_index < 0 || static_cast<std::size_t>(e.op_index) >= job.operations.size()) {
            flag(ViolationKind::UnknownReference, describe(e) + ": unknown operation");
            continue;
        }
        if (e.machine < 0 || e.machine >= instance.num_machines) {
            flag(ViolationKind::UnknownReference, describe(e) + ": unknown machine");
            continue;
        }
        const auto& op = job.operations[static_cast<std::size_t>(e.op_index)];
        const auto pt = op.eligible.find(e.machine);
        if (pt == op.eligible.end()) {
            flag(ViolationKind::UnknownReference, describe(e) + ": machine not eligible");
            continue;
        }
        if (!located.emplace(std::pair{e.job, e.op_index}, i).second) {
            flag(ViolationKind::DuplicateEntry, describe(e));
            continue;
        }

        bool intervals_ok = e.start <= e.end;
        Time cursor = e.start;
        for (const auto& gap : e.interruptions) {
            if (gap.begin < cursor || gap.end < gap.begin || gap.end > e.end) intervals_ok = false;
            cursor = gap.end;
        }
        if (!intervals_ok) {
            flag(ViolationKind::MalformedInterval, describe(e));
            continue;
        }
        if (e.end - e.start - e.interrupted_time() != pt->second) {
            flag(ViolationKind::DurationMismatch,
                 describe(e) + ": active time differs from processing time " + std::to_string(pt->second));
        }
        per_machine[static_cast<std::size_t>(e.machine)].push_back(i);
    }

    for (const auto& [key, i] : located) {
        const auto& e = schedule.entries[i];
        const auto [j, k] = key;
        if (k == 0) {
            if (e.start < jobs[j].get().arrival_time) flag(ViolationKind::ArrivalTime, describe(e));
            continue;
        }
        const auto prev = located.find({j, k - 1});
        if (prev == located.end()) {
            flag(ViolationKind::Precedence, describe(e) + ": predecessor not scheduled");
        } else if (e.start < schedule.entries[prev->second].end) {
            flag(ViolationKind::Precedence, describe(e) + ": starts before predecessor ends");
        }
    }

    const auto windows = breakdown_windows(instance);
    for (std::size_t m = 0; m < per_machine.size(); ++m) {
        std::vector<std::pair<Interval, std::size_t>> active;
        for (std::size_t i : per_machine[m]) {
            for (const auto& span : schedule.entries[i].active_intervals()) active.emplace_back(span, i);
        }
        std::sort(active.begin(), active.end(),
                  [](const auto& a, const auto& b) { return a.first.begin < b.first.begin; });
        for (std::size_t a = 0; a + 1 < active.size(); ++a) {
            for (std::size_t b = a + 1; b < active.size() && active[b].first.begin < active[a].first.end; ++b) {
                if (active[a].second != active[b].second && active[a].first.overlaps(active[b].first)) {
                    flag(ViolationKind::Capacity, describe(schedule.entries[active[a].second]) + " overlaps " +
                                                      describe(schedule.entries[active[b].second]));
                }
            }
        }
        for (const auto& [span, i] : active) {
            for (const auto& window : windows[m]) {
                if (span.overlaps(window)) {
                    flag(ViolationKind::BreakdownOverlap, describe(schedule.entries[i]) + " runs during breakdown [" +
                                                              std::to_string(window.begin) + ", " +
                                                              std::to_string(window.end) + ")");
                }
            }
        }
    }

    if (options.require_complete) {
        for (JobIndex j = 0; j < jobs.size(); ++j) {
            for (std::size_t k = 0; k < jobs[j].get().operations.size(); ++k) {
                if (!located.contains({j, static_cast<int>(k)})) {
                    flag(ViolationKind::MissingOperation,
                         "job '" + jobs[j].get().id + "' op " + std::to_string(k) + " not scheduled");
                }
            }
        }
    }
    return report;
}

}  // namespace reflecsched
