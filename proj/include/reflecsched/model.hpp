#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "reflecsched/time.hpp"

namespace reflecsched {

using MachineId = int;

// Position of a job in dispatch order: initial jobs first, then arriving jobs
// in the order their arrival events are listed.
using JobIndex = std::size_t;

struct Operation {
    // Candidate machines and the processing time on each.
    std::map<MachineId, Time> eligible;

    bool operator==(const Operation&) const = default;
};

struct Job {
    std::string id;
    Time arrival_time = 0;
    std::vector<Operation> operations;

    bool operator==(const Job&) const = default;
};

struct JobArrival {
    Job job;
    bool operator==(const JobArrival&) const = default;
};

struct MachineBreakdown {
    MachineId machine = 0;
    Time start_time = 0;
    Time repair_duration = 0;

    Time end_time() const { return start_time + repair_duration; }
    Interval window() const { return {start_time, end_time()}; }
    bool operator==(const MachineBreakdown&) const = default;
};

struct DynamicEvent {
    std::string id;
    Time reveal_time = 0;
    std::variant<JobArrival, MachineBreakdown> kind;

    const JobArrival* arrival() const { return std::get_if<JobArrival>(&kind); }
    const MachineBreakdown* breakdown() const { return std::get_if<MachineBreakdown>(&kind); }
    bool operator==(const DynamicEvent&) const = default;
};

enum class ScaleTag { Normal, Small };

std::string_view to_string(ScaleTag tag);
std::optional<ScaleTag> parse_scale_tag(std::string_view text);

struct Instance {
    std::string id;
    int num_machines = 0;
    ScaleTag scale_tag = ScaleTag::Small;
    std::vector<Job> initial_jobs;
    // Sorted by reveal_time; ties keep listing order.
    std::vector<DynamicEvent> events;
    // Free-form annotations, e.g. the designated rule of a curated instance.
    std::map<std::string, std::string> metadata;

    bool operator==(const Instance&) const = default;
};

// Every job of the instance in JobIndex order.
std::vector<std::reference_wrapper<const Job>> all_jobs(const Instance& instance);

std::optional<JobIndex> find_job(const Instance& instance, std::string_view job_id);

// Breakdown windows per machine, in event order.
std::vector<std::vector<Interval>> breakdown_windows(const Instance& instance);

std::size_t total_operations(const Instance& instance);

// Structural problems (empty eligibility, unknown machines, unsorted events,
// duplicate ids, ...). Empty when the instance is well-formed.
std::vector<std::string> check_instance(const Instance& instance);

struct ScheduleEntry {
    JobIndex job = 0;
    int op_index = 0;
    MachineId machine = 0;
    Time start = 0;
    Time end = 0;
    // Breakdown suspensions, sorted and inside [start, end].
    std::vector<Interval> interruptions;

    Time interrupted_time() const;
    // [start, end) minus the interruptions.
    std::vector<Interval> active_intervals() const;
    bool operator==(const ScheduleEntry&) const = default;
};

struct ScheduleRecord {
    std::vector<ScheduleEntry> entries;
    bool operator==(const ScheduleRecord&) const = default;
};

Time compute_makespan(const ScheduleRecord& schedule);

enum class ViolationKind {
    UnknownReference,
    DuplicateEntry,
    MalformedInterval,
    DurationMismatch,
    ArrivalTime,
    Precedence,
    Capacity,
    BreakdownOverlap,
    MissingOperation,
};

std::string_view to_string(ViolationKind kind);

struct Violation {
    ViolationKind kind;
    std::string detail;
};

struct ValidityReport {
    std::vector<Violation> violations;

    bool valid() const { return violations.empty(); }
    std::size_t count(ViolationKind kind) const;
};

struct ValidationOptions {
    // Also report operations of revealed jobs that have no entry.
    bool require_complete = false;
};

ValidityReport validate_schedule(const Instance& instance, const ScheduleRecord& schedule,
                                 ValidationOptions options = {});

}  // namespace reflecsched
