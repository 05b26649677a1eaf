#pragma once

#include <compare>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "reflecsched/model.hpp"

namespace reflecsched {

// Dispatch of a job's next operation onto an idle machine, starting now.
struct Action {
    JobIndex job = 0;
    int op_index = 0;
    MachineId machine = 0;

    auto operator<=>(const Action&) const = default;
};

struct MachineIdle {
    bool operator==(const MachineIdle&) const = default;
};
struct MachineBusy {
    JobIndex job = 0;
    int op_index = 0;
    Time remaining = 0;
    bool operator==(const MachineBusy&) const = default;
};
struct MachineDown {
    Time until = 0;
    // Operation suspended by the breakdown; resumes at `until`.
    std::optional<MachineBusy> suspended;
    bool operator==(const MachineDown&) const = default;
};

struct MachineStatus {
    MachineId id = 0;
    std::variant<MachineIdle, MachineBusy, MachineDown> state;
    // Earliest time the machine can start another operation.
    Time available_at = 0;
};

struct JobProgress {
    bool revealed = false;
    bool finished = false;
    bool in_process = false;
    int next_op = 0;
    // Completion time of the previous operation, or the arrival time.
    Time ready_time = 0;
};

// A revealed breakdown whose window has not begun yet.
struct PlannedBreakdown {
    std::size_t event = 0;
    MachineId machine = 0;
    Interval window;
};

class IllegalAction : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class InvariantViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

struct ShopTables;

// Full simulation state at a point in time. Cheap to copy: the instance and
// derived lookup tables are shared, everything else is a value.
class ShopState {
public:
    explicit ShopState(std::shared_ptr<const Instance> instance);
    explicit ShopState(Instance instance);

    const Instance& instance() const;
    std::shared_ptr<const Instance> instance_ptr() const;

    Time clock() const { return clock_; }
    bool projected() const { return projected_; }

    // True when every known job is complete and no unrevealed event remains.
    bool finished() const;

    // Legal dispatches in (job, op, machine) ascending order.
    std::vector<Action> actions() const;
    bool has_action() const;
    bool is_legal(const Action& action) const;

    // Starts the operation now. Throws IllegalAction naming the violated
    // precondition.
    void apply(const Action& action);

    // Moves the clock forward through completions, repairs, reveals and
    // breakdown starts until an action exists or the run is finished.
    void advance();

    // Copy without unrevealed events. Revealed breakdowns and ongoing repairs
    // are kept. Used as the root of every rollout.
    ShopState projection() const;

    // Stable 64-bit hash of clock, machine states and job progress.
    std::uint64_t digest() const;

    const ScheduleRecord& schedule() const { return schedule_; }
    // Maximum end over opened entries; in-progress entries count with their
    // projected end.
    Time partial_makespan() const { return compute_makespan(schedule_); }

    std::size_t num_machines() const { return machines_.size(); }
    std::size_t num_jobs() const { return jobs_.size(); }
    const Job& job(JobIndex j) const;
    MachineStatus machine_status(MachineId m) const;
    JobProgress job_progress(JobIndex j) const;

    Time processing_time(const Action& action) const;
    // Completion time if started now, accounting for revealed breakdowns.
    Time completion_estimate(const Action& action) const;
    // Sum over the job's unfinished operations of the minimum eligible
    // processing time (includes an operation in progress).
    Time remaining_work(JobIndex j) const;
    int remaining_operations(JobIndex j) const;

    std::size_t pending_reveals() const;
    const std::vector<PlannedBreakdown>& planned_breakdowns() const { return planned_; }
    // Number of events revealed during the lifetime of this state and its
    // ancestors.
    std::size_t reveal_count() const { return reveal_count_; }

    // Ids of events revealed or begun since the last clear_fresh_events().
    const std::vector<std::string>& fresh_events() const { return fresh_events_; }
    void clear_fresh_events() { fresh_events_.clear(); }

private:
    struct MachineRuntime {
        std::optional<std::size_t> entry;
        std::optional<Time> down_until;
    };
    struct JobRuntime {
        bool revealed = false;
        bool in_process = false;
        int next_op = 0;
        Time ready_time = 0;
    };

    bool job_done(JobIndex j) const;
    std::optional<Time> next_event_time() const;
    void step_to(Time t);
    void begin_breakdown(std::size_t event, MachineId m, Interval window);
    void mark_fresh(const std::string& event_id);

    std::shared_ptr<const ShopTables> tables_;
    Time clock_ = 0;
    bool projected_ = false;
    std::vector<MachineRuntime> machines_;
    std::vector<JobRuntime> jobs_;
    std::size_t next_event_ = 0;
    std::vector<PlannedBreakdown> planned_;
    ScheduleRecord schedule_;
    std::vector<std::string> fresh_events_;
    std::size_t reveal_count_ = 0;
};

// Actions whose completion estimate is minimal.
std::vector<Action> greedy_set(const ShopState& state, std::span<const Action> actions);

struct DecisionPoint {
    std::size_t index = 0;
    Time clock = 0;
    std::uint64_t state_digest = 0;
    std::vector<Action> available_actions;
    Action chosen;
    std::vector<Action> greedy_set;
    std::optional<std::string> triggered_by_event;
    std::optional<std::string> rule;
    // Non-empty when a fallback or retry was needed.
    std::string note;
};

struct DecisionContext {
    std::size_t index = 0;
    // Events revealed or begun since the previous decision point.
    std::span<const std::string> new_events;
};

struct PolicyChoice {
    Action action;
    std::optional<std::string> rule;
    std::string note;
};

class Policy {
public:
    virtual ~Policy() = default;
    virtual std::string name() const = 0;
    // Called once before the first decision of each run.
    virtual void begin_run(const Instance& /*instance*/, std::uint64_t /*seed*/) {}
    virtual PolicyChoice decide(const ShopState& state, std::span<const Action> actions,
                                const DecisionContext& context) = 0;
};

// Raised when a policy returns an action outside the offered set.
class PolicyError : public std::runtime_error {
public:
    PolicyError(std::size_t decision_index, Action action, const std::string& message)
        : std::runtime_error(message), decision_index_(decision_index), action_(action) {}

    std::size_t decision_index() const { return decision_index_; }
    const Action& action() const { return action_; }

private:
    std::size_t decision_index_;
    Action action_;
};

struct RunResult {
    ScheduleRecord schedule;
    std::vector<DecisionPoint> decision_log;
    Time makespan = 0;
    // Notes of every decision that needed a fallback.
    std::vector<std::string> flags;
};

RunResult run_policy(std::shared_ptr<const Instance> instance, Policy& policy, std::uint64_t seed);

std::string to_string(const Action& action, const Instance& instance);

// One JSON object per line.
std::string decision_log_to_jsonl(const std::vector<DecisionPoint>& log, const Instance& instance);

}  // namespace reflecsched
