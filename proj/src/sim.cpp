#include "reflecsched/sim.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "reflecsched/hash.hpp"

namespace reflecsched {

struct ShopTables {
    std::shared_ptr<const Instance> instance;
    std::vector<const Job*> jobs;
    std::vector<std::optional<JobIndex>> event_job;
    // suffix_work[j][k]: sum of min processing times of operations k.. of job j.
    std::vector<std::vector<Time>> suffix_work;
};

namespace {

std::shared_ptr<const ShopTables> build_tables(std::shared_ptr<const Instance> instance) {
    if (!instance) throw std::invalid_argument("ShopState: null instance");
    if (const auto problems = check_instance(*instance); !problems.empty()) {
        throw std::invalid_argument("ShopState: invalid instance: " + problems.front());
    }
    auto tables = std::make_shared<ShopTables>();
    tables->instance = instance;
    for (const auto& job : instance->initial_jobs) tables->jobs.push_back(&job);
    for (const auto& event : instance->events) {
        if (const auto* a = event.arrival()) {
            tables->event_job.emplace_back(tables->jobs.size());
            tables->jobs.push_back(&a->job);
        } else {
            tables->event_job.emplace_back(std::nullopt);
        }
    }
    for (const Job* job : tables->jobs) {
        std::vector<Time> suffix(job->operations.size() + 1, 0);
        for (std::size_t k = job->operations.size(); k-- > 0;) {
            Time best = std::numeric_limits<Time>::max();
            for (const auto& [m, pt] : job->operations[k].eligible) best = std::min(best, pt);
            suffix[k] = suffix[k + 1] + best;
        }
        tables->suffix_work.push_back(std::move(suffix));
    }
    return tables;
}

}  // namespace

ShopState::ShopState(std::shared_ptr<const Instance> instance) : tables_(build_tables(std::move(instance))) {
    machines_.resize(static_cast<std::size_t>(tables_->instance->num_machines));
    jobs_.resize(tables_->jobs.size());
    for (std::size_t j = 0; j < tables_->instance->initial_jobs.size(); ++j) jobs_[j].revealed = true;
    // Events revealed at time 0 take effect before the first decision.
    if (!tables_->instance->events.empty() && tables_->instance->events.front().reveal_time == 0) step_to(0);
}

ShopState::ShopState(Instance instance) : ShopState(std::make_shared<const Instance>(std::move(instance))) {}

const Instance& ShopState::instance() const { return *tables_->instance; }
std::shared_ptr<const Instance> ShopState::instance_ptr() const { return tables_->instance; }

const Job& ShopState::job(JobIndex j) const { return *tables_->jobs.at(j); }

bool ShopState::job_done(JobIndex j) const {
    return static_cast<std::size_t>(jobs_[j].next_op) >= tables_->jobs[j]->operations.size();
}

std::size_t ShopState::pending_reveals() const {
    return projected_ ? 0 : tables_->instance->events.size() - next_event_;
}

bool ShopState::finished() const {
    if (pending_reveals() > 0) return false;
    for (JobIndex j = 0; j < jobs_.size(); ++j) {
        if (jobs_[j].revealed && !job_done(j)) return false;
    }
    return true;
}

bool ShopState::is_legal(const Action& a) const {
    if (a.job >= jobs_.size()) return false;
    const auto& jr = jobs_[a.job];
    if (!jr.revealed || jr.in_process || job_done(a.job) || jr.next_op != a.op_index) return false;
    if (a.machine < 0 || static_cast<std::size_t>(a.machine) >= machines_.size()) return false;
    const auto& mr = machines_[static_cast<std::size_t>(a.machine)];
    if (mr.entry || mr.down_until) return false;
    const auto& eligible = tables_->jobs[a.job]->operations[static_cast<std::size_t>(a.op_index)].eligible;
    return eligible.contains(a.machine);
}

std::vector<Action> ShopState::actions() const {
    std::vector<Action> result;
    for (JobIndex j = 0; j < jobs_.size(); ++j) {
        const auto& jr = jobs_[j];
        if (!jr.revealed || jr.in_process || job_done(j)) continue;
        const auto& op = tables_->jobs[j]->operations[static_cast<std::size_t>(jr.next_op)];
        for (const auto& [m, pt] : op.eligible) {
            const auto& mr = machines_[static_cast<std::size_t>(m)];
            if (!mr.entry && !mr.down_until) result.push_back({j, jr.next_op, m});
        }
    }
    return result;
}

bool ShopState::has_action() const {
    for (JobIndex j = 0; j < jobs_.size(); ++j) {
        const auto& jr = jobs_[j];
        if (!jr.revealed || jr.in_process || job_done(j)) continue;
        const auto& op = tables_->jobs[j]->operations[static_cast<std::size_t>(jr.next_op)];
        for (const auto& [m, pt] : op.eligible) {
            const auto& mr = machines_[static_cast<std::size_t>(m)];
            if (!mr.entry && !mr.down_until) return true;
        }
    }
    return false;
}

Time ShopState::processing_time(const Action& a) const {
    return tables_->jobs.at(a.job)->operations.at(static_cast<std::size_t>(a.op_index)).eligible.at(a.machine);
}

Time ShopState::completion_estimate(const Action& a) const {
    Time cursor = clock_;
    Time remaining = processing_time(a);
    for (const auto& planned : planned_) {
        if (planned.machine != a.machine) continue;
        if (planned.window.begin >= cursor + remaining) break;
        if (planned.window.end <= cursor) continue;
        remaining -= std::max<Time>(0, planned.window.begin - cursor);
        cursor = std::max(cursor, planned.window.end);
    }
    return cursor + remaining;
}

Time ShopState::remaining_work(JobIndex j) const {
    const auto& jr = jobs_.at(j);
    // An operation in process still counts toward the job's remaining work.
    return tables_->suffix_work[j][static_cast<std::size_t>(jr.next_op)];
}

int ShopState::remaining_operations(JobIndex j) const {
    return static_cast<int>(tables_->jobs.at(j)->operations.size()) - jobs_.at(j).next_op;
}

void ShopState::apply(const Action& a) {
    if (a.job >= jobs_.size()) throw IllegalAction("unknown job index " + std::to_string(a.job));
    const auto& jr = jobs_[a.job];
    if (!jr.revealed) throw IllegalAction("job has not arrived");
    if (job_done(a.job)) throw IllegalAction("job already complete");
    if (jr.in_process) throw IllegalAction("job has an operation in process");
    if (jr.next_op != a.op_index) {
        throw IllegalAction("operation " + std::to_string(a.op_index) + " is not the job's next operation (" +
                            std::to_string(jr.next_op) + ")");
    }
    if (a.machine < 0 || static_cast<std::size_t>(a.machine) >= machines_.size()) {
        throw IllegalAction("unknown machine " + std::to_string(a.machine));
    }
    const auto& op = tables_->jobs[a.job]->operations[static_cast<std::size_t>(a.op_index)];
    const auto pt = op.eligible.find(a.machine);
    if (pt == op.eligible.end()) throw IllegalAction("machine " + std::to_string(a.machine) + " is not eligible");
    auto& mr = machines_[static_cast<std::size_t>(a.machine)];
    if (mr.down_until) throw IllegalAction("machine " + std::to_string(a.machine) + " is down");
    if (mr.entry) throw IllegalAction("machine " + std::to_string(a.machine) + " is busy");

    mr.entry = schedule_.entries.size();
    schedule_.entries.push_back({a.job, a.op_index, a.machine, clock_, clock_ + pt->second, {}});
    jobs_[a.job].in_process = true;
}

std::optional<Time> ShopState::next_event_time() const {
    std::optional<Time> next;
    auto consider = [&](Time t) {
        if (!next || t < *next) next = t;
    };
    for (const auto& mr : machines_) {
        if (mr.down_until) {
            consider(*mr.down_until);
        } else if (mr.entry) {
            consider(schedule_.entries[*mr.entry].end);
        }
    }
    if (!projected_ && next_event_ < tables_->instance->events.size()) {
        consider(tables_->instance->events[next_event_].reveal_time);
    }
    if (!planned_.empty()) consider(planned_.front().window.begin);
    return next;
}

void ShopState::mark_fresh(const std::string& event_id) {
    if (fresh_events_.empty() || fresh_events_.back() != event_id) fresh_events_.push_back(event_id);
}

void ShopState::begin_breakdown(std::size_t event, MachineId m, Interval window) {
    auto& mr = machines_[static_cast<std::size_t>(m)];
    if (mr.down_until) {
        // Overlapping windows merge into one outage.
        if (window.end > *mr.down_until) {
            if (mr.entry) {
                auto& e = schedule_.entries[*mr.entry];
                e.end += window.end - *mr.down_until;
                e.interruptions.back().end = window.end;
            }
            mr.down_until = window.end;
        }
    } else {
        mr.down_until = window.end;
        if (mr.entry) {
            auto& e = schedule_.entries[*mr.entry];
            e.interruptions.push_back({window.begin, window.end});
            e.end += window.length();
        }
    }
    mark_fresh(tables_->instance->events[event].id);
}

void ShopState::step_to(Time t) {
    if (t < clock_) throw InvariantViolation("clock moved backwards");
    clock_ = t;

    // Same-time effects: repairs, completions, reveals, breakdown starts.
    for (auto& mr : machines_) {
        if (mr.down_until && *mr.down_until <= t) mr.down_until.reset();
    }
    for (auto& mr : machines_) {
        if (mr.entry && !mr.down_until && schedule_.entries[*mr.entry].end <= t) {
            const auto& e = schedule_.entries[*mr.entry];
            auto& jr = jobs_[e.job];
            jr.in_process = false;
            jr.next_op += 1;
            jr.ready_time = e.end;
            mr.entry.reset();
        }
    }
    const auto& events = tables_->instance->events;
    while (!projected_ && next_event_ < events.size() && events[next_event_].reveal_time <= t) {
        const auto& ev = events[next_event_];
        if (ev.arrival()) {
            auto& jr = jobs_[*tables_->event_job[next_event_]];
            jr.revealed = true;
            jr.ready_time = ev.reveal_time;
        } else {
            const auto& b = *ev.breakdown();
            const PlannedBreakdown planned{next_event_, b.machine, b.window()};
            const auto pos = std::upper_bound(planned_.begin(), planned_.end(), planned,
                                              [](const PlannedBreakdown& x, const PlannedBreakdown& y) {
                                                  return x.window.begin < y.window.begin;
                                              });
            planned_.insert(pos, planned);
        }
        mark_fresh(ev.id);
        ++reveal_count_;
        ++next_event_;
    }
    while (!planned_.empty() && planned_.front().window.begin <= t) {
        const auto planned = planned_.front();
        planned_.erase(planned_.begin());
        begin_breakdown(planned.event, planned.machine, planned.window);
    }
}

void ShopState::advance() {
    while (!finished() && !has_action()) {
        const auto next = next_event_time();
        if (!next) throw InvariantViolation("deadlock: unfinished jobs but nothing left to happen");
        step_to(*next);
    }
}

ShopState ShopState::projection() const {
    ShopState copy = *this;
    copy.projected_ = true;
    return copy;
}

std::uint64_t ShopState::digest() const {
    std::ostringstream os;
    os << "t" << clock_;
    for (const auto& mr : machines_) {
        os << "|m";
        if (mr.down_until) os << "d" << *mr.down_until;
        if (mr.entry) {
            const auto& e = schedule_.entries[*mr.entry];
            os << "w" << e.job << "." << e.op_index << "@" << e.end;
        }
    }
    for (const auto& jr : jobs_) {
        os << "|j" << (jr.revealed ? 1 : 0) << (jr.in_process ? 1 : 0) << "." << jr.next_op << "." << jr.ready_time;
    }
    return fnv1a64(os.str());
}

MachineStatus ShopState::machine_status(MachineId m) const {
    const auto& mr = machines_.at(static_cast<std::size_t>(m));
    MachineStatus status{m, MachineIdle{}, clock_};
    if (mr.down_until) {
        MachineDown down{*mr.down_until, std::nullopt};
        status.available_at = *mr.down_until;
        if (mr.entry) {
            const auto& e = schedule_.entries[*mr.entry];
            down.suspended = MachineBusy{e.job, e.op_index, e.end - *mr.down_until};
            status.available_at = e.end;
        }
        status.state = down;
    } else if (mr.entry) {
        const auto& e = schedule_.entries[*mr.entry];
        status.state = MachineBusy{e.job, e.op_index, e.end - clock_};
        status.available_at = e.end;
    }
    return status;
}

JobProgress ShopState::job_progress(JobIndex j) const {
    const auto& jr = jobs_.at(j);
    return {jr.revealed, job_done(j), jr.in_process, jr.next_op, jr.ready_time};
}

std::vector<Action> greedy_set(const ShopState& state, std::span<const Action> actions) {
    std::vector<Action> best;
    Time best_end = std::numeric_limits<Time>::max();
    for (const auto& a : actions) {
        const Time end = state.completion_estimate(a);
        if (end < best_end) {
            best_end = end;
            best.clear();
        }
        if (end == best_end) best.push_back(a);
    }
    return best;
}

RunResult run_policy(std::shared_ptr<const Instance> instance, Policy& policy, std::uint64_t seed) {
    ShopState state(std::move(instance));
    policy.begin_run(state.instance(), seed);
    RunResult result;
    state.advance();
    while (!state.finished()) {
        const auto actions = state.actions();
        if (actions.empty()) throw InvariantViolation("decision point without actions");
        const std::vector<std::string> events = state.fresh_events();
        state.clear_fresh_events();

        const std::size_t index = result.decision_log.size();
        const PolicyChoice choice = policy.decide(state, actions, DecisionContext{index, events});
        if (std::find(actions.begin(), actions.end(), choice.action) == actions.end()) {
            throw PolicyError(index, choice.action,
                              "policy '" + policy.name() + "' returned illegal action " +
                                  to_string(choice.action, state.instance()) + " at decision " +
                                  std::to_string(index));
        }

        DecisionPoint point;
        point.index = index;
        point.clock = state.clock();
        point.state_digest = state.digest();
        point.available_actions = actions;
        point.chosen = choice.action;
        point.greedy_set = greedy_set(state, actions);
        if (!events.empty()) point.triggered_by_event = events.back();
        point.rule = choice.rule;
        point.note = choice.note;
        if (!choice.note.empty()) result.flags.push_back("decision " + std::to_string(index) + ": " + choice.note);
        result.decision_log.push_back(std::move(point));

        state.apply(choice.action);
        state.advance();
    }
    result.schedule = state.schedule();
    result.makespan = compute_makespan(result.schedule);
    return result;
}

std::string to_string(const Action& action, const Instance& instance) {
    const auto jobs = all_jobs(instance);
    std::ostringstream os;
    if (action.job < jobs.size()) {
        os << jobs[action.job].get().id;
    } else {
        os << "#" << action.job;
    }
    os << ".op" << action.op_index << "->M" << action.machine;
    return os.str();
}

std::string decision_log_to_jsonl(const std::vector<DecisionPoint>& log, const Instance& instance) {
    const auto jobs = all_jobs(instance);
    auto encode = [&](const Action& a) {
        return nlohmann::json::array({jobs.at(a.job).get().id, a.op_index, a.machine});
    };
    auto encode_all = [&](const std::vector<Action>& actions) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& a : actions) arr.push_back(encode(a));
        return arr;
    };
    std::string out;
    for (const auto& p : log) {
        nlohmann::json line = {{"index", p.index},
                               {"clock", p.clock},
                               {"state_digest", to_hex(p.state_digest)},
                               {"available_actions", encode_all(p.available_actions)},
                               {"chosen", encode(p.chosen)},
                               {"greedy_set", encode_all(p.greedy_set)},
                               {"triggered_by_event", p.triggered_by_event ? nlohmann::json(*p.triggered_by_event)
                                                                           : nlohmann::json(nullptr)},
                               {"rule", p.rule ? nlohmann::json(*p.rule) : nlohmann::json(nullptr)},
                               {"note", p.note}};
        out += line.dump();
        out += '\n';
    }
    return out;
}

}  // namespace reflecsched
