// Reference implementations used to check the library. They only read the
// instance data model and never call into the simulator or the rules.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "reflecsched/model.hpp"

namespace oracle {

using reflecsched::Instance;
using reflecsched::ScheduleRecord;
using reflecsched::Time;

// Problems found in a schedule; empty when it is a complete, feasible
// preempt-resume schedule of the instance.
std::vector<std::string> check_schedule(const Instance& instance, const ScheduleRecord& schedule);

// End of an operation of length `p` started at `t` on a machine with the
// given (sorted, disjoint) down windows.
Time resume_end(Time t, Time p, std::span<const reflecsched::Interval> windows);

// Optimum makespan over every non-delay dispatch sequence, by exhaustive
// search with memoization. Meant for instances of at most ~8 operations.
Time brute_force_optimum(const Instance& instance);

struct SignedRankP {
    double w_plus = 0;
    double p_greater = 1;
    double p_less = 1;
    double p_two_sided = 1;
};

// Enumerates all 2^m sign assignments of the mid-ranked |d| (zeros dropped).
SignedRankP signed_rank_enumerate(std::span<const double> differences);

// Tiny instances with at most `max_ops` operations.
std::vector<Instance> tiny_instances(std::size_t count, std::uint64_t seed, std::size_t max_ops = 8);

}  // namespace oracle
