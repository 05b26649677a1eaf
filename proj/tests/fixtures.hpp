#pragma once

#include <initializer_list>
#include <memory>
#include <string>
#include <utility>

#include "reflecsched/model.hpp"

namespace fixtures {

using namespace reflecsched;

inline Operation op(std::initializer_list<std::pair<MachineId, std::int64_t>> eligible) {
    Operation o;
    for (const auto& [m, p] : eligible) o.eligible[m] = units(p);
    return o;
}

inline Job job(std::string id, std::initializer_list<Operation> ops, std::int64_t arrival = 0) {
    return Job{std::move(id), units(arrival), std::vector<Operation>(ops)};
}

inline DynamicEvent arrival(std::string id, Job j) {
    const Time t = j.arrival_time;
    return DynamicEvent{std::move(id), t, JobArrival{std::move(j)}};
}

inline DynamicEvent breakdown(std::string id, MachineId m, std::int64_t start, std::int64_t repair) {
    return DynamicEvent{std::move(id), units(start), MachineBreakdown{m, units(start), units(repair)}};
}

// Two machines, two jobs; J1 arrives later, M0 breaks down at t=2 for 3.
inline Instance small_shop() {
    Instance inst;
    inst.id = "small-shop";
    inst.num_machines = 2;
    inst.initial_jobs = {job("J0", {op({{0, 4}, {1, 6}}), op({{1, 3}})})};
    inst.events = {breakdown("bd", 0, 2, 3), arrival("arr", job("J1", {op({{0, 2}})}, 3))};
    return inst;
}

inline std::shared_ptr<const Instance> shared(Instance inst) { return std::make_shared<const Instance>(std::move(inst)); }

}  // namespace fixtures
