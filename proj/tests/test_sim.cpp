#include <doctest.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "reflecsched/bench.hpp"
#include "reflecsched/decision.hpp"
#include "reflecsched/rng.hpp"
#include "reflecsched/sim.hpp"

using namespace reflecsched;

namespace {

Action first_of(const ShopState&, std::span<const Action> a) { return a.front(); }

}  // namespace

TEST_CASE("initial actions and legality") {
    ShopState s(fixtures::small_shop());
    s.advance();
    const auto acts = s.actions();
    // J0.0 on M0 or M1; J1 has not arrived.
    REQUIRE(acts.size() == 2);
    CHECK(acts[0] == Action{0, 0, 0});
    CHECK(acts[1] == Action{0, 0, 1});
    CHECK_THROWS_AS(s.apply(Action{1, 0, 0}), IllegalAction);
    CHECK_THROWS_AS(s.apply(Action{0, 1, 1}), IllegalAction);
    s.apply(acts[0]);
    CHECK_THROWS_AS(s.apply(acts[1]), IllegalAction);
}

TEST_CASE("breakdown suspends and resumes an operation") {
    auto inst = fixtures::shared(fixtures::small_shop());
    FunctionPolicy p("first", first_of);
    const auto r = run_policy(inst, p, 0);
    REQUIRE(r.schedule.entries.size() == 3);
    const auto& e = r.schedule.entries[0];
    CHECK(e.machine == 0);
    CHECK(e.start == 0);
    // 2 units before the breakdown, 3 down, 2 after.
    CHECK(e.end == units(7));
    REQUIRE(e.interruptions.size() == 1);
    CHECK(e.interruptions[0] == Interval{units(2), units(5)});
    CHECK(oracle::check_schedule(*inst, r.schedule).empty());
    CHECK(r.makespan == compute_makespan(r.schedule));
}

TEST_CASE("advance skips to the next decision point") {
    ShopState s(fixtures::small_shop());
    s.advance();
    s.apply({0, 0, 0});
    const auto busy = s.machine_status(0);
    CHECK(std::holds_alternative<MachineBusy>(busy.state));
    CHECK(busy.available_at == units(4));
    s.advance();
    // J1 arrives at 3 but needs M0, which is down over [2,5) and then busy
    // with the resumed J0.0 until 7.
    CHECK(s.clock() == units(7));
    CHECK(s.actions() == std::vector<Action>{{0, 1, 1}, {1, 0, 0}});
    CHECK(s.reveal_count() == 2);
}

TEST_CASE("projection drops unrevealed events and keeps the digest") {
    ShopState s(fixtures::small_shop());
    s.advance();
    CHECK(s.pending_reveals() == 2);
    const auto p = s.projection();
    CHECK(p.projected());
    CHECK(p.pending_reveals() == 0);
    CHECK(p.digest() == s.digest());
    auto q = p;
    q.apply(q.actions().front());
    CHECK(q.digest() != p.digest());
}

TEST_CASE("completion estimate and remaining work") {
    ShopState s(fixtures::small_shop());
    s.advance();
    CHECK(s.processing_time({0, 0, 1}) == units(6));
    CHECK(s.completion_estimate({0, 0, 1}) == units(6));
    CHECK(s.remaining_work(0) == units(4 + 3));
    CHECK(s.remaining_operations(0) == 2);
    const auto acts = s.actions();
    const auto g = greedy_set(s, acts);
    REQUIRE(g.size() == 1);
    CHECK(g[0] == Action{0, 0, 0});
}

TEST_CASE("random dispatch always yields oracle-valid schedules") {
    for (std::uint64_t i = 0; i < 60; ++i) {
        const auto scale = i % 3 == 0 ? ScaleTag::Normal : ScaleTag::Small;
        auto inst = fixtures::shared(generate_gen_instance(GenParams::defaults(scale), 1000 + i));
        Rng rng(i);
        FunctionPolicy p("random", [&](const ShopState&, std::span<const Action> a) { return a[rng.uniform_index(a.size())]; });
        const auto r = run_policy(inst, p, i);
        const auto problems = oracle::check_schedule(*inst, r.schedule);
        CHECK_MESSAGE(problems.empty(), inst->id << ": " << (problems.empty() ? "" : problems.front()));
        CHECK(validate_schedule(*inst, r.schedule, {.require_complete = true}).valid());
    }
}

TEST_CASE("decision log records greedy sets and events") {
    auto inst = fixtures::shared(fixtures::small_shop());
    FunctionPolicy p("first", first_of);
    const auto r = run_policy(inst, p, 0);
    REQUIRE_FALSE(r.decision_log.empty());
    for (std::size_t i = 0; i < r.decision_log.size(); ++i) {
        const auto& d = r.decision_log[i];
        CHECK(d.index == i);
        CHECK_FALSE(d.greedy_set.empty());
        CHECK(std::find(d.available_actions.begin(), d.available_actions.end(), d.chosen) != d.available_actions.end());
    }
    bool saw_event = false;
    for (const auto& d : r.decision_log) saw_event = saw_event || d.triggered_by_event.has_value();
    CHECK(saw_event);
    const auto jsonl = decision_log_to_jsonl(r.decision_log, *inst);
    CHECK(std::count(jsonl.begin(), jsonl.end(), '\n') == static_cast<long>(r.decision_log.size()));
}

TEST_CASE("illegal policy choice is a PolicyError") {
    auto inst = fixtures::shared(fixtures::small_shop());
    FunctionPolicy p("bad", [](const ShopState&, std::span<const Action>) { return Action{1, 0, 0}; });
    CHECK_THROWS_AS(run_policy(inst, p, 0), PolicyError);
}

TEST_CASE("runs are reproducible") {
    auto inst = fixtures::shared(generate_gen_instance(GenParams::normal(), 77));
    BaseRandomizedPolicy a, b;
    const auto ra = run_policy(inst, a, 5);
    const auto rb = run_policy(inst, b, 5);
    CHECK(ra.schedule == rb.schedule);
    CHECK(decision_log_to_jsonl(ra.decision_log, *inst) == decision_log_to_jsonl(rb.decision_log, *inst));
}
