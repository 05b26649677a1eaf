import pytest

import reflecsched as rs


@pytest.fixture
def small():
    return rs.generate("Small", 11)


def test_instance_round_trip(small, tmp_path):
    again = rs.Instance.from_json(small.to_json())
    assert again == small
    path = tmp_path / "inst.json"
    small.save(str(path))
    assert rs.Instance.load(str(path)) == small
    assert small.scale == "Small"
    assert small.total_operations > 0


def test_bad_json_is_a_value_error():
    with pytest.raises(ValueError):
        rs.Instance.from_json('{"instance_id": "x"}')


def test_every_rule_gives_a_valid_schedule(small):
    for rule in rs.rules():
        out = rs.run(small, rule, seed=3)
        assert rs.validate(small, out["schedule_csv"]) == []
        assert out["makespan"] == rs.rule_makespan(small, rule, seed=3)


def test_eet_is_fully_greedy(small):
    assert rs.run(small, "EET")["gdr"] == 1.0


def test_mock_reflecsched_is_deterministic(small):
    a = rs.run(small, "ReflecSched", seed=5, max_level=1, rollouts=4, horizon=3)
    b = rs.run(small, "ReflecSched", seed=5, max_level=1, rollouts=4, horizon=3)
    assert a["decision_log"] == b["decision_log"]
    assert a["schedule_csv"] == b["schedule_csv"]


def test_callback_policy(small):
    # Latest completion first: the opposite of EET.
    out = rs.run_callback(small, lambda acts: max(range(len(acts)), key=lambda k: acts[k]["completion"]))
    assert rs.validate(small, out["schedule_csv"]) == []
    assert out["makespan"] > 0


def test_callback_out_of_range(small):
    with pytest.raises(IndexError):
        rs.run_callback(small, lambda acts: len(acts))


def test_unknown_policy(small):
    with pytest.raises(ValueError):
        rs.run(small, "NOPE")


def test_metrics():
    assert rs.rpd(110, 100) == pytest.approx(10.0)
    assert rs.win_rate([1, 2], [1, 2]) == 0.0
    w = rs.wilcoxon([1, 2, 3], "exact")
    assert w["p_two_sided"] == pytest.approx(0.25)
    assert rs.wilcoxon([0, 0])["no_signal"]


def test_pdr_instance_dominates():
    inst = rs.generate_pdr("MWKR", seed=4, max_attempts=4000)
    target = rs.rule_makespan(inst, "MWKR")
    for rule in rs.rules():
        if rule not in ("MWKR", "RANDOM"):
            assert target <= 0.98 * rs.rule_makespan(inst, rule)


def test_gantt(small):
    svg = rs.gantt(small, rs.run(small, "SPT")["schedule_csv"])
    assert svg.startswith("<svg")
