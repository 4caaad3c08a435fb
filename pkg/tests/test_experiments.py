import itertools
import math

import pytest

from collab_bai.arms import Instance, gen_one_spike, hardness
from collab_bai.centralized import log_bar
from collab_bai.errors import NotFound, UsageError
from collab_bai.experiments import (
    SE,
    SR,
    AlgoConfig,
    ErrorEstimate,
    FixedSchedulePolicy,
    budget_interval,
    estimate_error,
    exact_error_oracle,
    hoeffding_halfwidth,
    min_time_for_error,
    rounds_family,
    signid_run,
    speedup_table,
    worker_count,
)


def enumerate_error(means, schedule):
    # independent oracle: walk every reward sequence of the schedule one pull at a time
    err = 0.0
    for outcome in itertools.product((0, 1), repeat=len(schedule)):
        prob, s, c = 1.0, [0, 0], [0, 0]
        for arm, x in zip(schedule, outcome):
            prob *= means[arm] if x else 1 - means[arm]
            s[arm] += x
            c[arm] += 1
        emp = [s[i] / c[i] if c[i] else -1.0 for i in (0, 1)]
        pick = 1 if emp[1] > emp[0] else 0
        best = 0 if means[0] > means[1] else 1
        err += prob * (pick != best)
    return err


def test_hoeffding_halfwidth():
    assert hoeffding_halfwidth(10_000) == pytest.approx(math.sqrt(math.log(200) / 20_000))
    est = ErrorEstimate.from_counts(100, 0)
    assert est.rate == 0 and est.ci_low == 0 and est.ci_high == pytest.approx(hoeffding_halfwidth(100))


def test_trivial_policies():
    inst = Instance([0.3, 0.6, 0.1])
    assert estimate_error(lambda i, r: i.best, inst, 50, 0).failures == 0
    est = estimate_error(lambda i, r: None, inst, 50, 0)
    assert est.rate == 1.0 and est.failures == 50
    with pytest.raises(UsageError):
        estimate_error(lambda i, r: 0, inst, 0, 0)


def test_se_error_rate():
    est = estimate_error(AlgoConfig(SE, delta=0.05), Instance([0.6, 0.4]), 2000, 1)
    assert est.rate <= 0.05 + hoeffding_halfwidth(2000)


def test_worker_count_invariance(monkeypatch):
    algo = AlgoConfig("basic", K=4, T=800, R=2)
    inst = gen_one_spike(8, 0.2)
    one = estimate_error(algo, inst, 60, 5, workers=1)
    three = estimate_error(algo, inst, 60, 5, workers=3)
    assert one == three
    monkeypatch.setenv("BANDIT_COLLAB_THREADS", "2")
    assert worker_count(8) == 2 and worker_count(None) == 2


def test_oracle_frozen_value():
    inst = Instance([0.9, 0.1])
    assert exact_error_oracle(inst, (2, 2)) == pytest.approx(0.0037, abs=1e-12)
    assert enumerate_error((0.9, 0.1), [0, 0, 1, 1]) == pytest.approx(0.0037, abs=1e-12)


SCHEDULES = [
    ((0.9, 0.1), [0, 0, 1, 1]),
    ((0.6, 0.4), [0, 1] * 5),
    ((0.3, 0.45), [0] * 3 + [1] * 9),
    ((0.55, 0.5), [0, 1, 1, 0, 1, 0, 0, 1] * 2),
    ((0.2, 0.7), [1, 0, 0, 0, 0]),
]


@pytest.mark.parametrize("means,schedule", SCHEDULES)
def test_oracle_matches_enumeration(means, schedule):
    inst = Instance(list(means))
    assert exact_error_oracle(inst, schedule) == pytest.approx(enumerate_error(means, schedule), abs=1e-12)


@pytest.mark.parametrize("means,schedule", SCHEDULES[1:3])
def test_oracle_matches_monte_carlo(means, schedule):
    inst = Instance(list(means))
    est = estimate_error(FixedSchedulePolicy(schedule), inst, 4000, 3)
    assert abs(est.rate - exact_error_oracle(inst, schedule)) <= 4 * hoeffding_halfwidth(4000)


def test_oracle_edges():
    assert exact_error_oracle(Instance([1.0, 0.0]), (1, 3)) == 0.0
    # vanishing gap with ties to arm 0: error tends to P(s1 > s0) for fair coins
    fair = sum(math.comb(3, i) * math.comb(3, j) for i in range(4) for j in range(4) if j > i) / 64
    assert exact_error_oracle(Instance([0.5 + 1e-12, 0.5]), (3, 3)) == pytest.approx(fair, abs=1e-9)
    with pytest.raises(UsageError):
        exact_error_oracle(Instance([0.6, 0.4]), (13, 12))
    with pytest.raises(UsageError):
        exact_error_oracle(Instance([0.6, 0.4, 0.1]), (1, 1))


def test_min_time_deterministic_instance():
    # one basic iteration on two agents succeeds once 2 sqrt(ln 400 / T) <= 1
    expected = math.ceil(4 * math.log(400))
    assert expected == 24
    res = min_time_for_error(rounds_family(2, 2), Instance([1.0, 0.0]), 0.1, 20, 0)
    assert res.T == expected
    tested = sorted((T, ok) for T, _, ok in res.trace)
    assert all(ok == (T >= expected) for T, ok in tested)


def test_min_time_vacuous_target():
    res = min_time_for_error(AlgoConfig(SR), gen_one_spike(8, 0.2), 0.99, 50, 0)
    assert res.T == 8


def test_min_time_not_found():
    with pytest.raises(NotFound) as info:
        min_time_for_error(AlgoConfig(SR), Instance([0.5, 0.4999]), 0.01, 20, 0, ceiling=64)
    assert info.value.ceiling == 64


def check_trace_consistent(trace):
    for Ta, ea, oka in trace:
        for Tb, eb, okb in trace:
            if oka and not okb:
                assert ea.rate <= eb.rate + (ea.ci_high - ea.ci_low) + (eb.ci_high - eb.ci_low)


def test_search_trace_consistent():
    res = min_time_for_error(rounds_family(8, 3), gen_one_spike(8, 0.25), 0.2, 100, 4)
    check_trace_consistent(res.trace)
    lo, hi = budget_interval(res, 0.2)
    assert lo <= res.T <= hi


def test_sr_search_below_inverted_bound():
    inst = gen_one_spike(8, 0.2)
    w_bound = 2 * log_bar(8) * hardness(inst) * math.log(64 / 0.1)
    res = min_time_for_error(AlgoConfig(SR), inst, 0.1, 500, 0)
    assert res.T <= w_bound


def test_sr_search_within_factor_two_of_bound():
    inst = gen_one_spike(8, 0.2)
    w_bound = 2 * log_bar(8) * hardness(inst) * math.log(64 / 0.1)
    res = min_time_for_error(AlgoConfig(SR), inst, 0.1, 500, 0)
    assert w_bound / 2 <= res.T <= 2 * w_bound


def test_speedup_table_small():
    inst = gen_one_spike(4, 0.3)
    rows, traces = speedup_table(inst, 4, [2, 1], target_err=0.2, trials=60, seed=2)
    assert [r.R for r in rows] == [1, 2]
    assert all(r.speedup_low <= r.empirical_speedup <= r.speedup_high for r in rows)
    assert rows[0].empirical_speedup == 1.0
    again, _ = speedup_table(inst, 4, [1, 2], target_err=0.2, trials=60, seed=2)
    assert again == rows
    with pytest.raises(UsageError):
        speedup_table(inst, 4, [])


def test_signid():
    # the reference arm is still noisy, so T must shrink the radius well below 1/2
    assert signid_run(0.5, 2, 1000, 1, 200, 0).failures == 0
    neg = signid_run(-0.25, 4, 2000, 2, 500, 1)
    assert neg.rate <= 1 / 3
    pos = signid_run(0.25, 4, 2000, 2, 500, 1)
    assert pos.ci_low <= neg.ci_high and neg.ci_low <= pos.ci_high
    with pytest.raises(UsageError):
        signid_run(0.0, 2, 100, 1, 10, 0)


def test_algo_config_validation():
    with pytest.raises(UsageError):
        AlgoConfig("bogus")
    with pytest.raises(UsageError):
        AlgoConfig("basic", K=0)
    assert AlgoConfig(SR).with_T(77).T == 77
