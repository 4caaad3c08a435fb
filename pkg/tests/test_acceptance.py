"""Acceptance suite. Each test records one PASS/FAIL line, printed at the end of the run."""

import json
import math
from collections import Counter

import numpy as np
import pytest

from collab_bai.arms import Instance, gen_one_spike, hardness
from collab_bai.centralized import SE_PULL_CONSTANT, log_bar, successive_elimination, successive_rejects
from collab_bai.cli import main
from collab_bai.engine import BASIC, IMPROVED, META, RANDOM_THRESHOLD, CollabConfig, meta_horizons, run
from collab_bai.experiments import (
    FixedSchedulePolicy,
    estimate_error,
    exact_error_oracle,
    hoeffding_halfwidth,
    speedup_table,
)
from collab_bai.rng import SeededRng

pytestmark = pytest.mark.acceptance


def test_high_probability_success(report):
    inst = gen_one_spike(64, 0.25)
    H = hardness(inst)
    K, R = 64, 3
    T = int(64 * H * math.log(H * K) / K ** (2 / 3))
    cfg = CollabConfig(K, T, R, BASIC)
    wins = sum(run(inst, cfg, SeededRng(101, t), retain=False).arm == inst.best for t in range(300))
    ok = report(1, "basic algorithm success rate >= 0.90", wins / 300 >= 0.90, f"T={T}, {wins}/300")
    assert ok


def _random_config(rng):
    variant = [BASIC, IMPROVED, RANDOM_THRESHOLD, META][int(rng.integers(4))]
    n = int(rng.integers(2, 24))
    inst = gen_one_spike(n, float(rng.uniform(0.05, 0.45)), best=int(rng.integers(n)))
    K = int(rng.integers(1, 17))
    R = int(rng.integers(1, 5))
    # meta repeats its sub-runs 10^s times, so keep its horizons to two levels
    T = int(rng.integers(1, 4000 if variant == META else 20000))
    return inst, CollabConfig(K, T, R, variant)


def test_budget_and_round_invariants(report):
    rng = np.random.default_rng(2024)
    runs = bad = meta_runs = meta_bad = 0
    while runs < 10_000:
        inst, cfg = _random_config(rng)
        out = run(inst, cfg, SeededRng(7, runs), retain=False)
        runs += 1
        if out.time_used > cfg.T or out.rounds_used > cfg.round_budget():
            bad += 1
        if cfg.variant == META:
            meta_runs += 1
            hs = meta_horizons(cfg.T, cfg.R)
            identity = sum(10**s * h for s, h in enumerate(hs, start=1))
            if identity > cfg.T or out.info["budget_spent"] != identity:
                meta_bad += 1
    ok2 = report(2, "time_used <= T and round budget respected", bad == 0, f"{bad} violations in {runs} runs")
    ok3 = report(3, "meta horizon budget identity", meta_bad == 0, f"{meta_bad} violations in {meta_runs} meta runs")
    assert ok2 and ok3


def test_se_contract(report):
    inst = Instance([0.6, 0.4])
    H = hardness(inst)
    limit = SE_PULL_CONSTANT * H * (math.log(H) + math.log(20))
    res = [successive_elimination(inst.means, 0.05, SeededRng(404, t)) for t in range(2000)]
    err = np.mean([r.arm != inst.best for r in res])
    within = np.mean([r.pulls_used <= limit for r in res])
    ok = err <= 0.05 + hoeffding_halfwidth(2000) and within >= 0.99
    assert report(4, "SE error and pull count", ok, f"error {err:.4f}, {within:.2%} within {limit:.0f} pulls"), (err, within)


def test_fixed_budget_bound(report):
    inst = gen_one_spike(8, 0.2)
    H = hardness(inst)
    cells = []
    for mult in (2, 5, 10):
        W = round(mult * H)
        bound = inst.n**2 * math.exp(-W / (2 * log_bar(inst.n) * H))
        fails = sum(successive_rejects(inst.means, W, SeededRng(505, (mult, t))) != inst.best for t in range(2000))
        cells.append((W, fails / 2000, bound))
    ok = all(e <= b for _, e, b in cells)
    detail = "; ".join(f"W={W}: {e:.4f} <= {b:.3g}" for W, e, b in cells)
    assert report(5, "successive rejects below its error bound", ok, detail)


def test_round_speedup_trend(report):
    inst = gen_one_spike(32, 0.2)
    rows, _ = speedup_table(inst, 64, [1, 2, 3], target_err=0.1, trials=400, seed=606)
    s = {r.R: r for r in rows}
    r1_ok = s[1].empirical_speedup <= 1.5
    # a decrease only counts when the two speedup intervals are disjoint
    mono_ok = all(
        s[R + 1].empirical_speedup >= s[R].empirical_speedup or s[R + 1].speedup_high >= s[R].speedup_low
        for R in (1, 2)
    )
    r2_ok = s[2].empirical_speedup >= 2
    detail = ", ".join(
        f"R={r.R}: {r.empirical_speedup:.2f} [{r.speedup_low:.2f}, {r.speedup_high:.2f}] T*={r.T_star}" for r in rows
    )
    detail += f"; baseline {rows[0].baseline_T}; R1<=1.5 {r1_ok}, monotone {mono_ok}, R2>=2 {r2_ok}"
    assert report(6, "speedup trend over rounds", r1_ok and mono_ok and r2_ok, detail)


ORACLE_CASES = [
    ((0.9, 0.1), (2, 2)),
    ((0.6, 0.4), (5, 5)),
    ((0.35, 0.5), (4, 8)),
    ((0.55, 0.45), (12, 12)),
    ((0.7, 0.2), (1, 3)),
]


def test_oracle_equivalence(report):
    band = hoeffding_halfwidth(10_000)
    gaps = []
    for i, (means, sched) in enumerate(ORACLE_CASES):
        inst = Instance(list(means))
        exact = exact_error_oracle(inst, sched)
        mc = estimate_error(FixedSchedulePolicy(sched), inst, 10_000, 700 + i).rate
        gaps.append(abs(mc - exact))
    frozen = exact_error_oracle(Instance([0.9, 0.1]), (2, 2))
    ok = max(gaps) <= band and abs(frozen - 0.0037) < 1e-12
    assert report(7, "Monte-Carlo matches exact oracle", ok, f"max gap {max(gaps):.4f} <= {band:.4f}, frozen {frozen:.4f}")


def test_anti_concentration(report):
    inst = gen_one_spike(16, 0.2)
    worst = []
    # the horizons where the algorithm starts naming an arm instead of abstaining
    for T in (1000, 1500, 2000):
        cfg = CollabConfig(16, T, 2, RANDOM_THRESHOLD)
        counts = Counter(run(inst, cfg, SeededRng(808, (T, t)), retain=False).arm for t in range(500))
        sub = [c for a, c in counts.items() if a is not None and a != inst.best]
        worst.append((T, max(sub, default=0) / 500))
    ok = all(f <= 0.90 for _, f in worst)
    assert report(8, "no suboptimal arm returned too often", ok, ", ".join(f"T={T}: {f:.3f}" for T, f in worst))


REPLAY_COMMANDS = [
    ("run", ["--gen", "one-spike", "--n", "8", "--gap", "0.2", "--variant", "meta", "--K", "4",
             "--T", "20000", "--R", "2", "--trials", "10"], "errors.csv"),
    ("run", ["--means", "0.6,0.5,0.3", "--variant", "improved", "--K", "8", "--T", "500,4000", "--R", "2",
             "--trials", "50"], "errors.csv"),
    ("sweep", ["--gen", "one-spike", "--n", "4", "--gap", "0.3", "--K", "4", "--R", "1,2", "--target-err", "0.2",
               "--trials", "40"], "speedup.csv"),
    ("signid", ["--delta", "-0.2", "--K", "4", "--T", "1500", "--R", "2", "--trials", "40"], "errors.csv"),
    ("oracle", ["--means", "0.9,0.1", "--schedule", "2,2", "--trials", "500"], "oracle.csv"),
]


def test_replay_determinism(report, tmp_path):
    same = 0
    for i, (cmd, flags, name) in enumerate(REPLAY_COMMANDS):
        a, b = tmp_path / f"a{i}", tmp_path / f"b{i}"
        assert main([cmd, *flags, "-o", str(a)]) == 0
        assert main(["replay", str(a / "metadata.json"), "-o", str(b)]) == 0
        meta_a = json.loads((a / "metadata.json").read_text())
        meta_b = json.loads((b / "metadata.json").read_text())
        same += (a / name).read_bytes() == (b / name).read_bytes() and meta_a["outputs"] == meta_b["outputs"]
    ok = same == len(REPLAY_COMMANDS)
    assert report(9, "replay reproduces byte-identical CSVs", ok, f"{same}/{len(REPLAY_COMMANDS)} commands")
