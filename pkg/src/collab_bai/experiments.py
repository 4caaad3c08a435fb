"""Monte-Carlo harness: error estimation, minimal-time search, speedup tables,
the SignId reduction and an exact enumeration oracle for two-arm policies."""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import engine
from .arms import Instance, gen_signid
from .centralized import successive_elimination, successive_rejects
from .errors import NotFound, UsageError
from .rng import ROLE_CENTRAL, SeededRng

log = logging.getLogger(__name__)

SE = "se"
SR = "sr"
ALGO_KINDS = engine.VARIANTS + (SE, SR)
ROUNDS = "rounds"

DEFAULT_CONFIDENCE = 0.99
ORACLE_MAX_PULLS = 24


@dataclass(frozen=True)
class AlgoConfig:
    """Which algorithm to run and its knobs.

    ``kind`` is a collaborative variant, ``se`` (centralized successive
    elimination at confidence ``delta``, optionally capped at ``T`` pulls when
    ``cap`` is true) or ``sr`` (successive rejects with budget ``T``).
    """

    kind: str
    K: int = 1
    T: int = 1
    R: int = 1
    delta: float = 0.05
    cap: bool = False
    se_delta: float = engine.SE_DELTA
    replication: float | None = None

    def __post_init__(self):
        if self.kind not in ALGO_KINDS:
            raise UsageError(f"unknown algorithm {self.kind!r}; expected one of {ALGO_KINDS}")
        if self.kind in engine.VARIANTS:
            self.collab()

    def with_T(self, T: int) -> "AlgoConfig":
        d = asdict(self)
        d["T"] = int(T)
        return AlgoConfig(**d)

    def collab(self) -> engine.CollabConfig:
        return engine.CollabConfig(self.K, self.T, self.R, self.kind, self.se_delta, self.replication)

    def min_T(self, instance: Instance) -> int:
        if self.kind == SR:
            return max(instance.n, 2)
        return 1

    def run_once(self, instance: Instance, rng: SeededRng) -> int | None:
        if self.kind == SE:
            res = successive_elimination(instance.means, self.delta, rng, cap=self.T if self.cap else None)
            return res.arm
        if self.kind == SR:
            if instance.n == 1:
                return 0
            return successive_rejects(instance.means, self.T, rng.child(ROLE_CENTRAL))
        return engine.run(instance, self.collab(), rng, retain=False).arm


def rounds_family(K: int, R: int, se_delta: float = engine.SE_DELTA) -> AlgoConfig:
    """Collaborative algorithm using exactly ``R`` rounds (R - 1 communication steps).

    One round allows no communication, so it is the centralized successive
    rejects run by a single agent; more rounds use the basic algorithm with
    ``R - 1`` communication steps.
    """
    if R == 1:
        return AlgoConfig(SR, K=K, R=1)
    return AlgoConfig(engine.BASIC, K=K, R=R - 1, se_delta=se_delta)


def hoeffding_halfwidth(trials: int, confidence: float = DEFAULT_CONFIDENCE) -> float:
    """Two-sided Hoeffding half-width sqrt(ln(2/alpha) / 2n) for a mean of n [0,1] draws."""
    alpha = 1.0 - confidence
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * trials))


@dataclass(frozen=True)
class ErrorEstimate:
    trials: int
    failures: int
    rate: float
    ci_low: float
    ci_high: float
    confidence: float = DEFAULT_CONFIDENCE

    @classmethod
    def from_counts(cls, trials: int, failures: int, confidence: float = DEFAULT_CONFIDENCE) -> "ErrorEstimate":
        rate = failures / trials
        hw = hoeffding_halfwidth(trials, confidence)
        return cls(trials, failures, rate, max(0.0, rate - hw), min(1.0, rate + hw), confidence)


Policy = Callable[[Instance, SeededRng], "int | None"]


def worker_count(requested: int | None = None) -> int:
    """Requested workers, capped by ``BANDIT_COLLAB_THREADS`` when set."""
    n = 1 if requested is None else max(1, int(requested))
    cap = os.environ.get("BANDIT_COLLAB_THREADS")
    if cap:
        n = min(n, max(1, int(cap))) if requested is not None else max(1, int(cap))
    return n


def _count_failures(algo, instance: Instance, seed: int, start: int, stop: int) -> int:
    fails = 0
    for t in range(start, stop):
        rng = SeededRng(seed, t)
        out = algo.run_once(instance, rng) if isinstance(algo, AlgoConfig) else algo(instance, rng)
        if out is None or out != instance.best:
            fails += 1
    return fails


def estimate_error(
    algo: AlgoConfig | Policy,
    instance: Instance,
    trials: int,
    seed: int,
    workers: int | None = None,
    confidence: float = DEFAULT_CONFIDENCE,
) -> ErrorEstimate:
    """Run ``trials`` independent trials (trial t uses stream t) and count failures.

    Abstaining counts as a failure. Results do not depend on ``workers``.
    """
    if trials < 1:
        raise UsageError("trials must be >= 1")
    nw = worker_count(workers)
    if nw > 1 and isinstance(algo, AlgoConfig) and trials >= 2 * nw:
        edges = np.linspace(0, trials, nw + 1).astype(int)
        with ProcessPoolExecutor(max_workers=nw) as pool:
            futs = [
                pool.submit(_count_failures, algo, instance, seed, int(a), int(b))
                for a, b in zip(edges[:-1], edges[1:])
            ]
            fails = sum(f.result() for f in futs)
    else:
        fails = _count_failures(algo, instance, seed, 0, trials)
    return ErrorEstimate.from_counts(trials, fails, confidence)


@dataclass
class SearchResult:
    T: int
    trace: list[tuple[int, ErrorEstimate, bool]] = field(default_factory=list)

    def __int__(self) -> int:
        return self.T


def min_time_for_error(
    family: AlgoConfig,
    instance: Instance,
    target_err: float,
    trials: int,
    seed: int,
    floor: int | None = None,
    ceiling: int = 1 << 24,
    rel_tol: float = 0.0,
    slack: float | None = None,
    workers: int | None = None,
) -> SearchResult:
    """Smallest horizon T at which ``family.with_T(T)`` meets ``target_err``.

    Doubles T from ``floor`` until a budget passes, then bisects between the last
    failing and first passing budget until they are adjacent (or within
    ``rel_tol`` relative width). A budget passes when its estimated error is at
    most ``target_err`` and its CI upper end is at most ``target_err + slack``
    (slack defaults to the CI half-width). Every T is evaluated on the same
    seed, i.e. with common random numbers.
    """
    if not (0.0 < target_err < 1.0):
        raise UsageError("target_err must be in (0, 1)")
    lo_floor = family.min_T(instance) if floor is None else max(floor, family.min_T(instance))
    if slack is None:
        slack = hoeffding_halfwidth(trials)
    trace: list[tuple[int, ErrorEstimate, bool]] = []
    cache: dict[int, bool] = {}

    def passes(T: int) -> bool:
        if T not in cache:
            est = estimate_error(family.with_T(T), instance, trials, seed, workers)
            ok = est.rate <= target_err and est.ci_high <= target_err + slack
            trace.append((T, est, ok))
            log.debug("T=%d rate=%.4f pass=%s", T, est.rate, ok)
            cache[T] = ok
        return cache[T]

    T = lo_floor
    if passes(T):
        return SearchResult(T, trace)
    lo = T
    while True:
        T = 2 * T
        if T > ceiling:
            raise NotFound(ceiling)
        if passes(T):
            hi = T
            break
        lo = T
    while hi - lo > max(1, int(rel_tol * hi)):
        mid = (lo + hi) // 2
        if passes(mid):
            hi = mid
        else:
            lo = mid
    return SearchResult(hi, trace)


@dataclass(frozen=True)
class SpeedupRow:
    R: int
    T_star: int
    baseline_T: int
    empirical_speedup: float
    K: int = 0
    target_err: float = 0.1
    speedup_low: float = 0.0
    speedup_high: float = 0.0


def budget_interval(result: SearchResult, target_err: float) -> tuple[int, int]:
    """Range of horizons consistent with the target given the per-T error CIs.

    Low end: smallest tested T whose CI reaches down to the target. High end:
    smallest tested T whose whole CI sits below the target (largest tested T
    if none does).
    """
    tested = sorted((T, est) for T, est, _ in result.trace)
    lo = min([T for T, est in tested if est.ci_low <= target_err] + [result.T])
    sure = [T for T, est in tested if est.ci_high <= target_err]
    hi = max(min(sure) if sure else tested[-1][0], result.T)
    return lo, hi


def speedup_table(
    instance: Instance,
    K: int,
    R_list: Sequence[int],
    target_err: float = 0.1,
    trials: int = 400,
    seed: int = 0,
    rel_tol: float = 0.02,
    workers: int | None = None,
    family: Callable[[int, int], AlgoConfig] = rounds_family,
) -> tuple[list[SpeedupRow], dict]:
    """Empirical speedup ``baseline_T / T_star`` per round budget R.

    ``baseline_T`` is the minimal budget of centralized successive rejects and
    ``T_star`` that of ``family(K, R)`` at the same target error. Each row also
    carries a speedup interval built from :func:`budget_interval` on both
    searches. Returns the rows (ascending R) and the search traces.
    """
    if not R_list:
        raise UsageError("R_list must be non-empty")
    base = min_time_for_error(AlgoConfig(SR), instance, target_err, trials, seed, rel_tol=rel_tol, workers=workers)
    b_lo, b_hi = budget_interval(base, target_err)
    rows = []
    traces = {"baseline": base.trace}
    for R in sorted(R_list):
        res = min_time_for_error(family(K, R), instance, target_err, trials, seed, rel_tol=rel_tol, workers=workers)
        t_lo, t_hi = budget_interval(res, target_err)
        traces[R] = res.trace
        rows.append(SpeedupRow(R, res.T, base.T, base.T / res.T, K, target_err, b_lo / t_hi, b_hi / t_lo))
    return rows, traces


def signid_instance(delta: float) -> Instance:
    """Two arms: the reference at 1/2 (arm 0) and the unknown arm at 1/2 + delta (arm 1)."""
    unknown = gen_signid(delta)
    return Instance([0.5, unknown.means[0]])


@dataclass
class _SignPolicy:
    cfg: engine.CollabConfig
    delta: float

    def __call__(self, instance: Instance, rng: SeededRng):
        arm = engine.run(instance, self.cfg, rng, retain=False).arm
        return sign_decision(arm)


def sign_decision(arm: int | None) -> str | None:
    if arm is None:
        return None
    return ">0" if arm == 1 else "<0"


def signid_run(
    delta: float,
    K: int,
    T: int,
    R: int,
    trials: int,
    seed: int,
    variant: str = engine.BASIC,
) -> ErrorEstimate:
    """Decide the sign of ``delta`` by best-arm identification against a fair reference arm."""
    inst = signid_instance(delta)
    truth = ">0" if delta > 0 else "<0"
    policy = _SignPolicy(engine.CollabConfig(K, T, R, variant), delta)
    fails = 0
    for t in range(trials):
        if policy(inst, SeededRng(seed, t)) != truth:
            fails += 1
    return ErrorEstimate.from_counts(trials, fails)


def schedule_counts(schedule) -> tuple[int, int]:
    """Pull counts (arm 0, arm 1) of a fixed schedule: either a pair or a sequence of arm ids."""
    if isinstance(schedule, tuple) and len(schedule) == 2 and all(isinstance(x, (int, np.integer)) for x in schedule):
        a, b = int(schedule[0]), int(schedule[1])
    else:
        seq = list(schedule)
        if any(x not in (0, 1) for x in seq):
            raise UsageError("schedule entries must be arm 0 or arm 1")
        a, b = seq.count(0), seq.count(1)
    if a < 0 or b < 0:
        raise UsageError("pull counts must be non-negative")
    return a, b


def _decide(s0: int, a: int, s1: int, b: int) -> int:
    # argmax of empirical means, ties (and unpulled arms) favour arm 0
    if a == 0 and b == 0:
        return 0
    if a == 0:
        return 1 if s1 > 0 else 0
    if b == 0:
        return 0
    return 1 if s1 * a > s0 * b else 0


def _binom_pmf(n: int, p: float) -> list[float]:
    return [math.comb(n, k) * p ** k * (1.0 - p) ** (n - k) for k in range(n + 1)]


def exact_error_oracle(instance: Instance, schedule) -> float:
    """Exact error of a fixed-schedule two-arm policy by summing over all outcome pairs."""
    if instance.n != 2:
        raise UsageError("the exact oracle handles two-arm instances only")
    a, b = schedule_counts(schedule)
    if a + b > ORACLE_MAX_PULLS:
        raise UsageError(f"schedule has {a + b} pulls; the oracle enumerates at most {ORACLE_MAX_PULLS}")
    p0 = _binom_pmf(a, instance.means[0])
    p1 = _binom_pmf(b, instance.means[1])
    err = 0.0
    for s0 in range(a + 1):
        for s1 in range(b + 1):
            if _decide(s0, a, s1, b) != instance.best:
                err += p0[s0] * p1[s1]
    return float(err)


@dataclass
class FixedSchedulePolicy:
    """Monte-Carlo counterpart of the oracle: pull per the schedule, pick the higher mean."""

    schedule: object

    def __call__(self, instance: Instance, rng: SeededRng) -> int:
        a, b = schedule_counts(self.schedule)
        s0 = rng.binomial(a, instance.means[0])
        s1 = rng.binomial(b, instance.means[1])
        return _decide(s0, a, s1, b)
