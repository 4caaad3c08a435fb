"""Round-synchronized K-agent simulator and the collaborative algorithms.

All variants share one iteration loop (``_iterate``): preparation, learning,
communication/aggregation and elimination. Agents within a round are evaluated
in agent order, each on its own random stream, so a run is a pure function of
``(instance, config, seed, stream)``.
"""

from __future__ import annotations

import json
import math
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass, field
from typing import Iterable

import numpy as np

from .arms import Instance
from .centralized import successive_elimination, successive_rejects, sr_total_pulls
from .errors import TranscriptError, UsageError
from .rng import ROLE_AGENT, ROLE_CENTRAL, ROLE_SHARED, ROLE_SUBRUN, ROLE_THRESHOLD, SeededRng

BASIC = "basic"
IMPROVED = "improved"
RANDOM_THRESHOLD = "random_threshold"
META = "meta"
VARIANTS = (BASIC, IMPROVED, RANDOM_THRESHOLD, META)

SE_DELTA = 0.01
REPLICATION = 100.0
_VOTE_EPS = 1e-9


@dataclass(frozen=True)
class CollabConfig:
    """Agents ``K``, time horizon ``T`` and round parameter ``R``.

    ``R`` counts communication steps for ``basic``, ``random_threshold`` and
    ``meta`` (so they use up to ``R + 1`` rounds) and counts rounds for
    ``improved``. ``replication`` belongs to ``improved`` only; ``force_tau``
    (a test hook pinning every agent's threshold) to ``random_threshold``/``meta``.
    """

    K: int
    T: int
    R: int
    variant: str = BASIC
    se_delta: float = SE_DELTA
    replication: float | None = None
    force_tau: int | None = None

    def __post_init__(self):
        for name in ("K", "T", "R"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise UsageError(f"{name} must be a positive integer, got {v}")
        if self.variant not in VARIANTS:
            raise UsageError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if not (0.0 < self.se_delta < 1.0):
            raise UsageError("se_delta must be in (0, 1)")
        if self.replication is not None:
            if self.variant != IMPROVED:
                raise UsageError("replication only applies to the improved variant")
            if self.replication <= 0:
                raise UsageError("replication must be positive")
        if self.force_tau is not None and self.variant not in (RANDOM_THRESHOLD, META):
            raise UsageError("force_tau only applies to random_threshold and meta")

    def round_budget(self) -> int:
        return self.R if self.variant == IMPROVED else self.R + 1

    def with_T(self, T: int) -> "CollabConfig":
        return CollabConfig(self.K, int(T), self.R, self.variant, self.se_delta, self.replication, self.force_tau)


@dataclass
class AgentRecord:
    round: int
    agent: int
    arm: int | None
    pulls: int
    sum_rewards: int = 0
    prep_pulls: int = 0
    broadcast: bool = False
    broadcast_arm: int | None = None
    broadcast_mean: float | None = None
    run: int = 0


@dataclass
class RoundSets:
    round: int
    prev_size: int
    candidates: list[int]
    survivors: list[int]
    q_hat: dict[int, float] = field(default_factory=dict)
    radius: float | None = None
    run: int = 0


@dataclass
class Transcript:
    records: list[AgentRecord] = field(default_factory=list)
    sets: list[RoundSets] = field(default_factory=list)

    def extend(self, other: "Transcript", run: int) -> None:
        for rec in other.records:
            rec.run = run
            self.records.append(rec)
        for s in other.sets:
            s.run = run
            self.sets.append(s)

    def to_jsonl(self) -> str:
        lines = []
        for rec in self.records:
            d = {
                "round": rec.round,
                "agent": rec.agent,
                "arm": -1 if rec.arm is None else rec.arm,
                "pulls": rec.pulls,
                "sum_rewards": rec.sum_rewards,
                "broadcast_arm": None if not rec.broadcast else (-1 if rec.broadcast_arm is None else rec.broadcast_arm),
                "broadcast_mean": rec.broadcast_mean,
                "prep_pulls": rec.prep_pulls,
                "run": rec.run,
            }
            lines.append(json.dumps(d))
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_jsonl(cls, text: str) -> "Transcript":
        out = cls()
        for line in text.splitlines():
            if not line.strip():
                continue
            d = json.loads(line)
            try:
                barm = d["broadcast_arm"]
                out.records.append(
                    AgentRecord(
                        round=int(d["round"]),
                        agent=int(d["agent"]),
                        arm=None if d["arm"] == -1 else int(d["arm"]),
                        pulls=int(d["pulls"]),
                        sum_rewards=int(d["sum_rewards"]),
                        prep_pulls=int(d.get("prep_pulls", 0)),
                        broadcast=barm is not None,
                        broadcast_arm=None if barm in (None, -1) else int(barm),
                        broadcast_mean=d["broadcast_mean"],
                        run=int(d.get("run", 0)),
                    )
                )
            except KeyError as exc:
                raise TranscriptError(f"transcript record misses field {exc}") from None
        return out


def transcript_cost(transcript: Transcript) -> tuple[int, int]:
    """Return ``(rounds, time)``: communication steps + 1, and the sum over rounds
    of the largest per-agent pull count in that round."""
    per_agent: dict[tuple[int, int], int] = defaultdict(int)
    comm_rounds = set()
    for rec in transcript.records:
        if rec.round < 1 or rec.agent < 0:
            raise TranscriptError(f"bad round/agent in record {rec}")
        if rec.pulls < 0 or rec.prep_pulls < 0 or rec.prep_pulls > rec.pulls:
            raise TranscriptError(f"bad pull counts in record {rec}")
        if not (0 <= rec.sum_rewards <= rec.pulls - rec.prep_pulls):
            raise TranscriptError(f"reward sum out of range in record {rec}")
        if not rec.broadcast and (rec.broadcast_arm is not None or rec.broadcast_mean is not None):
            raise TranscriptError(f"broadcast payload without a broadcast in record {rec}")
        per_agent[(rec.round, rec.agent)] += rec.pulls
        if rec.broadcast:
            comm_rounds.add(rec.round)
    steps = len(comm_rounds)
    if comm_rounds != set(range(1, steps + 1)):
        raise TranscriptError(f"communication steps are not contiguous: {sorted(comm_rounds)}")
    worst: dict[int, int] = defaultdict(int)
    for (r, _), p in per_agent.items():
        if r > steps + 1:
            raise TranscriptError(f"pulls recorded in round {r} after the final round {steps + 1}")
        worst[r] = max(worst[r], p)
    return steps + 1, sum(worst.values())


@dataclass
class Outcome:
    arm: int | None
    rounds_used: int
    time_used: int
    transcript: Transcript | None = field(default=None, repr=False)
    info: dict = field(default_factory=dict)

    @property
    def abstained(self) -> bool:
        return self.arm is None


def elimination_radius(K: int, R: int, T: int, prev_size: int) -> float:
    """2 sqrt(R ln(200 K R) / (max(1, K / prev_size) T))."""
    if min(K, R, T, prev_size) <= 0:
        raise UsageError("elimination_radius needs positive arguments")
    return 2.0 * math.sqrt(R * math.log(200.0 * K * R) / (max(1.0, K / prev_size) * T))


def spread_assignment(arms: list[int], K: int) -> list[int]:
    """Give each arm K // |S| agents; leftover agents go round-robin to the lowest arms."""
    m = len(arms)
    return [arms[agent % m] for agent in range(K)]


def _random_partition(arms: list[int], K: int, rng: SeededRng) -> list[list[int]]:
    owner = rng.integers(0, K, size=len(arms))
    parts: list[list[int]] = [[] for _ in range(K)]
    for a, o in zip(arms, owner):
        parts[int(o)].append(a)
    return parts


def _replicated_partition(arms: list[int], K: int, copies: int, rng: SeededRng) -> list[list[int]]:
    parts: list[list[int]] = [[] for _ in range(K)]
    for a in arms:
        for o in np.sort(rng.gen.choice(K, size=copies, replace=False)):
            parts[int(o)].append(a)
    return parts


def _taus(cfg: CollabConfig, T: int, rng: SeededRng) -> list[int]:
    if cfg.variant in (RANDOM_THRESHOLD, META):
        if cfg.force_tau is not None:
            return [int(cfg.force_tau)] * cfg.K
        coin = rng.child(ROLE_THRESHOLD).integers(0, 2, size=cfg.K)
        return [T // 200 if c == 0 else T // 2 for c in coin]
    return [T // 2] * cfg.K


def _iterate(instance: Instance, cfg: CollabConfig, T: int, rng: SeededRng, iterations: int) -> tuple[int | None, Transcript]:
    K, R = cfg.K, cfg.R
    mu = instance.means
    learn = T // (2 * R)
    tr = Transcript()
    S = list(range(instance.n))
    taus = None

    for r in range(1, iterations + 1):
        if len(S) <= 1:
            break
        prev = len(S)
        prep = [0] * K
        vote_floor = None
        replicate = (
            cfg.variant == IMPROVED and r == 1 and prev > K ** ((R - 1) / R)
        )
        if replicate or prev > K:
            shared = rng.child(ROLE_SHARED, r)
            if replicate:
                rep = REPLICATION if cfg.replication is None else cfg.replication
                copies = max(1, min(K, int(math.floor(rep * K ** (1.0 / R)))))
                parts = _replicated_partition(S, K, copies, shared)
                vote_floor = K ** (1.0 / R)
            else:
                parts = _random_partition(S, K, shared)
            if taus is None:
                taus = _taus(cfg, T, rng)
            chosen: list[int | None] = []
            for ell in range(K):
                if not parts[ell]:
                    chosen.append(None)
                    continue
                res = successive_elimination(
                    [mu[a] for a in parts[ell]], cfg.se_delta, rng.child(ROLE_AGENT, r, ell),
                    cap=taus[ell], arms=parts[ell],
                )
                prep[ell] = res.pulls_used
                chosen.append(res.arm)
        else:
            chosen = spread_assignment(S, K)

        # learning + broadcast
        means_by_agent: list[float | None] = []
        round_recs = []
        for ell in range(K):
            arm = chosen[ell]
            s = 0
            pulls = 0
            if arm is not None and learn > 0:
                s = rng.child(ROLE_AGENT, r, ell).child(1).binomial(learn, mu[arm])
                pulls = learn
            p_hat = s / pulls if pulls else None
            means_by_agent.append(p_hat)
            round_recs.append(
                AgentRecord(r, ell, arm, prep[ell] + pulls, s, prep[ell], True, arm, p_hat)
            )
        tr.records.extend(round_recs)

        votes = Counter(a for a in chosen if a is not None)
        cand = sorted(votes)
        if vote_floor is not None:
            cand = [a for a in cand if votes[a] >= vote_floor - _VOTE_EPS]
        q_hat: dict[int, float] = {}
        radius = None
        if learn > 0:
            acc: dict[int, list[float]] = defaultdict(list)
            for ell in range(K):
                if chosen[ell] is not None:
                    acc[chosen[ell]].append(means_by_agent[ell])
            q_hat = {a: float(np.mean(acc[a])) for a in cand}
            radius = elimination_radius(K, R, T, prev)
            top = max(q_hat.values()) if q_hat else 0.0
            survivors = [a for a in cand if not (top >= q_hat[a] + radius)]
        else:
            survivors = list(cand)
        tr.sets.append(RoundSets(r, prev, cand, survivors, q_hat, radius))
        S = survivors

    return (S[0] if len(S) == 1 else None), tr


def _finish(arm, tr: Transcript, retain: bool, **info) -> Outcome:
    rounds, time = transcript_cost(tr)
    return Outcome(arm, rounds, time, tr if retain else None, info)


def run_fixed_time(instance: Instance, cfg: CollabConfig, rng: SeededRng, retain: bool = True) -> Outcome:
    if cfg.variant not in (BASIC, RANDOM_THRESHOLD):
        raise UsageError("run_fixed_time runs the basic (or random-threshold) variant")
    arm, tr = _iterate(instance, cfg, cfg.T, rng, cfg.R)
    return _finish(arm, tr, retain)


def run_randomized_threshold(instance: Instance, cfg: CollabConfig, rng: SeededRng, retain: bool = True) -> Outcome:
    if cfg.variant != RANDOM_THRESHOLD:
        raise UsageError("run_randomized_threshold needs variant=random_threshold")
    arm, tr = _iterate(instance, cfg, cfg.T, rng, cfg.R)
    return _finish(arm, tr, retain)


def run_fixed_time_r_rounds(instance: Instance, cfg: CollabConfig, rng: SeededRng, retain: bool = True) -> Outcome:
    """R-round variant: replicated first-round preparation, R - 1 communication steps.

    With ``R == 1`` no communication is possible; agent 0 runs centralized
    successive rejects on the full budget and its answer is final.
    """
    if cfg.variant != IMPROVED:
        raise UsageError("run_fixed_time_r_rounds needs variant=improved")
    if cfg.R == 1:
        tr = Transcript()
        arm = instance.best if instance.n == 1 else None
        if instance.n > 1 and cfg.T >= instance.n:
            arm = successive_rejects(instance.means, cfg.T, rng.child(ROLE_CENTRAL))
            spent = sr_total_pulls(instance.n, cfg.T)
            tr.records.append(AgentRecord(1, 0, arm, spent, 0, spent))
        return _finish(arm, tr, retain, fallback="centralized_successive_rejects")
    arm, tr = _iterate(instance, cfg, cfg.T, rng, cfg.R - 1)
    return _finish(arm, tr, retain)


def meta_horizons(T: int, R: int) -> list[int]:
    """Sub-run horizons floor(T 6 / (pi^2 s^2 10^s)) for s = 1, 2, ... while >= 2R."""
    out = []
    s = 1
    while True:
        h = math.floor(T * 6.0 / (math.pi ** 2 * s * s * 10 ** s))
        if h < 2 * R:
            return out
        out.append(h)
        s += 1


def run_meta(instance: Instance, cfg: CollabConfig, rng: SeededRng, retain: bool = True) -> Outcome:
    """Repeat the random-threshold algorithm 10^s times at shrinking horizons and
    return the plurality answer of the largest s whose plurality exceeds 0.9.

    All sub-runs advance their rounds in lockstep, so the merged transcript
    still has ``R`` communication steps.
    """
    if cfg.variant != META:
        raise UsageError("run_meta needs variant=meta")
    horizons = meta_horizons(cfg.T, cfg.R)
    tr = Transcript()
    answer = None
    levels = []
    run_id = 0
    for s, h in enumerate(horizons, start=1):
        sub_cfg = CollabConfig(cfg.K, h, cfg.R, RANDOM_THRESHOLD, cfg.se_delta, force_tau=cfg.force_tau)
        results = []
        for j in range(10 ** s):
            arm, sub_tr = _iterate(instance, sub_cfg, h, rng.child(ROLE_SUBRUN, s, j), cfg.R)
            tr.extend(sub_tr, run_id)
            run_id += 1
            results.append(arm)
        counts = Counter(a for a in results if a is not None)
        top, freq = (None, 0.0)
        if counts:
            top, c = min(counts.items(), key=lambda kv: (-kv[1], kv[0]))
            freq = c / len(results)
        levels.append({"s": s, "horizon": h, "runs": len(results), "plurality": top, "frequency": freq})
        if freq > 0.9:
            answer = top
    spent = sum(10 ** (i + 1) * h for i, h in enumerate(horizons))
    return _finish(answer, tr, retain, horizons=horizons, levels=levels, budget_spent=spent)


def run(instance: Instance, cfg: CollabConfig, rng: SeededRng, retain: bool = True) -> Outcome:
    """Dispatch on ``cfg.variant``."""
    if cfg.variant == BASIC:
        return run_fixed_time(instance, cfg, rng, retain)
    if cfg.variant == IMPROVED:
        return run_fixed_time_r_rounds(instance, cfg, rng, retain)
    if cfg.variant == RANDOM_THRESHOLD:
        return run_randomized_threshold(instance, cfg, rng, retain)
    return run_meta(instance, cfg, rng, retain)


def config_dict(cfg: CollabConfig) -> dict:
    return asdict(cfg)
