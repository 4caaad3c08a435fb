"""Bernoulli arm instances, generators and complexity measures."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import GeneratorError, InstanceError, UsageError
from .rng import SeededRng

PYRAMID_MAX_RETRIES = 100


@dataclass(frozen=True)
class Instance:
    """A finite set of Bernoulli arms. ``best`` is the unique argmax (0-based)."""

    means: tuple[float, ...]
    best: int

    def __init__(self, means: Sequence[float]):
        vals = tuple(float(m) for m in means)
        if len(vals) == 0:
            raise InstanceError("instance needs at least one arm")
        for i, m in enumerate(vals):
            if not (0.0 <= m <= 1.0) or math.isnan(m):
                raise InstanceError(f"mean of arm {i} is {m}, outside [0, 1]")
        top = max(vals)
        winners = [i for i, m in enumerate(vals) if m == top]
        if len(winners) > 1:
            raise InstanceError(f"tied maximum mean {top} at arms {winners}")
        object.__setattr__(self, "means", vals)
        object.__setattr__(self, "best", winners[0])

    @property
    def n(self) -> int:
        return len(self.means)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.means, dtype=np.float64)

    def to_dict(self) -> dict:
        return {"means": list(self.means), "best": self.best}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "Instance":
        if "means" not in data:
            raise InstanceError("instance document has no 'means'")
        inst = cls(data["means"])
        if "best" in data and int(data["best"]) != inst.best:
            raise InstanceError(
                f"declared best arm {data['best']} disagrees with argmax {inst.best}"
            )
        return inst

    @classmethod
    def from_json(cls, text: str) -> "Instance":
        return cls.from_dict(json.loads(text))


def _check_arm(instance: Instance, arm: int) -> None:
    if not (0 <= arm < instance.n):
        raise UsageError(f"arm index {arm} out of range for {instance.n} arms")


def pull(instance: Instance, arm: int, rng: SeededRng) -> int:
    """Draw one reward from ``arm``; 1 with probability ``means[arm]``."""
    _check_arm(instance, arm)
    return int(rng.random() < instance.means[arm])


def gap(instance: Instance, i: int) -> float:
    _check_arm(instance, i)
    if i == instance.best:
        raise UsageError("gap is undefined for the best arm")
    return instance.means[instance.best] - instance.means[i]


def gaps(means: Sequence[float]) -> np.ndarray:
    """Gaps of every non-best arm of ``means``, in index order."""
    arr = np.asarray(means, dtype=np.float64)
    b = int(np.argmax(arr))
    return np.delete(arr[b] - arr, b)


def hardness(instance: Instance) -> float:
    """Sum of inverse squared gaps over the suboptimal arms (0 for one arm)."""
    if instance.n == 1:
        return 0.0
    g = gaps(instance.means)
    return float(np.sum(1.0 / (g * g)))


def gen_one_spike(n: int, delta: float, best: int = 0, rng: SeededRng | None = None) -> Instance:
    """One arm at 1/2, the other ``n - 1`` at ``1/2 - delta``.

    The best arm sits at index ``best`` unless ``rng`` is given, in which case its
    position is drawn uniformly.
    """
    if n < 2:
        raise UsageError("one-spike instance needs n >= 2")
    if not (0.0 < delta < 0.5):
        raise UsageError(f"delta must lie in (0, 1/2), got {delta}")
    if rng is not None:
        best = int(rng.integers(0, n))
    if not (0 <= best < n):
        raise UsageError(f"best arm position {best} out of range")
    means = [0.5 - delta] * n
    means[best] = 0.5
    return Instance(means)


@dataclass(frozen=True)
class PyramidParams:
    B: int
    L: int
    n: int

    def __post_init__(self):
        if self.B < 2:
            raise UsageError("pyramid level ratio B must be >= 2")
        if self.L < 2:
            raise UsageError("pyramid needs L >= 2 levels")
        if self.n < 1:
            raise UsageError("pyramid needs n >= 1 arms")

    def level_probs(self) -> np.ndarray:
        w = float(self.B) ** (-2.0 * np.arange(1, self.L + 1))
        return w / w.sum()

    def level_means(self) -> np.ndarray:
        return 0.5 - float(self.B) ** (-1.0 * np.arange(1, self.L + 1))

    def normalizer(self) -> float:
        return 1.0 / float(np.sum(float(self.B) ** (-2.0 * np.arange(1, self.L + 1))))


def pyramid_default_n(B: int, L: int) -> int:
    """Arm count coupling ``n = B^{2L} / lambda_1`` (one expected top-level arm)."""
    lam = PyramidParams(B, L, 1).normalizer()
    return max(1, int(round(float(B) ** (2 * L) / lam)))


def pyramid_levels(params: PyramidParams, size: int, rng: SeededRng) -> np.ndarray:
    """Draw ``size`` level indices in ``1..L`` with P[level l] proportional to B^{-2l}."""
    cdf = np.cumsum(params.level_probs())
    cdf[-1] = 1.0
    u = rng.random(size)
    return np.searchsorted(cdf, u, side="right") + 1


def gen_pyramid(params: PyramidParams, rng: SeededRng) -> Instance:
    level_means = params.level_means()
    for _ in range(PYRAMID_MAX_RETRIES):
        lv = pyramid_levels(params, params.n, rng)
        top = lv.max()
        if params.n == 1 or np.count_nonzero(lv == top) == 1:
            return Instance(level_means[lv - 1])
    raise GeneratorError(
        f"pyramid draw kept producing a tied best arm after {PYRAMID_MAX_RETRIES} "
        f"retries (B={params.B}, L={params.L}, n={params.n}); "
        f"try n near {pyramid_default_n(params.B, params.L)}"
    )


def gen_signid(delta: float) -> Instance:
    if delta == 0 or not (-0.5 <= delta <= 0.5):
        raise UsageError(f"SignId delta must be in [-1/2, 1/2] without 0, got {delta}")
    return Instance([0.5 + delta])


def gen_custom(means: Sequence[float]) -> Instance:
    return Instance(means)
