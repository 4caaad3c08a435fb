"""Simulation of collaborative (multi-agent, round-limited) best-arm identification."""

__version__ = "0.1.0"

from .arms import (  # noqa: E402
    Instance,
    PyramidParams,
    gap,
    gen_custom,
    gen_one_spike,
    gen_pyramid,
    gen_signid,
    hardness,
    pull,
)
from .centralized import se_cost_bound, successive_elimination, successive_rejects  # noqa: E402
from .engine import CollabConfig, Outcome, Transcript, elimination_radius, run, transcript_cost  # noqa: E402
from .experiments import AlgoConfig, ErrorEstimate, estimate_error, min_time_for_error, speedup_table  # noqa: E402
from .rng import SeededRng  # noqa: E402

__all__ = [
    "AlgoConfig", "CollabConfig", "ErrorEstimate", "Instance", "Outcome", "PyramidParams", "SeededRng",
    "Transcript", "elimination_radius", "estimate_error", "gap", "gen_custom", "gen_one_spike", "gen_pyramid",
    "gen_signid", "hardness", "min_time_for_error", "pull", "run", "se_cost_bound", "speedup_table",
    "successive_elimination", "successive_rejects", "transcript_cost",
]
