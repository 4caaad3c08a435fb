"""Compare the numba and numpy paths of the successive-elimination scan.

Two measurements per instance size:

* ``scan``: one call of the raw kernel on a pre-drawn reward block;
* ``se``: full successive-elimination runs, including reward generation.

Both paths must agree on every result; the script exits non-zero if they do not.

    python benchmarks/bench_kernels.py --arms 4 32 256 --repeat 5
"""

import argparse
import sys
import timeit

import numpy as np

from collab_bai import _kernels
from collab_bai.arms import gen_one_spike
from collab_bai.centralized import _sum_thresholds, successive_elimination
from collab_bai.rng import SeededRng


def scan_inputs(n, block, seed):
    rng = np.random.default_rng(seed)
    means = np.full(n, 0.45)
    means[0] = 0.55
    rewards = (rng.random((block, n)) < means).astype(np.uint8)
    return rewards, _sum_thresholds(0, block, 0.05, n)


def run_scan(kernel, rewards, thr):
    n = rewards.shape[1]
    sums = np.zeros(n, dtype=np.int64)
    active = np.ones(n, dtype=np.bool_)
    elim_t = np.full(n, -1, dtype=np.int64)
    elim_lead = np.full(n, -1, dtype=np.int64)
    k, pulls, status = kernel(sums, active, rewards, thr, 0, 0, -1, elim_t, elim_lead)
    return int(k), int(pulls), int(status), sums.tobytes(), active.tobytes()


def run_se(jit, means, trials):
    _kernels.JIT_ENABLED = jit
    return [
        (r.arm, r.pulls_used) for r in (successive_elimination(means, 0.05, SeededRng(1, t)) for t in range(trials))
    ]


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--arms", type=int, nargs="+", default=[4, 32, 256])
    ap.add_argument("--block", type=int, default=4096)
    ap.add_argument("--trials", type=int, default=20, help="SE runs per timing")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    if _kernels.se_scan_numba is None:
        print("numba is not installed; nothing to compare")
        return 1
    # compile outside the timed region
    warm = scan_inputs(4, 16, 0)
    run_scan(_kernels.se_scan_numba, *warm)

    print(f"{'bench':<6}{'arms':>6}{'numba s':>12}{'numpy s':>12}{'ratio':>9}")
    mismatch = False
    for n in args.arms:
        rewards, thr = scan_inputs(n, args.block, n)
        a = run_scan(_kernels.se_scan_numba, rewards, thr)
        b = run_scan(_kernels.se_scan_numpy, rewards, thr)
        mismatch |= a != b
        t_jit = best_of(lambda: run_scan(_kernels.se_scan_numba, rewards, thr), args.repeat)
        t_np = best_of(lambda: run_scan(_kernels.se_scan_numpy, rewards, thr), args.repeat)
        print(f"{'scan':<6}{n:>6}{t_jit:>12.5f}{t_np:>12.5f}{t_np / t_jit:>8.1f}x")

        means = gen_one_spike(n, 0.2).means
        mismatch |= run_se(True, means, args.trials) != run_se(False, means, args.trials)
        t_jit = best_of(lambda: run_se(True, means, args.trials), args.repeat)
        t_np = best_of(lambda: run_se(False, means, args.trials), args.repeat)
        print(f"{'se':<6}{n:>6}{t_jit:>12.5f}{t_np:>12.5f}{t_np / t_jit:>8.1f}x")

    if mismatch:
        print("numba and numpy paths disagree", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
