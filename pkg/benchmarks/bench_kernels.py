"""Compare the numba and numpy implementations of the hot kernels.

Both twins are called on identical inputs; numba is timed after one warm-up
call so compilation (or cache loading) is excluded.  Results are checked for
agreement before timing.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from srsm_opt import kernels
from srsm_opt._accel import NUMBA_AVAILABLE
from srsm_opt.evaluators.spine import DEFAULT_LOAD_CASES, SpineConfig, calibrate_intact


def _mq_case(rng):
    a = rng.random((20000, 17))
    b = rng.random((120, 17))
    return (a, b, 0.3)


def _maximin_case(rng):
    pool = rng.random((4000, 17))
    fixed = rng.random((200, 17))
    return (pool, fixed, 40, np.ones(17))


def _sweep_case():
    cfg = SpineConfig()
    params = calibrate_intact(cfg)
    case = DEFAULT_LOAD_CASES["flexion"]
    m = case.name
    lig = np.array(
        [[l.lever_arms[m], l.translation_coupling, l.rest_length, l.slack, l.stiffness] for l in params.ligaments],
        dtype=float,
    )
    facet = np.array([params.facet.lever_arms[m], params.facet.stiffness[m], params.facet.engagement[m]], dtype=float)
    return (case.moment_curve(cfg.dt), 0.0, lig, facet, params.joint.vector(m), int(params.joint.kind), int(case.sign), 1)


def _same(x, y) -> bool:
    if isinstance(x, tuple):
        return all(_same(a, b) for a, b in zip(x, y))
    if isinstance(x, np.ndarray):
        return np.allclose(x, y, rtol=1e-9, atol=1e-12, equal_nan=True)
    return x == y


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not NUMBA_AVAILABLE:
        print("numba is not installed; nothing to compare")
        return 1
    rng = np.random.default_rng(7)
    cases = {
        "mq_matrix 20000x120 d=17": (kernels.mq_matrix_numba, kernels.mq_matrix_numpy, _mq_case(rng)),
        "greedy_maximin 40 of 4000": (kernels.greedy_maximin_numba, kernels.greedy_maximin_numpy, _maximin_case(rng)),
        "segment_sweep 111 steps": (kernels.segment_sweep_numba, kernels.segment_sweep_numpy, _sweep_case()),
    }
    print(f"{'kernel':<28}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}  agree")
    for name, (fast, slow, inputs) in cases.items():
        agree = _same(fast(*inputs), slow(*inputs))  # doubles as warm-up
        t_fast = min(timeit.repeat(lambda: fast(*inputs), number=1, repeat=args.repeat)) * 1e3
        t_slow = min(timeit.repeat(lambda: slow(*inputs), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<28}{t_fast:>12.3f}{t_slow:>12.3f}{t_slow / t_fast:>9.1f}x  {agree}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
