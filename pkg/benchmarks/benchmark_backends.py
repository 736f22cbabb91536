"""Timing comparison of the pure-Python and compiled backend kernels.

Generates survival datasets of increasing size with the package's own
continuous simulation design, feeds byte-identical kernel inputs to every
available backend, and reports wall times for the recursion kernel and the
influence-matrix kernel together with the numerical agreement between
backends.  The influence kernel allocates an (events x subjects) matrix,
so very large ``--sizes`` are memory-hungry.

Run from the repository root:

    python benchmarks/benchmark_backends.py
    python benchmarks/benchmark_backends.py --sizes 1000 4000 16000 --repeats 5
"""

import argparse
import time

import numpy as np

from scsm._backend import HAS_COMPILED, get_backend
from scsm.dataset import build_event_grid
from scsm.instrument import InstrumentModelSpec, fit_instrument_model
from scsm.simulation import SimConfig, generate


def build_inputs(n, rho, seed):
    """Kernel inputs for one simulated dataset, as the estimators build them."""
    cfg = SimConfig(design="continuous", n=n, seed=seed, rho=rho)
    data = generate(cfg, 0)
    inst = fit_instrument_model(data, InstrumentModelSpec("mean"))
    grid = build_event_grid(data, cause=1)
    order = data.canonical_order
    return {
        "x": np.ascontiguousarray(data.exposure[order]),
        "gc": np.ascontiguousarray(inst.residuals[order]),
        "jac": np.ascontiguousarray(inst.jacobian[order]),
        "risk_start": grid.risk_start,
        "event_positions": grid.event_positions,
        "event_offsets": grid.event_offsets,
        "den_threshold": 1e-8 * n,
        "m": grid.m,
    }


def best_time(call, repeats):
    """Smallest wall time over ``repeats`` invocations, plus the last result."""
    best = np.inf
    result = None
    for _ in range(repeats):
        start = time.perf_counter()
        result = call()
        best = min(best, time.perf_counter() - start)
    return best, result


def run_recursion(backend, inp):
    return backend.recursive_fit(
        inp["x"], inp["gc"], inp["jac"], inp["risk_start"],
        inp["event_positions"], inp["event_offsets"], inp["den_threshold"],
    )


def run_influence(backend, inp, fit):
    _, num, den, delta, dnum, dden, slope, theta_grad, b_values = fit
    return backend.influence_base(
        inp["x"], inp["gc"], inp["risk_start"], inp["event_positions"],
        inp["event_offsets"], den, delta, slope, b_values,
    )


def max_rel_diff(a, b):
    scale = np.maximum(np.abs(a), np.abs(b))
    scale[scale == 0.0] = 1.0
    return float(np.max(np.abs(a - b) / scale))


def main():
    parser = argparse.ArgumentParser(
        description="time the backend kernels on simulated datasets"
    )
    parser.add_argument("--sizes", type=int, nargs="+",
                        default=[1000, 2000, 4000],
                        help="dataset sizes to benchmark (default: %(default)s)")
    parser.add_argument("--repeats", type=int, default=3,
                        help="timed repeats per kernel; the best is kept")
    parser.add_argument("--rho", type=float, default=0.5,
                        help="exposure-instrument correlation of the design")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    names = ["python"] + (["compiled"] if HAS_COMPILED else [])
    backends = {name: get_backend(name) for name in names}
    print(f"backends: {', '.join(names)}"
          + ("" if HAS_COMPILED else "  (compiled extension not built)"))

    for n in args.sizes:
        inp = build_inputs(n, args.rho, args.seed)
        print(f"\nn = {n}  ({inp['m']} event times)")

        fits = {}
        for name in names:
            fits[name] = best_time(lambda b=backends[name]:
                                   run_recursion(b, inp), args.repeats)
        line = f"  {'recursion':<14}"
        for name in names:
            line += f"  {name} {fits[name][0] * 1e3:9.2f} ms"
        if HAS_COMPILED:
            line += f"  speedup {fits['python'][0] / fits['compiled'][0]:6.1f}x"
            line += ("  agree "
                     f"{max_rel_diff(fits['python'][1][8], fits['compiled'][1][8]):.1e}")
        print(line)

        infl = {}
        for name in names:
            infl[name] = best_time(lambda b=backends[name]:
                                   run_influence(b, inp, fits[name][1]),
                                   args.repeats)
        line = f"  {'influence':<14}"
        for name in names:
            line += f"  {name} {infl[name][0] * 1e3:9.2f} ms"
        if HAS_COMPILED:
            line += f"  speedup {infl['python'][0] / infl['compiled'][0]:6.1f}x"
            line += f"  agree {max_rel_diff(infl['python'][1], infl['compiled'][1]):.1e}"
        print(line)
        del fits, infl


if __name__ == "__main__":
    main()
