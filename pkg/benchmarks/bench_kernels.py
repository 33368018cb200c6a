"""Compare the compiled and numpy catching-up kernels on a batch of controls.

    python benchmarks/bench_kernels.py [--rows 2000] [--steps 6000] [--scenario ex1]

Prints wall time per backend, throughput in simulated steps per second and
the largest terminal-state difference between backends.
"""

import argparse
import time

import numpy as np

from crowdsweep.kernels import BACKENDS, batch_terminal_states
from crowdsweep.model import bundled_scenario


def run(scenario, controls, steps, backend, repeat):
    th = scenario.initial_angles
    units = np.column_stack((np.cos(th), np.sin(th)))
    h = scenario.T / steps
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = batch_terminal_states(scenario.x0, scenario.speeds, units, controls, h, steps,
                                    scenario.R, frozen=True, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--rows", type=int, default=2000)
    ap.add_argument("--steps", type=int, default=6000)
    ap.add_argument("--scenario", default="ex1")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    sc = bundled_scenario(args.scenario)
    rng = np.random.default_rng(args.seed)
    controls = rng.uniform(0.0, 5.0, size=(args.rows, sc.n))

    results = {}
    print(f"{'backend':>8} {'seconds':>10} {'steps/s':>12}")
    for name in sorted(BACKENDS):
        secs, out = run(sc, controls, args.steps, name, args.repeat)
        results[name] = (secs, out)
        print(f"{name:>8} {secs:10.4f} {args.rows * args.steps / secs:12.3e}")
    if len(results) == 2:
        (tc, oc), (tp, op) = results["cython"], results["python"]
        print(f"speedup cython/python: {tp / tc:.1f}x")
        print(f"max |difference|: {np.abs(oc - op).max():.3e}")
    else:
        print("compiled extension not built; only the numpy backend ran")


if __name__ == "__main__":
    main()
