"""Trajectory-kernel throughput: compiled extension vs pure-Python fallback.

    python benchmarks/bench_kernel.py [--trajectories 200] [--buildings 50 400]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from portfolio_recovery.instances import small_stochastic_instance
from portfolio_recovery.kernel import KERNELS, PlannerModel
from portfolio_recovery.solver import base_policy_action


def bench(planner: PlannerModel, n_traj: int, repeat: int) -> float:
    state = planner.mdp.initial_state()
    first = base_policy_action(planner, state).buildings()
    horizon = 10**6  # run every trajectory to full recovery
    best = np.inf
    for r in range(repeat):
        t0 = time.perf_counter()
        planner.simulate(state, first, 1234 + r, 0, n_traj, 0.99, horizon)
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trajectories", type=int, default=200)
    ap.add_argument("--buildings", type=int, nargs="+", default=[50, 400, 2000])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    names = [k for k in ("python", "compiled") if k in KERNELS]
    print(f"{'buildings':>9} {'damaged':>7} " + " ".join(f"{n + ' [ms]':>14}" for n in names) + "  speedup")
    for n in args.buildings:
        inst = small_stochastic_instance(1000, n_buildings=n, n_rows=3, n_cols=3)
        times = {}
        samples = {}
        for name in names:
            p = PlannerModel(inst.mdp(), inst.catalog, kernel=name)
            times[name] = bench(p, args.trajectories, args.repeat)
            st = p.mdp.initial_state()
            samples[name] = p.simulate(st, base_policy_action(p, st).buildings(), 7, 0, 8, 0.99, 10**6)
        if len(names) == 2:
            assert np.array_equal(samples["python"], samples["compiled"]), "kernels disagree"
        speed = f"{times['python'] / times['compiled']:7.1f}x" if len(names) == 2 else "    n/a"
        row = " ".join(f"{1e3 * times[k]:14.2f}" for k in names)
        print(f"{n:9d} {int(inst.realization.damaged.sum()):7d} {row}  {speed}")


if __name__ == "__main__":
    main()
