"""Acceptance criteria, one test per criterion.

Each test records a single ``[PASS]``/``[FAIL]`` line with the measured
numbers; the lines are printed in an "acceptance criteria" section at the end
of the pytest report (and inline with ``-s``). Also runnable as a script:
``python tests/test_acceptance.py``.
"""
from __future__ import annotations

import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from conftest import ACCEPTANCE_LINES
from portfolio_recovery.community import Building, CommunityModel, GridCell, TestbedConfig, generate_testbed
from portfolio_recovery.config import RunConfig, config_from_dict
from portfolio_recovery.damage import (
    DamageState,
    FragilityCurve,
    default_catalog,
    exceedance_probability,
    realize_scenario,
    sample_damage_states,
    state_probabilities,
)
from portfolio_recovery.hazard import GmpeParams, ScenarioConfig, median_ln_im, sample_intensity_field
from portfolio_recovery.instances import random_tiny_instance, resample_durations, small_stochastic_instance
from portfolio_recovery.kernel import PlannerModel
from portfolio_recovery.mdp import RU_FRACTION, RecoveryMDP, RepairAction, compute_ru_budget
from portfolio_recovery.pipeline import run
from portfolio_recovery.rng import Stream
from portfolio_recovery.solver import (
    RolloutConfig,
    check_trace,
    estimate_first,
    exact_base_q,
    exact_dp_solve,
    rollout_action,
    run_policy,
    state_key,
)

RESULTS: dict[str, tuple[bool, str]] = {}
# every rollout estimate made by the acceptance runs, for the dispersion check
ESTIMATES: list = []


def report(tag: str, title: str, ok: bool, detail: str) -> None:
    RESULTS[tag] = (ok, detail)
    line = f"[{'PASS' if ok else 'FAIL'}] {tag} {title}: {detail}"
    ACCEPTANCE_LINES[tag] = line
    print("\n" + line, flush=True)


# --------------------------------------------------------------------------- 1
def test_c1_constants():
    cfg = RolloutConfig()
    scen = ScenarioConfig()
    checks = {
        "gamma": cfg.gamma == 0.99,
        "dispersion_target": cfg.dispersion_target == 0.1,
        "ru_fraction": RU_FRACTION == 0.2,
        "magnitude": scen.magnitude == 6.9,
        "epicentral_distance": scen.epicentral_distance_km == 12.0,
        "run_config_solver": RunConfig().solver == cfg,
    }
    # the 20% rule on a 10-damaged grid
    real = _realization_with_damaged(10)
    checks["ru_10_damaged"] = tuple(compute_ru_budget(real[1], real[0]).ru_per_grid) == (2,)
    ok = all(checks.values())
    report("C1", "model constants", ok, ", ".join(f"{k}={'ok' if v else 'MISMATCH'}" for k, v in checks.items()))
    assert ok


def _realization_with_damaged(n_damaged: int):
    from portfolio_recovery.damage import ScenarioRealization

    n = n_damaged
    b = tuple(Building(i, 0, float(i), 0.0, (0, 1, 0), True, 0) for i in range(n))
    model = CommunityModel((GridCell(0, (0.0, 0.0), tuple(range(n))),), b, n, (0.306, 0.61, 0.084))
    real = ScenarioRealization(np.ones(n), np.full(n, 2, dtype=np.int8), np.full(n, 10, dtype=np.int64))
    return model, real


# --------------------------------------------------------------------------- 2
def test_c2_oracle_equivalence():
    t0 = time.perf_counter()
    agree = points = 0
    q_pairs = q_fail = 0
    n_instances = 24
    for seed in range(n_instances):
        inst = random_tiny_instance(seed, max_buildings=4, max_cells=2)
        mdp = inst.mdp()
        planner = PlannerModel(mdp, inst.catalog)
        config = RolloutConfig()
        horizon = config.resolve_horizon(mdp)
        sol = exact_dp_solve(planner, config.gamma)
        state, k = mdp.initial_state(), 0
        rng = Stream.from_seed(seed)
        while not mdp.is_terminal(state):
            if state.free_ru.sum() and state.pending.any():
                action = rollout_action(planner, state, config, rng.child("epoch", k), horizon=horizon)
                points += 1
                agree += tuple(sorted(action.buildings())) in sol.optimal_actions(state_key(state))
                # estimate_q vs exact base Q for every single-crew first choice
                for g in range(mdp.n_cells):
                    for b in mdp.feasible_assignment_targets(state, g):
                        est = estimate_first(planner, state, [b], config, rng.child("q", k, b).key, horizon)
                        exact = exact_base_q(planner, state, [b], config.gamma, horizon)
                        q_pairs += 1
                        tol = 3 * est.std_error + 1e-9 * max(1.0, abs(exact))
                        q_fail += abs(est.q_hat - exact) > tol
            else:
                action = RepairAction({})
            state = mdp.step(state, action).next_state
            k += 1
    elapsed = time.perf_counter() - t0
    rate = agree / points
    ok = n_instances >= 20 and rate >= 0.95 and q_fail == 0 and elapsed < 60
    report(
        "C2", "oracle equivalence", ok,
        f"{n_instances} instances, action agreement {agree}/{points} = {rate:.1%} (need >= 95%), "
        f"estimate_q within 3 SE at {q_pairs - q_fail}/{q_pairs} pairs, {elapsed:.1f} s (< 60 s)",
    )
    assert ok


# --------------------------------------------------------------------------- 3
C3_INSTANCES = 10
C3_REPLICATIONS = 30


@pytest.mark.slow
def test_c3_policy_improvement():
    """Paired rollout-minus-base returns over 10 instances x 30 replications.

    Replication r resamples every repair duration from the instance's
    lognormal repair model; base and rollout face the same durations.
    The one-sided 95% test fails the criterion if rollout is significantly
    worse than its base (rollout improvement holds with equality when the
    base is already optimal, so strict superiority is reported, not required).
    """
    t0 = time.perf_counter()
    config = RolloutConfig()
    diffs = np.zeros((C3_INSTANCES, C3_REPLICATIONS))
    sizes = []
    for i in range(C3_INSTANCES):
        inst = small_stochastic_instance(1000 + i)
        planner = PlannerModel(inst.mdp(), inst.catalog)
        sizes.append(int(inst.realization.damaged.sum()))
        root = Stream.from_seed(1000 + i)
        for r in range(C3_REPLICATIONS):
            durations = resample_durations(inst, root.child("rep", r))
            solver = root.child("solver", r)
            base = run_policy(planner, "base", config, solver, durations)
            roll = run_policy(planner, "rollout", config, solver, durations)
            ESTIMATES.extend(roll.estimates)
            diffs[i, r] = roll.discounted_return - base.discounted_return
    elapsed = time.perf_counter() - t0
    d = diffs.ravel()
    n = d.size
    mean = float(d.mean())
    se = float(d.std(ddof=1) / math.sqrt(n))
    t95 = float(stats.t.ppf(0.95, n - 1))
    upper, lower = mean + t95 * se, mean - t95 * se
    non_inferior = upper >= 0.0
    ok = non_inferior and elapsed < 600
    per = ", ".join(f"{m:+.3f}" for m in diffs.mean(axis=1))
    report(
        "C3", "policy improvement", ok,
        f"{C3_INSTANCES} instances ({min(sizes)}-{max(sizes)} damaged of 50) x {C3_REPLICATIONS} paired reps: "
        f"mean(rollout-base) = {mean:+.4f} (SE {se:.4f}); one-sided 95% bounds: upper {upper:+.4f} "
        f"(>= 0 required: rollout not significantly worse), lower {lower:+.4f} "
        f"(strict superiority {'shown' if lower > 0 else 'not shown'}); per-instance means [{per}]; {elapsed:.0f} s (< 600 s)",
    )
    assert ok


def test_c3_supplement_improvement_with_headroom():
    """Where greedy is measurably suboptimal (tiny stochastic instances), the
    rollout gain is strictly positive at one-sided 95%."""
    config = RolloutConfig()
    d = []
    for seed in range(0, 40, 2):
        inst = random_tiny_instance(seed, max_buildings=5, stochastic=True)
        planner = PlannerModel(inst.mdp(), inst.catalog)
        for r in range(30):
            root = Stream.from_seed(r)
            durations = resample_durations(inst, root.child("d", seed))
            base = run_policy(planner, "base", config, root, durations)
            roll = run_policy(planner, "rollout", config, root, durations)
            ESTIMATES.extend(roll.estimates)
            d.append(roll.discounted_return - base.discounted_return)
    d = np.asarray(d)
    mean, se = float(d.mean()), float(d.std(ddof=1) / math.sqrt(d.size))
    lower = mean - float(stats.t.ppf(0.95, d.size - 1)) * se
    ok = lower > 0
    report("C3b", "improvement where the base has headroom", ok,
           f"20 tiny stochastic instances x 30 reps: mean gain {mean:+.4f} (SE {se:.4f}), one-sided 95% lower bound {lower:+.4f} (> 0)")
    assert ok


# --------------------------------------------------------------------------- 4
def test_c4_probability_correctness():
    curve = FragilityCurve(theta=(0.2, 0.4, 0.8, 1.6), beta=(0.6, 0.6, 0.6, 0.6))
    worst_sum = max(abs(state_probabilities(curve, im).sum() - 1.0) for im in np.geomspace(1e-3, 20, 200))
    half = all(exceedance_probability(curve, DamageState(s), t) == 0.5 for s, t in zip(range(1, 5), curve.theta))
    im = 0.5
    n = 10**6
    u = Stream.from_seed(4).uniforms(np.arange(n))
    counts = np.bincount(sample_damage_states(curve, np.full(n, im), u), minlength=5)
    p = state_probabilities(curve, im)
    z = np.abs(counts / n - p) / np.sqrt(p * (1 - p) / n)
    ok = worst_sum <= 1e-12 and half and z.max() <= 3.0
    report("C4", "probability correctness", ok,
           f"max |sum-1| {worst_sum:.1e} (<= 1e-12), exceedance at theta == 0.5: {half}, "
           f"max |z| of state frequencies at 10^6 draws {z.max():.2f} (<= 3)")
    assert ok


# --------------------------------------------------------------------------- 5
def test_c5_hazard_statistics():
    gmpe = GmpeParams()
    one = CommunityModel(
        (GridCell(0, (0.0, 0.0), (0,)),), (Building(0, 0, 3.0, 4.0, (0, 1, 0), True, 0),), 1, (0.306, 0.61, 0.084)
    )
    scen = ScenarioConfig(epicenter=(0.0, 0.0), gmpe=gmpe)
    n = 10**5
    root = Stream.from_seed(5)
    med = median_ln_im(gmpe, scen.magnitude, 5.0)
    resid = np.array([np.log(sample_intensity_field(one, scen, root.child("event", i)).im[0]) - med for i in range(n)])
    target = gmpe.tau**2 + gmpe.phi**2
    rel = abs(resid.var(ddof=1) / target - 1)

    quiet = ScenarioConfig(epicenter=(0.0, 0.0), gmpe=GmpeParams(tau=0.0, phi=0.0))
    model = generate_testbed(TestbedConfig(n_rows=3, n_cols=3, width_km=6.0, height_km=6.0,
                                           n_buildings=400, total_population=1300), Stream.from_seed(55))
    f = sample_intensity_field(model, quiet, Stream.from_seed(56))
    order = np.argsort(f.distances, kind="stable")
    monotone = bool(np.all(np.diff(f.im[order]) <= 0))
    ok = rel <= 0.05 and monotone
    report("C5", "hazard statistics", ok,
           f"residual variance {resid.var(ddof=1):.4f} vs tau^2+phi^2 = {target:.4f} (rel. err {rel:.2%} <= 5%), "
           f"IM non-increasing in distance over 400 sites: {monotone}")
    assert ok


# --------------------------------------------------------------------------- 6
@pytest.mark.slow
def test_c6_gilroy_scale_invariants():
    t0 = time.perf_counter()
    model = generate_testbed(TestbedConfig(), Stream.from_seed(2019).child("community"))
    root = Stream.from_seed(2019)
    catalog = default_catalog()
    field = sample_intensity_field(model, ScenarioConfig(), root.child("hazard", 0))
    real = realize_scenario(model, field, catalog, root.child("damage", 0))
    planner = PlannerModel(RecoveryMDP(model, real), catalog)
    config = RolloutConfig(candidate_cap=10)
    traces = {p: run_policy(planner, p, config, root.child("solver", 0)) for p in ("base", "rollout")}
    ESTIMATES.extend(traces["rollout"].estimates)
    elapsed = time.perf_counter() - t0
    problems = {p: check_trace(planner, t) for p, t in traces.items()}
    ok = (
        model.n_cells == 36 and model.n_buildings == 14702
        and not any(problems.values()) and elapsed < 1800
    )
    report("C6", "Gilroy-scale recovery invariants", ok,
           f"{model.n_cells} cells, {model.n_buildings} buildings, {int(real.damaged.sum())} damaged, "
           f"{planner.mdp.budget.total} crews; epochs base {len(traces['base'].epochs) - 1}, "
           f"rollout {len(traces['rollout'].epochs) - 1}; violations {sum(map(len, problems.values()))}; "
           f"{elapsed:.0f} s (< 1800 s, C = 10)")
    assert ok


# --------------------------------------------------------------------------- 7
def _tree(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_c7_determinism(tmp_path):
    data = {
        "seed": 77,
        "community": {"testbed": {"n_rows": 2, "n_cols": 2, "width_km": 2.0, "height_km": 2.0,
                                  "n_buildings": 80, "total_population": 270}},
        "scenario": {"magnitude": 7.2, "epicentral_distance_km": 5.0},
        "replications": 3,
    }
    outs = {}
    for name, workers in (("a", 1), ("b", 1), ("c", 2), ("d", 3)):
        cfg = config_from_dict({**data, "workers": workers, "outputs": str(tmp_path / name)})
        run(cfg)
        outs[name] = _tree(tmp_path / name)
    same = all(outs[k] == outs["a"] for k in outs)
    ok = same and len(outs["a"]) == 2 + 3 * 3
    report("C7", "determinism", ok,
           f"{len(outs['a'])} files byte-identical across repeated runs and 1/2/3 workers: {same}")
    assert ok


# --------------------------------------------------------------------------- 8
def test_c8_dispersion_control():
    config = RolloutConfig()
    if len(ESTIMATES) < 100:
        # run standalone: collect estimates from one small rollout run
        inst = small_stochastic_instance(1000)
        planner = PlannerModel(inst.mdp(), inst.catalog)
        ESTIMATES.extend(run_policy(planner, "rollout", config, Stream.from_seed(8)).estimates)
    uncapped = [e for e in ESTIMATES if e.n_used < config.n_mc_max]
    worst = max(e.cov for e in uncapped)
    ok = bool(uncapped) and worst <= config.dispersion_target
    report("C8", "dispersion control", ok,
           f"{len(uncapped)} of {len(ESTIMATES)} estimate calls below n_mc_max; max CoV {worst:.4f} (<= 0.1)")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
