"""End-to-end scenario run: community -> hazard -> damage -> policies -> files."""
from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .community import AGE_LABELS, CommunityModel, generate_testbed, load_community, save_community
from .config import RunConfig
from .damage import (
    Catalog,
    default_catalog,
    load_catalog,
    realization_from_dict,
    realization_to_dict,
    realize_scenario,
)
from .hazard import sample_intensity_field
from .kernel import PlannerModel
from .mdp import RecoveryMDP
from .rng import Stream
from .solver import PolicyTrace, check_trace, run_policy

log = logging.getLogger(__name__)

CURVE_HEADER = [
    "policy", "row_type", "epoch", "elapsed_days",
    "housed_total", "housed_children", "housed_adults", "housed_seniors",
]
GRID_HEADER = [
    "policy", "row_type", "epoch", "elapsed_days", "cell_id",
    "housed", "housed_children", "housed_adults", "housed_seniors",
    "damaged_remaining", "free_ru",
]


class RunError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(message)
        self.stage = stage


def streams(config: RunConfig, replication: int) -> dict[str, Stream]:
    """Named substreams derived from the master seed (overrides per section)."""
    master = Stream.from_seed(config.seed)
    scen = Stream.from_seed(config.scenario.seed) if config.scenario.seed is not None else master
    solv = Stream.from_seed(config.solver.seed) if config.solver.seed is not None else master
    return {
        "community": master.child("community"),
        "hazard": scen.child("hazard", replication),
        "damage": scen.child("damage", replication),
        "solver": solv.child("solver", replication),
    }


def build_community(config: RunConfig) -> CommunityModel:
    if config.community_path is not None:
        return load_community(config.community_path)
    return generate_testbed(config.testbed, streams(config, 0)["community"])


def build_catalog(config: RunConfig) -> Catalog:
    return load_catalog(config.catalog) if config.catalog is not None else default_catalog()


def _policies(config: RunConfig) -> list[str]:
    return ["base", "rollout"] if config.policy == "both" else [config.policy]


def curve_rows(trace: PolicyTrace, checkpoints) -> list[list]:
    rows = []
    days = {rec.elapsed_days for rec in trace.epochs}
    final = trace.recovery_days
    extra = sorted(c for c in set(checkpoints) if c <= final and c not in days)
    recs = [("epoch", rec.epoch, rec.elapsed_days, rec.housed) for rec in trace.epochs]
    for c in extra:
        last = [r for r in trace.epochs if r.elapsed_days <= c][-1]
        recs.append(("checkpoint", last.epoch, c, last.housed))
    recs.sort(key=lambda r: (r[2], r[0] != "epoch"))
    for kind, epoch, day, housed in recs:
        rows.append([trace.policy, kind, epoch, day, int(housed.sum())] + [int(v) for v in housed])
    return rows


def grid_rows(trace: PolicyTrace, checkpoints) -> list[list]:
    rows = []
    days = {rec.elapsed_days for rec in trace.epochs}
    final = trace.recovery_days
    entries = [("epoch", rec.elapsed_days, rec) for rec in trace.epochs]
    for c in sorted(c for c in set(checkpoints) if c <= final and c not in days):
        entries.append(("checkpoint", c, [r for r in trace.epochs if r.elapsed_days <= c][-1]))
    entries.sort(key=lambda e: (e[1], e[0] != "epoch"))
    for kind, day, rec in entries:
        for g in range(len(rec.free_ru)):
            h = rec.housed_by_cell[g]
            rows.append(
                [trace.policy, kind, rec.epoch, day, g, int(h.sum())]
                + [int(v) for v in h]
                + [int(rec.damaged_remaining[g]), int(rec.free_ru[g])]
            )
    return rows


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _nmc_stats(trace: PolicyTrace, n_mc_max: int) -> dict:
    est = trace.estimates
    if not est:
        return {"calls": 0}
    n = np.array([e.n_used for e in est])
    cov = np.array([e.cov for e in est])
    uncapped = n < n_mc_max
    return {
        "calls": len(est),
        "mean_trajectories": float(n.mean()),
        "min_trajectories": int(n.min()),
        "max_trajectories": int(n.max()),
        "capped_calls": int((~uncapped).sum()),
        "max_cov_uncapped": float(cov[uncapped].max()) if uncapped.any() else None,
    }


def run_replication(config: RunConfig, model: CommunityModel, catalog: Catalog, replication: int) -> dict:
    """Run one replication and write its directory; returns its summary entry."""
    st = streams(config, replication)
    stage = "hazard"
    try:
        if config.replay is not None:
            real = realization_from_dict(model, json.loads(Path(config.replay).read_text()))
        else:
            field = sample_intensity_field(model, config.scenario, st["hazard"])
            stage = "damage"
            real = realize_scenario(model, field, catalog, st["damage"])
    except Exception as exc:
        raise RunError(stage, str(exc)) from exc

    try:
        mdp = RecoveryMDP(model, real, t_rep=config.solver.t_rep)
        planner = PlannerModel(mdp, catalog, config.solver.base_policy)
        traces = {}
        for policy in _policies(config):
            log.info("replication %d: running %s policy", replication, policy)
            traces[policy] = run_policy(planner, policy, config.solver, st["solver"])
    except Exception as exc:
        raise RunError("solve", str(exc)) from exc

    problems = {p: check_trace(planner, t) for p, t in traces.items()}
    try:
        rep_dir = Path(config.outputs) / f"rep_{replication:03d}"
        rep_dir.mkdir(parents=True, exist_ok=True)
        curve, grid = [], []
        for t in traces.values():
            curve.extend(curve_rows(t, config.checkpoints))
            grid.extend(grid_rows(t, config.checkpoints))
        _write_csv(rep_dir / "recovery_curve.csv", CURVE_HEADER, curve)
        _write_csv(rep_dir / "grid_timeline.csv", GRID_HEADER, grid)
        (rep_dir / "realization.json").write_text(json.dumps(realization_to_dict(model, real)) + "\n")
    except OSError as exc:
        raise RunError("output", str(exc)) from exc

    return {
        "replication": replication,
        "stream_keys": {name: f"0x{s.key:016x}" for name, s in st.items()},
        "damaged_buildings": int(real.damaged.sum()),
        "damage_state_counts": np.bincount(real.damage, minlength=5).astype(int).tolist(),
        "crews_per_grid": list(mdp.budget.ru_per_grid),
        "rollout_horizon": config.solver.resolve_horizon(mdp),
        "policies": {
            p: {
                "discounted_return": t.discounted_return,
                "recovery_days": t.recovery_days,
                "epochs": len(t.epochs) - 1,
                "final_housed": int(t.epochs[-1].housed.sum()),
                "n_mc": _nmc_stats(t, config.solver.n_mc_max),
                "invariant_violations": problems[p],
            }
            for p, t in traces.items()
        },
    }


def _worker(args):
    config, model, catalog, rep = args
    return run_replication(config, model, catalog, rep)


def run(config: RunConfig) -> dict:
    """Execute a configured run and write every output file; returns the summary."""
    problems = config.violations()
    if problems:
        raise RunError("config", "; ".join(problems))
    try:
        model = build_community(config)
        catalog = build_catalog(config)
        missing = sorted(set(int(a) for a in np.unique(model.archetypes)) - set(catalog))
        if missing:
            raise ValueError(f"archetype_id {missing[0]} missing from catalog")
    except Exception as exc:
        raise RunError("community", str(exc)) from exc
    try:
        Path(config.outputs).mkdir(parents=True, exist_ok=True)
        save_community(model, Path(config.outputs) / "community.json")
    except OSError as exc:
        raise RunError("output", str(exc)) from exc

    jobs = [(config, model, catalog, r) for r in range(config.replications)]
    if config.workers > 1 and config.replications > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            reps = list(pool.map(_worker, jobs))
    else:
        reps = [_worker(j) for j in jobs]

    summary = {
        "config": config.to_dict(),
        "master_seed": config.seed,
        "community": {
            "buildings": model.n_buildings,
            "cells": model.n_cells,
            "population": model.total_population,
            "population_by_age": dict(zip(AGE_LABELS, model.population_by_age().astype(int).tolist())),
            "occupied_population": int(model.occupants[model.occupied].sum()),
        },
        "replications": reps,
        "aggregate": {
            p: {
                "mean_discounted_return": float(np.mean([r["policies"][p]["discounted_return"] for r in reps])),
                "mean_recovery_days": float(np.mean([r["policies"][p]["recovery_days"] for r in reps])),
            }
            for p in _policies(config)
        },
    }
    try:
        (Path(config.outputs) / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    except OSError as exc:
        raise RunError("output", str(exc)) from exc
    bad = [v for r in reps for p in r["policies"].values() for v in p["invariant_violations"]]
    if bad:
        raise RunError("output", "recovery invariants violated: " + "; ".join(bad[:5]))
    return summary


def with_overrides(config: RunConfig, **kw) -> RunConfig:
    kw = {k: v for k, v in kw.items() if v is not None}
    if "outputs" in kw:
        kw["outputs"] = Path(kw["outputs"])
    if "replay" in kw:
        kw["replay"] = Path(kw["replay"])
    return replace(config, **kw)
