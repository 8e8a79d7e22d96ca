"""Monte Carlo rollout on top of a base policy."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..kernel import PlannerModel
from ..mdp import RecoveryState, RepairAction
from ..rng import Stream
from .policies import COV_FLOOR, RolloutConfig


@dataclass(frozen=True)
class QEstimate:
    q_hat: float
    n_used: int
    cov: float
    std_error: float
    samples: np.ndarray = field(default=None, repr=False, compare=False)


def _dispersion(samples: np.ndarray) -> tuple[float, float, float]:
    mean = float(samples.mean())
    se = float(samples.std(ddof=1) / np.sqrt(len(samples)))
    return mean, se, se / max(abs(mean), COV_FLOOR)


def estimate_first(
    planner: PlannerModel,
    state: RecoveryState,
    first_ids,
    config: RolloutConfig,
    key: int,
    horizon: int,
    orders=None,
) -> QEstimate:
    """Q estimate for starting ``first_ids`` now (base policy fills the rest).

    Trajectories are drawn in batches of ``n_mc_min`` until the coefficient of
    variation of the mean drops to ``dispersion_target`` or ``n_mc_max`` is hit.
    Trajectory i always uses substream (key, i), so candidates compared under
    the same key share common random numbers.
    """
    batch = config.n_mc_min
    parts: list[np.ndarray] = []
    n = 0
    while True:
        take = min(batch, config.n_mc_max - n)
        parts.append(
            planner.simulate(state, first_ids, key, n, take, config.gamma, horizon, orders=orders)
        )
        n += take
        samples = np.concatenate(parts) if len(parts) > 1 else parts[0]
        mean, se, cov = _dispersion(samples)
        if cov <= config.dispersion_target or n >= config.n_mc_max:
            return QEstimate(mean, n, cov, se, samples)


def estimate_q(
    planner: PlannerModel,
    state: RecoveryState,
    action: RepairAction,
    config: RolloutConfig,
    rng: Stream,
    horizon: int | None = None,
) -> QEstimate:
    """Monte Carlo estimate of Q(x, a) under the base policy.

    Each trajectory applies ``action`` first, then follows the base policy for
    up to ``horizon`` more epochs, discounting the k-th reward by gamma**k.
    """
    planner.mdp.check_action(state, action)
    h = config.resolve_horizon(planner.mdp) if horizon is None else horizon
    return estimate_first(planner, state, action.buildings(), config, rng.key, h)


@dataclass
class RolloutLog:
    """Every Q estimate made while choosing actions."""

    estimates: list[QEstimate]

    def __init__(self):
        self.estimates = []


def rollout_action(
    planner: PlannerModel,
    state: RecoveryState,
    config: RolloutConfig,
    rng: Stream,
    horizon: int | None = None,
    log: RolloutLog | None = None,
) -> RepairAction:
    """One-step lookahead action, built one crew at a time.

    Crews are visited grid by grid; each tries the top ``candidate_cap``
    pending buildings of its grid (by the greedy index) plus the base
    policy's own pick, with earlier commitments held fixed, and keeps the
    best estimate (lowest id on ties). The winner replaces the base pick
    only if, re-estimated on fresh common random numbers, its paired
    advantage is at least ``switch_z`` standard errors (``switch_z=0``
    commits the plain argmax).
    """
    mdp = planner.mdp
    h = config.resolve_horizon(mdp) if horizon is None else horizon
    orders = planner.order_lists(state)
    committed: list[int] = []
    for g in range(mdp.n_cells):
        targets = mdp.feasible_assignment_targets(state, g)
        need = min(int(state.free_ru[g]), len(targets))
        ranked = [b for b in _by_rate(planner, targets)]
        for j in range(need):
            taken = set(committed)
            free_targets = [b for b in ranked if b not in taken]
            incumbent = planner.greedy_order(free_targets)[0]
            cands = set(free_targets[: config.candidate_cap]) | {incumbent}
            if len(cands) == 1:
                committed.append(incumbent)
                continue
            key = rng.child("crew", g, j).key
            ests = {}
            best, best_q = None, -np.inf
            for b in sorted(cands):
                est = estimate_first(planner, state, committed + [b], config, key, h, orders)
                ests[b] = est
                if log is not None:
                    log.estimates.append(est)
                if est.q_hat > best_q:
                    best, best_q = b, est.q_hat
            if best != incumbent and config.switch_z > 0:
                # re-test on fresh trajectories: the screening samples picked
                # ``best`` and are biased in its favour
                check = rng.child("crew-check", g, j).key
                ch = estimate_first(planner, state, committed + [best], config, check, h, orders)
                inc = estimate_first(planner, state, committed + [incumbent], config, check, h, orders)
                if log is not None:
                    log.estimates.extend((ch, inc))
                if not _significant(ch, inc, config.switch_z):
                    best = incumbent
            committed.append(best)
    return RepairAction.from_buildings(committed, mdp.cell_of)


def _significant(challenger: QEstimate, incumbent: QEstimate, z: float) -> bool:
    """Paired test on the common trajectory prefix (common random numbers)."""
    n = min(challenger.n_used, incumbent.n_used)
    d = challenger.samples[:n] - incumbent.samples[:n]
    mean = float(d.mean())
    se = float(d.std(ddof=1) / np.sqrt(n))
    if se == 0.0:
        return challenger.q_hat >= incumbent.q_hat
    return mean >= z * se


def _by_rate(planner: PlannerModel, targets) -> list[int]:
    rate = planner.rate
    return sorted(targets, key=lambda b: (-rate[b], b))
