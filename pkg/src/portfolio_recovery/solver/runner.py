"""Execute a policy on the environment with the realized repair durations."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..kernel import PlannerModel
from ..mdp import RecoveryState
from ..rng import Stream
from .policies import RolloutConfig, base_policy_action
from .rollout import QEstimate, RolloutLog, rollout_action

POLICIES = ("base", "rollout")


@dataclass
class EpochRecord:
    epoch: int
    elapsed_days: int
    epoch_duration: int
    reward: float
    newly_housed: int
    started: tuple[int, ...]
    housed_by_cell: np.ndarray  # (n_cells, 3)
    damaged_remaining: np.ndarray  # per cell, damaged and not yet repaired
    free_ru: np.ndarray
    busy_ru: np.ndarray

    @property
    def housed(self) -> np.ndarray:
        return self.housed_by_cell.sum(axis=0)


@dataclass
class PolicyTrace:
    policy: str
    gamma: float
    epochs: list[EpochRecord] = field(default_factory=list)
    estimates: list[QEstimate] = field(default_factory=list)

    @property
    def discounted_return(self) -> float:
        total, disc = 0.0, 1.0
        for rec in self.epochs[1:]:
            total += disc * rec.reward
            disc *= self.gamma
        return total

    @property
    def recovery_days(self) -> int:
        return self.epochs[-1].elapsed_days

    def housed_at(self, day: int) -> np.ndarray:
        """Housed counts (children, adults, seniors) in effect on ``day``."""
        current = self.epochs[0].housed
        for rec in self.epochs:
            if rec.elapsed_days > day:
                break
            current = rec.housed
        return current


def _record(planner: PlannerModel, state: RecoveryState, epoch, duration, reward, newly, started) -> EpochRecord:
    mdp = planner.mdp
    unrepaired = (state.damage > 0) & ~state.repaired
    return EpochRecord(
        epoch=epoch,
        elapsed_days=state.elapsed_days,
        epoch_duration=duration,
        reward=reward,
        newly_housed=newly,
        started=tuple(started),
        housed_by_cell=mdp.housed_by_cell(state),
        damaged_remaining=np.bincount(mdp.cell_of[unrepaired], minlength=mdp.n_cells),
        free_ru=state.free_ru.copy(),
        busy_ru=mdp.busy_ru(state),
    )


def run_policy(
    planner: PlannerModel,
    policy: str,
    config: RolloutConfig,
    rng: Stream,
    durations: np.ndarray | None = None,
) -> PolicyTrace:
    """Run ``policy`` ("base" or "rollout") from the post-hazard state to full recovery.

    Row 0 is the post-hazard state; every later row is the state after one
    transition, recorded with the buildings started at the preceding epoch.
    """
    if policy not in POLICIES:
        raise ValueError(f"policy must be one of {POLICIES}, got {policy!r}")
    mdp = planner.mdp
    horizon = config.resolve_horizon(mdp)
    state = mdp.initial_state()
    trace = PolicyTrace(policy=policy, gamma=config.gamma)
    trace.epochs.append(_record(planner, state, 0, 0, 0.0, 0, ()))
    log = RolloutLog()
    epoch = 0
    while not mdp.is_terminal(state):
        stream = rng.child("epoch", epoch)
        if policy == "rollout":
            action = rollout_action(planner, state, config, stream, horizon=horizon, log=log)
        else:
            action = base_policy_action(planner, state, stream)
        out = mdp.step(state, action, durations)
        epoch += 1
        state = out.next_state
        trace.epochs.append(
            _record(planner, state, epoch, out.epoch_duration, out.reward, out.newly_housed, action.buildings())
        )
    trace.estimates = log.estimates
    return trace


def check_trace(planner: PlannerModel, trace: PolicyTrace) -> list[str]:
    """Recovery invariants: monotone housing, crew conservation, full recovery."""
    mdp = planner.mdp
    problems = []
    prev = None
    for rec in trace.epochs:
        total = int(rec.housed.sum())
        if prev is not None:
            if total < prev[0]:
                problems.append(f"epoch {rec.epoch}: housed population fell from {prev[0]} to {total}")
            if rec.elapsed_days <= prev[1]:
                problems.append(f"epoch {rec.epoch}: elapsed days did not increase")
        if not np.array_equal(rec.free_ru + rec.busy_ru, mdp.ru_per_grid):
            problems.append(f"epoch {rec.epoch}: free + busy crews differ from the budget")
        prev = (total, rec.elapsed_days)
    final = int(trace.epochs[-1].housed.sum())
    expected = int(mdp.people[mdp.model.occupied].sum())
    if final != expected:
        problems.append(f"final housed {final} != occupied-building population {expected}")
    return problems
