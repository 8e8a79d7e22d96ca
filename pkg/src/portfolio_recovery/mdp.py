"""Generative recovery MDP with non-preemptive, per-grid repair crews.

A decision epoch happens at the hazard (day 0) and at every day on which at
least one repair finishes. Reward for the transition x_t -> x_{t+1} is the
number of people whose building became inhabitable during the epoch divided
by the repair time: by default the cumulative days since the hazard at
x_{t+1}; ``t_rep="epoch"`` divides by the epoch length instead.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

import numpy as np

from .community import CommunityModel
from .damage import ScenarioRealization

# Per-building status codes used by the planners.
UNDAMAGED, PENDING, IN_PROGRESS, REPAIRED = 0, 1, 2, 3

RU_FRACTION = 0.2
T_REP_MODES = ("cumulative", "epoch")


class InfeasibleActionError(ValueError):
    pass


@dataclass(frozen=True)
class RUBudget:
    ru_per_grid: tuple[int, ...]

    @property
    def total(self) -> int:
        return sum(self.ru_per_grid)


def ru_for_damaged(n_damaged: int, fraction: float = RU_FRACTION) -> int:
    """ceil(fraction * n_damaged) in exact arithmetic (0.2 * 15 is 3, not 4)."""
    q = Fraction(str(fraction)) * int(n_damaged)
    return int(-(-q.numerator // q.denominator))


def compute_ru_budget(
    realization: ScenarioRealization, model: CommunityModel, fraction: float = RU_FRACTION
) -> RUBudget:
    damaged = np.bincount(model.cell_of[realization.damaged], minlength=model.n_cells)
    return RUBudget(tuple(ru_for_damaged(int(d), fraction) for d in damaged))


@dataclass(frozen=True, eq=False)
class RecoveryState:
    """x_t: repair progress of every building plus the clock and idle crews.

    ``busy_until`` is the (environment-side) completion day of an in-progress
    repair and -1 otherwise; ``started`` is the day the repair began. Arrays
    are never mutated in place.
    """

    damage: np.ndarray
    repaired: np.ndarray
    busy_until: np.ndarray
    started: np.ndarray
    elapsed_days: int
    free_ru: np.ndarray

    @property
    def in_progress(self) -> np.ndarray:
        return self.busy_until >= 0

    @property
    def pending(self) -> np.ndarray:
        return (self.damage > 0) & ~self.repaired & (self.busy_until < 0)

    def status(self) -> np.ndarray:
        s = np.where(self.damage > 0, PENDING, UNDAMAGED).astype(np.int8)
        s[self.busy_until >= 0] = IN_PROGRESS
        s[self.repaired] = REPAIRED
        return s

    def __eq__(self, other):
        if not isinstance(other, RecoveryState):
            return NotImplemented
        return (
            self.elapsed_days == other.elapsed_days
            and np.array_equal(self.damage, other.damage)
            and np.array_equal(self.repaired, other.repaired)
            and np.array_equal(self.busy_until, other.busy_until)
            and np.array_equal(self.started, other.started)
            and np.array_equal(self.free_ru, other.free_ru)
        )


@dataclass(frozen=True)
class RepairAction:
    """a_t: the buildings each grid's idle crews start on this epoch.

    Equivalent to one binary vector per grid over that grid's feasible
    targets; see :meth:`binary`.
    """

    assignments: Mapping[int, tuple[int, ...]] = field(default_factory=dict)

    def buildings(self) -> list[int]:
        return [b for g in sorted(self.assignments) for b in self.assignments[g]]

    def binary(self, targets) -> np.ndarray:
        chosen = set(self.buildings())
        return np.array([1 if t in chosen else 0 for t in targets], dtype=np.int8)

    @classmethod
    def from_buildings(cls, buildings, cell_of) -> "RepairAction":
        out: dict[int, list[int]] = {}
        for b in buildings:
            out.setdefault(int(cell_of[b]), []).append(int(b))
        return cls({g: tuple(sorted(v)) for g, v in sorted(out.items())})

    def __len__(self) -> int:
        return sum(len(v) for v in self.assignments.values())


@dataclass(frozen=True)
class TransitionOutcome:
    next_state: RecoveryState
    reward: float
    epoch_duration: int
    newly_housed: int


class RecoveryMDP:
    """Static data for one damaged community plus the transition rules."""

    def __init__(
        self,
        model: CommunityModel,
        realization: ScenarioRealization,
        ru_fraction: float = RU_FRACTION,
        t_rep: str = "cumulative",
    ):
        if t_rep not in T_REP_MODES:
            raise ValueError(f"t_rep must be one of {T_REP_MODES}, got {t_rep!r}")
        if len(realization.damage) != model.n_buildings:
            raise ValueError("realization does not match the community size")
        self.model = model
        self.realization = realization
        self.t_rep = t_rep
        self.cell_of = model.cell_of
        self.n_cells = model.n_cells
        self.occupants = model.occupants
        self.people = self.occupants.sum(axis=1)
        self.damage = np.asarray(realization.damage, dtype=np.int8)
        self.durations = np.asarray(realization.durations, dtype=np.int64)
        self.budget = compute_ru_budget(realization, model, ru_fraction)
        self.ru_per_grid = np.asarray(self.budget.ru_per_grid, dtype=np.int64)
        self.damaged_ids = np.flatnonzero(self.damage > 0)
        self._cell_members = [
            np.flatnonzero(self.cell_of == g) for g in range(self.n_cells)
        ]

    @property
    def n_buildings(self) -> int:
        return len(self.damage)

    def initial_state(self) -> RecoveryState:
        n = self.n_buildings
        return RecoveryState(
            damage=self.damage,
            repaired=np.zeros(n, dtype=bool),
            busy_until=np.full(n, -1, dtype=np.int64),
            started=np.full(n, -1, dtype=np.int64),
            elapsed_days=0,
            free_ru=self.ru_per_grid.copy(),
        )

    def feasible_assignment_targets(self, state: RecoveryState, cell_id: int) -> list[int]:
        members = self._cell_members[cell_id]
        return members[state.pending[members]].tolist()

    def required_assignments(self, state: RecoveryState, cell_id: int) -> int:
        return min(int(state.free_ru[cell_id]), len(self.feasible_assignment_targets(state, cell_id)))

    def is_terminal(self, state: RecoveryState) -> bool:
        return not (state.pending.any() or state.in_progress.any())

    def housed_mask(self, state: RecoveryState) -> np.ndarray:
        return (state.damage == 0) | state.repaired

    def housed_population(self, state: RecoveryState) -> np.ndarray:
        """People in inhabitable buildings, ordered (children, adults, seniors)."""
        return self.occupants[self.housed_mask(state)].sum(axis=0)

    def housed_by_cell(self, state: RecoveryState) -> np.ndarray:
        """(n_cells, 3) housed counts."""
        out = np.zeros((self.n_cells, 3), dtype=np.int64)
        mask = self.housed_mask(state)
        np.add.at(out, self.cell_of[mask], self.occupants[mask])
        return out

    def busy_ru(self, state: RecoveryState) -> np.ndarray:
        return np.bincount(self.cell_of[state.in_progress], minlength=self.n_cells)

    def check_action(self, state: RecoveryState, action: RepairAction) -> None:
        seen: set[int] = set()
        for g in range(self.n_cells):
            chosen = tuple(action.assignments.get(g, ()))
            targets = set(self.feasible_assignment_targets(state, g))
            for b in chosen:
                if b in seen:
                    raise InfeasibleActionError(f"building {b} assigned twice")
                seen.add(b)
                if b not in targets:
                    raise InfeasibleActionError(
                        f"grid {g}: building {b} is not a damaged, unrepaired, idle building of this grid"
                    )
            need = min(int(state.free_ru[g]), len(targets))
            if len(chosen) != need:
                raise InfeasibleActionError(
                    f"grid {g}: action assigns {len(chosen)} buildings, expected {need}"
                )
        unknown = set(action.assignments) - set(range(self.n_cells))
        if unknown:
            raise InfeasibleActionError(f"action names unknown grids {sorted(unknown)}")

    def step(
        self, state: RecoveryState, action: RepairAction, durations: np.ndarray | None = None
    ) -> TransitionOutcome:
        """Start the assigned repairs and advance to the next completion day."""
        self.check_action(state, action)
        durations = self.durations if durations is None else durations
        t0 = state.elapsed_days
        busy = state.busy_until.copy()
        started = state.started.copy()
        free = state.free_ru.copy()
        assigned = np.asarray(action.buildings(), dtype=np.int64)
        if len(assigned):
            if np.any(durations[assigned] < 1):
                raise InfeasibleActionError("assigned building has no repair duration")
            busy[assigned] = t0 + durations[assigned]
            started[assigned] = t0
            np.subtract.at(free, self.cell_of[assigned], 1)
        active = busy >= 0
        if not active.any():
            nxt = RecoveryState(state.damage, state.repaired, busy, started, t0, free)
            return TransitionOutcome(nxt, 0.0, 0, 0)
        t1 = int(busy[active].min())
        done = busy == t1
        repaired = state.repaired | done
        busy[done] = -1
        started[done] = -1
        np.add.at(free, self.cell_of[done], 1)
        r = int(self.people[done].sum())
        denom = t1 if self.t_rep == "cumulative" else t1 - t0
        nxt = RecoveryState(state.damage, repaired, busy, started, t1, free)
        return TransitionOutcome(nxt, r / denom, t1 - t0, r)
