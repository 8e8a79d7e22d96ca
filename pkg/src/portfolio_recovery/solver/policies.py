"""Solver configuration and the base heuristics."""
from __future__ import annotations

from dataclasses import asdict, dataclass

from ..kernel import PlannerModel, normalize_policy
from ..mdp import RecoveryMDP, RecoveryState, RepairAction, T_REP_MODES
from ..rng import Stream

GAMMA = 0.99
DISPERSION_TARGET = 0.1
COV_FLOOR = 1e-6


@dataclass(frozen=True)
class RolloutConfig:
    """Rollout knobs. ``horizon=None`` picks damaged / total crews (rounded
    up) + 5 epochs for each realization."""

    gamma: float = GAMMA
    horizon: int | None = None
    dispersion_target: float = DISPERSION_TARGET
    n_mc_min: int = 10
    n_mc_max: int = 200
    base_policy: str = "greedy"
    candidate_cap: int = 10
    switch_z: float = 1.645
    t_rep: str = "cumulative"
    seed: int | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "RolloutConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown solver keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)

    def violations(self) -> list[str]:
        out = []
        if not 0.0 < self.gamma < 1.0:
            out.append(f"solver.gamma={self.gamma} must satisfy 0 < gamma < 1")
        if not self.dispersion_target > 0:
            out.append(f"solver.dispersion_target={self.dispersion_target} must be > 0")
        if self.n_mc_min < 2:
            out.append(f"solver.n_mc_min={self.n_mc_min} must be >= 2")
        if self.n_mc_max < self.n_mc_min:
            out.append("solver.n_mc_max must be >= solver.n_mc_min")
        if self.horizon is not None and self.horizon < 0:
            out.append("solver.horizon must be >= 0")
        if self.switch_z < 0:
            out.append("solver.switch_z must be >= 0")
        if self.candidate_cap < 1:
            out.append("solver.candidate_cap must be >= 1")
        if self.t_rep not in T_REP_MODES:
            out.append(f"solver.t_rep must be one of {list(T_REP_MODES)}")
        try:
            normalize_policy(self.base_policy)
        except ValueError as exc:
            out.append(f"solver.base_policy: {exc}")
        return out

    def resolve_horizon(self, mdp: RecoveryMDP) -> int:
        if self.horizon is not None:
            return self.horizon
        crews = mdp.budget.total
        if crews == 0:
            return 5
        return -(-len(mdp.damaged_ids) // crews) + 5


def base_policy_action(
    planner: PlannerModel, state: RecoveryState, rng: Stream | None = None
) -> RepairAction:
    """Assign every idle crew, grid by grid, using the planner's base policy.

    Greedy takes the highest occupants / expected-days first (lowest id on
    ties); fixed order takes ascending ids; random picks uniformly.
    """
    mdp = planner.mdp
    out: dict[int, tuple[int, ...]] = {}
    for g in range(mdp.n_cells):
        targets = mdp.feasible_assignment_targets(state, g)
        need = min(int(state.free_ru[g]), len(targets))
        if need == 0:
            continue
        if planner.base_policy == "random":
            if rng is None:
                raise ValueError("random base policy needs a random stream")
            u = rng.uniforms(range(len(targets)), g)
            chosen = [targets[j] for j in sorted(range(len(targets)), key=lambda j: (u[j], j))[:need]]
        else:
            chosen = planner.greedy_order(targets)[:need]
        out[g] = tuple(sorted(chosen))
    return RepairAction(out)
