"""Exact dynamic programming for tiny recovery instances.

Enumerates every joint action and every repair-duration outcome over the
planner's finite duration support, so it serves as the oracle for the
Monte Carlo rollout.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from ..kernel import PlannerModel
from ..mdp import IN_PROGRESS, PENDING, REPAIRED, RecoveryState

MAX_STATES = 10**6

Key = tuple  # (elapsed, status tuple, started tuple)


class StateSpaceOverflow(RuntimeError):
    pass


def state_key(state: RecoveryState) -> Key:
    return (int(state.elapsed_days), tuple(int(s) for s in state.status()), tuple(int(s) for s in state.started))


class _Model:
    def __init__(self, planner: PlannerModel, gamma: float):
        mdp = planner.mdp
        self.planner = planner
        self.gamma = gamma
        self.cell_of = mdp.cell_of.tolist()
        self.people = mdp.people.tolist()
        self.budget = mdp.ru_per_grid.tolist()
        self.n_cells = mdp.n_cells
        self.cumulative = mdp.t_rep == "cumulative"
        self.support = {int(b): planner.duration_support(int(b)) for b in mdp.damaged_ids}

    def free(self, status) -> list[int]:
        f = list(self.budget)
        for b, s in enumerate(status):
            if s == IN_PROGRESS:
                f[self.cell_of[b]] -= 1
        return f

    def actions(self, key: Key) -> list[tuple[int, ...]]:
        _, status, _ = key
        free = self.free(status)
        per_grid = []
        for g in range(self.n_cells):
            targets = [b for b, s in enumerate(status) if s == PENDING and self.cell_of[b] == g]
            need = min(free[g], len(targets))
            per_grid.append(list(itertools.combinations(targets, need)))
        return [tuple(sorted(itertools.chain.from_iterable(c))) for c in itertools.product(*per_grid)]

    def base_action(self, key: Key) -> tuple[int, ...]:
        _, status, _ = key
        free = self.free(status)
        chosen = []
        for g in range(self.n_cells):
            targets = [b for b, s in enumerate(status) if s == PENDING and self.cell_of[b] == g]
            chosen.extend(self.planner.greedy_order(targets)[: min(free[g], len(targets))])
        return tuple(sorted(chosen))

    def fill(self, key: Key, first: tuple[int, ...]) -> tuple[int, ...]:
        """Complete a partial first action with the base policy."""
        t, status, started = key
        status = list(status)
        for b in first:
            status[b] = IN_PROGRESS
        rest = self.base_action((t, tuple(status), started))
        return tuple(sorted(first + rest))

    def completion_pmf(self, b: int, started: int, now: int) -> list[tuple[int, float]]:
        spent = now - started
        support = [(started + d, p) for d, p in self.support[b] if d > spent and p > 0]
        z = sum(p for _, p in support)
        return [(day, p / z) for day, p in support]

    def outcomes(self, key: Key, action: tuple[int, ...]):
        """[(probability, reward, next_key)] for taking ``action`` at ``key``."""
        t, status, started = key
        status = list(status)
        started = list(started)
        for b in action:
            if status[b] != PENDING:
                raise ValueError(f"building {b} is not pending")
            status[b] = IN_PROGRESS
            started[b] = t
        active = [b for b, s in enumerate(status) if s == IN_PROGRESS]
        if not active:
            return [(1.0, 0.0, None)]
        pmfs = [self.completion_pmf(b, started[b], t) for b in active]
        merged: dict[tuple, float] = {}
        for combo in itertools.product(*pmfs):
            p = 1.0
            for _, q in combo:
                p *= q
            t1 = min(day for day, _ in combo)
            done = tuple(b for b, (day, _) in zip(active, combo) if day == t1)
            merged[(t1, done)] = merged.get((t1, done), 0.0) + p
        out = []
        for (t1, done), p in sorted(merged.items()):
            st = list(status)
            sd = list(started)
            r = 0
            for b in done:
                st[b] = REPAIRED
                sd[b] = -1
                r += self.people[b]
            reward = r / (t1 if self.cumulative else t1 - t)
            out.append((p, reward, (t1, tuple(st), tuple(sd))))
        return out

    @staticmethod
    def terminal(key: Key) -> bool:
        return not any(s in (PENDING, IN_PROGRESS) for s in key[1])


@dataclass
class DPSolution:
    """Optimal values and actions for every reachable state.

    Keys are ``(elapsed_days, status tuple, started tuple)``; see :func:`state_key`.
    """

    gamma: float
    horizon: int | None
    value: dict = field(default_factory=dict)
    action: dict = field(default_factory=dict)
    _model: _Model | None = None

    def _vkey(self, key: Key, h):
        return key if self.horizon is None else (key, h)

    def v(self, key: Key, h=None) -> float:
        h = self.horizon if h is None else h
        if key is None or _Model.terminal(key) or h == 0:
            return 0.0
        return self.value[self._vkey(key, h)]

    def q(self, key: Key, action: tuple[int, ...], h=None) -> float:
        """Q*(x, a): expected reward plus discounted optimal value of the successor."""
        h = self.horizon if h is None else h
        nh = None if h is None else h - 1
        return sum(p * (r + self.gamma * self.v(y, nh)) for p, r, y in self._model.outcomes(key, tuple(sorted(action))))

    def optimal_actions(self, key: Key, tol: float = 1e-9) -> list[tuple[int, ...]]:
        qs = {a: self.q(key, a) for a in self._model.actions(key)}
        best = max(qs.values())
        return [a for a, v in qs.items() if v >= best - tol * max(1.0, abs(best))]

    def bellman_residual(self) -> float:
        """Sup-norm change from one application of the Bellman optimality operator."""
        worst = 0.0
        for vk, v in self.value.items():
            key, h = (vk, None) if self.horizon is None else vk
            best = max(self.q(key, a, h) for a in self._model.actions(key))
            worst = max(worst, abs(best - v))
        return worst


def exact_dp_solve(
    planner: PlannerModel, gamma: float, horizon: int | None = None, start: RecoveryState | None = None
) -> DPSolution:
    """Backward induction over all states reachable from ``start`` (default x_0).

    ``horizon=None`` solves until every repair is done (the state graph is
    acyclic because the clock strictly advances).
    """
    model = _Model(planner, gamma)
    sol = DPSolution(gamma=gamma, horizon=horizon, _model=model)
    start = start if start is not None else planner.mdp.initial_state()

    def solve(key: Key, h):
        if key is None or model.terminal(key) or h == 0:
            return 0.0
        vk = sol._vkey(key, h)
        if vk in sol.value:
            return sol.value[vk]
        if len(sol.value) >= MAX_STATES:
            raise StateSpaceOverflow(f"state space exceeds {MAX_STATES} states ({len(sol.value)} enumerated)")
        nh = None if h is None else h - 1
        best, best_a = -np.inf, None
        for a in model.actions(key):
            q = sum(p * (r + gamma * solve(y, nh)) for p, r, y in model.outcomes(key, a))
            if best_a is None or q > best:
                best, best_a = q, a
        sol.value[vk] = best
        sol.action[vk] = best_a
        return best

    solve(state_key(start), horizon)
    return sol


def exact_base_q(
    planner: PlannerModel,
    state: RecoveryState,
    first_ids,
    gamma: float,
    horizon: int,
) -> float:
    """Exact K-horizon Q of the (deterministic) base policy.

    ``first_ids`` are started now, idle crews are filled by the base policy,
    then the base policy runs for ``horizon`` further transitions: the
    quantity the rollout estimator averages.
    """
    if planner.base_policy == "random":
        raise ValueError("exact evaluation needs a deterministic base policy")
    model = _Model(planner, gamma)
    memo: dict = {}

    def v(key, h):
        if key is None or h == 0 or model.terminal(key):
            return 0.0
        mk = (key, h)
        if mk not in memo:
            a = model.base_action(key)
            memo[mk] = sum(p * (r + gamma * v(y, h - 1)) for p, r, y in model.outcomes(key, a))
        return memo[mk]

    key = state_key(state)
    action = model.fill(key, tuple(sorted(int(b) for b in first_ids)))
    return sum(p * (r + gamma * v(y, horizon)) for p, r, y in model.outcomes(key, action))
