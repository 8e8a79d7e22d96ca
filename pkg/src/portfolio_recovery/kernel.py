"""Kernel selection and the planner's packed view of a recovery problem.

The compiled kernel is used when importable; set ``PORTFOLIO_RECOVERY_PURE=1``
to force the pure-Python one.
"""
from __future__ import annotations

import os

import numpy as np

from . import _kernel_py
from .damage import DETERMINISTIC, DISCRETE, Catalog, DamageState
from .mdp import RecoveryMDP, RecoveryState

try:
    from . import _kernel as _compiled
except ImportError:  # pragma: no cover - depends on the build
    _compiled = None

KERNELS = {"python": _kernel_py.simulate_returns}
if _compiled is not None:
    KERNELS["compiled"] = _compiled.simulate_returns

BACKEND = "python" if os.environ.get("PORTFOLIO_RECOVERY_PURE") or _compiled is None else "compiled"

POLICY_CODES = {"greedy": _kernel_py.GREEDY, "random": _kernel_py.RANDOM, "fixed": _kernel_py.FIXED_ORDER}
POLICY_ALIASES = {
    "greedy": "greedy",
    "greedyoccupancyrate": "greedy",
    "random": "random",
    "fixed": "fixed",
    "fixedorder": "fixed",
}


def normalize_policy(name: str) -> str:
    try:
        return POLICY_ALIASES[name.replace("_", "").replace("-", "").lower()]
    except KeyError:
        raise ValueError(f"unknown base policy {name!r}") from None


def get_kernel(name: str | None = None):
    name = name or BACKEND
    try:
        return KERNELS[name]
    except KeyError:
        raise ValueError(f"kernel {name!r} not available (have {sorted(KERNELS)})") from None


class PlannerModel:
    """What the planner knows: occupants, crews, and repair-time *distributions*.

    Realized durations stay with the environment; simulated trajectories
    resample them, conditioning in-progress repairs on the days already spent.
    """

    def __init__(self, mdp: RecoveryMDP, catalog: Catalog, base_policy: str = "greedy", kernel: str | None = None):
        self.mdp = mdp
        self.base_policy = normalize_policy(base_policy)
        self.policy_code = POLICY_CODES[self.base_policy]
        self.kernel_name = kernel or BACKEND
        self._kernel = get_kernel(self.kernel_name)
        n = mdp.n_buildings
        self.cell_of = np.ascontiguousarray(mdp.cell_of, dtype=np.int64)
        self.people = np.ascontiguousarray(mdp.people, dtype=np.int64)
        self.kind = np.zeros(n, dtype=np.int64)
        self.pa = np.zeros(n, dtype=np.float64)
        self.pb = np.zeros(n, dtype=np.float64)
        self.doff = np.zeros(n, dtype=np.int64)
        self.dlen = np.zeros(n, dtype=np.int64)
        self.expected_days = np.zeros(n, dtype=np.float64)
        days: list[int] = []
        cdf: list[float] = []
        cache: dict[tuple[int, int], tuple] = {}
        arch = mdp.model.archetypes
        for b in mdp.damaged_ids:
            ck = (int(arch[b]), int(mdp.damage[b]))
            if ck not in cache:
                rep = catalog.get_archetype(ck[0]).repair
                state = DamageState(ck[1])
                kind, a, bb, sd, sc = rep.kernel_params(state)
                off = len(days)
                days.extend(sd)
                cdf.extend(sc)
                cache[ck] = (kind, a, bb, off, len(sd), rep.expected_days(state), sd, sc)
            kind, a, bb, off, ln, mean, _, _ = cache[ck]
            self.kind[b], self.pa[b], self.pb[b] = kind, a, bb
            self.doff[b], self.dlen[b] = off, ln
            self.expected_days[b] = mean
        self._support = cache
        self.ddays = np.asarray(days, dtype=np.int64)
        self.dcdf = np.asarray(cdf, dtype=np.float64)
        rate = np.zeros(n, dtype=np.float64)
        dmg = mdp.damaged_ids
        rate[dmg] = self.people[dmg] / self.expected_days[dmg]
        self.rate = rate
        ids = np.arange(n)
        if self.base_policy == "greedy":
            self.rank = np.lexsort((ids, -rate))
        else:
            self.rank = ids
        self.position = np.empty(n, dtype=np.int64)
        self.position[self.rank] = np.arange(n)

    def duration_support(self, b: int) -> list[tuple[int, float]]:
        """Finite (days, probability) support of building ``b``'s repair time."""
        kind = int(self.kind[b])
        if kind == DETERMINISTIC:
            return [(int(self.pa[b]), 1.0)]
        if kind != DISCRETE:
            raise ValueError(f"building {b}: repair time has no finite support")
        o, n = int(self.doff[b]), int(self.dlen[b])
        days = self.ddays[o:o + n].tolist()
        c = self.dcdf[o:o + n].tolist()
        probs = [c[0]] + [c[j] - c[j - 1] for j in range(1, n)]
        return list(zip(days, probs))

    def greedy_order(self, buildings) -> list[int]:
        """Sort buildings by the base policy's priority."""
        return sorted((int(b) for b in buildings), key=lambda b: self.position[b])

    def order_lists(self, state: RecoveryState) -> tuple[np.ndarray, np.ndarray]:
        """Pending buildings grouped by cell, each group in base-policy order."""
        pending = state.pending
        ordered = self.rank[pending[self.rank]]
        cells = self.cell_of[ordered]
        order = np.argsort(cells, kind="stable")
        ids = np.ascontiguousarray(ordered[order], dtype=np.int64)
        counts = np.bincount(cells, minlength=self.mdp.n_cells)
        ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        return ptr, ids

    def simulate(
        self,
        state: RecoveryState,
        first_ids,
        key: int,
        i0: int,
        n_traj: int,
        gamma: float,
        horizon: int,
        orders: tuple[np.ndarray, np.ndarray] | None = None,
    ) -> np.ndarray:
        """Returns of trajectories ``i0 .. i0+n_traj-1`` starting with ``first_ids``."""
        ptr, ids = orders if orders is not None else self.order_lists(state)
        inprog = np.flatnonzero(state.busy_until >= 0).astype(np.int64)
        return self._kernel(
            self.cell_of, self.people, self.kind, self.pa, self.pb, self.doff, self.dlen,
            self.ddays, self.dcdf, ptr, ids,
            np.ascontiguousarray(state.started, dtype=np.int64), int(state.elapsed_days),
            np.ascontiguousarray(state.free_ru, dtype=np.int64),
            np.ascontiguousarray(first_ids, dtype=np.int64), inprog,
            self.policy_code, float(gamma), int(horizon),
            1 if self.mdp.t_rep == "cumulative" else 0,
            int(key), int(i0), int(n_traj),
        )
