"""Small hand-built and randomised recovery instances (oracle tests, benchmarks)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .community import GILROY_AGE_FRACTIONS, Building, CommunityModel, GridCell, TestbedConfig, generate_testbed
from .damage import Archetype, Catalog, FragilityCurve, RepairTimeModel, ScenarioRealization, default_catalog, sample_durations
from .hazard import ScenarioConfig, sample_intensity_field
from .damage import realize_scenario
from .mdp import RecoveryMDP
from .rng import Stream

_FRAGILITY = FragilityCurve(theta=(0.4, 0.8, 1.6, 2.8), beta=(0.6, 0.6, 0.6, 0.6))


@dataclass
class Instance:
    model: CommunityModel
    realization: ScenarioRealization
    catalog: Catalog

    def mdp(self, **kw) -> RecoveryMDP:
        return RecoveryMDP(self.model, self.realization, **kw)


def build_instance(
    cells: list[int],
    people: list[int],
    damage: list[int],
    repair: RepairTimeModel,
    durations: list[int] | None = None,
) -> Instance:
    """Community with one building per entry; all occupants counted as adults.

    ``durations`` default to each building's deterministic/first-support value
    drawn from ``repair`` at u = 0.5.
    """
    n = len(cells)
    n_cells = max(cells) + 1
    buildings = tuple(
        Building(id=i, cell_id=cells[i], x=float(i), y=0.0, occupants=(0, people[i], 0),
                 occupied=people[i] > 0, archetype_id=0)
        for i in range(n)
    )
    grid = tuple(
        GridCell(cell_id=g, centroid=(0.0, 0.0), building_ids=tuple(i for i in range(n) if cells[i] == g))
        for g in range(n_cells)
    )
    model = CommunityModel(grid, buildings, sum(people), GILROY_AGE_FRACTIONS)
    catalog = Catalog({0: Archetype(0, "test", _FRAGILITY, repair)})
    dmg = np.asarray(damage, dtype=np.int8)
    if durations is None:
        from .damage import DamageState, draw_days

        durations = [
            draw_days(*repair.kernel_params(DamageState(d)), 0.5) if d else 0 for d in damage
        ]
    real = ScenarioRealization(
        im=np.ones(n), damage=dmg, durations=np.asarray(durations, dtype=np.int64)
    )
    return Instance(model, real, catalog)


def random_tiny_instance(seed: int, max_buildings: int = 4, max_cells: int = 2, stochastic: bool = False) -> Instance:
    """Random instance small enough for exact enumeration.

    Deterministic durations unless ``stochastic``, in which case every damage
    state has a two- or three-point duration support.
    """
    gen = np.random.default_rng(seed)
    n = int(gen.integers(2, max_buildings + 1))
    n_cells = int(gen.integers(1, max_cells + 1))
    cells = sorted(int(c) for c in gen.integers(0, n_cells, n))
    # renumber so every cell is used
    used = sorted(set(cells))
    cells = [used.index(c) for c in cells]
    people = [int(v) for v in gen.integers(0, 12, n)]
    damage = [int(v) for v in gen.integers(1, 5, n)]
    if stochastic:
        base = (2, 8, 15, 23)
        support = tuple((d, d + 2, d + 5) for d in base)
        probs = tuple(tuple(float(p) for p in gen.dirichlet([2.0, 2.0, 2.0])) for _ in base)
        probs = tuple(tuple(row[:-1]) + (1.0 - sum(row[:-1]),) for row in probs)
        repair = RepairTimeModel(mean_days=(1, 2, 3, 4), distribution="discrete",
                                 support_days=support, probabilities=probs)
    else:
        means = sorted(int(v) for v in gen.choice(np.arange(1, 30), size=4, replace=False))
        repair = RepairTimeModel(mean_days=tuple(float(m) for m in means), distribution="deterministic")
    return build_instance(cells, people, damage, repair)


def small_stochastic_instance(seed: int, n_buildings: int = 50, n_rows: int = 2, n_cols: int = 2) -> Instance:
    """~50-building community hit hard enough to damage a large share of it.

    Uses the default lognormal repair model.
    """
    root = Stream.from_seed(seed)
    cfg = TestbedConfig(n_rows=n_rows, n_cols=n_cols, n_buildings=n_buildings,
                        total_population=int(round(3.4 * n_buildings)))
    model = generate_testbed(cfg, root.child("community"))
    scenario = ScenarioConfig(magnitude=7.2, epicentral_distance_km=5.0)
    field = sample_intensity_field(model, scenario, root.child("hazard"))
    catalog = default_catalog()
    return Instance(model, realize_scenario(model, field, catalog, root.child("damage")), catalog)


def resample_durations(inst: Instance, rng: Stream) -> np.ndarray:
    return sample_durations(inst.model, inst.realization.damage, inst.catalog, rng)
