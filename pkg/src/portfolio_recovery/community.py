"""Community representation and the synthetic Gilroy-like testbed."""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .rng import Stream

FORMAT_TAG = "portfolio-recovery/community"
FORMAT_VERSION = 1


class AgeGroup(enum.IntEnum):
    CHILDREN = 0
    ADULTS = 1
    SENIORS = 2


AGE_GROUPS = tuple(AgeGroup)
AGE_LABELS = ("children", "adults", "seniors")

# Share of residents per age group in Gilroy (children 0-17, adults 18-64, seniors 65+).
GILROY_AGE_FRACTIONS = (0.306, 0.61, 0.084)


class CommunityError(ValueError):
    """Invalid community data or testbed configuration."""


@dataclass(frozen=True)
class Building:
    id: int
    cell_id: int
    x: float
    y: float
    occupants: tuple[int, int, int]
    occupied: bool
    archetype_id: int = 0

    @property
    def population(self) -> int:
        return sum(self.occupants)


@dataclass(frozen=True)
class GridCell:
    cell_id: int
    centroid: tuple[float, float]
    building_ids: tuple[int, ...]


@dataclass(frozen=True)
class CommunityModel:
    cells: tuple[GridCell, ...]
    buildings: tuple[Building, ...]
    total_population: int
    age_fractions: tuple[float, float, float]

    @property
    def n_buildings(self) -> int:
        return len(self.buildings)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    # Array views; building ids are 0..n-1 so an id is also its array index.
    @cached_property
    def building_ids(self) -> np.ndarray:
        return np.array([b.id for b in self.buildings], dtype=np.int64)

    @cached_property
    def cell_of(self) -> np.ndarray:
        return np.array([b.cell_id for b in self.buildings], dtype=np.int64)

    @cached_property
    def occupants(self) -> np.ndarray:
        """(n_buildings, 3) integer array ordered (children, adults, seniors)."""
        return np.array([b.occupants for b in self.buildings], dtype=np.int64).reshape(-1, 3)

    @cached_property
    def coordinates(self) -> np.ndarray:
        return np.array([(b.x, b.y) for b in self.buildings], dtype=np.float64).reshape(-1, 2)

    @cached_property
    def archetypes(self) -> np.ndarray:
        return np.array([b.archetype_id for b in self.buildings], dtype=np.int64)

    @cached_property
    def occupied(self) -> np.ndarray:
        return np.array([b.occupied for b in self.buildings], dtype=bool)

    def centroid(self) -> tuple[float, float]:
        """Mean building location (km)."""
        if not self.buildings:
            return (0.0, 0.0)
        xy = self.coordinates.mean(axis=0)
        return (float(xy[0]), float(xy[1]))

    def population_by_age(self) -> np.ndarray:
        return self.occupants.sum(axis=0)

    def validate(self) -> None:
        validate_community(self)


@dataclass(frozen=True)
class TestbedConfig:
    """Aggregate statistics the synthetic generator reproduces.

    ``total_population=None`` targets ``round(occupied * household_size)``.
    ``density_weights=None`` uses a smooth downtown-peaked pattern.
    """

    __test__ = False  # not a pytest class

    n_rows: int = 6
    n_cols: int = 6
    width_km: float = math.sqrt(42.0)
    height_km: float = math.sqrt(42.0)
    n_buildings: int = 14702
    total_population: int | None = 47905
    occupancy_rate: float = 0.95
    household_size: float = 3.4
    age_fractions: tuple[float, float, float] = GILROY_AGE_FRACTIONS
    density_weights: tuple[float, ...] | None = None
    archetype_weights: tuple[float, ...] = (1.0,)

    @property
    def n_cells(self) -> int:
        return self.n_rows * self.n_cols

    @classmethod
    def from_dict(cls, data: dict) -> "TestbedConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise CommunityError(f"unknown testbed keys: {sorted(unknown)}")
        kw = dict(data)
        for key in ("age_fractions", "density_weights", "archetype_weights"):
            if kw.get(key) is not None:
                kw[key] = tuple(float(v) for v in kw[key])
        return cls(**kw)

    def violations(self) -> list[str]:
        out = []
        if self.n_rows < 1 or self.n_cols < 1:
            out.append("testbed.n_rows and testbed.n_cols must be >= 1")
        if self.width_km <= 0 or self.height_km <= 0:
            out.append("testbed.width_km and testbed.height_km must be > 0")
        if self.n_buildings < 1:
            out.append("testbed.n_buildings must be >= 1")
        if not 0.0 <= self.occupancy_rate <= 1.0:
            out.append(f"testbed.occupancy_rate={self.occupancy_rate} outside [0, 1]")
        if self.household_size <= 0:
            out.append("testbed.household_size must be > 0")
        if len(self.age_fractions) != 3 or any(f < 0 for f in self.age_fractions):
            out.append("testbed.age_fractions must be three non-negative numbers")
        elif abs(sum(self.age_fractions) - 1.0) > 1e-6:
            out.append(f"testbed.age_fractions sum to {sum(self.age_fractions)!r}, not 1")
        n_occ = occupied_count(self)
        if self.total_population is not None:
            if self.total_population < 0:
                out.append("testbed.total_population must be >= 0")
            elif self.total_population < n_occ:
                out.append(
                    f"testbed.total_population={self.total_population} cannot give "
                    f"{n_occ} occupied buildings at least one occupant each"
                )
            if self.total_population > 0 and n_occ == 0:
                out.append("testbed.total_population > 0 but no building is occupied")
        if self.density_weights is not None:
            w = self.density_weights
            if len(w) != self.n_cells:
                out.append(f"testbed.density_weights has {len(w)} entries, expected {self.n_cells}")
            elif any(v < 0 for v in w) or sum(w) <= 0:
                out.append("testbed.density_weights must be non-negative with a positive sum")
        aw = self.archetype_weights
        if not aw or any(v < 0 for v in aw) or sum(aw) <= 0:
            out.append("testbed.archetype_weights must be non-negative with a positive sum")
        return out


def occupied_count(config: TestbedConfig) -> int:
    return int(math.floor(config.occupancy_rate * config.n_buildings + 0.5))


def largest_remainder(weights: Sequence[float], total: int) -> np.ndarray:
    """Integer apportionment of ``total`` proportional to ``weights``.

    Leftover units go to the largest fractional parts; ties favour the lower
    index.
    """
    w = np.asarray(weights, dtype=np.float64)
    quotas = w / w.sum() * total
    counts = np.floor(quotas).astype(np.int64)
    short = total - int(counts.sum())
    if short > 0:
        frac = quotas - counts
        order = np.lexsort((np.arange(len(w)), -frac))
        counts[order[:short]] += 1
    return counts


def default_density_weights(n_rows: int, n_cols: int) -> np.ndarray:
    """Smooth single-peak housing density, denser toward a downtown cell."""
    rr, cc = np.meshgrid(np.arange(n_rows), np.arange(n_cols), indexing="ij")
    cy, cx = 0.55 * (n_rows - 1), 0.45 * (n_cols - 1)
    s = max(n_rows, n_cols) / 3.0
    w = 0.15 + np.exp(-((rr - cy) ** 2 + (cc - cx) ** 2) / (2.0 * s * s))
    return w.ravel()


def _zero_truncated_poisson(gen: np.random.Generator, lam: float, size: int) -> np.ndarray:
    draws = gen.poisson(lam, size)
    zero = draws == 0
    while zero.any():
        draws[zero] = gen.poisson(lam, int(zero.sum()))
        zero = draws == 0
    return draws


def generate_testbed(config: TestbedConfig, rng: Stream) -> CommunityModel:
    """Build a seeded synthetic community matching the aggregates in ``config``."""
    problems = config.violations()
    if problems:
        raise CommunityError("; ".join(problems))
    gen = rng.numpy()
    n = config.n_buildings
    n_cells = config.n_cells
    dx = config.width_km / config.n_cols
    dy = config.height_km / config.n_rows

    weights = (
        np.asarray(config.density_weights, dtype=np.float64)
        if config.density_weights is not None
        else default_density_weights(config.n_rows, config.n_cols)
    )
    per_cell = largest_remainder(weights, n)
    cell_of = np.repeat(np.arange(n_cells, dtype=np.int64), per_cell)
    col = cell_of % config.n_cols
    row = cell_of // config.n_cols
    xs = (col + gen.random(n)) * dx
    ys = (row + gen.random(n)) * dy

    n_occ = occupied_count(config)
    occupied = np.zeros(n, dtype=bool)
    occupied[gen.choice(n, size=n_occ, replace=False)] = True
    occ_idx = np.flatnonzero(occupied)

    people = np.zeros(n, dtype=np.int64)
    if n_occ:
        people[occ_idx] = _zero_truncated_poisson(gen, config.household_size, n_occ)
        target = (
            config.total_population
            if config.total_population is not None
            else int(math.floor(n_occ * config.household_size + 0.5))
        )
        target = max(target, n_occ)
        diff = target - int(people.sum())
        if diff > 0:
            np.add.at(people, gen.choice(occ_idx, size=diff, replace=True), 1)
        while diff < 0:
            eligible = occ_idx[people[occ_idx] > 1]
            picks = gen.choice(eligible, size=min(-diff, len(eligible)), replace=False)
            people[picks] -= 1
            diff += len(picks)

    fractions = np.asarray(config.age_fractions, dtype=np.float64)
    fractions = fractions / fractions.sum()
    by_age = gen.multinomial(people, fractions)

    aw = np.asarray(config.archetype_weights, dtype=np.float64)
    archetype = gen.choice(len(aw), size=n, p=aw / aw.sum())

    buildings = tuple(
        Building(
            id=i,
            cell_id=int(cell_of[i]),
            x=float(xs[i]),
            y=float(ys[i]),
            occupants=(int(by_age[i, 0]), int(by_age[i, 1]), int(by_age[i, 2])),
            occupied=bool(occupied[i]),
            archetype_id=int(archetype[i]),
        )
        for i in range(n)
    )
    starts = np.concatenate([[0], np.cumsum(per_cell)])
    cells = tuple(
        GridCell(
            cell_id=g,
            centroid=(((g % config.n_cols) + 0.5) * dx, ((g // config.n_cols) + 0.5) * dy),
            building_ids=tuple(range(int(starts[g]), int(starts[g + 1]))),
        )
        for g in range(n_cells)
    )
    model = CommunityModel(
        cells=cells,
        buildings=buildings,
        total_population=int(people.sum()),
        age_fractions=tuple(float(f) for f in fractions),
    )
    validate_community(model)
    return model


def validate_community(model: CommunityModel) -> None:
    """Raise :class:`CommunityError` naming the first offending record."""
    n_cells = len(model.cells)
    seen: set[int] = set()
    for pos, b in enumerate(model.buildings):
        if b.id in seen:
            raise CommunityError(f"building {b.id}: duplicate id")
        if b.id != pos:
            raise CommunityError(
                f"building {b.id}: ids must run 0..{len(model.buildings) - 1} in order"
            )
        seen.add(b.id)
        if not 0 <= b.cell_id < n_cells:
            raise CommunityError(
                f"building {b.id}: cell_id {b.cell_id} does not exist ({n_cells} cells)"
            )
        if len(b.occupants) != 3 or any(o < 0 for o in b.occupants):
            raise CommunityError(f"building {b.id}: occupants must be three counts >= 0")
        if not b.occupied and any(b.occupants):
            raise CommunityError(f"building {b.id}: unoccupied building has occupants")
    members: dict[int, int] = {}
    for idx, cell in enumerate(model.cells):
        if cell.cell_id != idx:
            raise CommunityError(f"cell {cell.cell_id}: cells must be numbered 0..{n_cells - 1}")
        for bid in cell.building_ids:
            if bid in members:
                raise CommunityError(f"building {bid}: listed in cells {members[bid]} and {idx}")
            members[bid] = idx
    if set(members) != seen:
        missing = sorted(seen - set(members))[:5]
        extra = sorted(set(members) - seen)[:5]
        raise CommunityError(
            f"cells do not partition the buildings (unlisted {missing}, unknown {extra})"
        )
    for b in model.buildings:
        if members[b.id] != b.cell_id:
            raise CommunityError(
                f"building {b.id}: cell_id {b.cell_id} but listed in cell {members[b.id]}"
            )
    total = sum(b.population for b in model.buildings)
    if total != model.total_population:
        raise CommunityError(
            f"total_population {model.total_population} != sum of occupants {total}"
        )
    if len(model.age_fractions) != 3 or abs(sum(model.age_fractions) - 1.0) > 1e-9:
        raise CommunityError(f"age_fractions {model.age_fractions} do not sum to 1")


def community_to_dict(model: CommunityModel) -> dict:
    return {
        "meta": {
            "format": FORMAT_TAG,
            "version": FORMAT_VERSION,
            "age_groups": list(AGE_LABELS),
            "total_population": model.total_population,
            "age_fractions": list(model.age_fractions),
        },
        "cells": [
            {"cell_id": c.cell_id, "centroid": list(c.centroid), "building_ids": list(c.building_ids)}
            for c in model.cells
        ],
        "buildings": [
            {
                "id": b.id,
                "cell_id": b.cell_id,
                "x": b.x,
                "y": b.y,
                "occupants": list(b.occupants),
                "occupied": b.occupied,
                "archetype_id": b.archetype_id,
            }
            for b in model.buildings
        ],
    }


def save_community(model: CommunityModel, path) -> None:
    path = Path(path)
    validate_community(model)
    text = json.dumps(community_to_dict(model), separators=(",", ":"))
    try:
        path.write_text(text + "\n")
    except OSError as exc:
        raise OSError(f"cannot write community file {path}: {exc}") from exc


def _require(record: dict, key: str, where: str):
    if not isinstance(record, dict):
        raise CommunityError(f"{where}: expected an object")
    if key not in record:
        raise CommunityError(f"{where}: missing key '{key}'")
    return record[key]


def community_from_dict(data: dict, source: str = "<dict>") -> CommunityModel:
    if not isinstance(data, dict):
        raise CommunityError(f"{source}: top level must be an object")
    for key in ("meta", "cells", "buildings"):
        if key not in data:
            raise CommunityError(f"{source}: missing top-level key '{key}'")
    meta = data["meta"]
    buildings = []
    for i, rec in enumerate(data["buildings"]):
        where = f"{source}: building record {i}"
        occ = _require(rec, "occupants", where)
        if not isinstance(occ, list) or len(occ) != 3:
            raise CommunityError(f"{where}: occupants must be a 3-element array")
        try:
            buildings.append(
                Building(
                    id=int(_require(rec, "id", where)),
                    cell_id=int(_require(rec, "cell_id", where)),
                    x=float(rec.get("x", 0.0)),
                    y=float(rec.get("y", 0.0)),
                    occupants=(int(occ[0]), int(occ[1]), int(occ[2])),
                    occupied=bool(_require(rec, "occupied", where)),
                    archetype_id=int(rec.get("archetype_id", 0)),
                )
            )
        except (TypeError, ValueError) as exc:
            raise CommunityError(f"{where}: {exc}") from exc
    buildings.sort(key=lambda b: b.id)
    cells = []
    for i, rec in enumerate(data["cells"]):
        where = f"{source}: cell record {i}"
        cen = _require(rec, "centroid", where)
        cells.append(
            GridCell(
                cell_id=int(_require(rec, "cell_id", where)),
                centroid=(float(cen[0]), float(cen[1])),
                building_ids=tuple(int(v) for v in _require(rec, "building_ids", where)),
            )
        )
    cells.sort(key=lambda c: c.cell_id)
    total = meta.get("total_population", sum(b.population for b in buildings))
    model = CommunityModel(
        cells=tuple(cells),
        buildings=tuple(buildings),
        total_population=int(total),
        age_fractions=tuple(float(f) for f in meta.get("age_fractions", GILROY_AGE_FRACTIONS)),
    )
    validate_community(model)
    return model


def load_community(path) -> CommunityModel:
    path = Path(path)
    text = path.read_text()
    if not text.strip():
        raise CommunityError(f"{path}: empty community file")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CommunityError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return community_from_dict(data, source=str(path))
