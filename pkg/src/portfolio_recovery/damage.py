"""Fragility-based damage sampling and repair-duration models.

Damage states follow the HAZUS ordering; the names map as
Minor=Slight, Moderate=Moderate, Major=Extensive, Collapse=Complete.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import ndtr, ndtri

from .community import CommunityModel
from .hazard import IntensityField
from .rng import Stream


class DamageError(ValueError):
    pass


class DamageState(enum.IntEnum):
    NONE = 0
    MINOR = 1
    MODERATE = 2
    MAJOR = 3
    COLLAPSE = 4


DAMAGED_STATES = (DamageState.MINOR, DamageState.MODERATE, DamageState.MAJOR, DamageState.COLLAPSE)

# Duration distribution codes shared with the trajectory kernels.
DETERMINISTIC, LOGNORMAL, EXPONENTIAL, DISCRETE = 0, 1, 2, 3
DISTRIBUTIONS = {
    "deterministic": DETERMINISTIC,
    "lognormal": LOGNORMAL,
    "exponential": EXPONENTIAL,
    "discrete": DISCRETE,
}
_ONE_MINUS = 1.0 - 2.0 ** -53


@dataclass(frozen=True)
class FragilityCurve:
    """Lognormal fragility: median capacity ``theta`` (g) and dispersion ``beta``
    for Minor, Moderate, Major and Collapse."""

    theta: tuple[float, float, float, float]
    beta: tuple[float, float, float, float]

    def __post_init__(self):
        if len(self.theta) != 4 or len(self.beta) != 4:
            raise DamageError("fragility needs four theta and four beta values")
        if any(t <= 0 for t in self.theta) or any(
            b >= a for a, b in zip(self.theta[1:], self.theta[:-1])
        ):
            raise DamageError(f"theta must be positive and strictly increasing, got {self.theta}")
        if any(b <= 0 for b in self.beta):
            raise DamageError(f"beta must be > 0, got {self.beta}")


def exceedance_probability(curve: FragilityCurve, state: DamageState, im: float) -> float:
    """P(damage >= state | im)."""
    if not im > 0:
        raise DamageError(f"intensity must be > 0, got {im}")
    state = DamageState(state)
    if state == DamageState.NONE:
        raise DamageError("exceedance is defined for Minor and above")
    i = int(state) - 1
    return float(ndtr(math.log(im / curve.theta[i]) / curve.beta[i]))


def exceedance_array(curve: FragilityCurve, im: np.ndarray) -> np.ndarray:
    """(n, 4) exceedance probabilities for Minor..Collapse."""
    im = np.asarray(im, dtype=np.float64)
    if np.any(im <= 0):
        raise DamageError("intensity must be > 0")
    theta = np.asarray(curve.theta)
    beta = np.asarray(curve.beta)
    return ndtr(np.log(im[..., None] / theta) / beta)


def state_probabilities(curve: FragilityCurve, im: float) -> np.ndarray:
    """Probabilities of None, Minor, Moderate, Major, Collapse (sum to 1)."""
    p = [exceedance_probability(curve, s, im) for s in DAMAGED_STATES]
    # Crossing curves (unequal beta) are resolved the same way as in sampling:
    # the most severe exceeded state wins, so use the running maximum from the top.
    for i in range(2, -1, -1):
        p[i] = max(p[i], p[i + 1])
    return np.array([1.0 - p[0], p[0] - p[1], p[1] - p[2], p[2] - p[3], p[3]])


def damage_state_from_uniform(curve: FragilityCurve, im: float, u: float) -> DamageState:
    for s in reversed(DAMAGED_STATES):
        if exceedance_probability(curve, s, im) > u:
            return s
    return DamageState.NONE


def sample_damage_state(curve: FragilityCurve, im: float, rng: Stream, *key: int) -> DamageState:
    """Draw u ~ U(0,1) from ``rng`` at counter ``key`` and return the most
    severe state whose exceedance probability exceeds u."""
    return damage_state_from_uniform(curve, im, rng.uniform(*key))


def sample_damage_states(curve: FragilityCurve, im: np.ndarray, u: np.ndarray) -> np.ndarray:
    exc = exceedance_array(curve, im)
    out = np.zeros(len(u), dtype=np.int8)
    for s in DAMAGED_STATES:
        out[exc[:, int(s) - 1] > u] = int(s)
    return out


@dataclass(frozen=True)
class RepairTimeModel:
    """Repair duration per damage state (Minor..Collapse), in days.

    ``cov`` is the coefficient of variation (ignored for deterministic and
    exponential). ``discrete`` uses ``support_days``/``probabilities`` per state
    and is what exact enumeration works with.
    """

    mean_days: tuple[float, float, float, float]
    cov: tuple[float, float, float, float] = (0.5, 0.5, 0.5, 0.5)
    distribution: str = "lognormal"
    support_days: tuple[tuple[int, ...], ...] | None = None
    probabilities: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self):
        if self.distribution not in DISTRIBUTIONS:
            raise DamageError(f"unknown repair distribution {self.distribution!r}")
        if self.distribution == "discrete":
            if self.support_days is None or self.probabilities is None:
                raise DamageError("discrete repair model needs support_days and probabilities")
            if len(self.support_days) != 4 or len(self.probabilities) != 4:
                raise DamageError("discrete repair model needs four support/probability rows")
            means = []
            for days, probs in zip(self.support_days, self.probabilities):
                if len(days) != len(probs) or not days:
                    raise DamageError("support_days and probabilities must align")
                if any(d < 1 for d in days) or list(days) != sorted(set(days)):
                    raise DamageError("support days must be distinct, ascending integers >= 1")
                if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-9:
                    raise DamageError("repair probabilities must be >= 0 and sum to 1")
                means.append(sum(d * p for d, p in zip(days, probs)))
            object.__setattr__(self, "mean_days", tuple(means))
        if len(self.mean_days) != 4 or any(m <= 0 for m in self.mean_days):
            raise DamageError("mean_days needs four positive values")
        if any(b <= a for a, b in zip(self.mean_days, self.mean_days[1:])):
            raise DamageError(f"mean_days must increase with severity, got {self.mean_days}")
        if self.distribution == "lognormal" and any(c <= 0 for c in self.cov):
            raise DamageError("lognormal repair model needs cov > 0")

    @property
    def kind(self) -> int:
        return DISTRIBUTIONS[self.distribution]

    def expected_days(self, state: DamageState) -> float:
        return 0.0 if state == DamageState.NONE else float(self.mean_days[int(state) - 1])

    def kernel_params(self, state: DamageState) -> tuple[int, float, float, tuple, tuple]:
        """(kind, a, b, support, cdf) consumed by :func:`draw_days`."""
        i = int(state) - 1
        m = float(self.mean_days[i])
        kind = self.kind
        if kind == DETERMINISTIC:
            return kind, float(max(1, math.ceil(m))), 0.0, (), ()
        if kind == LOGNORMAL:
            s2 = math.log1p(self.cov[i] ** 2)
            return kind, math.log(m) - 0.5 * s2, math.sqrt(s2), (), ()
        if kind == EXPONENTIAL:
            return kind, m, 0.0, (), ()
        days = tuple(int(d) for d in self.support_days[i])
        cdf = tuple(float(c) for c in np.cumsum(self.probabilities[i]))
        return kind, 0.0, 0.0, days, cdf


def _cdf(kind: int, a: float, b: float, days, cdf, s: int) -> float:
    if s <= 0:
        return 0.0
    if kind == LOGNORMAL:
        return float(ndtr((math.log(s) - a) / b))
    if kind == EXPONENTIAL:
        return -math.expm1(-s / a)
    acc = 0.0
    for d, c in zip(days, cdf):
        if d > s:
            break
        acc = c
    return acc


def draw_days(kind: int, a: float, b: float, days, cdf, u: float, spent: int = 0) -> int:
    """Whole-day duration from uniform ``u``, conditioned on exceeding ``spent`` days.

    Inverse-CDF sampling on ``F(spent) + u * (1 - F(spent))``; the compiled
    kernel implements the identical arithmetic.
    """
    if kind == DETERMINISTIC:
        return max(int(a), spent + 1)
    f = _cdf(kind, a, b, days, cdf, spent)
    v = f + u * (1.0 - f)
    if v > _ONE_MINUS:
        v = _ONE_MINUS
    if kind == LOGNORMAL:
        x = math.exp(a + b * float(ndtri(v)))
        d = int(math.ceil(x))
    elif kind == EXPONENTIAL:
        d = int(math.ceil(-a * math.log1p(-v)))
    else:
        d = days[-1]
        for dd, c in zip(days, cdf):
            if c > v:
                d = dd
                break
    if d < spent + 1:
        d = spent + 1
    return max(d, 1)


def sample_repair_time(model: RepairTimeModel, state: DamageState, rng: Stream, *key: int) -> int:
    """Repair duration in whole days (>= 1) for a damaged building."""
    if DamageState(state) == DamageState.NONE:
        raise DamageError("an undamaged building has no repair time")
    kind, a, b, days, cdf = model.kernel_params(state)
    return draw_days(kind, a, b, days, cdf, rng.uniform(*key))


@dataclass(frozen=True)
class Archetype:
    id: int
    name: str
    fragility: FragilityCurve
    repair: RepairTimeModel


class Catalog(dict):
    """archetype_id -> :class:`Archetype`."""

    def get_archetype(self, archetype_id: int) -> Archetype:
        try:
            return self[archetype_id]
        except KeyError:
            raise DamageError(f"archetype_id {archetype_id} missing from catalog") from None


def default_catalog() -> Catalog:
    """Single wood-frame residential archetype with HAZUS-style parameters."""
    return Catalog(
        {
            0: Archetype(
                id=0,
                name="residential-wood",
                fragility=FragilityCurve(theta=(0.4, 0.8, 1.6, 2.8), beta=(0.64, 0.64, 0.64, 0.64)),
                repair=RepairTimeModel(mean_days=(5.0, 60.0, 180.0, 360.0), cov=(0.5, 0.5, 0.5, 0.5)),
            )
        }
    )


def _archetype_from_dict(rec: dict, where: str) -> Archetype:
    try:
        rep = rec["repair"]
        dist = rep.get("distribution", "lognormal")
        if dist == "discrete":
            repair = RepairTimeModel(
                mean_days=(1.0, 2.0, 3.0, 4.0),
                distribution=dist,
                support_days=tuple(tuple(int(d) for d in row) for row in rep["support_days"]),
                probabilities=tuple(tuple(float(p) for p in row) for row in rep["probabilities"]),
            )
        else:
            repair = RepairTimeModel(
                mean_days=tuple(float(v) for v in rep["mean_days"]),
                cov=tuple(float(v) for v in rep.get("cov", (0.5,) * 4)),
                distribution=dist,
            )
        return Archetype(
            id=int(rec["id"]),
            name=str(rec.get("name", f"archetype-{rec['id']}")),
            fragility=FragilityCurve(
                theta=tuple(float(v) for v in rec["theta"]),
                beta=tuple(float(v) for v in rec["beta"]),
            ),
            repair=repair,
        )
    except KeyError as exc:
        raise DamageError(f"{where}: missing key {exc}") from None
    except (TypeError, DamageError) as exc:
        raise DamageError(f"{where}: {exc}") from None


def catalog_from_dict(data: dict, source: str = "<dict>") -> Catalog:
    if not isinstance(data, dict) or "archetypes" not in data:
        raise DamageError(f"{source}: expected an object with key 'archetypes'")
    cat = Catalog()
    for i, rec in enumerate(data["archetypes"]):
        arch = _archetype_from_dict(rec, f"{source}: archetype record {i}")
        if arch.id in cat:
            raise DamageError(f"{source}: duplicate archetype id {arch.id}")
        cat[arch.id] = arch
    return cat


def catalog_to_dict(catalog: Catalog) -> dict:
    out = []
    for aid in sorted(catalog):
        a = catalog[aid]
        r = a.repair
        rep: dict = {"distribution": r.distribution}
        if r.distribution == "discrete":
            rep["support_days"] = [list(row) for row in r.support_days]
            rep["probabilities"] = [list(row) for row in r.probabilities]
        else:
            rep["mean_days"] = list(r.mean_days)
            rep["cov"] = list(r.cov)
        out.append(
            {"id": a.id, "name": a.name, "theta": list(a.fragility.theta),
             "beta": list(a.fragility.beta), "repair": rep}
        )
    return {"archetypes": out}


def load_catalog(path) -> Catalog:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DamageError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return catalog_from_dict(data, source=str(path))


@dataclass(frozen=True, eq=False)
class ScenarioRealization:
    """Sampled damage state and repair duration (0 when undamaged) per building."""

    im: np.ndarray
    damage: np.ndarray
    durations: np.ndarray

    @property
    def damaged(self) -> np.ndarray:
        return self.damage > 0

    def __eq__(self, other):
        if not isinstance(other, ScenarioRealization):
            return NotImplemented
        return (
            np.array_equal(self.im, other.im)
            and np.array_equal(self.damage, other.damage)
            and np.array_equal(self.durations, other.durations)
        )


def realize_scenario(
    model: CommunityModel, field: IntensityField, catalog: Catalog, rng: Stream
) -> ScenarioRealization:
    if len(field.im) != model.n_buildings:
        raise DamageError(
            f"intensity field covers {len(field.im)} buildings, community has {model.n_buildings}"
        )
    ids = model.building_ids
    u_state = rng.child("damage-state").uniforms(ids)
    damage = np.zeros(model.n_buildings, dtype=np.int8)
    arch = model.archetypes
    for aid in np.unique(arch):
        a = catalog.get_archetype(int(aid))
        sel = np.flatnonzero(arch == aid)
        damage[sel] = sample_damage_states(a.fragility, field.im[sel], u_state[sel])
    durations = sample_durations(model, damage, catalog, rng.child("repair-time"))
    return ScenarioRealization(im=np.asarray(field.im, dtype=np.float64), damage=damage, durations=durations)


def sample_durations(model: CommunityModel, damage: np.ndarray, catalog: Catalog, rng: Stream) -> np.ndarray:
    """Repair days per building (0 where undamaged), keyed by building id."""
    u = rng.uniforms(model.building_ids)
    arch = model.archetypes
    durations = np.zeros(model.n_buildings, dtype=np.int64)
    for i in np.flatnonzero(damage):
        a = catalog.get_archetype(int(arch[i]))
        kind, pa, pb, days, cdf = a.repair.kernel_params(DamageState(int(damage[i])))
        durations[i] = draw_days(kind, pa, pb, days, cdf, float(u[i]))
    return durations


def realization_to_dict(model: CommunityModel, real: ScenarioRealization) -> dict:
    return {
        "building_ids": model.building_ids.tolist(),
        "im": real.im.tolist(),
        "damage_state": real.damage.astype(int).tolist(),
        "duration_days": real.durations.tolist(),
    }


def realization_from_dict(model: CommunityModel, data: dict) -> ScenarioRealization:
    if data.get("building_ids") != model.building_ids.tolist():
        raise DamageError("realization building ids do not match the community")
    damage = np.asarray(data["damage_state"], dtype=np.int8)
    durations = np.asarray(data["duration_days"], dtype=np.int64)
    if np.any((damage > 0) & (durations < 1)) or np.any((damage == 0) & (durations != 0)):
        raise DamageError("realization durations inconsistent with damage states")
    return ScenarioRealization(im=np.asarray(data["im"], dtype=np.float64), damage=damage, durations=durations)
