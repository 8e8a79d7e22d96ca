"""Scenario ground motion: median attenuation plus inter/intra-event residuals."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from .community import CommunityModel
from .rng import Stream


class HazardError(ValueError):
    pass


class Gmpe(Protocol):
    tau: float
    phi: float

    def median_ln_im(self, magnitude: float, distance): ...


@dataclass(frozen=True)
class GmpeParams:
    """ln(IM) = c0 + c1*M + c2*ln(R + c3), IM in g, R in km.

    The defaults give a median spectral acceleration near 0.32 g at 12 km for
    an Mw 6.9 event; they are a stand-in, not a published model.
    """

    c0: float = -1.5
    c1: float = 0.5
    c2: float = -1.0
    c3: float = 10.0
    tau: float = 0.35
    phi: float = 0.55

    def violations(self) -> list[str]:
        out = []
        if self.tau < 0 or self.phi < 0:
            out.append("scenario.gmpe.tau and scenario.gmpe.phi must be >= 0")
        if not self.c3 > 0:
            out.append("scenario.gmpe.c3 must be > 0")
        if not all(math.isfinite(v) for v in (self.c0, self.c1, self.c2, self.c3)):
            out.append("scenario.gmpe coefficients must be finite")
        return out

    def median_ln_im(self, magnitude: float, distance):
        return median_ln_im(self, magnitude, distance)


def median_ln_im(params: GmpeParams, magnitude: float, distance):
    """Median ln(IM) at epicentral ``distance`` (km); accepts scalars or arrays."""
    if np.any(np.asarray(distance) < 0):
        raise HazardError("distance must be >= 0")
    return params.c0 + params.c1 * magnitude + params.c2 * np.log(np.asarray(distance) + params.c3)


@dataclass(frozen=True)
class ScenarioConfig:
    """Scenario earthquake.

    With ``epicenter=None`` the epicenter sits ``epicentral_distance_km`` from
    the community centroid along ``azimuth_deg`` (degrees counter-clockwise
    from +x). ``seed=None`` defers to the run's master seed.
    """

    magnitude: float = 6.9
    epicenter: tuple[float, float] | None = None
    epicentral_distance_km: float = 12.0
    azimuth_deg: float = 240.0
    gmpe: GmpeParams = field(default_factory=GmpeParams)
    seed: int | None = None

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        kw = dict(data)
        unknown = set(kw) - set(cls.__dataclass_fields__)
        if unknown:
            raise HazardError(f"unknown scenario keys: {sorted(unknown)}")
        if "gmpe" in kw:
            g = kw["gmpe"]
            extra = set(g) - set(GmpeParams.__dataclass_fields__)
            if extra:
                raise HazardError(f"unknown scenario.gmpe keys: {sorted(extra)}")
            kw["gmpe"] = GmpeParams(**{k: float(v) for k, v in g.items()})
        if kw.get("epicenter") is not None:
            kw["epicenter"] = (float(kw["epicenter"][0]), float(kw["epicenter"][1]))
        return cls(**kw)

    def violations(self) -> list[str]:
        out = []
        if not 4.0 <= self.magnitude <= 9.0:
            out.append(f"scenario.magnitude={self.magnitude} outside [4.0, 9.0]")
        if self.epicenter is not None and not all(math.isfinite(v) for v in self.epicenter):
            out.append("scenario.epicenter must be finite")
        if self.epicentral_distance_km < 0:
            out.append("scenario.epicentral_distance_km must be >= 0")
        out.extend(self.gmpe.violations())
        return out

    def resolve_epicenter(self, model: CommunityModel) -> tuple[float, float]:
        if self.epicenter is not None:
            return self.epicenter
        cx, cy = model.centroid()
        a = math.radians(self.azimuth_deg)
        d = self.epicentral_distance_km
        return (cx + d * math.cos(a), cy + d * math.sin(a))


@dataclass(frozen=True, eq=False)
class IntensityField:
    im: np.ndarray
    eta: float
    epsilons: np.ndarray
    distances: np.ndarray

    def __len__(self) -> int:
        return len(self.im)


def sample_intensity_field(
    model: CommunityModel, scenario: ScenarioConfig, rng: Stream, gmpe: Gmpe | None = None
) -> IntensityField:
    """Per-building IM with one shared inter-event residual per scenario.

    Intra-event residuals are keyed by building id, so the field does not
    depend on the order buildings are evaluated in.
    """
    if model.n_buildings == 0:
        raise HazardError("community has no buildings")
    gmpe = gmpe if gmpe is not None else scenario.gmpe
    ex, ey = scenario.resolve_epicenter(model)
    xy = model.coordinates
    dist = np.hypot(xy[:, 0] - ex, xy[:, 1] - ey)
    eta = gmpe.tau * float(rng.child("inter-event").normal(0))
    eps = gmpe.phi * rng.child("intra-event").normals(model.building_ids)
    ln_im = np.asarray(gmpe.median_ln_im(scenario.magnitude, dist)) + eta + eps
    return IntensityField(im=np.exp(ln_im), eta=eta, epsilons=eps, distances=dist)
