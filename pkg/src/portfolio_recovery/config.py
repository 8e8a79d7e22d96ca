"""Run configuration (JSON) and its validation."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .community import CommunityError, TestbedConfig
from .hazard import HazardError, ScenarioConfig
from .solver.policies import RolloutConfig

POLICY_CHOICES = ("base", "rollout", "both")
DEFAULT_CHECKPOINTS = (0, 100, 600)
_TOP_KEYS = {
    "seed", "community", "scenario", "catalog", "solver", "outputs",
    "replications", "policy", "checkpoints", "workers", "replay",
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs. Paths are absolute once loaded from a file."""

    seed: int = 2019
    testbed: TestbedConfig | None = field(default_factory=TestbedConfig)
    community_path: Path | None = None
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    catalog: Path | None = None
    solver: RolloutConfig = field(default_factory=RolloutConfig)
    outputs: Path = Path("out")
    replications: int = 1
    policy: str = "both"
    checkpoints: tuple[int, ...] = DEFAULT_CHECKPOINTS
    workers: int = 1
    replay: Path | None = None

    def violations(self) -> list[str]:
        out = []
        if self.testbed is None and self.community_path is None:
            out.append("community: give either 'testbed' or 'path'")
        if self.testbed is not None:
            out.extend(self.testbed.violations())
        if self.community_path is not None and not self.community_path.is_file():
            out.append(f"community.path {self.community_path} does not exist")
        out.extend(self.scenario.violations())
        if self.catalog is not None and not self.catalog.is_file():
            out.append(f"catalog {self.catalog} does not exist")
        out.extend(self.solver.violations())
        if self.replications < 1:
            out.append(f"replications={self.replications} must be >= 1")
        if self.workers < 1:
            out.append(f"workers={self.workers} must be >= 1")
        if self.policy not in POLICY_CHOICES:
            out.append(f"policy={self.policy!r} must be one of {list(POLICY_CHOICES)}")
        if any(c < 0 for c in self.checkpoints):
            out.append("checkpoints must be >= 0 days")
        if self.replay is not None and not self.replay.is_file():
            out.append(f"replay {self.replay} does not exist")
        parent = self.outputs
        while not parent.exists() and parent != parent.parent:
            parent = parent.parent
        if parent.exists() and not parent.is_dir():
            out.append(f"outputs {self.outputs} is not creatable")
        return out

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "community": (
                {"path": str(self.community_path)}
                if self.community_path is not None
                else {"testbed": _testbed_dict(self.testbed)}
            ),
            "scenario": {
                "magnitude": self.scenario.magnitude,
                "epicenter": list(self.scenario.epicenter) if self.scenario.epicenter else None,
                "epicentral_distance_km": self.scenario.epicentral_distance_km,
                "azimuth_deg": self.scenario.azimuth_deg,
                "gmpe": vars(self.scenario.gmpe).copy(),
                "seed": self.scenario.seed,
            },
            "catalog": str(self.catalog) if self.catalog else None,
            "solver": self.solver.to_dict(),
            "replications": self.replications,
            "policy": self.policy,
            "checkpoints": list(self.checkpoints),
            "replay": str(self.replay) if self.replay else None,
        }


def _testbed_dict(tb: TestbedConfig) -> dict:
    d = dict(vars(tb))
    for k in ("age_fractions", "density_weights", "archetype_weights"):
        if d[k] is not None:
            d[k] = list(d[k])
    return d


def _path(value, base: Path) -> Path | None:
    if value is None:
        return None
    p = Path(value)
    return p if p.is_absolute() else (base / p)


def config_from_dict(data: dict, base: Path = Path(".")) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kw: dict = {}
    try:
        if "seed" in data:
            kw["seed"] = int(data["seed"])
        comm = data.get("community", {"testbed": {}})
        if not isinstance(comm, dict) or not ({"testbed", "path"} & set(comm)):
            raise ConfigError("community must be {'testbed': {...}} or {'path': ...}")
        if "path" in comm:
            kw["testbed"] = None
            kw["community_path"] = _path(comm["path"], base)
        else:
            kw["testbed"] = TestbedConfig.from_dict(comm["testbed"] or {})
        if "scenario" in data:
            kw["scenario"] = ScenarioConfig.from_dict(data["scenario"])
        kw["catalog"] = _path(data.get("catalog"), base)
        if "solver" in data:
            kw["solver"] = RolloutConfig.from_dict(data["solver"])
        if "outputs" in data:
            kw["outputs"] = _path(data["outputs"], base)
        else:
            kw["outputs"] = base / "out"
        for key in ("replications", "workers"):
            if key in data:
                kw[key] = int(data[key])
        if "policy" in data:
            kw["policy"] = str(data["policy"])
        if "checkpoints" in data:
            kw["checkpoints"] = tuple(int(c) for c in data["checkpoints"])
        kw["replay"] = _path(data.get("replay"), base)
    except (CommunityError, HazardError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    return RunConfig(**kw)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: parse error at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    except OSError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(data, base=path.resolve().parent)


def validate(path) -> list[str]:
    """Every violation in the config at ``path`` (empty when valid)."""
    try:
        cfg = load_config(path)
    except ConfigError as exc:
        return [str(exc)]
    return cfg.violations()
