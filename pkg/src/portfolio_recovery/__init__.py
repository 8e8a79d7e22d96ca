"""Post-earthquake building-portfolio recovery: testbed, hazard, damage,
recovery MDP and a Monte Carlo rollout planner."""
from .community import AgeGroup, CommunityModel, TestbedConfig, generate_testbed, load_community, save_community
from .damage import DamageState, default_catalog, realize_scenario
from .hazard import GmpeParams, ScenarioConfig, sample_intensity_field
from .kernel import BACKEND
from .mdp import RecoveryMDP, RepairAction, compute_ru_budget
from .rng import Stream

__version__ = "0.1.0"

__all__ = [
    "AgeGroup",
    "BACKEND",
    "CommunityModel",
    "DamageState",
    "GmpeParams",
    "RecoveryMDP",
    "RepairAction",
    "ScenarioConfig",
    "Stream",
    "TestbedConfig",
    "compute_ru_budget",
    "default_catalog",
    "generate_testbed",
    "load_community",
    "realize_scenario",
    "sample_intensity_field",
    "save_community",
]
