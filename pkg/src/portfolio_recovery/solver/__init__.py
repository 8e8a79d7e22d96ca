from .dp import DPSolution, StateSpaceOverflow, exact_base_q, exact_dp_solve, state_key
from .policies import GAMMA, DISPERSION_TARGET, RolloutConfig, base_policy_action
from .rollout import QEstimate, RolloutLog, estimate_first, estimate_q, rollout_action
from .runner import EpochRecord, PolicyTrace, check_trace, run_policy

__all__ = [
    "DISPERSION_TARGET",
    "DPSolution",
    "EpochRecord",
    "GAMMA",
    "PolicyTrace",
    "QEstimate",
    "RolloutConfig",
    "RolloutLog",
    "StateSpaceOverflow",
    "base_policy_action",
    "check_trace",
    "estimate_first",
    "estimate_q",
    "exact_base_q",
    "exact_dp_solve",
    "rollout_action",
    "run_policy",
    "state_key",
]
