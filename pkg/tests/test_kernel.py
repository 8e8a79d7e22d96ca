import numpy as np
import pytest

from portfolio_recovery.instances import small_stochastic_instance
from portfolio_recovery.kernel import KERNELS, PlannerModel
from portfolio_recovery.rng import Stream
from portfolio_recovery.solver import base_policy_action

needs_compiled = pytest.mark.skipif("compiled" not in KERNELS, reason="compiled kernel not built")


def _mid_recovery(planner):
    """A state with repairs in progress and some buildings already repaired."""
    mdp = planner.mdp
    s = mdp.initial_state()
    for _ in range(3):
        s = mdp.step(s, base_policy_action(planner, s, Stream.from_seed(0))).next_state
    return s


@needs_compiled
@pytest.mark.parametrize("policy", ["greedy", "random", "fixed"])
def test_compiled_matches_python(policy):
    inst = small_stochastic_instance(1003)
    py = PlannerModel(inst.mdp(), inst.catalog, policy, kernel="python")
    cc = PlannerModel(inst.mdp(), inst.catalog, policy, kernel="compiled")
    for state in (py.mdp.initial_state(), _mid_recovery(py)):
        first = base_policy_action(py, state, Stream.from_seed(1)).buildings()
        args = (state, first, 12345, 0, 64, 0.99, 20)
        a = py.simulate(*args)
        b = cc.simulate(*args)
        assert np.array_equal(a, b)


def test_trajectory_index_keyed():
    inst = small_stochastic_instance(1001)
    p = PlannerModel(inst.mdp(), inst.catalog)
    s = p.mdp.initial_state()
    first = base_policy_action(p, s).buildings()
    whole = p.simulate(s, first, 99, 0, 40, 0.99, 15)
    tail = p.simulate(s, first, 99, 25, 15, 0.99, 15)
    assert np.array_equal(whole[25:], tail)
