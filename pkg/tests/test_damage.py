import math

import mpmath
import numpy as np
import pytest

from portfolio_recovery.community import Building, CommunityModel, GridCell
from portfolio_recovery.damage import (
    DamageError,
    DamageState,
    FragilityCurve,
    RepairTimeModel,
    catalog_from_dict,
    catalog_to_dict,
    damage_state_from_uniform,
    default_catalog,
    draw_days,
    exceedance_array,
    exceedance_probability,
    realize_scenario,
    sample_damage_state,
    sample_repair_time,
    state_probabilities,
)
from portfolio_recovery.hazard import IntensityField
from portfolio_recovery.rng import Stream

CURVE = FragilityCurve(theta=(0.2, 0.4, 0.8, 1.6), beta=(0.6, 0.6, 0.6, 0.6))


def oracle_phi(x):
    """Standard normal CDF at 50 significant digits."""
    with mpmath.workdps(50):
        return float(mpmath.ncdf(mpmath.mpf(x)))


def test_half_at_median():
    for s, t in zip(range(1, 5), CURVE.theta):
        assert exceedance_probability(CURVE, DamageState(s), t) == 0.5


def test_known_value_against_high_precision_oracle():
    p = exceedance_probability(CURVE, DamageState.MINOR, 0.4)
    expected = oracle_phi(math.log(2.0) / 0.6)
    assert p == pytest.approx(expected, abs=1e-15)
    assert round(p, 3) == 0.876
    assert exceedance_probability(CURVE, DamageState.MODERATE, 0.4) == 0.5


@pytest.mark.parametrize("im", [1e-4, 0.05, 0.3, 0.9, 2.0, 15.0])
def test_matches_oracle_everywhere(im):
    for s in range(1, 5):
        x = math.log(im / CURVE.theta[s - 1]) / CURVE.beta[s - 1]
        assert exceedance_probability(CURVE, DamageState(s), im) == pytest.approx(oracle_phi(x), abs=1e-15)


def test_limits():
    assert exceedance_probability(CURVE, DamageState.MINOR, 1e-12) < 1e-12
    assert exceedance_probability(CURVE, DamageState.COLLAPSE, 1e6) > 1 - 1e-12


def test_partition_and_ordering():
    for im in np.geomspace(1e-3, 50, 300):
        p = state_probabilities(CURVE, im)
        assert (p >= 0).all()
        assert abs(p.sum() - 1.0) <= 1e-12
        ex = exceedance_array(CURVE, np.array([im]))[0]
        assert all(ex[i] >= ex[i + 1] for i in range(3))


def test_below_minor_is_none():
    assert damage_state_from_uniform(CURVE, 1e-6, 1e-9) == DamageState.NONE


def test_forced_moderate():
    assert damage_state_from_uniform(CURVE, 0.4, 0.49) >= DamageState.MODERATE


def test_monotone_under_coupling():
    u = Stream.from_seed(12).uniforms(np.arange(2000))
    for uu in u:
        assert damage_state_from_uniform(CURVE, 0.3, uu) <= damage_state_from_uniform(CURVE, 0.9, uu)


def test_sampled_frequencies():
    rng = Stream.from_seed(13)
    n = 20_000
    draws = np.array([sample_damage_state(CURVE, 0.5, rng, i) for i in range(n)])
    p = state_probabilities(CURVE, 0.5)
    freq = np.bincount(draws, minlength=5) / n
    assert (np.abs(freq - p) <= 3 * np.sqrt(p * (1 - p) / n) + 1e-12).all()


def test_repair_means_must_increase():
    with pytest.raises(DamageError):
        RepairTimeModel(mean_days=(10.0, 10.0, 20.0, 30.0))


def test_nonpositive_im_rejected():
    with pytest.raises(DamageError):
        exceedance_probability(CURVE, DamageState.MINOR, 0.0)


def test_invalid_curve():
    with pytest.raises(DamageError):
        FragilityCurve(theta=(0.4, 0.2, 0.8, 1.6), beta=(0.6,) * 4)
    with pytest.raises(DamageError):
        FragilityCurve(theta=(0.2, 0.4, 0.8, 1.6), beta=(0.6, 0.0, 0.6, 0.6))


def test_deterministic_repair():
    m = RepairTimeModel(mean_days=(120.0, 130.0, 140.0, 150.0), distribution="deterministic")
    assert sample_repair_time(m, DamageState.MINOR, Stream.from_seed(0), 1) == 120


def test_lognormal_repair_mean():
    m = RepairTimeModel(mean_days=(120.0, 200.0, 300.0, 400.0), cov=(0.5,) * 4)
    rng = Stream.from_seed(14)
    x = np.array([sample_repair_time(m, DamageState.MINOR, rng, i) for i in range(100_000)])
    assert x.min() >= 1
    # whole-day rounding up adds about half a day
    assert x.mean() == pytest.approx(120.0, rel=0.02)
    assert x.std() / x.mean() == pytest.approx(0.5, rel=0.05)


def test_repair_of_undamaged_is_error():
    with pytest.raises(DamageError):
        sample_repair_time(default_catalog()[0].repair, DamageState.NONE, Stream.from_seed(0))


def test_conditional_draw_exceeds_spent():
    m = default_catalog()[0].repair
    params = m.kernel_params(DamageState.MAJOR)
    for u in np.linspace(0.001, 0.999, 50):
        assert draw_days(*params, u, spent=400) >= 401


def test_discrete_repair():
    m = RepairTimeModel(mean_days=(1, 2, 3, 4), distribution="discrete",
                        support_days=((2, 4), (5, 6), (7, 9), (10, 12)), probabilities=((0.25, 0.75),) * 4)
    assert m.mean_days == (3.5, 5.75, 8.5, 11.5)
    p = m.kernel_params(DamageState.MINOR)
    assert draw_days(*p, 0.2) == 2 and draw_days(*p, 0.3) == 4
    assert draw_days(*p, 0.01, spent=2) == 4


def test_catalog_round_trip():
    cat = default_catalog()
    assert catalog_from_dict(catalog_to_dict(cat)) == cat


def _line(n):
    b = tuple(Building(i, 0, float(i), 0.0, (0, 2, 0), True, 0) for i in range(n))
    return CommunityModel((GridCell(0, (0.0, 0.0), tuple(range(n))),), b, 2 * n, (0.306, 0.61, 0.084))


def _field(im):
    im = np.asarray(im, dtype=float)
    return IntensityField(im=im, eta=0.0, epsilons=np.zeros(len(im)), distances=np.zeros(len(im)))


def test_weak_shaking_damages_nothing():
    m = _line(50)
    real = realize_scenario(m, _field(np.full(50, 1e-5)), default_catalog(), Stream.from_seed(1))
    assert real.damaged.sum() == 0
    assert (real.durations == 0).all()


def test_damaged_fraction_matches_analytic():
    n = 20_000
    m = _line(n)
    cat = default_catalog()
    real = realize_scenario(m, _field(np.full(n, 0.6)), cat, Stream.from_seed(2))
    p = exceedance_probability(cat[0].fragility, DamageState.MINOR, 0.6)
    assert abs(real.damaged.mean() - p) <= 3 * math.sqrt(p * (1 - p) / n)
    assert ((real.durations > 0) == real.damaged).all()


def test_realization_deterministic():
    m = _line(200)
    f = _field(np.full(200, 0.8))
    a = realize_scenario(m, f, default_catalog(), Stream.from_seed(3))
    b = realize_scenario(m, f, default_catalog(), Stream.from_seed(3))
    assert a == b
