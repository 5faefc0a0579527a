import math

import numpy as np
import pytest

from pottsmeta.errors import DegenerateRegime, NotASaddle, NoValleys
from pottsmeta.kinetics import ek_quantities, limit_chain, nu_mass, omega_saddle, predict_transition, weight
from pottsmeta.landscape import classify_regime, critical_points
from pottsmeta.model import ModelParams, hessian_det

# Frozen from an independent evaluation of the closed forms at the
# critical points located by 50-digit root solves.
NU_ZF1 = 1.3671846141265924
OMEGA_ZF1 = 1.935032623319303
MU_ZF1 = 0.8352918589793469


def test_weight_at_centroid():
    assert weight((1 / 3, 1 / 3)) == pytest.approx(1 / 3)


def test_zf1_quantities(zf1_report):
    ek = ek_quantities(zf1_report)
    for i in range(3):
        assert ek.nu[i] == pytest.approx(NU_ZF1, rel=1e-10)
        assert ek.omega[f"σ{i}"] == pytest.approx(OMEGA_ZF1, rel=1e-10)
        assert ek.mu[f"σ{i}"] == pytest.approx(MU_ZF1, rel=1e-10)


def test_nu_matches_definition():
    params = ModelParams(2.4)
    m = {c.label: c for c in critical_points(params)}["m0"]
    x0, x1, x2 = m.location.coords
    expected = (x0 * x1 * x2) ** -0.5 / math.sqrt(params.beta**2 * hessian_det(m.location, params))
    assert nu_mass(m, params) == pytest.approx(expected, rel=1e-12)


def test_omega_refuses_minimum():
    params = ModelParams(2.4)
    m = critical_points(params)[0]
    with pytest.raises(NotASaddle):
        omega_saddle(m, params)


def test_zf1_limit_chain_is_symmetric(zf1_report):
    ch = limit_chain(zf1_report)
    rate = OMEGA_ZF1 / NU_ZF1
    for i in range(3):
        for j in range(3):
            if i != j:
                assert ch.rate(i, j) == pytest.approx(rate, rel=1e-10)
    assert ch.jump_distribution(0) == pytest.approx({1: 0.5, 2: 0.5})
    Q = ch.generator()
    assert np.allclose(Q.sum(axis=1), 0.0)


def test_zf2_two_time_scales(zf2_report):
    ek = ek_quantities(zf2_report)
    # The entropic mass has the closed form 1/|1 - beta/2|.
    assert ek.nu[3] == pytest.approx(1.0 / abs(1.0 - 1.86 / 2.0), rel=1e-10)
    fast = limit_chain(zf2_report, scale="fast")
    assert fast.jump_distribution(3) == pytest.approx({0: 1 / 3, 1: 1 / 3, 2: 1 / 3})
    assert set(fast.absorbing) == {0, 1, 2}
    slow = limit_chain(zf2_report, scale="slow")
    assert slow.jump_distribution(0) == pytest.approx({1: 0.5, 2: 0.5})


def test_prediction_zf1(zf1_report):
    pred = predict_transition(zf1_report, None, 60, 0)
    theta = zf1_report.valley(0).depth
    expected = (NU_ZF1 / OMEGA_ZF1) * math.pi * 60 * math.exp(theta * 60)
    assert pred.mean_time == pytest.approx(expected, rel=1e-10)
    assert pred.jump_distribution == pytest.approx({1: 0.5, 2: 0.5})
    assert pred.time_scale == (2 * math.pi * 60, theta)


def test_prediction_in_log_domain_for_huge_N(zf1_report):
    pred = predict_transition(zf1_report, None, 10_000, 0)
    assert pred.mean_time == math.inf
    assert math.isfinite(pred.mean_time_log)


def test_field_case_one_prediction():
    rep = classify_regime(ModelParams(2.4, 0.02, math.pi))
    pred = predict_transition(rep, None, 100, 1)
    assert pred.depth == pytest.approx(rep.valley(1).depth)
    assert sum(pred.jump_distribution.values()) == pytest.approx(1.0)


def test_refusals():
    with pytest.raises(DegenerateRegime):
        predict_transition(classify_regime(ModelParams(2.0)), None, 50, 0)
    with pytest.raises(NoValleys):
        predict_transition(classify_regime(ModelParams(1.5)), None, 50, 0)
