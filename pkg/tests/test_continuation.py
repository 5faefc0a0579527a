import math

import pytest

from pottsmeta.errors import DegenerateInput, FoldDetected
from pottsmeta.landscape import (
    continuation_small_field,
    critical_points,
    height_slopes_at_zero,
    numeric_height_slope,
)
from pottsmeta.model import ModelParams


def test_continued_points_match_direct_solution():
    res = continuation_small_field(2.4, 1.0, 0.01)
    direct = {c.label: c for c in critical_points(ModelParams(2.4, 0.01, 1.0))}
    for c in res.points:
        d = direct[c.label]
        assert abs(c.location.x1 - d.location.x1) < 1e-9 and abs(c.location.x2 - d.location.x2) < 1e-9


@pytest.mark.parametrize("label", ["m0", "m2", "σ1"])
def test_slopes_converge_at_first_order(label):
    beta, theta = 2.4, 1.0
    exact = height_slopes_at_zero(beta, theta)[label]
    e1 = abs(numeric_height_slope(beta, theta, label, 1e-4) - exact)
    e2 = abs(numeric_height_slope(beta, theta, label, 5e-5) - exact)
    assert e1 < 1e-2
    # Halving delta roughly halves the error: O(delta).
    assert 1.6 < e1 / e2 < 2.4


def test_slope_formula_sums():
    s = height_slopes_at_zero(2.4, 0.7)
    # The direction cosines sum to zero, so the slopes of each family do too.
    assert sum(s[f"m{i}"] for i in range(3)) == pytest.approx(0.0, abs=1e-14)
    assert sum(s[f"σ{i}"] for i in range(3)) == pytest.approx(0.0, abs=1e-14)


def test_fold_detected():
    with pytest.raises(FoldDetected):
        continuation_small_field(2.4, math.pi, 0.2, labels=("m0",))


def test_refusals():
    with pytest.raises(DegenerateInput):
        continuation_small_field(1.8, 1.0, 0.01)
    with pytest.raises(DegenerateInput):
        continuation_small_field(2.0, 1.0, 0.01)
