import math

import numpy as np
import pytest

from pottsmeta.errors import EpsilonTooLarge, NoValleys, SizeLimit
from pottsmeta.landscape import (
    REGIMES,
    classify_regime,
    descend,
    metastable_sets,
    phase_diagram,
    zero_family_fold,
)
from pottsmeta.model import ModelParams


@pytest.mark.parametrize(
    "params, label",
    [
        (ModelParams(1.5), "NoMetastability"),
        (ModelParams(1.84), "ZF-III"),
        (ModelParams(1.86), "ZF-II"),
        (ModelParams(2.0), "ZF-β₁-degenerate"),
        (ModelParams(2.4), "ZF-I"),
        (ModelParams(2.4, 0.02, math.pi), "Field-π-I"),
        (ModelParams(2.4, 0.08, math.pi), "Field-π-II"),
        (ModelParams(2.4, 0.2, math.pi), "Field-π-III"),
        (ModelParams(2.4, 0.005, 0.0), "Field-0-I"),
        (ModelParams(2.4, 0.1, 0.0), "Field-0-II"),
        (ModelParams(2.4, 0.01, 1.0), "SmallField-CaseIII"),
    ],
)
def test_regime_labels(params, label):
    rep = classify_regime(params)
    assert rep.regime == label
    assert label in REGIMES


def test_zf1_structure(zf1_report):
    rep = zf1_report
    assert rep.index_set == (0, 1, 2) or list(rep.index_set) == [0, 1, 2]
    for v in rep.valleys:
        assert v.depth == pytest.approx(0.16030175618288275, rel=1e-10)
    assert sorted(rep.adjacency()) == [("σ0", 1, 2), ("σ1", 0, 2), ("σ2", 0, 1)]


def test_zf2_depths(zf2_report):
    rep = zf2_report
    d = {v.index: v.depth for v in rep.valleys}
    assert d[0] == pytest.approx(0.002371791041071137, rel=1e-9)
    assert d[3] == pytest.approx(0.0008181487779202039, rel=1e-9)
    assert rep.separating_saddles(0, 3) == ["σ0"]


def test_degenerate_flag():
    rep = classify_regime(ModelParams(2.0))
    assert rep.degenerate and not rep.ek_available


def test_field_pi_gates():
    rep = classify_regime(ModelParams(2.4, 0.02, math.pi))
    gates = {v.index: sorted(g.label for g in v.gate_saddles) for v in rep.valleys}
    assert gates == {0: ["σ1", "σ2"], 1: ["σ0"], 2: ["σ0"]}
    rep = classify_regime(ModelParams(2.4, 0.08, math.pi))
    gates = {v.index: sorted(g.label for g in v.gate_saddles) for v in rep.valleys}
    assert gates[0] == ["p"]
    conn = [c for c in rep.connections if c.saddle.label == "p"][0]
    w = conn.weights(0)
    assert w[1] == pytest.approx(0.5) and w[2] == pytest.approx(0.5)


@pytest.mark.parametrize("k", [1, 3, 5])
def test_rotated_fields_are_symmetric(k):
    base = classify_regime(ModelParams(2.4, 0.02, math.pi))
    rot = classify_regime(ModelParams(2.4, 0.02, k * math.pi / 3))
    assert rot.regime == base.regime
    assert sorted(round(v.depth, 10) for v in rot.valleys) == sorted(round(v.depth, 10) for v in base.valleys)


def test_zero_family_persistence_note():
    rep = classify_regime(ModelParams(2.4, 0.1, 0.0))
    assert len(rep.valleys) == 3
    assert rep.notes
    assert zero_family_fold(2.4) == pytest.approx(0.18160982825793331, rel=1e-8)


def test_descent_reaches_minimum(zf1_report):
    end = descend((0.1, 0.15), ModelParams(2.4))
    m0 = zf1_report.valley(0).minimum.location.as_array()
    assert np.linalg.norm(end - m0) < 1e-6


@pytest.mark.parametrize(
    "params, N",
    [(ModelParams(2.4), 80), (ModelParams(1.86), 150), (ModelParams(2.4, 0.08, math.pi), 100), (ModelParams(6.0), 30)],
)
def test_metastable_set_methods_agree(params, N):
    rep = classify_regime(params)
    eps = 0.1 * min(v.gap for v in rep.valleys)
    a = metastable_sets(params, eps, N, rep)
    b = metastable_sets(params, eps, N, rep, method="descent")
    assert np.array_equal(a.labels, b.labels)
    for i in rep.index_set:
        assert len(a[i]) > 0


def test_metastable_sets_symmetric_and_disjoint(zf1_report):
    s = metastable_sets(ModelParams(2.4), 0.01, 120, zf1_report)
    sizes = {i: len(s[i]) for i in zf1_report.index_set}
    assert len(set(sizes.values())) == 1
    assert sum(sizes.values()) == int((s.labels >= 0).sum())


def test_metastable_set_errors(zf1_report):
    with pytest.raises(EpsilonTooLarge):
        metastable_sets(ModelParams(2.4), 1.0, 50, zf1_report)
    with pytest.raises(NoValleys):
        metastable_sets(ModelParams(1.5), 1e-3, 50)
    with pytest.raises(SizeLimit):
        metastable_sets(ModelParams(2.4), 0.01, 20_001, zf1_report)


def test_phase_diagram_bands():
    pd = phase_diagram((2.05, 4.0), (0.001, 0.3), "pi-family", 40)
    labels = set(np.unique(pd.labels))
    assert labels == {"Field-π-I", "Field-π-II", "Field-π-III"}
    # Rows are ordered I, II, III with increasing r.
    order = {"Field-π-I": 0, "Field-π-II": 1, "Field-π-III": 2}
    for row in pd.labels:
        codes = [order[x] for x in row]
        assert codes == sorted(codes)
    with pytest.raises(ValueError):
        phase_diagram(resolution=2001)
