import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pottsmeta.errors import EventBudgetExceeded, SizeLimit
from pottsmeta.model import LatticeState, ModelParams, exact_stationary, lattice_index
from pottsmeta.simulator import (
    RateTable,
    SimulationConfig,
    aggregation_residual,
    choose_feasible_N,
    cycle_decomposition_check,
    cycle_weight,
    detailed_balance_asymmetry,
    exact_mean_hitting_time,
    generator_matrix,
    hitting_experiment,
    long_run_occupation,
    rate_table,
    reduced_rates,
    run_trajectory,
    scaling_study,
    stationarity_residual,
)
from pottsmeta.simulator import _prepare


def test_single_site_chain_has_unit_rates():
    moves = reduced_rates(LatticeState(1, 0, 0), ModelParams(2.0))
    assert moves[0][0] == LatticeState(0, 1, 0)
    assert moves[0][1] == pytest.approx(1.0, rel=1e-15)
    assert moves[1] == (None, 0.0) and moves[2] == (None, 0.0)


def test_empty_class_has_zero_rate():
    moves = reduced_rates(LatticeState(3, 0, 2), ModelParams(2.4, 0.1, 1.0))
    assert moves[1] == (None, 0.0)


@settings(max_examples=30)
@given(st.integers(1, 30), st.floats(0.5, 4.0), st.floats(0.0, 0.4), st.floats(0.0, 6.28), st.data())
def test_table_matches_single_state_rates(N, beta, r, theta, data):
    params = ModelParams(beta, r, theta)
    t = rate_table(N, params)
    row = data.draw(st.integers(0, len(t.states) - 1))
    s = LatticeState(*map(int, t.states[row]))
    for a, (target, rate) in enumerate(reduced_rates(s, params)):
        assert t.rates[row, a] == pytest.approx(rate, rel=1e-13)
        if target is not None:
            assert t.targets[row, a] == lattice_index(N, target.n1, target.n2)


def test_generator_rows_sum_to_zero():
    L = generator_matrix(15, ModelParams(2.4, 0.3, math.pi))
    assert np.allclose(np.asarray(L.sum(axis=1)).ravel(), 0.0, atol=1e-12)


@pytest.mark.parametrize("N", [6, 8, 12])
@pytest.mark.parametrize("beta", [1.5, 1.9, 2.4])
@pytest.mark.parametrize("r", [0.0, 0.3])
def test_exact_stationarity(N, beta, r):
    assert stationarity_residual(N, ModelParams(beta, r, math.pi if r else 0.0)) <= 1e-10


def test_stationarity_against_dense_null_vector():
    N, params = 10, ModelParams(2.4, 0.3, math.pi)
    L = generator_matrix(N, params).toarray()
    nu = exact_stationary(N, params).weights
    assert np.max(np.abs(nu @ L)) <= 1e-12


def test_mutant_rate_is_detected():
    params = ModelParams(1.9)
    t = rate_table(8, params)
    rates = t.rates.copy()
    rates[17, 0] *= 1.01
    assert stationarity_residual(8, params, RateTable(8, t.states, rates, t.targets)) > 1e-4


def test_non_reversibility_witness():
    assert detailed_balance_asymmetry(6, ModelParams(1.9)) > 1e-3


def test_size_limits():
    with pytest.raises(SizeLimit):
        stationarity_residual(61, ModelParams(2.0))
    with pytest.raises(SizeLimit):
        aggregation_residual(9, ModelParams(2.0))


@pytest.mark.parametrize("N", [2, 5, 7])
def test_spin_level_aggregation(N):
    assert aggregation_residual(N, ModelParams(2.4, 0.3, 1.0)) <= 1e-13


def test_cycle_identity_exact_with_exact_potential():
    params = ModelParams(2.4, 0.05, 1.0)
    for s in [LatticeState(30, 40, 30), LatticeState(5, 0, 3), LatticeState(1, 0, 0)]:
        assert cycle_decomposition_check(s, params, mode="exact") <= 1e-12


def test_cycle_residual_decays():
    params = ModelParams(2.4, 0.05, 1.0)
    Ns = np.array([50, 100, 200, 400])
    res = [cycle_decomposition_check(LatticeState(N - 7 * N // 10, 3 * N // 10, 4 * N // 10), params) for N in Ns]
    slope = np.polyfit(np.log(Ns), np.log(res), 1)[0]
    assert slope <= -0.9


def test_cycle_weight_limit():
    for N in (30, 300, 3000):
        s = LatticeState(N // 3, N // 3, N - 2 * (N // 3))
        x = s.to_simplex().coords
        w = float(np.prod(x)) ** (1 / 3)
        assert abs(cycle_weight(s) - w) <= 1.0 / (N * x.min())


def test_trajectory_determinism_and_conservation(zf1_report):
    cfg = SimulationConfig(ModelParams(2.4), 30, seed=11, replicas=1, start=0)
    a = run_trajectory(cfg, 0, report=zf1_report)
    b = run_trajectory(cfg, 0, report=zf1_report)
    assert np.array_equal(a.entry_times, b.entry_times) and a.events == b.events
    assert sum(a.final_state.counts) == 30
    c = run_trajectory(cfg, 1, report=zf1_report)
    assert c.entry_times[-1] != a.entry_times[-1]


def test_deep_well_never_exits():
    tr = run_trajectory(SimulationConfig(ModelParams(6.0), 60, seed=3, start=0, horizon=1e3))
    assert tr.stop_reason == "horizon"
    assert list(tr.labels) == [0]


def test_event_budget_raises_with_partial(zf1_report):
    cfg = SimulationConfig(ModelParams(2.4), 40, seed=3, start=0, max_events=100)
    with pytest.raises(EventBudgetExceeded) as err:
        run_trajectory(cfg, 0, report=zf1_report)
    assert err.value.partial.events == 100


def test_censoring_is_reported(zf1_report):
    cfg = SimulationConfig(ModelParams(2.4), 40, seed=3, replicas=20, start=0, max_events=50)
    with pytest.warns(RuntimeWarning):
        stats = hitting_experiment(cfg, zf1_report)
    assert stats.censored == 20
    assert all(row[4] for row in stats.rows())


def test_long_run_occupation_matches_stationary_law():
    params = ModelParams(1.5)
    occ = long_run_occupation(params, 20, 10**7, seed=5)
    tv = 0.5 * np.abs(occ - exact_stationary(20, params).weights).sum()
    assert tv <= 0.02


def test_simulated_mean_matches_exact_mean(zf1_report):
    params = ModelParams(2.4)
    cfg = SimulationConfig(params, 30, seed=2, replicas=400, start=0, budget_factor=40.0)
    stats = hitting_experiment(cfg, zf1_report)
    prep = _prepare(cfg, zf1_report)
    exact = exact_mean_hitting_time(30, params, prep.start, prep.stop_mask)
    assert stats.censored == 0
    assert abs(stats.mean - exact) <= 4 * stats.mean_se
    assert abs(stats.cv - 1.0) <= 0.2


def test_threads_do_not_change_results(zf1_report):
    base = SimulationConfig(ModelParams(2.4), 25, seed=4, replicas=12, start=0, budget_factor=40.0)
    one = hitting_experiment(base, zf1_report)
    two = hitting_experiment(SimulationConfig(**{**base.__dict__, "threads": 2}), zf1_report)
    assert np.array_equal(one.times, two.times)


def test_entropic_start_is_rotation_symmetric(zf2_report):
    # Rotating the labels is a symmetry of the cyclic dynamics, so the exact
    # hitting distribution from the entropic set is uniform.
    params = ModelParams(1.86)
    cfg = SimulationConfig(params, 60, seed=0, replicas=1, start=3)
    prep = _prepare(cfg, zf2_report)
    assert set(prep.targets) == {0, 1, 2}
    sizes = [int((prep.sets.labels == i).sum()) for i in range(3)]
    assert len(set(sizes)) == 1


def test_feasible_N_heuristic(zf2_report):
    # Expected jumps from the entropic set: about 2.2e3 at N = 200 and 8.4e3 at N = 400.
    N = choose_feasible_N(ModelParams(1.86), [60, 100, 200, 400], replicas=100, event_budget=5e5, start=3)
    assert N == 200


def test_exact_scaling_deep_wells():
    res = scaling_study(ModelParams(6.0), [10, 14, 18], method="exact")
    assert res.relative_slope_error <= 0.1
