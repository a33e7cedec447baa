from __future__ import annotations

import numpy as np
import pytest

import config
import dynamics
from dynamics import (
    FROM_ABOVE, FROM_BELOW, STABLE, UNSTABLE, CreationCurve, GridSpec, SteadyState,
    audit_branch_jumps, check_stability, conversion_term, creation, find_steady_states,
    period, simulate, states_frame, step, viable_width,
)
from equilibrium import SolverError
from primitives import DomainError, Environment, ModelParams, QueryType, private_failure

REF = config.REFERENCE
TOL = config.GOLDEN_TOLERANCE


def _state(k: float, kind: str) -> SteadyState:
    crossing = FROM_BELOW if kind == UNSTABLE else FROM_ABOVE
    return SteadyState(k_star=k, kind=kind, crossing=crossing, residual=0.0)


@pytest.mark.parametrize("kwargs", [{"k_min": 0.0}, {"k_min": 2.0, "k_max": 1.0}, {"n": 1}])
def test_grid_spec_rejects_invalid_bounds(kwargs: dict) -> None:
    with pytest.raises(DomainError):
        GridSpec(**kwargs)


def test_grid_points_span_the_bounds() -> None:
    pts = GridSpec(0.5, 2.0, 4).points()
    assert pts[0] == 0.5 and pts[-1] == 2.0 and len(pts) == 4


def test_conversion_term_vanishes_without_conversion(params: ModelParams) -> None:
    assert conversion_term(1.0, 0.0, Environment.AI, params) == 0.0
    a_h = 1.0 - private_failure(QueryType.H, 1.0, Environment.AI, params)
    assert conversion_term(1.0, 0.5, Environment.AI, params) == pytest.approx(0.6 * 0.5 * a_h)


def test_creation_rejects_conversion_without_ai(params: ModelParams) -> None:
    with pytest.raises(DomainError):
        creation(1.0, Environment.HO, 0.2, params)
    with pytest.raises(DomainError):
        creation(1.0, Environment.AI, 1.5, params)


def test_step_is_depreciation_plus_creation(params: ModelParams) -> None:
    k = 1.2
    expected = 0.85 * k + period(k, Environment.AI, params).creation_base
    assert step(k, Environment.AI, 0.0, params) == pytest.approx(expected)


def test_empty_archive_is_absorbing(params: ModelParams) -> None:
    traj = simulate(0.0, 50, Environment.AI, 0.0, params)
    assert traj.converged
    assert traj.limit == 0.0
    assert list(traj.to_frame().columns) == ["t", "k"]


def test_simulate_validates_inputs(params: ModelParams) -> None:
    with pytest.raises(DomainError):
        simulate(-1.0, 10, Environment.AI, 0.0, params)
    with pytest.raises(DomainError):
        simulate(1.0, 0, Environment.AI, 0.0, params)


def test_simulate_stops_at_the_step_cap(params: ModelParams) -> None:
    traj = simulate(1.0, 3, Environment.AI, 0.0, params, conv_tol=0.0)
    assert len(traj.k_path) == 4
    assert not traj.converged


def test_branch_audit_flags_large_sigma_jumps() -> None:
    k = np.array([0.1, 0.2, 0.3, 0.4])
    sigma = np.array([0.0, 0.05, 0.6, 0.62])
    curve = CreationCurve(env=Environment.AI, eta=0.0, grid=GridSpec(0.1, 0.4, 4),
                          k=k, h=k, phi=np.ones_like(k), sigma=sigma)
    jumps = audit_branch_jumps(curve)
    assert len(jumps) == 1
    assert jumps[0].k_left == 0.2 and jumps[0].k_right == 0.3
    assert jumps[0].jump == pytest.approx(0.55)


def test_viable_width_pairs_threshold_with_next_stable_state() -> None:
    assert viable_width([_state(0.15, UNSTABLE), _state(1.55, STABLE)]) == pytest.approx(1.40)
    assert viable_width([_state(1.55, STABLE)]) is None
    assert viable_width([_state(0.15, UNSTABLE)]) is None
    assert viable_width([]) is None


def test_states_frame_has_fixed_columns() -> None:
    df = states_frame([_state(0.15, UNSTABLE)])
    assert list(df.columns) == ["k_star", "kind", "crossing", "residual"]
    assert states_frame([]).empty


@pytest.mark.slow
def test_reference_steady_states(states: dict) -> None:
    ai = states[Environment.AI]
    ho = states[Environment.HO]
    assert [s.kind for s in ai] == [UNSTABLE, STABLE]
    assert [s.kind for s in ho] == [UNSTABLE, STABLE]
    assert ai[0].k_star == pytest.approx(REF["k_u_ai"], abs=TOL["k_u"])
    assert ai[1].k_star == pytest.approx(REF["k_h_ai"], abs=TOL["k_h"])
    assert ho[0].k_star == pytest.approx(REF["k_u_ho"], abs=TOL["k_u"])
    assert ho[1].k_star == pytest.approx(REF["k_ho"], abs=TOL["k_h"])
    assert viable_width(ai) == pytest.approx(REF["width_ai"], abs=TOL["width"])
    assert viable_width(ho) == pytest.approx(REF["width_ho"], abs=TOL["width"])
    for s in ai + ho:
        assert s.residual <= config.REFINE_TOL


@pytest.mark.slow
def test_reference_peaks(curves: dict) -> None:
    for env in Environment:
        curve = curves[env]
        i = int(np.argmax(curve.phi))
        assert curve.phi[i] == pytest.approx(REF[f"peak_phi_{env.value}"], abs=TOL["peak_phi"])
        assert curve.k[i] == pytest.approx(REF[f"peak_k_{env.value}"], abs=TOL["peak_k"])
        assert curve.to_frame().shape == (config.K_GRID[2], 4)


@pytest.mark.slow
def test_stability_is_confirmed_by_simulation(params: ModelParams, states: dict) -> None:
    for s in states[Environment.AI]:
        assert check_stability(s, Environment.AI, 0.0, params).confirmed


@pytest.mark.slow
def test_trajectories_fall_into_the_basins(params: ModelParams) -> None:
    below = simulate(0.10, 5000, Environment.AI, 0.0, params)
    above = simulate(0.50, 5000, Environment.AI, 0.0, params)
    assert below.limit < 0.05
    assert above.converged
    assert above.limit == pytest.approx(REF["k_h_ai"], abs=TOL["k_h"])


def test_refine_rejects_a_sign_change_without_a_root(
    params: ModelParams, monkeypatch: pytest.MonkeyPatch
) -> None:
    lam = params.shared.lam
    monkeypatch.setattr(
        dynamics, "creation",
        lambda k, env, eta, p, tols: lam * k + (0.1 if k < 1.0 else -0.1),
    )
    curve = CreationCurve(
        env=Environment.AI, eta=0.0, grid=GridSpec(0.5, 1.5, 2),
        k=np.array([0.5, 1.5]), h=np.array([0.0, 0.0]),
        phi=np.array([lam + 0.2, lam - 0.2]), sigma=np.zeros(2),
    )
    with pytest.raises(SolverError):
        find_steady_states(Environment.AI, 0.0, curve.grid, params, curve=curve)


def test_refine_locates_a_continuous_crossing(
    params: ModelParams, monkeypatch: pytest.MonkeyPatch
) -> None:
    lam = params.shared.lam
    monkeypatch.setattr(
        dynamics, "creation",
        lambda k, env, eta, p, tols: lam * k + 0.1 * (1.0 - k),
    )
    curve = CreationCurve(
        env=Environment.AI, eta=0.0, grid=GridSpec(0.5, 1.5, 2),
        k=np.array([0.5, 1.5]), h=np.array([0.0, 0.0]),
        phi=np.array([lam + 0.2, lam - 0.2]), sigma=np.zeros(2),
    )
    (state,) = find_steady_states(Environment.AI, 0.0, curve.grid, params, curve=curve)
    assert state.kind == STABLE
    assert state.k_star == pytest.approx(1.0, abs=1e-7)
    assert state.residual <= config.REFINE_TOL


def test_large_archive_decays_toward_the_high_state(params: ModelParams) -> None:
    path = simulate(60.0, 200, Environment.AI, 0.0, params)
    assert np.all(np.isfinite(path.k_path))
    assert path.k_path[1] == pytest.approx(0.85 * 60.0, abs=1e-6)
    assert path.k_path[-1] < 60.0


@pytest.mark.slow
def test_conversion_at_077_clears_the_low_threshold(params: ModelParams, grid: GridSpec) -> None:
    states = find_steady_states(Environment.AI, 0.77, grid, params)
    assert all(s.k_star > 0.15 for s in states)
