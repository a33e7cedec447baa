"""Comparative statics and conversion-rate analysis.

This module provides:
- decompose_margins: flow and resolution margins of the creation decline
  between the human-only and AI economies (midpoint weighting)
- resolution_race / find_congested_k: pool, composition and congestion
  factors of the change in resolution probability
- composition_check: H-richness of the posted pool and its sufficient
  condition in private-resolution rates
- crowdout_check: one-step creation at the human-only steady state and the
  AI steady state below it
- critical_eta / eta_bar_from_curve / basin_eliminated: the conversion rate
  that removes the low-archive basin
- sensitivity_sweep: one-at-a-time parameter sweeps of steady states and peaks
"""

import math
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

import config
from dynamics import (
    STABLE, UNSTABLE, CreationCurve, GridSpec, SteadyState,
    creation, find_steady_states, period, phi_curve,
)
from equilibrium import DEFAULT_TOLERANCES, Tolerances
from primitives import Environment, ModelParams, QueryType, private_failure


class MissingSteadyStateError(RuntimeError):
    """Raised when an analysis needs a steady state the economy does not have."""


@dataclass(frozen=True)
class MarginDecomposition:
    k_ref: float
    q_ho: float
    q_ai: float
    s_ho: float
    s_ai: float
    d_q: float
    d_s: float
    flow_margin: float
    resolution_margin: float
    total: float


@dataclass(frozen=True)
class ResolutionFactors:
    k_ref: float
    pool_ratio: float
    composition_ratio: float
    congestion_ratio: float
    congested_ho: bool
    congested_ai: bool
    sigma_ratio: float
    race_holds: bool
    identity_error: float


@dataclass(frozen=True)
class CompositionReport:
    k_ref: float
    applicable: bool
    delta_bar_ho: float
    delta_bar_ai: float
    h_rich: bool
    cutoff_ordered: bool
    sufficient_condition: bool


@dataclass(frozen=True)
class CrowdoutReport:
    k_ho: float
    h_ai_at_kho: float
    lambda_k: float
    declines: bool
    k_ai_below: float | None


@dataclass(frozen=True)
class ConversionReport:
    k_u: float
    eta_bar: float
    argmax_k: float
    limit_ratio: float
    feasible: bool


@dataclass(frozen=True)
class SensitivityRow:
    run_id: int
    varied_name: str
    varied_value: float
    k_u_ai: float
    k_h_ai: float
    peak_phi_ai: float
    k_ho: float
    two_crossings: bool


def _ratio(num: float, den: float) -> float:
    """num / den, NaN when den is zero."""
    return num / den if den != 0.0 else math.nan


def _check_k_ref(k_ref: float) -> None:
    if not k_ref > 0.0:
        raise ValueError(f"k_ref must be > 0, got {k_ref}")


# ---------- Margins ----------

def margin_decomposition(k_ref: float, q_ho: float, s_ho: float, q_ai: float, s_ai: float) -> MarginDecomposition:
    """Midpoint-weighted split of q_ho * s_ho - q_ai * s_ai."""
    d_q, d_s = q_ho - q_ai, s_ho - s_ai
    return MarginDecomposition(
        k_ref=k_ref, q_ho=q_ho, q_ai=q_ai, s_ho=s_ho, s_ai=s_ai, d_q=d_q, d_s=d_s,
        flow_margin=0.5 * (s_ho + s_ai) * d_q,
        resolution_margin=0.5 * (q_ho + q_ai) * d_s,
        total=q_ho * s_ho - q_ai * s_ai,
    )


def decompose_margins(
    k_ref: float, p: ModelParams, tols: Tolerances = DEFAULT_TOLERANCES
) -> MarginDecomposition:
    """Decompose the creation decline at k_ref into flow and resolution margins."""
    _check_k_ref(k_ref)
    ho = period(k_ref, Environment.HO, p, tols)
    ai = period(k_ref, Environment.AI, p, tols)
    return margin_decomposition(k_ref, ho.q_h, ho.sigma, ai.q_h, ai.sigma)


# ---------- Resolution race ----------

def resolution_race(
    k_ref: float, p: ModelParams, tols: Tolerances = DEFAULT_TOLERANCES
) -> ResolutionFactors:
    """Pool, composition and congestion factors of sigma_AI / sigma_HO at k_ref.

    When both economies are congested, sigma = pool * F(c*) / Q, so the
    factor product reproduces sigma_ratio and the race is decided by
    pool_ratio * composition_ratio < congestion_ratio. Otherwise the race
    is read off the resolution probabilities directly.
    """
    _check_k_ref(k_ref)
    ho = period(k_ref, Environment.HO, p, tols)
    ai = period(k_ref, Environment.AI, p, tols)
    f_ho = min(1.0, ho.inner.c_star / p.shared.c_bar_support)
    f_ai = min(1.0, ai.inner.c_star / p.shared.c_bar_support)
    pool_ratio = _ratio(ai.pool, ho.pool)
    composition_ratio = _ratio(f_ai, f_ho)
    congestion_ratio = _ratio(ai.q_total, ho.q_total)
    sigma_ratio = _ratio(ai.sigma, ho.sigma)
    if ho.congested and ai.congested:
        product = pool_ratio * composition_ratio
        identity_error = abs(product / congestion_ratio - sigma_ratio)
        race_holds = product < congestion_ratio
    else:
        identity_error = math.nan
        race_holds = ai.sigma < ho.sigma
    return ResolutionFactors(
        k_ref=k_ref, pool_ratio=pool_ratio, composition_ratio=composition_ratio,
        congestion_ratio=congestion_ratio, congested_ho=ho.congested,
        congested_ai=ai.congested, sigma_ratio=sigma_ratio,
        race_holds=race_holds, identity_error=identity_error,
    )


def find_congested_k(
    p: ModelParams, grid: GridSpec, tols: Tolerances = DEFAULT_TOLERANCES
) -> float | None:
    """First grid K at which both economies are congested (pool < Q)."""
    for k in grid.points():
        k = float(k)
        if period(k, Environment.HO, p, tols).congested and period(k, Environment.AI, p, tols).congested:
            return k
    return None


# ---------- Composition ----------

def composition_check(
    k_ref: float, p: ModelParams, tols: Tolerances = DEFAULT_TOLERANCES
) -> CompositionReport:
    """H-richness of the AI posted pool relative to the human-only one.

    Not applicable when either economy is collapsed at k_ref or posts no
    routine queries.
    """
    _check_k_ref(k_ref)
    fail = {
        (theta, env): private_failure(theta, k_ref, env, p)
        for theta in QueryType for env in Environment
    }
    sufficient = (
        fail[QueryType.H, Environment.AI] / fail[QueryType.H, Environment.HO]
        > fail[QueryType.L, Environment.AI] / fail[QueryType.L, Environment.HO]
    )
    ho = period(k_ref, Environment.HO, p, tols)
    ai = period(k_ref, Environment.AI, p, tols)
    if ho.collapsed or ai.collapsed or ho.inner.q_l == 0.0 or ai.inner.q_l == 0.0:
        return CompositionReport(
            k_ref=k_ref, applicable=False, delta_bar_ho=math.nan, delta_bar_ai=math.nan,
            h_rich=False, cutoff_ordered=False, sufficient_condition=sufficient,
        )
    return CompositionReport(
        k_ref=k_ref, applicable=True,
        delta_bar_ho=ho.inner.delta_bar, delta_bar_ai=ai.inner.delta_bar,
        h_rich=ai.inner.q_h / ai.inner.q_l >= ho.inner.q_h / ho.inner.q_l,
        cutoff_ordered=ai.inner.c_star >= ho.inner.c_star,
        sufficient_condition=sufficient,
    )


# ---------- Crowd-out ----------

def largest_stable(states: list[SteadyState]) -> float | None:
    """Largest stable steady state.

    Args:
        states: Steady states from find_steady_states.

    Returns:
        k_star of the highest stable state, or None if there is none.
    """
    stable = [s.k_star for s in states if s.kind == STABLE]
    return max(stable) if stable else None


def first_unstable(states: list[SteadyState]) -> float | None:
    """Lowest unstable threshold.

    Args:
        states: Steady states in grid order.

    Returns:
        k_star of the first unstable state, or None if there is none.
    """
    unstable = [s.k_star for s in states if s.kind == UNSTABLE]
    return unstable[0] if unstable else None


def crowdout_check(
    p: ModelParams,
    grid: GridSpec,
    ho_states: list[SteadyState] | None = None,
    ai_states: list[SteadyState] | None = None,
    n_jobs: int = config.N_JOBS,
    tols: Tolerances = DEFAULT_TOLERANCES,
) -> CrowdoutReport:
    """Compare AI one-step creation with depreciation at the human-only steady state.

    Raises:
        MissingSteadyStateError: If the human-only economy has no stable state.
    """
    if ho_states is None:
        ho_states = find_steady_states(Environment.HO, 0.0, grid, p, n_jobs=n_jobs, tols=tols)
    k_ho = largest_stable(ho_states)
    if k_ho is None:
        raise MissingSteadyStateError("human-only economy has no stable steady state on the grid")
    h_ai = creation(k_ho, Environment.AI, 0.0, p, tols)
    lambda_k = p.shared.lam * k_ho
    # a gap within the refinement tolerance of K_HO is not a decline
    declines = h_ai < lambda_k - tols.refine
    k_ai_below = None
    if declines:
        if ai_states is None:
            ai_states = find_steady_states(Environment.AI, 0.0, grid, p, n_jobs=n_jobs, tols=tols)
        below = [s.k_star for s in ai_states if s.k_star < k_ho]
        # K = 0 is always a steady state of the AI economy
        k_ai_below = max(below) if below else 0.0
    return CrowdoutReport(
        k_ho=k_ho, h_ai_at_kho=h_ai, lambda_k=lambda_k, declines=declines, k_ai_below=k_ai_below,
    )


# ---------- Conversion ----------

def limit_ratio(p: ModelParams) -> float:
    """K -> 0 limit lambda / (Delta (1 - pi) rho_bar) of the conversion ratio."""
    s = p.shared
    rho_bar = p.ai.rho_h + p.ai.rho_slope * 0.5 * (s.alpha_lo + s.alpha_hi)
    return s.lam / (s.delta_inc * (1.0 - s.pi) * rho_bar)


def eta_bar_from_curve(
    k: np.ndarray,
    phi0: np.ndarray,
    a_h_over_k: np.ndarray,
    lam: float,
    scale: float,
    limit: float | None = None,
) -> tuple[float, float]:
    """Supremum of [lam - phi0]+ / (scale * a_H / K) over a curve.

    Returns (eta_bar, argmax_k). eta_bar is 0 when phi0 >= lam everywhere;
    otherwise the K -> 0 limit, when given, is included and wins with
    argmax_k = 0.
    """
    deficit = np.maximum(lam - np.asarray(phi0), 0.0)
    if not np.any(deficit > 0.0):
        return 0.0, math.nan
    ratios = deficit / (scale * np.asarray(a_h_over_k))
    i = int(np.argmax(ratios))
    if limit is not None and limit > ratios[i]:
        return limit, 0.0
    return float(ratios[i]), float(k[i])


def _eta_grid(k_u: float, grid_n: int) -> np.ndarray:
    return np.geomspace(config.ETA_K_FLOOR, k_u, grid_n)


def _creation_base(k: float, p: ModelParams, tols: Tolerances) -> float:
    return period(k, Environment.AI, p, tols).creation_base


def _conversion_inputs(
    ks: np.ndarray, p: ModelParams, n_jobs: int, progress: bool, tols: Tolerances
) -> tuple[np.ndarray, np.ndarray]:
    iterator = tqdm(ks, desc="eta grid", disable=not progress)
    if n_jobs == 1:
        h = [_creation_base(float(k), p, tols) for k in iterator]
    else:
        h = Parallel(n_jobs=n_jobs)(
            delayed(_creation_base)(float(k), p, tols) for k in iterator
        )
    a_h = np.array([
        1.0 - private_failure(QueryType.H, float(k), Environment.AI, p) for k in ks
    ])
    return np.asarray(h) / ks, a_h / ks


def _require_k_u(
    p: ModelParams, grid: GridSpec, ai_states: list[SteadyState] | None, n_jobs: int, tols: Tolerances
) -> float:
    if ai_states is None:
        ai_states = find_steady_states(Environment.AI, 0.0, grid, p, n_jobs=n_jobs, tols=tols)
    k_u = first_unstable(ai_states)
    if k_u is None:
        raise MissingSteadyStateError("AI economy has no unstable threshold K_U at eta=0")
    return k_u


def critical_eta(
    p: ModelParams,
    grid: GridSpec,
    grid_n: int = config.ETA_GRID_POINTS,
    ai_states: list[SteadyState] | None = None,
    n_jobs: int = config.N_JOBS,
    progress: bool = False,
    tols: Tolerances = DEFAULT_TOLERANCES,
) -> ConversionReport:
    """Smallest conversion rate that eliminates the low-archive basin.

    Evaluated on grid_n log-spaced points on (ETA_K_FLOOR, K_U] plus the
    analytic K -> 0 limit.

    Raises:
        MissingSteadyStateError: If the AI economy has no unstable threshold.
    """
    k_u = _require_k_u(p, grid, ai_states, n_jobs, tols)
    ks = _eta_grid(k_u, grid_n)
    phi0, a_h_over_k = _conversion_inputs(ks, p, n_jobs, progress, tols)
    s = p.shared
    limit = limit_ratio(p)
    eta_bar, argmax_k = eta_bar_from_curve(
        ks, phi0, a_h_over_k, s.lam, s.delta_inc * (1.0 - s.pi), limit=limit
    )
    return ConversionReport(
        k_u=k_u, eta_bar=eta_bar, argmax_k=argmax_k, limit_ratio=limit, feasible=eta_bar <= 1.0,
    )


def basin_eliminated(
    eta: float,
    p: ModelParams,
    grid: GridSpec,
    grid_n: int = config.ETA_GRID_POINTS,
    ai_states: list[SteadyState] | None = None,
    n_jobs: int = config.N_JOBS,
    tols: Tolerances = DEFAULT_TOLERANCES,
) -> bool:
    """True iff phi_AI(K; eta) > lambda on every grid K in (ETA_K_FLOOR, K_U]."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0,1], got {eta}")
    k_u = _require_k_u(p, grid, ai_states, n_jobs, tols)
    ks = _eta_grid(k_u, grid_n)
    phi0, a_h_over_k = _conversion_inputs(ks, p, n_jobs, False, tols)
    s = p.shared
    phi = phi0 + s.delta_inc * (1.0 - s.pi) * eta * a_h_over_k
    return bool(np.all(phi > s.lam))


# ---------- Sensitivity ----------

def peak_phi(curve: CreationCurve) -> tuple[float, float]:
    """(max phi, K at the max) along a curve."""
    i = int(np.argmax(curve.phi))
    return float(curve.phi[i]), float(curve.k[i])


def _k_ho(p: ModelParams, grid: GridSpec, tols: Tolerances) -> float:
    k_ho = largest_stable(find_steady_states(Environment.HO, 0.0, grid, p, tols=tols))
    return math.nan if k_ho is None else k_ho


def _ai_summary(p: ModelParams, grid: GridSpec, tols: Tolerances) -> tuple[float, float, float, bool]:
    curve = phi_curve(Environment.AI, 0.0, grid, p, tols=tols)
    states = find_steady_states(Environment.AI, 0.0, grid, p, curve=curve, tols=tols)
    k_u = first_unstable(states)
    k_h = None
    if k_u is not None:
        above = [s.k_star for s in states if s.kind == STABLE and s.k_star > k_u]
        k_h = above[0] if above else None
    kinds = [s.kind for s in states]
    two_crossings = kinds.count(UNSTABLE) == 1 and kinds.count(STABLE) == 1
    return (
        math.nan if k_u is None else k_u,
        math.nan if k_h is None else k_h,
        peak_phi(curve)[0],
        two_crossings,
    )


def sensitivity_sweep(
    spec: list[tuple[str, list[float]]],
    p: ModelParams,
    grid: GridSpec,
    n_jobs: int = config.N_JOBS,
    progress: bool = False,
    tols: Tolerances = DEFAULT_TOLERANCES,
) -> list[SensitivityRow]:
    """One-at-a-time sweep around p. Run 0 is the baseline.

    Args:
        spec: (parameter path, values) pairs; paths look like "ai.gamma_w".
        p: Baseline parameters.
        grid: K grid for steady-state scans.
        n_jobs: joblib workers; output order matches serial execution.
        progress: Show a tqdm bar over runs.
        tols: Solver tolerances.

    Returns:
        One SensitivityRow per run, baseline first.

    Raises:
        ValueError: If a path is unknown or a value violates a parameter
            invariant; raised before any solve.
    """
    runs = [("---", math.nan, p)]
    for name, values in spec:
        for value in values:
            try:
                runs.append((name, float(value), p.with_value(name, float(value))))
            except KeyError as e:
                raise ValueError(f"unknown sensitivity parameter '{name}'") from e

    # HO steady states depend only on the shared and ho blocks
    ho_keys = list(dict.fromkeys((params.shared, params.ho) for _, _, params in runs))
    ho_params = [ModelParams(shared=shared, ho=ho, ai=ho) for shared, ho in ho_keys]
    ho_iter = tqdm(ho_params, desc="sweep ho", disable=not progress)
    ai_iter = tqdm(runs, desc="sweep ai", disable=not progress)
    if n_jobs == 1:
        k_ho_values = [_k_ho(hp, grid, tols) for hp in ho_iter]
        ai_rows = [_ai_summary(params, grid, tols) for _, _, params in ai_iter]
    else:
        k_ho_values = Parallel(n_jobs=n_jobs)(delayed(_k_ho)(hp, grid, tols) for hp in ho_iter)
        ai_rows = Parallel(n_jobs=n_jobs)(
            delayed(_ai_summary)(params, grid, tols) for _, _, params in ai_iter
        )
    k_ho_by_key = dict(zip(ho_keys, k_ho_values))

    rows = []
    for run_id, ((name, value, params), ai) in enumerate(zip(runs, ai_rows)):
        k_u, k_h, peak, two = ai
        rows.append(SensitivityRow(
            run_id=run_id, varied_name=name, varied_value=value,
            k_u_ai=k_u, k_h_ai=k_h, peak_phi_ai=peak,
            k_ho=k_ho_by_key[(params.shared, params.ho)], two_crossings=two,
        ))
    return rows


__all__ = [
    "MissingSteadyStateError", "MarginDecomposition", "ResolutionFactors",
    "CompositionReport", "CrowdoutReport", "ConversionReport", "SensitivityRow",
    "margin_decomposition", "decompose_margins", "resolution_race",
    "find_congested_k", "composition_check", "largest_stable", "first_unstable",
    "crowdout_check", "limit_ratio", "eta_bar_from_curve", "critical_eta",
    "basin_eliminated", "peak_phi", "sensitivity_sweep",
]
