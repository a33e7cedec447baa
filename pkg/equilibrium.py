"""Period equilibrium solver.

This module provides:
- inner_map: one pass through the inner loop (posting, flows, composition,
  answering cutoff, matching) from a candidate resolution probability
- solve_inner: largest fixed point of the inner loop by descending scan and
  bisection (the collapsed state when no positive fixed point exists)
- participation_residual / solve_period: outer root-find on the ability
  cutoff with corner handling, memoised per process
- equilibrium_conditions: per-condition consistency flags of a solved period
- uniqueness_bound: sufficient condition for a unique inner fixed point
- solve_congestion, cohort_stock, lifetime_resolution: multi-period query
  lifetimes with a stock of active queries
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

import config
from primitives import (
    DomainError, Environment, ModelParams, QueryType,
    ability_mass, answer_cdf, answer_peak_density, answer_surplus, cost_shift,
    outside_option, posting_cdf, private_failure,
)


class SolverError(RuntimeError):
    """Raised when an iterative solve fails to reach its tolerance."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class BracketingError(SolverError):
    """Raised when the participation residual cannot be bracketed."""

    def __init__(self, message: str, samples: list[tuple[float, float]]):
        super().__init__(message)
        self.samples = samples


@dataclass(frozen=True)
class Tolerances:
    """Solver tolerances shared by the equilibrium, dynamics and analysis layers."""

    inner: float = config.INNER_TOL
    outer: float = config.OUTER_TOL
    refine: float = config.REFINE_TOL
    convergence: float = config.CONVERGENCE_TOL

    def __post_init__(self):
        for name in ("inner", "outer", "refine", "convergence"):
            value = getattr(self, name)
            if not value > 0.0:
                raise DomainError(f"tolerances.{name} must be > 0, got {value}")


DEFAULT_TOLERANCES = Tolerances()


@dataclass(frozen=True)
class InnerState:
    """Every object of one inner-loop pass.

    `sigma` is the updated resolution probability mu * F(c*); `sigma_in` is
    the candidate it was computed from and `residual` their difference.
    """

    sigma: float
    sigma_in: float
    u_l: float
    u_h: float
    m_l: float
    m_h: float
    q_l: float
    q_h: float
    q_total: float
    omega: float
    delta_bar: float
    c_star: float
    mu: float
    pool: float
    residual: float

    @property
    def collapsed(self) -> bool:
        """No queries reach the platform or none are resolved."""
        return self.q_total == 0.0 or self.sigma == 0.0


@dataclass(frozen=True)
class PeriodEquilibrium:
    """Solved period equilibrium at (k, env).

    corner is one of "interior", "full" (every agent participates),
    "drain" (no participation sustainable) or "shutdown" (no positive inner
    fixed point even at full participation).
    """

    k: float
    env: Environment
    alpha_star: float
    pool: float
    surplus: float
    outside: float
    inner: InnerState
    creation_base: float
    collapsed: bool
    corner: str
    residual: float

    @property
    def sigma(self) -> float:
        """Resolution probability of the selected inner fixed point."""
        return self.inner.sigma

    @property
    def q_h(self) -> float:
        return self.inner.q_h

    @property
    def q_total(self) -> float:
        return self.inner.q_total

    @property
    def congested(self) -> bool:
        """Short side is the contributor pool."""
        return not self.collapsed and self.pool < self.inner.q_total


@dataclass(frozen=True)
class CongestionSolution:
    mu: float
    hazard: float
    sigma_lifetime: float
    stock: float


@dataclass(frozen=True)
class UniquenessReport:
    lhs: float
    satisfied: bool
    sup_gap: float


# ---------- Inner loop ----------

@dataclass(frozen=True, slots=True)
class _InnerInputs:
    """State-dependent constants of the inner loop at a given (k, env)."""

    pi: float
    delta: float
    beta: float
    u: float
    cost: float
    c_bar: float
    v_l: float
    v_h: float
    d_l: float
    d_h: float
    fail_l: float
    fail_h: float


def _inner_inputs(k: float, env: Environment, p: ModelParams) -> _InnerInputs:
    s = p.shared
    return _InnerInputs(
        pi=s.pi, delta=s.delta_inc, beta=s.beta, u=s.u,
        cost=cost_shift(k, p), c_bar=s.c_bar_support,
        v_l=s.v_l, v_h=s.v_h,
        d_l=s.posting_scale(QueryType.L), d_h=s.posting_scale(QueryType.H),
        fail_l=private_failure(QueryType.L, k, env, p),
        fail_h=private_failure(QueryType.H, k, env, p),
    )


def _sigma_hat(sigma: float, pool: float, f: _InnerInputs) -> float:
    m_h = -math.expm1(-sigma * f.v_h / f.d_h)
    m_l = -math.expm1(-sigma * f.v_l / f.d_l)
    q_h = m_h * f.fail_h
    q_total = f.pi * m_l * f.fail_l + (1.0 - f.pi) * q_h
    if q_total <= 0.0:
        return 0.0
    omega = (1.0 - f.pi) * q_h / q_total
    c_star = max(0.0, f.beta * f.delta * omega + f.u - f.cost)
    mu = min(1.0, pool / q_total)
    return mu * min(1.0, c_star / f.c_bar)


def _sigma_hat_grid(sigma: np.ndarray, pool: float, f: _InnerInputs) -> np.ndarray:
    m_h = -np.expm1(-sigma * f.v_h / f.d_h)
    m_l = -np.expm1(-sigma * f.v_l / f.d_l)
    q_h = m_h * f.fail_h
    q_total = f.pi * m_l * f.fail_l + (1.0 - f.pi) * q_h
    positive = q_total > 0.0
    safe_q = np.where(positive, q_total, 1.0)
    omega = np.where(positive, (1.0 - f.pi) * q_h / safe_q, 0.0)
    mu = np.where(positive, np.minimum(1.0, pool / safe_q), 0.0)
    c_star = np.maximum(0.0, f.beta * f.delta * omega + f.u - f.cost)
    return mu * np.clip(c_star / f.c_bar, 0.0, 1.0)


def _check_pool(pool: float) -> None:
    if not 0.0 <= pool <= 1.0:
        raise DomainError(f"pool must lie in [0,1], got {pool}")


def inner_map(sigma_in: float, k: float, pool: float, env: Environment, p: ModelParams) -> InnerState:
    """Run one pass of the inner loop from a candidate resolution probability.

    Args:
        sigma_in: Candidate resolution probability in [0,1].
        k: Archive stock.
        pool: Participating contributor mass in [0,1].
        env: Environment.
        p: Model parameters.

    Returns:
        InnerState whose `sigma` field is mu * F(c*).

    Raises:
        DomainError: If sigma_in, pool or k is out of range.
    """
    if not 0.0 <= sigma_in <= 1.0:
        raise DomainError(f"sigma_in must lie in [0,1], got {sigma_in}")
    _check_pool(pool)
    f = _inner_inputs(k, Environment(env), p)
    return _inner_state(sigma_in, pool, f, p)


def _inner_state(sigma_in: float, pool: float, f: _InnerInputs, p: ModelParams) -> InnerState:
    u_h, u_l = sigma_in * f.v_h, sigma_in * f.v_l
    m_h = posting_cdf(u_h, p, QueryType.H)
    m_l = posting_cdf(u_l, p, QueryType.L)
    q_h, q_l = m_h * f.fail_h, m_l * f.fail_l
    q_total = f.pi * q_l + (1.0 - f.pi) * q_h
    if q_total > 0.0:
        omega = (1.0 - f.pi) * q_h / q_total
        mu = min(1.0, pool / q_total)
    else:
        omega, mu = 0.0, 0.0
    delta_bar = f.delta * omega
    c_star = max(0.0, f.beta * delta_bar + f.u - f.cost)
    sigma = mu * answer_cdf(c_star, p)
    return InnerState(
        sigma=sigma, sigma_in=sigma_in, u_l=u_l, u_h=u_h, m_l=m_l, m_h=m_h,
        q_l=q_l, q_h=q_h, q_total=q_total, omega=omega, delta_bar=delta_bar,
        c_star=c_star, mu=mu, pool=pool, residual=sigma - sigma_in,
    )


def solve_inner(
    k: float,
    pool: float,
    env: Environment,
    p: ModelParams,
    tol: float = config.INNER_TOL,
    grid_n: int = config.SCAN_POINTS,
) -> InnerState:
    """Largest fixed point of the inner loop.

    Scans g(sigma) = sigma_hat(sigma) - sigma downward from 1, brackets the
    first point with g >= 0 and bisects to |g| <= tol. Returns the collapsed
    state (sigma = 0) when g < 0 on the whole scan.

    Raises:
        DomainError: On invalid tolerance, grid size or pool.
        SolverError: If bisection exhausts its iteration cap.
    """
    if tol <= 0.0:
        raise DomainError(f"tol must be > 0, got {tol}")
    if grid_n < 16:
        raise DomainError(f"grid_n must be >= 16, got {grid_n}")
    _check_pool(pool)
    f = _inner_inputs(k, Environment(env), p)
    sigma_fp = _largest_fixed_point(pool, f, tol, grid_n)
    return _inner_state(sigma_fp, pool, f, p)


def _largest_fixed_point(pool: float, f: _InnerInputs, tol: float, grid_n: int) -> float:
    grid = np.linspace(1.0, 0.0, grid_n)
    grid[-1] = config.SIGMA_FLOOR
    gaps = _sigma_hat_grid(grid, pool, f) - grid
    hits = np.flatnonzero(gaps >= 0.0)
    if hits.size == 0:
        return 0.0
    idx = int(hits[0])
    if idx == 0 or gaps[idx] <= tol:
        return float(grid[idx])

    # g(lo) >= 0 > g(hi)
    lo, hi = float(grid[idx]), float(grid[idx - 1])
    gap = float(gaps[idx])
    for _ in range(config.MAX_BISECTION_ITER):
        mid = 0.5 * (lo + hi)
        gap = _sigma_hat(mid, pool, f) - mid
        if abs(gap) <= tol:
            return mid
        if gap > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4.0 * math.ulp(hi):
            break
    raise SolverError(
        f"inner fixed point did not reach tol={tol:g} (last residual {gap:.3e})",
        residual=gap,
    )


# ---------- Outer loop ----------

def period_surplus(inner: InnerState, pool: float, p: ModelParams) -> float:
    """Participation payoff min{1, Q/pool} * Pi(c*); zero without contributors or posts."""
    if pool <= 0.0 or inner.collapsed:
        return 0.0
    return min(1.0, inner.q_total / pool) * answer_surplus(inner.c_star, p)


def participation_residual(
    alpha_cand: float,
    k: float,
    env: Environment,
    p: ModelParams,
    inner_tol: float = config.INNER_TOL,
) -> float:
    """S - w(alpha_cand, K) with the pool implied by the candidate cutoff.

    At the lower support the pool is floored at POOL_FLOOR, so the value is
    the limit from the right.
    """
    s = p.shared
    if not s.alpha_lo <= alpha_cand <= s.alpha_hi:
        raise DomainError(
            f"alpha_cand must lie in [{s.alpha_lo}, {s.alpha_hi}], got {alpha_cand}"
        )
    pool = max(ability_mass(alpha_cand, p), config.POOL_FLOOR)
    inner = solve_inner(k, pool, env, p, tol=inner_tol)
    return period_surplus(inner, pool, p) - outside_option(alpha_cand, k, env, p)


def solve_period(
    k: float,
    env: Environment,
    p: ModelParams,
    tol: float = config.OUTER_TOL,
    inner_tol: float = config.INNER_TOL,
) -> PeriodEquilibrium:
    """Solve the period equilibrium at archive stock k.

    Args:
        k: Archive stock (>= 0).
        env: Environment.
        p: Model parameters.
        tol: Outer tolerance on |S - w(alpha*)|.
        inner_tol: Inner fixed-point tolerance.

    Returns:
        PeriodEquilibrium. Collapsed outcomes report pool=0, S=0 and
        alpha*=alpha_lo.

    Raises:
        DomainError: If k < 0.
        SolverError: If a solve fails to reach tolerance.
        BracketingError: If the outer root-find fails inside a valid bracket.
    """
    if k < 0.0 or math.isnan(k):
        raise DomainError(f"k must be >= 0, got {k}")
    return _solve_period_cached(float(k), Environment(env), p, tol, inner_tol)


@lru_cache(maxsize=65536)
def _solve_period_cached(
    k: float, env: Environment, p: ModelParams, tol: float, inner_tol: float
) -> PeriodEquilibrium:
    full = solve_inner(k, 1.0, env, p, tol=inner_tol)
    if full.collapsed:
        return _collapsed(k, env, p, "shutdown", inner_tol)

    r_hi = _pool_residual(1.0, k, env, p, inner_tol)
    if r_hi >= 0.0:
        return _assemble(k, env, p, 1.0, "full", inner_tol)

    log_lo = math.log(config.POOL_FLOOR)
    r_lo = _pool_residual(config.POOL_FLOOR, k, env, p, inner_tol)
    if r_lo <= 0.0:
        return _collapsed(k, env, p, "drain", inner_tol)

    # S scales like Q/pool near alpha_lo; the root is taken in log(pool).
    def residual(log_pool: float) -> float:
        return _pool_residual(math.exp(log_pool), k, env, p, inner_tol)

    try:
        log_star, info = brentq(
            residual, log_lo, 0.0, xtol=1e-13,
            maxiter=config.MAX_BRENT_ITER, full_output=True, disp=False,
        )
    except (ValueError, RuntimeError) as e:
        raise BracketingError(
            f"participation cutoff solve failed at K={k:g} ({env.value}): {e}",
            samples=_residual_samples(k, env, p, inner_tol),
        ) from e
    if not info.converged:
        raise SolverError(
            f"Brent did not converge at K={k:g} ({env.value}): {info.flag}",
            residual=residual(log_star),
        )
    eq = _assemble(k, env, p, math.exp(log_star), "interior", inner_tol)
    if abs(eq.residual) > tol:
        raise SolverError(
            f"participation residual {eq.residual:.3e} exceeds tol={tol:g} "
            f"at K={k:g} ({env.value})",
            residual=eq.residual,
        )
    return eq


def _residual_samples(
    k: float, env: Environment, p: ModelParams, inner_tol: float, n: int = 9
) -> list[tuple[float, float]]:
    alphas = np.linspace(p.shared.alpha_lo, p.shared.alpha_hi, n)
    return [
        (float(a), participation_residual(float(a), k, env, p, inner_tol))
        for a in alphas
    ]


def _cutoff_for_pool(pool: float, p: ModelParams) -> float:
    s = p.shared
    if pool >= 1.0:
        return s.alpha_hi
    return s.alpha_lo + pool * (s.alpha_hi - s.alpha_lo)


def _pool_residual(
    pool: float, k: float, env: Environment, p: ModelParams, inner_tol: float
) -> float:
    """S - w at the cutoff whose contributor mass is pool."""
    inner = solve_inner(k, pool, env, p, tol=inner_tol)
    return period_surplus(inner, pool, p) - outside_option(_cutoff_for_pool(pool, p), k, env, p)


def _assemble(
    k: float, env: Environment, p: ModelParams, pool: float, corner: str, inner_tol: float
) -> PeriodEquilibrium:
    alpha_star = _cutoff_for_pool(pool, p)
    inner = solve_inner(k, pool, env, p, tol=inner_tol)
    surplus = period_surplus(inner, pool, p)
    outside = outside_option(alpha_star, k, env, p)
    s = p.shared
    return PeriodEquilibrium(
        k=k, env=env, alpha_star=alpha_star, pool=pool, surplus=surplus,
        outside=outside, inner=inner,
        creation_base=s.delta_inc * (1.0 - s.pi) * inner.q_h * inner.sigma,
        collapsed=inner.collapsed, corner=corner, residual=surplus - outside,
    )


def _collapsed(
    k: float, env: Environment, p: ModelParams, corner: str, inner_tol: float
) -> PeriodEquilibrium:
    alpha_lo = p.shared.alpha_lo
    inner = inner_map(0.0, k, 0.0, env, p)
    outside = outside_option(alpha_lo, k, env, p)
    return PeriodEquilibrium(
        k=k, env=env, alpha_star=alpha_lo, pool=0.0, surplus=0.0,
        outside=outside, inner=inner, creation_base=0.0,
        collapsed=True, corner=corner, residual=-outside,
    )


def equilibrium_conditions(eq: PeriodEquilibrium, p: ModelParams, atol: float = 1e-8) -> dict[str, bool]:
    """Evaluate each period-equilibrium condition on a solved tuple.

    Keys: posting, flows, composition, cutoff, matching, resolution,
    surplus, participation.
    """
    s = p.shared
    st = eq.inner
    fail_h = private_failure(QueryType.H, eq.k, eq.env, p)
    fail_l = private_failure(QueryType.L, eq.k, eq.env, p)

    def close(a: float, b: float) -> bool:
        return abs(a - b) <= atol

    q_total = s.pi * st.q_l + (1.0 - s.pi) * st.q_h
    omega = (1.0 - s.pi) * st.q_h / q_total if q_total > 0.0 else 0.0
    mu = min(1.0, eq.pool / q_total) if q_total > 0.0 else 0.0
    c_star = max(0.0, s.beta * s.delta_inc * omega + s.u - cost_shift(eq.k, p))

    if eq.collapsed:
        participation = close(eq.surplus, 0.0) and close(eq.pool, 0.0)
    elif eq.corner == "full":
        participation = eq.surplus >= eq.outside - atol
    else:
        participation = close(eq.surplus, eq.outside)

    return {
        "posting": close(st.m_h, posting_cdf(st.sigma * s.v_h, p, QueryType.H))
        and close(st.m_l, posting_cdf(st.sigma * s.v_l, p, QueryType.L)),
        "flows": close(st.q_h, st.m_h * fail_h) and close(st.q_l, st.m_l * fail_l)
        and close(st.q_total, q_total),
        "composition": close(st.omega, omega) and close(st.delta_bar, s.delta_inc * omega),
        "cutoff": close(st.c_star, c_star),
        "matching": close(st.mu, mu),
        "resolution": close(st.sigma, mu * answer_cdf(c_star, p)),
        "surplus": close(eq.surplus, period_surplus(st, eq.pool, p)),
        "participation": participation,
    }


# ---------- Diagnostics ----------

def uniqueness_bound(
    env: Environment,
    p: ModelParams,
    sigma_grid_n: int = config.UNIQUENESS_GRID_POINTS,
) -> UniquenessReport:
    """Sufficient condition for a unique inner fixed point.

    lhs = beta * Delta * f_bar * sup_gap / 4 where sup_gap is the largest
    positive H-minus-L semi-elasticity gap on sigma = i / n, i = 1..n.
    The posting semi-elasticities do not depend on the environment.
    """
    if sigma_grid_n < 16:
        raise DomainError(f"sigma_grid_n must be >= 16, got {sigma_grid_n}")
    Environment(env)
    s = p.shared
    sigmas = np.arange(1, sigma_grid_n + 1) / sigma_grid_n

    def elasticity(v: float, scale: float) -> np.ndarray:
        return (v / scale) / np.expm1(sigmas * v / scale)

    gap = (elasticity(s.v_h, s.posting_scale(QueryType.H))
           - elasticity(s.v_l, s.posting_scale(QueryType.L)))
    sup_gap = float(max(0.0, gap.max()))
    lhs = s.beta * s.delta_inc * answer_peak_density(p) * sup_gap / 4.0
    return UniquenessReport(lhs=lhs, satisfied=lhs < 1.0, sup_gap=sup_gap)


# ---------- Multi-period lifetimes ----------

def _check_t_life(t_life: int) -> None:
    if isinstance(t_life, bool) or int(t_life) != t_life or t_life < 1:
        raise DomainError(f"t_life must be an integer >= 1, got {t_life}")


def lifetime_resolution(hazard: float, t_life: int) -> float:
    """Probability of resolution within t_life periods, 1 - (1 - hazard)^T."""
    _check_t_life(t_life)
    if not 0.0 <= hazard <= 1.0:
        raise DomainError(f"hazard must lie in [0,1], got {hazard}")
    if t_life == 1:
        return hazard
    if hazard == 1.0:
        return 1.0
    return -math.expm1(t_life * math.log1p(-hazard))


def cohort_stock(q_total: float, hazard: float, t_life: int) -> float:
    """Active-query stock: Q times the surviving share summed over T cohorts."""
    _check_t_life(t_life)
    if t_life == 1:
        return q_total
    if hazard == 0.0:
        return t_life * q_total
    return q_total * lifetime_resolution(hazard, t_life) / hazard


def solve_congestion(
    pool: float,
    q_total: float,
    c_star: float,
    t_life: int,
    p: ModelParams,
    tol: float = config.INNER_TOL,
) -> CongestionSolution:
    """Match probability when queries stay open for t_life periods.

    Solves mu = min{1, pool / X(mu)} with X the active-query stock.

    Raises:
        DomainError: On invalid t_life, pool or q_total.
        SolverError: If bisection does not converge.
    """
    _check_t_life(t_life)
    if q_total < 0.0:
        raise DomainError(f"q_total must be >= 0, got {q_total}")
    if pool < 0.0:
        raise DomainError(f"pool must be >= 0, got {pool}")
    t_life = int(t_life)
    if q_total == 0.0:
        return CongestionSolution(mu=0.0, hazard=0.0, sigma_lifetime=0.0, stock=0.0)

    answer_rate = answer_cdf(c_star, p)
    if answer_rate == 0.0:
        stock = t_life * q_total
        return CongestionSolution(
            mu=min(1.0, pool / stock), hazard=0.0, sigma_lifetime=0.0, stock=stock,
        )

    def stock_at(mu: float) -> float:
        return cohort_stock(q_total, mu * answer_rate, t_life)

    if pool >= stock_at(1.0):
        mu = 1.0
    elif t_life == 1:
        mu = pool / q_total
    elif pool == 0.0:
        mu = 0.0
    else:
        # r(lo) >= 0 > r(hi)
        lo, hi = 0.0, 1.0
        for _ in range(config.MAX_BISECTION_ITER):
            mid = 0.5 * (lo + hi)
            if min(1.0, pool / stock_at(mid)) - mid >= 0.0:
                lo = mid
            else:
                hi = mid
            if hi - lo <= tol:
                break
        else:
            raise SolverError(
                f"congestion fixed point did not converge (bracket width {hi - lo:.3e})",
                residual=hi - lo,
            )
        mu = 0.5 * (lo + hi)

    hazard = mu * answer_rate
    return CongestionSolution(
        mu=mu, hazard=hazard,
        sigma_lifetime=lifetime_resolution(hazard, t_life),
        stock=stock_at(mu),
    )


__all__ = [
    "SolverError", "BracketingError", "Tolerances", "DEFAULT_TOLERANCES",
    "InnerState", "PeriodEquilibrium",
    "CongestionSolution", "UniquenessReport", "inner_map", "solve_inner",
    "period_surplus", "participation_residual", "solve_period",
    "equilibrium_conditions", "uniqueness_bound", "lifetime_resolution",
    "cohort_stock", "solve_congestion",
]
