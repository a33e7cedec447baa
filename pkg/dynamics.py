"""Archive accumulation and steady states.

This module provides:
- creation / step / simulate: knowledge creation h(K; eta) and the law of
  motion K' = (1 - lambda) K + h(K; eta)
- phi_curve: average creation phi = h / K on a K grid (optionally in parallel
  with joblib, with a tqdm progress bar)
- find_steady_states: roots of phi(K) - lambda bracketed on the grid and
  refined by bisection, classified by crossing direction
- check_stability: perturbation trajectories confirming a classification
- audit_branch_jumps: continuity audit of the selected inner branch
- viable_width: distance between the low unstable and the next stable state
"""

import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from tqdm import tqdm

import config
from equilibrium import DEFAULT_TOLERANCES, PeriodEquilibrium, SolverError, Tolerances, solve_period
from primitives import DomainError, Environment, ModelParams, QueryType, private_failure

STABLE = "stable"
UNSTABLE = "unstable"
FROM_BELOW = "from_below"
FROM_ABOVE = "from_above"


@dataclass(frozen=True)
class GridSpec:
    """K grid (k_min, k_max, n), linearly spaced."""

    k_min: float = config.K_GRID[0]
    k_max: float = config.K_GRID[1]
    n: int = config.K_GRID[2]

    def __post_init__(self):
        if not self.k_min > 0.0:
            raise DomainError(f"grid k_min must be > 0, got {self.k_min}")
        if not self.k_max > self.k_min:
            raise DomainError(f"grid k_max ({self.k_max}) must exceed k_min ({self.k_min})")
        if self.n < 2:
            raise DomainError(f"grid n must be >= 2, got {self.n}")

    def points(self) -> np.ndarray:
        """Grid points as an array."""
        return np.linspace(self.k_min, self.k_max, self.n)


@dataclass(frozen=True, eq=False)
class CreationCurve:
    env: Environment
    eta: float
    grid: GridSpec
    k: np.ndarray
    h: np.ndarray
    phi: np.ndarray
    sigma: np.ndarray

    def to_frame(self) -> pd.DataFrame:
        """Curve as a k, h, phi, sigma frame in grid order."""
        return pd.DataFrame({"k": self.k, "h": self.h, "phi": self.phi, "sigma": self.sigma})


@dataclass(frozen=True)
class SteadyState:
    k_star: float
    kind: str
    crossing: str
    residual: float


@dataclass(frozen=True, eq=False)
class Trajectory:
    k_path: np.ndarray
    converged: bool
    limit: float

    def to_frame(self) -> pd.DataFrame:
        """Path as a t, k frame starting at t=0."""
        return pd.DataFrame({"t": np.arange(len(self.k_path)), "k": self.k_path})


@dataclass(frozen=True)
class StabilityCheck:
    state: SteadyState
    end_below: float
    end_above: float
    confirmed: bool


@dataclass(frozen=True)
class BranchJump:
    k_left: float
    k_right: float
    sigma_left: float
    sigma_right: float

    @property
    def jump(self) -> float:
        """Absolute change in sigma across the grid cell."""
        return abs(self.sigma_right - self.sigma_left)


# ---------- Creation and the law of motion ----------

def _check_eta(env: Environment, eta: float) -> None:
    """Reject eta outside [0, 1] and any conversion in the human-only economy."""
    if not 0.0 <= eta <= 1.0:
        raise DomainError(f"eta must lie in [0,1], got {eta}")
    if Environment(env) is Environment.HO and eta > 0.0:
        raise DomainError("eta must be 0 in the human-only environment")


def period(k: float, env: Environment, p: ModelParams, tols: Tolerances = DEFAULT_TOLERANCES) -> PeriodEquilibrium:
    """solve_period with the outer and inner tolerances of `tols`."""
    return solve_period(k, env, p, tol=tols.outer, inner_tol=tols.inner)


def conversion_term(k: float, eta: float, env: Environment, p: ModelParams) -> float:
    """Knowledge logged from privately resolved H-queries, Delta (1 - pi) eta a_H(K)."""
    if eta == 0.0:
        return 0.0
    s = p.shared
    a_h = 1.0 - private_failure(QueryType.H, k, env, p)
    return s.delta_inc * (1.0 - s.pi) * eta * a_h


def creation(
    k: float, env: Environment, eta: float, p: ModelParams, tols: Tolerances = DEFAULT_TOLERANCES
) -> float:
    """Expected new public knowledge h(K; eta) at archive stock k.

    Raises:
        DomainError: If k < 0, eta is outside [0,1], or eta > 0 with HO.
    """
    _check_eta(env, eta)
    return period(k, env, p, tols).creation_base + conversion_term(k, eta, env, p)


def step(
    k: float, env: Environment, eta: float, p: ModelParams, tols: Tolerances = DEFAULT_TOLERANCES
) -> float:
    """One period of the law of motion."""
    return (1.0 - p.shared.lam) * k + creation(k, env, eta, p, tols)


def simulate(
    k0: float,
    n_steps: int,
    env: Environment,
    eta: float,
    p: ModelParams,
    conv_tol: float | None = None,
    tols: Tolerances = DEFAULT_TOLERANCES,
) -> Trajectory:
    """Iterate the law of motion from k0 for at most n_steps periods.

    The path stops early once |K_{t+1} - K_t| < conv_tol (default
    tols.convergence).
    """
    if k0 < 0.0:
        raise DomainError(f"k0 must be >= 0, got {k0}")
    if n_steps < 1:
        raise DomainError(f"n_steps must be >= 1, got {n_steps}")
    conv_tol = tols.convergence if conv_tol is None else conv_tol
    path = [float(k0)]
    converged = False
    for _ in range(n_steps):
        k_next = step(path[-1], env, eta, p, tols)
        path.append(k_next)
        if abs(k_next - path[-2]) < conv_tol:
            converged = True
            break
    return Trajectory(k_path=np.asarray(path), converged=converged, limit=path[-1])


# ---------- Curves ----------

def _curve_point(
    k: float, env: Environment, eta: float, p: ModelParams, tols: Tolerances
) -> tuple[float, float]:
    """(h, sigma) at one grid point."""
    eq = period(k, env, p, tols)
    return eq.creation_base + conversion_term(k, eta, env, p), eq.sigma


def phi_curve(
    env: Environment,
    eta: float,
    grid: GridSpec,
    p: ModelParams,
    n_jobs: int = config.N_JOBS,
    progress: bool = False,
    tols: Tolerances = DEFAULT_TOLERANCES,
) -> CreationCurve:
    """Average creation phi(K; eta) = h(K; eta) / K on a grid.

    Args:
        env: Environment.
        eta: Conversion rate (0 for HO).
        grid: K grid; k_min must be positive.
        p: Model parameters.
        n_jobs: joblib workers; results keep grid order.
        progress: Show a tqdm bar over grid points.
        tols: Solver tolerances.

    Returns:
        CreationCurve with arrays k, h, phi, sigma.
    """
    env = Environment(env)
    _check_eta(env, eta)
    ks = grid.points()
    iterator = tqdm(ks, desc=f"phi {env.value} eta={eta:g}", disable=not progress)
    if n_jobs == 1:
        rows = [_curve_point(float(k), env, eta, p, tols) for k in iterator]
    else:
        rows = Parallel(n_jobs=n_jobs)(
            delayed(_curve_point)(float(k), env, eta, p, tols) for k in iterator
        )
    h = np.array([r[0] for r in rows])
    sigma = np.array([r[1] for r in rows])
    return CreationCurve(env=env, eta=eta, grid=grid, k=ks, h=h, phi=h / ks, sigma=sigma)


# ---------- Steady states ----------

def _refine_crossing(
    lo: float,
    hi: float,
    env: Environment,
    eta: float,
    p: ModelParams,
    refine_tol: float,
    tols: Tolerances,
) -> tuple[float, float]:
    """Bisect h(K) - lambda K on [lo, hi].

    Returns:
        (k_star, |residual|).

    Raises:
        SolverError: If the bracket shrinks to adjacent floats with the
            residual still above refine_tol.
    """
    lam = p.shared.lam

    def excess(k: float) -> float:
        return creation(k, env, eta, p, tols) - lam * k

    lo_positive = excess(lo) > 0.0
    mid, value = lo, 0.0
    for _ in range(config.MAX_BISECTION_ITER):
        mid = 0.5 * (lo + hi)
        value = excess(mid)
        if hi - lo <= refine_tol and abs(value) <= refine_tol:
            break
        if hi - lo <= 4.0 * math.ulp(hi):
            break
        if (value > 0.0) == lo_positive:
            lo = mid
        else:
            hi = mid
    if abs(value) > refine_tol:
        raise SolverError(
            f"no root of phi - lambda in [{lo:g}, {hi:g}] ({env.value}): "
            f"excess creation {value:.3e} at the sign change",
            residual=value,
        )
    return mid, abs(value)


def find_steady_states(
    env: Environment,
    eta: float,
    grid: GridSpec,
    p: ModelParams,
    refine_tol: float | None = None,
    curve: CreationCurve | None = None,
    n_jobs: int = config.N_JOBS,
    tols: Tolerances = DEFAULT_TOLERANCES,
) -> list[SteadyState]:
    """Locate every crossing of phi(K) and lambda on the grid.

    Crossings from below are unstable thresholds, crossings from above are
    stable. An empty list is a valid result.

    Raises:
        SolverError: If phi - lambda changes sign across a branch jump
            without a root inside the bracket.
    """
    env = Environment(env)
    refine_tol = tols.refine if refine_tol is None else refine_tol
    if curve is None:
        curve = phi_curve(env, eta, grid, p, n_jobs=n_jobs, tols=tols)
    above = curve.phi - p.shared.lam > 0.0
    states = []
    for i in np.flatnonzero(above[1:] != above[:-1]):
        k_star, residual = _refine_crossing(
            float(curve.k[i]), float(curve.k[i + 1]), env, eta, p, refine_tol, tols
        )
        from_below = bool(above[i + 1])
        states.append(SteadyState(
            k_star=k_star,
            kind=UNSTABLE if from_below else STABLE,
            crossing=FROM_BELOW if from_below else FROM_ABOVE,
            residual=residual,
        ))
    return states


def states_frame(states: list[SteadyState]) -> pd.DataFrame:
    """Tabulate steady states for CSV output.

    Args:
        states: Steady states in grid order.

    Returns:
        DataFrame with columns k_star, kind, crossing, residual (empty when
        there are no states).
    """
    return pd.DataFrame(
        [(s.k_star, s.kind, s.crossing, s.residual) for s in states],
        columns=["k_star", "kind", "crossing", "residual"],
    )


def check_stability(
    state: SteadyState,
    env: Environment,
    eta: float,
    p: ModelParams,
    perturbation: float = config.STABILITY_PERTURBATION,
    steps: int = config.STABILITY_STEPS,
    tols: Tolerances = DEFAULT_TOLERANCES,
) -> StabilityCheck:
    """Confirm a classification by simulating from k*(1 - d) and k*(1 + d).

    A stable state is confirmed when both paths end within 1e-4 * max(k*, 1)
    of k*; an unstable one when both end farther than d * k* away.
    """
    k_star = state.k_star
    end_below = simulate(k_star * (1.0 - perturbation), steps, env, eta, p, tols=tols).limit
    end_above = simulate(k_star * (1.0 + perturbation), steps, env, eta, p, tols=tols).limit
    gaps = (abs(end_below - k_star), abs(end_above - k_star))
    if state.kind == STABLE:
        confirmed = max(gaps) <= 1e-4 * max(k_star, 1.0)
    else:
        confirmed = min(gaps) > perturbation * k_star
    return StabilityCheck(state=state, end_below=end_below, end_above=end_above, confirmed=confirmed)


def audit_branch_jumps(
    curve: CreationCurve, threshold: float = config.BRANCH_JUMP_THRESHOLD
) -> list[BranchJump]:
    """Adjacent grid points whose solved sigma differs by more than threshold."""
    jumps = np.flatnonzero(np.abs(np.diff(curve.sigma)) > threshold)
    return [
        BranchJump(
            k_left=float(curve.k[i]), k_right=float(curve.k[i + 1]),
            sigma_left=float(curve.sigma[i]), sigma_right=float(curve.sigma[i + 1]),
        )
        for i in jumps
    ]


def viable_width(states: list[SteadyState]) -> float | None:
    """K_H - K_U for the first unstable state and the next stable one above it."""
    unstable = [s for s in states if s.kind == UNSTABLE]
    if not unstable:
        return None
    k_u = unstable[0].k_star
    stable = [s for s in states if s.kind == STABLE and s.k_star > k_u]
    if not stable:
        return None
    return stable[0].k_star - k_u


__all__ = [
    "STABLE", "UNSTABLE", "FROM_BELOW", "FROM_ABOVE",
    "GridSpec", "CreationCurve", "SteadyState", "Trajectory", "StabilityCheck",
    "BranchJump", "period", "conversion_term", "creation", "step", "simulate",
    "phi_curve", "find_steady_states", "states_frame", "check_stability",
    "audit_branch_jumps", "viable_width",
]
