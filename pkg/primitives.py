"""Model parameters and closed-form primitive functions.

This module provides:
- Parameter blocks (SharedParams, EnvParams, ModelParams) with invariant checks
- The two environments (human-only and AI) and the two query types
- Pointwise primitives of the parametric family: outside options, the
  answering-cost shifter, private resolution, posting and answering-cost
  distributions, answering surplus and posting semi-elasticities
- Ability-averaged private-failure rates for ability-dependent resolution

Nothing here solves an equilibrium; every function is pure and deterministic.
"""

import math
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from typing import Callable

import numpy as np
from scipy.integrate import trapezoid

import config


class DomainError(ValueError):
    """Raised when a primitive is evaluated outside its domain."""


class ParameterError(ValueError):
    """Raised when a parameter block violates its invariants."""


class Environment(str, Enum):
    """Human-only benchmark or AI regime."""

    HO = "ho"
    AI = "ai"


class QueryType(str, Enum):
    """Routine (L) or knowledge-enhancing (H) query."""

    L = "L"
    H = "H"


# ---------- Parameter blocks ----------

@dataclass(frozen=True)
class SharedParams:
    """Environment-independent parameters.

    `lam` is the depreciation rate (spelled `lambda` in config files).
    `d_bar_l` / `d_bar_h` optionally give type-specific posting-cost means;
    None falls back to the shared `d_bar`.
    """

    lam: float = config.LAMBDA
    pi: float = config.PI
    delta_inc: float = config.DELTA_INC
    beta: float = config.BETA
    u: float = config.U
    c_bar_cost: float = config.C_BAR_COST
    kappa: float = config.KAPPA
    c_bar_support: float = config.C_BAR_SUPPORT
    v_h: float = config.V_H
    v_l: float = config.V_L
    d_bar: float = config.D_BAR
    alpha_lo: float = config.ALPHA_LO
    alpha_hi: float = config.ALPHA_HI
    d_bar_l: float | None = None
    d_bar_h: float | None = None

    def __post_init__(self):
        if not 0.0 < self.lam < 1.0:
            raise ParameterError(f"shared.lambda must lie in (0,1), got {self.lam}")
        if not 0.0 < self.pi < 1.0:
            raise ParameterError(f"shared.pi must lie in (0,1), got {self.pi}")
        for name in ("beta", "u"):
            if getattr(self, name) < 0.0:
                raise ParameterError(f"shared.{name} must be >= 0, got {getattr(self, name)}")
        for name in ("delta_inc", "c_bar_cost", "kappa", "c_bar_support",
                     "v_h", "v_l", "d_bar"):
            if getattr(self, name) <= 0.0:
                raise ParameterError(f"shared.{name} must be > 0, got {getattr(self, name)}")
        for name in ("d_bar_l", "d_bar_h"):
            value = getattr(self, name)
            if value is not None and value <= 0.0:
                raise ParameterError(f"shared.{name} must be > 0 when set, got {value}")
        if self.v_h < self.v_l:
            raise ParameterError(f"shared.v_h ({self.v_h}) must be >= shared.v_l ({self.v_l})")
        if not 0.0 < self.alpha_lo < self.alpha_hi:
            raise ParameterError(
                f"ability bounds must satisfy 0 < alpha_lo < alpha_hi, "
                f"got ({self.alpha_lo}, {self.alpha_hi})"
            )

    def value(self, theta: QueryType) -> float:
        """Posting value V_theta of a resolved query."""
        return self.v_h if theta is QueryType.H else self.v_l

    def posting_scale(self, theta: QueryType) -> float:
        """Mean posting cost for type theta."""
        scale = self.d_bar_h if theta is QueryType.H else self.d_bar_l
        return self.d_bar if scale is None else scale


@dataclass(frozen=True)
class EnvParams:
    """Environment-specific outside-option and private-resolution parameters."""

    gamma_w: float
    delta_w: float
    rho_h: float
    rho_l: float
    rho_slope: float = config.RHO_SLOPE

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0.0:
                raise ParameterError(f"{f.name} must be >= 0, got {getattr(self, f.name)}")
        if self.rho_l < self.rho_h:
            raise ParameterError(
                f"rho_l ({self.rho_l}) must be >= rho_h ({self.rho_h}): routine queries "
                f"are resolved privately at a weakly higher rate"
            )

    def rate(self, theta: QueryType) -> float:
        """Private-resolution rate rho_theta."""
        return self.rho_h if theta is QueryType.H else self.rho_l


def _default_ho() -> EnvParams:
    return EnvParams(**config.HO_PARAMS)


def _default_ai() -> EnvParams:
    return EnvParams(**config.AI_PARAMS)


@dataclass(frozen=True)
class ModelParams:
    """All primitives for both environments."""

    shared: SharedParams = field(default_factory=SharedParams)
    ho: EnvParams = field(default_factory=_default_ho)
    ai: EnvParams = field(default_factory=_default_ai)

    def __post_init__(self):
        # AI weakly improves outside options and private resolution
        for name in ("gamma_w", "delta_w", "rho_h", "rho_l"):
            if getattr(self.ai, name) < getattr(self.ho, name):
                raise ParameterError(
                    f"ai.{name} ({getattr(self.ai, name)}) must be >= "
                    f"ho.{name} ({getattr(self.ho, name)})"
                )

    def env(self, env: Environment) -> EnvParams:
        """Parameter block of one environment."""
        return self.ai if Environment(env) is Environment.AI else self.ho

    def with_value(self, path: str, value: float) -> "ModelParams":
        """Return a copy with one parameter replaced, addressed as `block.field`."""
        block_name, _, field_name = path.partition(".")
        if block_name not in ("shared", "ho", "ai"):
            raise KeyError(f"unknown parameter block in '{path}'")
        block = getattr(self, block_name)
        if field_name == "lambda":
            field_name = "lam"
        if field_name not in {f.name for f in fields(block)}:
            raise KeyError(f"unknown parameter '{path}'")
        return replace(self, **{block_name: replace(block, **{field_name: value})})


def appendix_d_params() -> ModelParams:
    """Parameter values of the parametric example."""
    return ModelParams()


# ---------- Primitive functions ----------

def _check_nonnegative(**values: float) -> None:
    """Raise DomainError naming the first negative or NaN keyword."""
    for name, value in values.items():
        if value < 0.0 or math.isnan(value):
            raise DomainError(f"{name} must be >= 0, got {value}")


def outside_option(alpha: float, k: float, env: Environment, p: ModelParams) -> float:
    """Per-period payoff from own work: alpha (1 + gamma_w K)(1 + pi delta_w)."""
    _check_nonnegative(alpha=alpha, k=k)
    e = p.env(env)
    return alpha * (1.0 + e.gamma_w * k) * (1.0 + p.shared.pi * e.delta_w)


def cost_shift(k: float, p: ModelParams) -> float:
    """Answering cost shifter C(K) = C_bar / (1 + kappa K)."""
    _check_nonnegative(k=k)
    return p.shared.c_bar_cost / (1.0 + p.shared.kappa * k)


def private_resolution(theta: QueryType, k: float, env: Environment, p: ModelParams) -> float:
    """Probability a type-theta query is resolved off-platform: 1 - exp(-rho K)."""
    _check_nonnegative(k=k)
    return -math.expm1(-p.env(env).rate(theta) * k)


def posting_cdf(x: float, p: ModelParams, theta: QueryType | None = None) -> float:
    """Escalation probability Gamma(x) = 1 - exp(-x / d_bar)."""
    _check_nonnegative(x=x)
    scale = p.shared.d_bar if theta is None else p.shared.posting_scale(theta)
    return -math.expm1(-x / scale)


def ability_mass(alpha_star: float, p: ModelParams) -> float:
    """Uniform ability CDF evaluated at the participation cutoff."""
    s = p.shared
    return min(1.0, max(0.0, (alpha_star - s.alpha_lo) / (s.alpha_hi - s.alpha_lo)))


def answer_cdf(c: float, p: ModelParams) -> float:
    """Uniform answering-cost CDF on [0, c_bar]."""
    return min(1.0, max(0.0, c / p.shared.c_bar_support))


def answer_peak_density(p: ModelParams) -> float:
    """Largest value of the answering-cost density (uniform: 1 / c_bar).

    Args:
        p: Model parameters.

    Returns:
        sup f on the cost support, used by the uniqueness bound.
    """
    return 1.0 / p.shared.c_bar_support


def answer_surplus(c_star: float, p: ModelParams) -> float:
    """Expected surplus of a matched answerer, integral of (c* - c) dF over [0, c*]."""
    _check_nonnegative(c_star=c_star)
    c_bar = p.shared.c_bar_support
    if c_star <= c_bar:
        return c_star * c_star / (2.0 * c_bar)
    return c_star - c_bar / 2.0


def semi_elasticity(theta: QueryType, sigma: float, p: ModelParams) -> float:
    """Posting semi-elasticity V gamma(sigma V) / Gamma(sigma V) under exponential Gamma."""
    if not sigma > 0.0:
        raise DomainError(f"sigma must be > 0, got {sigma}")
    v = p.shared.value(theta)
    scale = p.shared.posting_scale(theta)
    x = sigma * v / scale
    return v * math.exp(-x) / (scale * -math.expm1(-x))


def default_rate_fn(theta: QueryType, env: Environment, p: ModelParams) -> Callable:
    """Ability-dependent rate rho_theta + rho_slope * alpha."""
    e = p.env(env)
    base, slope = e.rate(theta), e.rho_slope
    return lambda alpha: base + slope * alpha


def averaged_failure(
    theta: QueryType,
    k: float,
    env: Environment,
    p: ModelParams,
    rate_fn: Callable | None = None,
    nodes: int = config.QUADRATURE_NODES,
) -> float:
    """Ability-averaged private-failure rate, integral of exp(-rate(alpha) K) dPsi.

    Composite trapezoid over the uniform ability density. With a constant
    rate this reproduces 1 - a_theta(K).
    """
    if nodes < 2:
        raise DomainError(f"quadrature needs at least 2 nodes, got {nodes}")
    _check_nonnegative(k=k)
    if rate_fn is None:
        rate_fn = default_rate_fn(theta, env, p)
    s = p.shared
    alphas = np.linspace(s.alpha_lo, s.alpha_hi, nodes)
    rates = np.asarray(rate_fn(alphas), dtype=float) * np.ones_like(alphas)
    if np.any(rates < 0.0):
        raise DomainError("rate_fn must be nonnegative on the ability support")
    value = trapezoid(np.exp(-rates * k), alphas) / (s.alpha_hi - s.alpha_lo)
    return float(min(1.0, max(0.0, value)))


def private_failure(theta: QueryType, k: float, env: Environment, p: ModelParams) -> float:
    """Share of type-theta queries left unresolved privately.

    Uses the closed form 1 - a_theta(K) unless the environment has an
    ability slope, in which case the ability-averaged rate applies.
    """
    if p.env(env).rho_slope == 0.0:
        _check_nonnegative(k=k)
        return math.exp(-p.env(env).rate(theta) * k)
    return averaged_failure(theta, k, env, p)


def shutdown_margin(p: ModelParams) -> float:
    """C(0) - (beta Delta + u); positive means the empty archive shuts the platform down."""
    s = p.shared
    return s.c_bar_cost - (s.beta * s.delta_inc + s.u)


__all__ = [
    "DomainError", "ParameterError", "Environment", "QueryType",
    "SharedParams", "EnvParams", "ModelParams", "appendix_d_params",
    "outside_option", "cost_shift", "private_resolution", "posting_cdf",
    "ability_mass", "answer_cdf", "answer_peak_density", "answer_surplus",
    "semi_elasticity", "averaged_failure", "private_failure", "shutdown_margin",
]
