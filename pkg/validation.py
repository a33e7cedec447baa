"""Invariant suite and reference checks for the knowledge-commons model.

run_validation returns one Check per property. Property checks run on any
parameters; golden checks compare against the reference values in config
and run only when the parameters equal the preset defaults. Informational
checks are reported but never fail a run.
"""

import math
from dataclasses import dataclass

import numpy as np

import config
from analysis import (
    basin_eliminated, critical_eta, crowdout_check, decompose_margins,
    first_unstable, largest_stable, limit_ratio, peak_phi, sensitivity_sweep,
)
from dynamics import (
    GridSpec, audit_branch_jumps, check_stability, creation,
    find_steady_states, period, phi_curve, viable_width,
)
from equilibrium import equilibrium_conditions, solve_congestion, uniqueness_bound
from io_utils import RunConfig
from primitives import Environment, QueryType, private_failure, semi_elasticity, shutdown_margin

PASS, FAIL, INFO, SKIP = "pass", "fail", "info", "skip"


@dataclass(frozen=True)
class Check:
    name: str
    status: str
    detail: str


def _verdict(ok: bool) -> str:
    return PASS if ok else FAIL


def _near(value: float, target: float, tol: float) -> bool:
    return value is not None and not math.isnan(value) and abs(value - target) <= tol


def _fmt(value: float | None) -> str:
    return "none" if value is None else f"{value:.4f}"


# ---------- Property checks ----------

def _model_checks(cfg: RunConfig) -> list[Check]:
    p = cfg.params
    s = p.shared
    margin = shutdown_margin(p)
    checks = [Check(
        "empty_archive_shutdown", INFO,
        f"C(0) - (beta*Delta + u) = {margin:.4g} ({'holds' if margin > 0 else 'violated'})",
    )]

    sigmas = np.linspace(0.01, 1.0, 100)
    worst_gap = max(
        semi_elasticity(QueryType.H, float(x), p) - semi_elasticity(QueryType.L, float(x), p)
        for x in sigmas
    )
    shared_scale = s.d_bar_l is None and s.d_bar_h is None
    checks.append(Check(
        "semi_elasticity_gap",
        _verdict(worst_gap < 0.0) if shared_scale and s.v_h > s.v_l else INFO,
        f"max gap on 100-point grid = {worst_gap:.4g}",
    ))

    report = uniqueness_bound(Environment.AI, p)
    # with a shared posting scale the H-minus-L gap is never positive
    checks.append(Check(
        "uniqueness_bound", _verdict(report.lhs == 0.0) if shared_scale else INFO,
        f"lhs = {report.lhs:.4g}, sup_gap = {report.sup_gap:.4g}, satisfied = {report.satisfied}",
    ))
    return checks


def _equilibrium_checks(cfg: RunConfig, rng: np.random.Generator) -> list[Check]:
    p, tols = cfg.params, cfg.tolerances
    k_lo, k_hi = config.SAMPLE_K_RANGE
    worst_residual, failed = 0.0, []
    for k in rng.uniform(k_lo, k_hi, config.EQUILIBRIUM_SAMPLES):
        env = Environment.AI if rng.random() < 0.5 else Environment.HO
        eq = period(float(k), env, p, tols)
        if not eq.collapsed:
            worst_residual = max(worst_residual, abs(eq.inner.residual))
        flags = equilibrium_conditions(eq, p)
        failed += [f"{name}@K={k:.3f}/{env.value}" for name, ok in flags.items() if not ok]
    checks = [
        Check("inner_fixed_point_residual", _verdict(worst_residual <= tols.inner),
              f"max |sigma_hat - sigma| = {worst_residual:.3e}"),
        Check("equilibrium_conditions", _verdict(not failed),
              "all conditions hold" if not failed else ", ".join(failed[:5])),
    ]

    # collapsed draws do not count toward the sample size
    worst, used, draws = 0.0, 0, 0
    while used < config.IDENTITY_SAMPLES and draws < config.MAX_IDENTITY_DRAWS:
        draws += 1
        d = decompose_margins(float(rng.uniform(k_lo, k_hi)), p, tols)
        if d.s_ho == 0.0 and d.s_ai == 0.0:
            continue
        used += 1
        worst = max(worst, abs(d.flow_margin + d.resolution_margin - d.total))
    checks.append(Check(
        "decomposition_identity",
        _verdict(used == config.IDENTITY_SAMPLES and worst <= 1e-12),
        f"max error {worst:.2e} over {used} non-collapsed states",
    ))
    return checks


def _congestion_checks(cfg: RunConfig, rng: np.random.Generator) -> list[Check]:
    p = cfg.params
    c_bar = p.shared.c_bar_support
    worst_identity, worst_t1 = 0.0, 0.0
    for _ in range(config.IDENTITY_SAMPLES):
        pool, q_total = rng.uniform(0.0, 1.0), rng.uniform(0.01, 1.0)
        c_star = rng.uniform(0.0, 1.5 * c_bar)
        sol = solve_congestion(pool, q_total, c_star, int(rng.integers(1, 8)), p)
        worst_identity = max(worst_identity, abs(sol.stock * sol.hazard - q_total * sol.sigma_lifetime))

        one = solve_congestion(pool, q_total, c_star, 1, p)
        mu = min(1.0, pool / q_total)
        worst_t1 = max(
            worst_t1,
            abs(one.stock - q_total), abs(one.mu - mu),
            abs(one.sigma_lifetime - mu * min(1.0, c_star / c_bar)),
        )
    return [
        Check("cohort_identity", _verdict(worst_identity <= 1e-10),
              f"max |X*hazard - Q*sigma| = {worst_identity:.2e}"),
        Check("single_period_congestion", _verdict(worst_t1 == 0.0),
              f"max deviation from the one-period closed form = {worst_t1:.2e}"),
    ]


def _dynamics_checks(cfg: RunConfig, curves: dict, states: dict) -> list[Check]:
    p, tols = cfg.params, cfg.tolerances
    s = p.shared
    checks = []

    eta = 0.25
    base = curves[Environment.AI]
    worst = 0.0
    for k, phi0 in zip(base.k[::10], base.phi[::10]):
        k = float(k)
        shifted = creation(k, Environment.AI, eta, p, tols) / k
        a_h = 1.0 - private_failure(QueryType.H, k, Environment.AI, p)
        worst = max(worst, abs(shifted - phi0 - s.delta_inc * (1.0 - s.pi) * eta * a_h / k))
    checks.append(Check("eta_shift_additivity", _verdict(worst <= 1e-12), f"max error {worst:.2e}"))

    unconfirmed, total = [], 0
    for env in Environment:
        for state in states[env]:
            total += 1
            result = check_stability(state, env, 0.0, p, tols=tols)
            if not result.confirmed:
                unconfirmed.append(f"{env.value}:{state.k_star:.3f}/{state.kind}")
    checks.append(Check(
        "stability_by_perturbation", _verdict(not unconfirmed),
        f"{total} states confirmed" if not unconfirmed else "unconfirmed " + ", ".join(unconfirmed),
    ))

    worst_residual = max(
        [st.residual for env in Environment for st in states[env]], default=0.0
    )
    checks.append(Check(
        "steady_state_residuals", _verdict(worst_residual <= tols.refine),
        f"max |h - lambda K| = {worst_residual:.2e}",
    ))

    jumps = {env: audit_branch_jumps(curves[env]) for env in Environment}
    checks.append(Check(
        "branch_jumps", INFO,
        ", ".join(f"{env.value}: {len(j)} jumps" for env, j in jumps.items()),
    ))
    return checks


# ---------- Golden checks ----------

def _golden_checks(cfg: RunConfig, curves: dict, states: dict, progress: bool) -> list[Check]:
    p, grid, tols, n_jobs = cfg.params, cfg.grid, cfg.tolerances, cfg.n_jobs
    ref, tol = config.REFERENCE, config.GOLDEN_TOLERANCE
    checks = []

    for env, k_h_key, width_key in ((Environment.AI, "k_h_ai", "width_ai"),
                                    (Environment.HO, "k_ho", "width_ho")):
        found = states[env]
        k_u = first_unstable(found)
        k_h = largest_stable(found)
        width = viable_width(found)
        ok = (_near(k_u, ref[f"k_u_{env.value}"], tol["k_u"])
              and _near(k_h, ref[k_h_key], tol["k_h"])
              and _near(width, ref[width_key], tol["width"]))
        checks.append(Check(
            f"steady_states_{env.value}", _verdict(ok),
            f"K_U = {_fmt(k_u)}, K_H = {_fmt(k_h)}, width = {_fmt(width)}",
        ))

        phi_max, k_at = peak_phi(curves[env])
        ok = (_near(phi_max, ref[f"peak_phi_{env.value}"], tol["peak_phi"])
              and _near(k_at, ref[f"peak_k_{env.value}"], tol["peak_k"]))
        checks.append(Check(f"peak_phi_{env.value}", _verdict(ok), f"peak {phi_max:.4f} at K = {k_at:.4f}"))

    limit = limit_ratio(p)
    checks.append(Check(
        "eta_limit", _verdict(_near(limit, ref["eta_limit"], tol["eta_limit"])), f"limit = {limit:.15g}",
    ))
    report = critical_eta(p, grid, ai_states=states[Environment.AI], n_jobs=n_jobs, progress=progress, tols=tols)
    low = basin_eliminated(ref["eta_low"], p, grid, ai_states=states[Environment.AI], n_jobs=n_jobs, tols=tols)
    high = basin_eliminated(ref["eta_high"], p, grid, ai_states=states[Environment.AI], n_jobs=n_jobs, tols=tols)
    checks.append(Check(
        "critical_eta", _verdict(_near(report.eta_bar, ref["eta_bar"], tol["eta_bar"]) and report.feasible),
        f"eta_bar = {report.eta_bar:.4f} at K = {report.argmax_k:.4g}",
    ))
    checks.append(Check(
        "basin_elimination", _verdict(high and not low),
        f"eliminated at eta={ref['eta_high']}: {high}; at eta={ref['eta_low']}: {low}",
    ))

    crowd = crowdout_check(p, grid, ho_states=states[Environment.HO], ai_states=states[Environment.AI],
                           n_jobs=n_jobs, tols=tols)
    ok = crowd.declines and crowd.k_ai_below is not None and crowd.k_ai_below < crowd.k_ho
    checks.append(Check(
        "crowd_out", _verdict(ok),
        f"h_AI(K_HO) = {crowd.h_ai_at_kho:.4f} vs lambda K_HO = {crowd.lambda_k:.4f}, "
        f"K_AI = {_fmt(crowd.k_ai_below)}",
    ))

    rows = sensitivity_sweep(config.SENSITIVITY_PRESETS[cfg.preset], p, grid,
                             n_jobs=n_jobs, progress=progress, tols=tols)
    bad = []
    for row, expected in zip(rows, config.REFERENCE_SENSITIVITY):
        _, _, _, k_u, k_h, peak, k_ho = expected
        ok = (row.two_crossings
              and _near(row.k_u_ai, k_u, tol["sensitivity"])
              and _near(row.k_h_ai, k_h, tol["sensitivity"])
              and _near(row.peak_phi_ai, peak, tol["sensitivity"])
              and _near(row.k_ho, k_ho, tol["sensitivity"]))
        if not ok:
            bad.append(f"run {row.run_id}")
    checks.append(Check(
        "sensitivity_table", _verdict(not bad and len(rows) == len(config.REFERENCE_SENSITIVITY)),
        f"{len(rows)} runs within tolerance" if not bad else "outside tolerance: " + ", ".join(bad),
    ))
    return checks


def run_validation(cfg: RunConfig, skip_golden: bool = False, progress: bool = False) -> list[Check]:
    """Run every property check and, for the reference parameters, the golden checks.

    Args:
        cfg: Run configuration.
        skip_golden: Run only the property suite.
        progress: Show tqdm bars for the long grid and sweep work.

    Returns:
        One Check per property, in a stable order.
    """
    p, grid, tols = cfg.params, cfg.grid, cfg.tolerances
    rng = np.random.default_rng(config.VALIDATION_SEED)
    curves = {
        env: phi_curve(env, 0.0, grid, p, n_jobs=cfg.n_jobs, progress=progress, tols=tols)
        for env in Environment
    }
    states = {
        env: find_steady_states(env, 0.0, grid, p, curve=curves[env], tols=tols)
        for env in Environment
    }

    checks = _model_checks(cfg)
    checks += _equilibrium_checks(cfg, rng)
    checks += _congestion_checks(cfg, rng)
    checks += _dynamics_checks(cfg, curves, states)
    if skip_golden:
        checks.append(Check("golden", SKIP, "skipped on request"))
    elif not cfg.is_reference or cfg.grid != GridSpec():
        checks.append(Check("golden", SKIP, "parameters or grid differ from the reference preset"))
    else:
        checks += _golden_checks(cfg, curves, states, progress)
    return checks


def passed(checks: list[Check]) -> bool:
    """True when no check failed; INFO and SKIP never fail a run."""
    return all(c.status != FAIL for c in checks)


__all__ = ["PASS", "FAIL", "INFO", "SKIP", "Check", "run_validation", "passed"]
