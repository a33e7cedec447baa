#!/usr/bin/env python3
"""Command-line front end for the knowledge-commons model.

Subcommands:
- solve: period equilibrium at one archive stock (optionally with multi-period
  query lifetimes via --t-life)
- curve: average creation phi(K; eta) on a K grid
- steady: steady states with stability classification
- simulate: trajectory of the law of motion
- decompose: flow/resolution margins, pool composition and crowd-out
- race: pool, composition and congestion factors of the resolution change
- eta: critical conversion rate and basin elimination
- sensitivity: one-at-a-time parameter sweep
- validate: invariant suite and reference checks

Every command writes deterministic CSV files with a header row under the
output directory. Exit codes: 0 ok, 1 config error, 2 solver error.
"""

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

import pandas as pd

import config
from analysis import (
    MissingSteadyStateError, basin_eliminated, composition_check, critical_eta,
    crowdout_check, decompose_margins, find_congested_k, largest_stable,
    peak_phi, resolution_race, sensitivity_sweep,
)
from dynamics import creation, find_steady_states, period, phi_curve, simulate, states_frame
from equilibrium import SolverError, solve_congestion
from io_utils import RunConfig, load_run_config, records_frame, save_frame
from parsing import parse_grid_spec, parse_vary
from primitives import Environment
from validation import run_validation, passed


def banner(title: str) -> None:
    """Print a section title between rules."""
    print("\n" + "=" * 50)
    print(title)
    print("=" * 50)


def print_fields(values: dict) -> None:
    """Print one aligned `name  value` line per field.

    Args:
        values: Field names mapped to values; floats use 6 significant digits.
    """
    width = max(len(k) for k in values)
    for key, value in values.items():
        if isinstance(value, float):
            value = f"{value:.6g}"
        print(f"  {key:<{width}}  {value}")


def _progress() -> bool:
    """Show tqdm bars only on an interactive terminal."""
    return sys.stderr.isatty()


# ---------- Commands ----------

def cmd_solve(cfg: RunConfig, args) -> int:
    """Solve one period and print its equilibrium objects; --out also writes a CSV row."""
    env = Environment(args.env)
    h = creation(args.k, env, args.eta, cfg.params, cfg.tolerances)
    eq = period(args.k, env, cfg.params, cfg.tolerances)
    st = eq.inner
    row = {
        "k": eq.k, "env": env.value, "eta": args.eta,
        "alpha_star": eq.alpha_star, "pool": eq.pool, "surplus": eq.surplus,
        "outside": eq.outside, "sigma": st.sigma, "mu": st.mu, "c_star": st.c_star,
        "m_l": st.m_l, "m_h": st.m_h, "q_l": st.q_l, "q_h": st.q_h,
        "q_total": st.q_total, "omega": st.omega, "delta_bar": st.delta_bar,
        "h": h, "phi": h / eq.k if eq.k > 0.0 else math.nan,
        "collapsed": eq.collapsed, "corner": eq.corner, "residual": eq.residual,
    }
    if args.t_life is not None:
        sol = solve_congestion(eq.pool, st.q_total, st.c_star, args.t_life, cfg.params, tol=cfg.tolerances.inner)
        row.update({
            "t_life": args.t_life, "mu_lifetime": sol.mu, "hazard": sol.hazard,
            "sigma_lifetime": sol.sigma_lifetime, "stock": sol.stock,
        })

    banner(f"Period equilibrium: K={args.k:g}, env={env.value}, eta={args.eta:g}")
    print_fields(row)
    if args.out is not None:
        path = save_frame(pd.DataFrame([row]), Path(args.out) / f"solve_{env.value}_k{args.k:g}_eta{args.eta:g}.csv")
        print(f"\nSaved: {path}")
    return config.EXIT_OK


def cmd_curve(cfg: RunConfig, args) -> int:
    """Write phi(K) on the run grid."""
    env = Environment(args.env)
    curve = phi_curve(env, args.eta, cfg.grid, cfg.params, n_jobs=cfg.n_jobs,
                      progress=_progress(), tols=cfg.tolerances)
    phi_max, k_at = peak_phi(curve)
    path = save_frame(curve.to_frame(), cfg.output_dir / f"curve_{env.value}_eta{args.eta:g}.csv")
    banner(f"Average creation: env={env.value}, eta={args.eta:g}")
    print(f"  peak phi = {phi_max:.4f} at K = {k_at:.4f}")
    print(f"  Saved: {path}")
    return config.EXIT_OK


def cmd_steady(cfg: RunConfig, args) -> int:
    """Write and print the classified steady states."""
    env = Environment(args.env)
    states = find_steady_states(env, args.eta, cfg.grid, cfg.params, n_jobs=cfg.n_jobs, tols=cfg.tolerances)
    path = save_frame(states_frame(states), cfg.output_dir / f"steady_{env.value}_eta{args.eta:g}.csv")
    banner(f"Steady states: env={env.value}, eta={args.eta:g}")
    if not states:
        print("  no crossings of lambda on the grid")
    for s in states:
        print(f"  K* = {s.k_star:.4f}  {s.kind:<8}  {s.crossing}  residual={s.residual:.2e}")
    print(f"  Saved: {path}")
    return config.EXIT_OK


def cmd_simulate(cfg: RunConfig, args) -> int:
    """Iterate the law of motion from --k0."""
    env = Environment(args.env)
    traj = simulate(args.k0, args.steps, env, args.eta, cfg.params, tols=cfg.tolerances)
    path = save_frame(
        traj.to_frame(), cfg.output_dir / f"trajectory_{env.value}_eta{args.eta:g}_k0{args.k0:g}.csv"
    )
    banner(f"Trajectory: env={env.value}, eta={args.eta:g}, K0={args.k0:g}")
    print(f"  steps = {len(traj.k_path) - 1}, converged = {traj.converged}, limit = {traj.limit:.6g}")
    print(f"  Saved: {path}")
    return config.EXIT_OK


def cmd_decompose(cfg: RunConfig, args) -> int:
    """Margin decomposition with the composition and crowd-out checks."""
    p, grid, tols = cfg.params, cfg.grid, cfg.tolerances
    ho_states = find_steady_states(Environment.HO, 0.0, grid, p, n_jobs=cfg.n_jobs, tols=tols)
    crowd = crowdout_check(p, grid, ho_states=ho_states, n_jobs=cfg.n_jobs, tols=tols)
    k_ref = args.k if args.k is not None else largest_stable(ho_states)
    margins = decompose_margins(k_ref, p, tols)
    composition = composition_check(k_ref, p, tols)

    out = cfg.output_dir
    paths = [
        save_frame(records_frame([margins]), out / "decompose.csv"),
        save_frame(records_frame([composition]), out / "composition.csv"),
        save_frame(records_frame([crowd]), out / "crowdout.csv"),
    ]
    banner(f"Two-margin decomposition at K={k_ref:.4f}")
    print_fields({
        "flow_margin": margins.flow_margin,
        "resolution_margin": margins.resolution_margin,
        "total": margins.total,
        "h_rich": composition.h_rich,
        "cutoff_ordered": composition.cutoff_ordered,
        "sufficient_condition": composition.sufficient_condition,
        "k_ho": crowd.k_ho,
        "declines": crowd.declines,
        "k_ai_below": crowd.k_ai_below if crowd.k_ai_below is not None else "none",
    })
    for path in paths:
        print(f"  Saved: {path}")
    return config.EXIT_OK


def cmd_race(cfg: RunConfig, args) -> int:
    """Resolution race at --k or at the first congested grid point."""
    k_ref = args.k
    if k_ref is None:
        k_ref = find_congested_k(cfg.params, cfg.grid, cfg.tolerances)
        if k_ref is None:
            raise MissingSteadyStateError("no grid K where both economies are congested; pass --k")
    race = resolution_race(k_ref, cfg.params, cfg.tolerances)
    path = save_frame(records_frame([race]), cfg.output_dir / "race.csv")
    banner(f"Resolution race at K={k_ref:.4f}")
    print_fields({
        "pool_ratio": race.pool_ratio,
        "composition_ratio": race.composition_ratio,
        "congestion_ratio": race.congestion_ratio,
        "sigma_ratio": race.sigma_ratio,
        "congested_ho": race.congested_ho,
        "congested_ai": race.congested_ai,
        "race_holds": race.race_holds,
    })
    print(f"  Saved: {path}")
    return config.EXIT_OK


def cmd_eta(cfg: RunConfig, args) -> int:
    """Critical conversion rate and basin elimination at --eta."""
    p, grid, tols = cfg.params, cfg.grid, cfg.tolerances
    ai_states = find_steady_states(Environment.AI, 0.0, grid, p, n_jobs=cfg.n_jobs, tols=tols)
    report = critical_eta(p, grid, ai_states=ai_states, n_jobs=cfg.n_jobs, progress=_progress(), tols=tols)
    row = records_frame([report])
    banner("Critical conversion rate")
    print(f"  eta_bar = {report.eta_bar:.4f}, feasible = {str(report.feasible).lower()}")
    print(f"  K_U = {report.k_u:.4f}, argmax K = {report.argmax_k:.4g}, K->0 limit = {report.limit_ratio:.4f}")
    if args.eta > 0.0:
        eliminated = basin_eliminated(args.eta, p, grid, ai_states=ai_states, n_jobs=cfg.n_jobs, tols=tols)
        row["eta"] = args.eta
        row["basin_eliminated"] = eliminated
        print(f"  basin eliminated at eta={args.eta:g}: {str(eliminated).lower()}")
    path = save_frame(row, cfg.output_dir / "eta.csv")
    print(f"  Saved: {path}")
    return config.EXIT_OK


def cmd_sensitivity(cfg: RunConfig, args) -> int:
    """One-at-a-time sweep over the preset runs or --vary specs."""
    spec = [parse_vary(v) for v in args.vary] if args.vary else config.SENSITIVITY_PRESETS[cfg.preset]
    rows = sensitivity_sweep(spec, cfg.params, cfg.grid, n_jobs=cfg.n_jobs,
                             progress=_progress(), tols=cfg.tolerances)
    df = pd.DataFrame(
        [(r.run_id, r.varied_name, r.varied_value, r.k_u_ai, r.k_h_ai,
          r.peak_phi_ai, r.k_ho, r.two_crossings) for r in rows],
        columns=["run", "parameter", "value", "k_u_ai", "k_h_ai", "peak_phi_ai", "k_ho", "two_crossings"],
    )
    path = save_frame(df, cfg.output_dir / "sensitivity.csv")
    banner("Sensitivity sweep")
    print(df.to_string(index=False, float_format=lambda x: f"{x:.2f}"))
    print(f"\nSaved: {path}")
    return config.EXIT_OK


def cmd_validate(cfg: RunConfig, args) -> int:
    """Run the invariant suite; a failed check exits with EXIT_SOLVER_ERROR."""
    checks = run_validation(cfg, skip_golden=args.skip_golden, progress=_progress())
    path = save_frame(records_frame(checks), cfg.output_dir / "validation.csv")
    banner("Validation")
    width = max(len(c.name) for c in checks)
    for c in checks:
        print(f"  {c.name:<{width}}  {c.status.upper():<4}  {c.detail}")
    ok = passed(checks)
    print(f"\nResult: {'PASS' if ok else 'FAIL'}  (saved {path})")
    return config.EXIT_OK if ok else config.EXIT_SOLVER_ERROR


COMMANDS = {
    "solve": cmd_solve,
    "curve": cmd_curve,
    "steady": cmd_steady,
    "simulate": cmd_simulate,
    "decompose": cmd_decompose,
    "race": cmd_race,
    "eta": cmd_eta,
    "sensitivity": cmd_sensitivity,
    "validate": cmd_validate,
}


# ---------- Argument parsing ----------

def build_parser() -> argparse.ArgumentParser:
    """Build the argument parser with one subcommand per analysis."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="Path to a JSON run configuration")
    common.add_argument("--preset", default=config.PRESET_APPENDIX_D,
                        help=f"Built-in parameter preset (default: {config.PRESET_APPENDIX_D})")
    common.add_argument("--out", default=None, help="Output directory (default: from config)")
    common.add_argument("--grid", default=None, help="K grid as MIN:MAX:N, e.g. 0.001:4:400")
    common.add_argument("--n-jobs", type=int, default=None, dest="n_jobs",
                        help="joblib workers for grid and sweep work (-1 = all cores)")

    env_flags = argparse.ArgumentParser(add_help=False)
    env_flags.add_argument("--env", choices=[e.value for e in Environment], default=Environment.AI.value)
    env_flags.add_argument("--eta", type=float, default=0.0, help="Conversion rate (AI only)")

    ap = argparse.ArgumentParser(
        description="Dynamic knowledge-commons model: equilibrium, dynamics and policy analysis.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=(
            "Examples:\n"
            "  %(prog)s solve --k 0.51 --env ai\n"
            "  %(prog)s steady --env ho\n"
            "  %(prog)s sensitivity --vary shared.pi=0.3,0.5\n"
            "  %(prog)s validate --skip-golden\n"
        ),
    )
    sub = ap.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", parents=[common, env_flags], help="Solve one period equilibrium")
    solve.add_argument("--k", type=float, required=True, help="Archive stock")
    solve.add_argument("--t-life", type=int, default=None, dest="t_life",
                       help="Query lifetime in periods for the congestion block")

    sub.add_parser("curve", parents=[common, env_flags], help="Average creation on the K grid")
    sub.add_parser("steady", parents=[common, env_flags], help="Steady states and stability")

    sim = sub.add_parser("simulate", parents=[common, env_flags], help="Simulate the law of motion")
    sim.add_argument("--k0", type=float, required=True, help="Initial archive stock")
    sim.add_argument("--steps", type=int, default=config.MAX_STEPS, help="Maximum number of periods")

    dec = sub.add_parser("decompose", parents=[common], help="Two-margin decomposition and crowd-out")
    dec.add_argument("--k", type=float, default=None, help="Reference stock (default: human-only steady state)")

    race = sub.add_parser("race", parents=[common], help="Resolution race factors")
    race.add_argument("--k", type=float, default=None, help="Reference stock (default: first congested K)")

    eta = sub.add_parser("eta", parents=[common], help="Critical conversion rate")
    eta.add_argument("--eta", type=float, default=0.0, help="Also test basin elimination at this rate")

    sens = sub.add_parser("sensitivity", parents=[common], help="One-at-a-time sensitivity sweep")
    sens.add_argument("--vary", action="append", default=None,
                      help="PATH=V1,V2 (repeatable); replaces the preset sweep")

    val = sub.add_parser("validate", parents=[common], help="Run the invariant suite")
    val.add_argument("--skip-golden", action="store_true", dest="skip_golden",
                     help="Run only the property checks")
    return ap


def resolve_config(args) -> RunConfig:
    """Load the run config and apply command-line overrides."""
    cfg = load_run_config(args.config, preset=args.preset)
    if args.grid is not None:
        cfg = replace(cfg, grid=parse_grid_spec(args.grid))
    if args.n_jobs is not None:
        if args.n_jobs == 0:
            raise ValueError("--n-jobs must be nonzero")
        cfg = replace(cfg, n_jobs=args.n_jobs)
    if args.out is not None:
        cfg = replace(cfg, output_dir=Path(args.out))
    return cfg


def main(argv: list[str] | None = None) -> int:
    """Run one subcommand.

    Args:
        argv: Arguments without the program name (default: sys.argv[1:]).

    Returns:
        EXIT_OK, EXIT_CONFIG_ERROR on invalid input, or EXIT_SOLVER_ERROR
        when a solve fails or a required steady state is missing.
    """
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, args)
    except (SolverError, MissingSteadyStateError) as e:
        print(f"Error: {e}")
        return config.EXIT_SOLVER_ERROR
    except ValueError as e:
        print(f"Error: {e}")
        return config.EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
