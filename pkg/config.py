"""Configuration constants for the knowledge-commons model.

This module defines:
- Parameter defaults of the parametric example (shared and per-environment)
- Solver tolerances and scan resolutions
- Default K grid and eta grid settings
- Output directory, CSV formatting and exit codes
- The built-in sensitivity preset and its reference values

Every constant can be overridden at runtime through the JSON config loaded by
io_utils.load_run_config; these are the values used when a field is missing.
"""

from pathlib import Path

# ===== Shared parameters =====
# Depreciation rate per period
LAMBDA = 0.15
# Routine-task share (fraction of type-L queries)
PI = 0.4
# Knowledge increment per resolved H-query
DELTA_INC = 1.0
# Archive-concern weight of answerers
BETA = 0.9
# Private answering benefit
U = 0.3
# Answering cost shifter at K=0 and its decay rate
C_BAR_COST = 1.25
KAPPA = 5.0
# Upper support of the uniform answering-cost distribution
C_BAR_SUPPORT = 1.0
# Private values of a public answer
V_H = 2.0
V_L = 1.0
# Mean posting cost of the exponential posting-cost distribution
D_BAR = 0.5
# Ability support
ALPHA_LO = 0.001
ALPHA_HI = 0.2

# ===== Environment parameters =====
# (gamma_w, delta_w, rho_h, rho_l) per environment
HO_PARAMS = {"gamma_w": 0.0, "delta_w": 0.0, "rho_h": 0.1, "rho_l": 0.3}
AI_PARAMS = {"gamma_w": 0.5, "delta_w": 0.5, "rho_h": 0.5, "rho_l": 1.0}
# Slope of ability-dependent private resolution (0 = baseline, ability-free)
RHO_SLOPE = 0.0
# Trapezoid nodes for ability-averaged failure rates
QUADRATURE_NODES = 201

# ===== Solver tolerances =====
# |sigma_hat(sigma) - sigma| at the inner fixed point
INNER_TOL = 1e-10
# |S - w(alpha*)| at the participation cutoff
OUTER_TOL = 1e-9
# Steady-state refinement tolerance (in K and in |h - lambda K|)
REFINE_TOL = 1e-8
# |K_{t+1} - K_t| below which a trajectory counts as converged
CONVERGENCE_TOL = 1e-9
# Points in the descending sigma scan of the inner loop
SCAN_POINTS = 256
# Smallest sigma visited by the scan (sigma = 0 is always a trivial fixed point)
SIGMA_FLOOR = 1e-9
# Bisection / Brent iteration caps
MAX_BISECTION_ITER = 200
MAX_BRENT_ITER = 200
# Participating mass used when the candidate cutoff sits on the lower support
POOL_FLOOR = 1e-12
# Iteration cap for trajectories
MAX_STEPS = 10_000

# ===== Grids =====
# Default K grid for curves and steady-state scans: (k_min, k_max, n)
K_GRID = (1e-3, 4.0, 400)
# Critical-conversion grid: log-spaced points on (ETA_K_FLOOR, K_U]
ETA_GRID_POINTS = 2000
ETA_K_FLOOR = 1e-4
# Sigma grid for the uniqueness diagnostic
UNIQUENESS_GRID_POINTS = 256
# Jump in solved sigma between adjacent grid points flagged by the branch audit
BRANCH_JUMP_THRESHOLD = 0.1
# Relative perturbation and horizon for stability confirmation
STABILITY_PERTURBATION = 0.05
STABILITY_STEPS = 500

# ===== Parallelism =====
# joblib workers for grid and sweep work (1 = serial)
N_JOBS = 1

# ===== Outputs =====
# Base directory for all CSV output
OUTPUT_DIR = Path("output")
# Every CSV numeric uses 12 significant digits
CSV_FLOAT_FORMAT = "%.12g"

# ===== Exit codes =====
EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_SOLVER_ERROR = 2

# ===== Presets =====
PRESET_APPENDIX_D = "appendix-d"
PRESETS = {PRESET_APPENDIX_D}
# One-at-a-time sensitivity runs around the baseline (runs 1-6; run 0 is the baseline)
SENSITIVITY_PRESETS = {
    PRESET_APPENDIX_D: [
        ("ai.gamma_w", [0.30, 0.70]),
        ("shared.kappa", [3.00, 7.00]),
        ("ai.rho_h", [0.30, 0.70]),
    ],
}

# ===== Reference values of the parametric example =====
# Used by the golden checks in validation.py
REFERENCE = {
    "k_u_ai": 0.15, "k_h_ai": 1.55, "k_u_ho": 0.14, "k_ho": 2.64,
    "width_ai": 1.41, "width_ho": 2.50,
    "peak_phi_ai": 0.49, "peak_k_ai": 0.51,
    "peak_phi_ho": 0.59, "peak_k_ho": 0.47,
    "eta_bar": 0.51, "eta_limit": 0.50,
    "eta_low": 0.25, "eta_high": 0.77,
}
# (run, parameter, value, k_u_ai, k_h_ai, peak_phi_ai, k_ho)
REFERENCE_SENSITIVITY = [
    (0, "---", None, 0.15, 1.55, 0.49, 2.64),
    (1, "ai.gamma_w", 0.30, 0.15, 1.55, 0.51, 2.64),
    (2, "ai.gamma_w", 0.70, 0.15, 1.55, 0.46, 2.64),
    (3, "shared.kappa", 3.00, 0.31, 1.44, 0.29, 2.47),
    (4, "shared.kappa", 7.00, 0.09, 1.60, 0.67, 2.71),
    (5, "ai.rho_h", 0.30, 0.14, 2.07, 0.55, 2.64),
    (6, "ai.rho_h", 0.70, 0.15, 1.25, 0.43, 2.64),
]
# Acceptance bands for the golden checks
GOLDEN_TOLERANCE = {
    "k_u": 0.02, "k_h": 0.03, "width": 0.05,
    "peak_phi": 0.02, "peak_k": 0.04,
    "eta_bar": 0.02, "eta_limit": 1e-12, "sensitivity": 0.02,
}

# ===== Property checks =====
# Seed and sample sizes for the randomised invariant suite
VALIDATION_SEED = 20240531
EQUILIBRIUM_SAMPLES = 50
IDENTITY_SAMPLES = 100
# Cap on draws when collapsed states are skipped
MAX_IDENTITY_DRAWS = 1000
# Sampling window for random archive stocks
SAMPLE_K_RANGE = (0.05, 3.0)
