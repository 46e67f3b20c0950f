"""
Global constants for macorner.

This module centralizes tolerances, default grids, fit windows and file
names so that experiments and tests share one set of knobs.
"""

# ============================================================================
# File Names and Environment
# ============================================================================

FIELD_CSV_HEADER = ("x1", "x2", "u")
# Sidecar keys written as null when the field carries no value
SIDECAR_NULLABLE_KEYS = ("c", "t")
PROFILE_CSV_HEADER = ("r", "value")
FIELD_META_SUFFIX = ".meta.json"
MANIFEST_FILENAME = "manifest.json"
CONFIG_SUFFIXES = (".yaml", ".yml", ".json", ".toml")

# Worker cap for sweep and batch classify
ENV_THREADS = "MA_CORNER_THREADS"
DEFAULT_THREADS = 1

# Significant digits written to field CSVs
FIELD_CSV_DIGITS = 17

# ============================================================================
# Grids
# ============================================================================

DEFAULT_CONSTRUCTION_R = 8.0
DEFAULT_CONSTRUCTION_H = 1.0 / 32.0
DEFAULT_ASYMPTOTICS_R = 16.0
DEFAULT_ASYMPTOTICS_H = 1.0 / 64.0

# Integer-ratio checks on R/h and 1/h
GRID_RATIO_TOL = 1e-9

# Off-node evaluation switches to bilinear within this many h of a boundary
INTERP_BOUNDARY_BAND = 2.0

# ============================================================================
# Solver Defaults
# ============================================================================

DEFAULT_NEWTON_TOL = 1e-9
DEFAULT_MAX_NEWTON = 60
DEFAULT_DAMPING = 0.5
DEFAULT_ARMIJO = 1e-4
DEFAULT_CONTINUATION_STEPS = 8
DEFAULT_PENALTY_WEIGHT = 1.0
DEFAULT_LINEAR_TOL = 1e-12
DEFAULT_GMRES_MAXITER = 500

GAUSS_SEIDEL_SWEEPS = 200
GAUSS_SEIDEL_COLORS = 6
MAX_LINE_SEARCH_HALVINGS = 30

# Comparison checks allow 10 * newton_tol of slack
COMPARISON_SLACK_FACTOR = 10.0
# Random ordered pairs draw k in [-spread, spread] for data q + k*x1*x2
COMPARISON_PAIRS = 20
COMPARISON_SPREAD = 0.5

# ============================================================================
# Shooting
# ============================================================================

SHOOT_TARGET_TOL = 1e-6
SHOOT_BRACKET_FLOOR = 1e-8
PBAR_TARGET = 1.0
PUNDER_TARGET = 0.0
PUNDER_T_LOWER = -0.999
NORMALIZATION_POINT = (1.0, 1.0)
PUNDER_SIGN_POINT = (0.5, 0.5)

# ============================================================================
# Asymptotics
# ============================================================================

HESSIAN_TOL = 0.02
HESSIAN_VALID_BAND = 2.0  # in units of h
NEAR_WINDOW_MIN_H = 8.0
NEAR_WINDOW_FRACTION = 1.0 / 40.0
NEAR_WINDOW_FLOOR_H = 32.0
FAR_WINDOW = (1.0 / 3.0, 2.0 / 3.0)
MIN_ARCS_PER_WINDOW = 3
DEFAULT_WINDOW_POINTS = 8

ARC_MIN_SAMPLES = 64
RADIAL_MIN_H = 4.0
FIT_MIN_POINTS = 3
DEGENERACY_EPS_FACTOR = 1e4

HARNACK_THETA_SAMPLES = 129

CONICAL_EIGEN_FRACTION = 0.2
CONICAL_SLOPE = 0.2
CONICAL_MIN_RADII = 4
ORDERING_TOL = 1e-6

# ============================================================================
# Harmonic Modes
# ============================================================================

V1_DELTA_START = 0.5
V1_MAX_HALVINGS = 20
V1_THETA_SAMPLES = 2048
DECAY_LADDER = (0.2, 0.1, 0.05)
DECAY_BETA = 1.8

# ============================================================================
# Classifier
# ============================================================================

C_EFF_UNIT_BAND = 1e-3
# q - x1*x2 = (x1 - x2)²/2 vanishes on the diagonal
SUPERCRITICAL_CROSS = -1.0
SUBSOLUTION_TOL = 1e-10
CONVEXITY_TOL = 1e-8

LOG_MODULUS_WINDOW = (1e-2, 1e-1)
LOG_MODULUS_ZOOM = 0.25
LOG_MODULUS_LEVELS = 3
LOG_MODULUS_MAX_RATIO = 2.0
