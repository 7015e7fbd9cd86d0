import math
import os
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Logging: off | info | debug
LOG_LEVEL = os.getenv("LIPIMPL_LOG", "off").strip().lower()
LOG_LEVELS = ("off", "info", "debug")

# Default worker count for sweeps and pair evaluations
DEFAULT_WORKERS = int(os.getenv("LIPIMPL_WORKERS", "1"))

# Chord solver defaults
DEFAULT_RESIDUAL_TOL = 1e-12
DEFAULT_STEP_TOL = 1e-12
DEFAULT_MAX_ITER = 200
DEFAULT_ALPHA = 0.5
DEFAULT_BETA = 0.5
DEFAULT_Q_TARGET = 0.5
DEFAULT_FD_STEP = 1e-6
SINGULAR_CONDITION = 1e12  # condition estimate above which J counts as singular
NO_CONTRACTION_RUN = 3     # consecutive steps with ratio >= 1 before giving up
ALPHA_SHRINK = 0.5
MAX_ALPHA_HALVINGS = 30

# Perturbation analysis defaults
DEFAULT_MARGIN = 0.1  # the Delta added to the modulus R
DEFAULT_DELTA_LADDER = (1e-1, 1e-2, 1e-3)
DEFAULT_N_PAIRS = 64
DEFAULT_T_PAIRS = 64
DEFAULT_EPS_V_POINTS = 16
DEGENERATE_PAIR_DISTANCE = 1e-12
MONOTONE_NOISE = 0.10

# Oscillator integration defaults
TWO_PI = 2.0 * math.pi
DEFAULT_HORIZON = TWO_PI
DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12
DEFAULT_MAX_STEP = math.pi / 8
EVENT_TIME_TOL = 1e-12
EVENT_BISECTION_MAX_ITER = 50
EVENT_PROBES = 8  # dense-output probes per accepted step
DEFAULT_STICK_TOL = 1e-9
DEFAULT_MAX_EVENTS = 10_000
DEFAULT_T_GRID = 400
BRACKET_MARGIN = 0.5
SIGN_SCAN_RESOLUTION = 10_000
DEFAULT_NV_GRID = (400, 40)
ZERO_LOCATION_SLACK = 1e-10
ASSUMPTION_F_SPREAD = 0.20

# Result files
CSV_FLOAT_FORMAT = "{:.16e}"  # 17 significant digits
RUN_SPEC_SCHEMA = 1
SUMMARY_FILENAME = "summary.json"
