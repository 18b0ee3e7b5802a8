"""Application settings and configuration constants."""

import math
import os
from pathlib import Path
from typing import Any, Tuple

# Whitney cover
STAR_FACTOR = 9.0 / 8.0
WHITNEY_RADIUS_FRACTION = 0.25
MULTIPLICITY_FACTOR = 9
COVER_CONSTANT_CEILING = 64.0

# Quasi-ball tuning
EPSILON_START = 0.5
EPSILON_FLOOR = 2.0 ** -20
TUNING_FRACTION = 0.5

# Regularity
AUTO_DELTA_THETA_CEILING = 32.0
DEFAULT_REGULARITY_DELTA_CELLS = 4

# Numerical tolerances
PARTITION_SUM_TOLERANCE = 1e-12
ZERO_NUMERATOR_TOLERANCE = 1e-12
WITNESS_RELATIVE_TOLERANCE = 1e-12

# Triangle inequality check on explicit matrices
EXHAUSTIVE_TRIANGLE_LIMIT = 512
TRIANGLE_SAMPLE_SIZE = 100_000

# Audit sampling
DEFAULT_BALL_SAMPLE_CENTERS = 12
DEFAULT_SUBSET_PAIR_LIMIT = 400
DEFAULT_SCALE_BOUND_POINTS = 256
DEFAULT_F_SAMPLES = 4

# Default values
DEFAULT_P = 2.0
DEFAULT_ALPHA = 0.5
DEFAULT_SEED = 0

# Memory limits
MIN_AVAILABLE_MEMORY_GB = 0.5
BYTES_PER_PAIR = 16  # float64 distance + int64 order entry

# Exit codes
EXIT_PASS = 0
EXIT_AUDIT_FAILURE = 1
EXIT_ERROR = 2

# Output file names
SPACE_FILE = "space.mms"
MASK_FILE = "mask.txt"
COVER_FILE = "cover.whitney"
FAMILY_FILE = "family.quasiballs"
PARTITION_FILE = "partition.phi"
U_FILE = "u.field"
G_FILE = "g.field"
U_TILDE_FILE = "u_tilde.field"
G_TILDE_FILE = "g_tilde.field"
PARAMS_FILE = "params.json"
GENERATOR_INFO_FILE = "generator.json"
COVER_REPORT_FILE = "cover_report.json"
MERGED_REPORT_FILE = "merged_audits.csv"
AUDITS_JSON_FILE = "audits.json"
AUDITS_CSV_FILE = "audits.csv"
LOG_FILE = "run.log"


def get_output_directory() -> Path:
    """Get the default output directory."""
    # Check environment variable first (allows override)
    env_path = os.environ.get('WHITNEYEXT_OUTPUT_DIR')
    if env_path:
        return Path(env_path)

    return Path.cwd() / "whitneyext_out"


def validate_p(value: Any) -> Tuple[bool, float]:
    """Validate an integrability exponent p > 1; accepts numbers, "inf" and "infinity"."""
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("inf", "infinity", "∞"):
            return True, math.inf
        try:
            value = float(text)
        except ValueError:
            return False, DEFAULT_P
    try:
        p = float(value)
    except (TypeError, ValueError):
        return False, DEFAULT_P
    if math.isnan(p) or p <= 1.0:
        return False, DEFAULT_P
    return True, p


def validate_alpha(value: Any) -> Tuple[bool, float]:
    """Validate a smoothness order alpha > 0."""
    try:
        alpha = float(value)
    except (TypeError, ValueError):
        return False, DEFAULT_ALPHA
    if not math.isfinite(alpha) or alpha <= 0.0:
        return False, DEFAULT_ALPHA
    return True, alpha


def validate_delta(value: Any) -> Tuple[bool, Any]:
    """Validate the regularity scale: "auto" or a positive number."""
    if isinstance(value, str) and value.strip().lower() == "auto":
        return True, "auto"
    try:
        delta = float(value)
    except (TypeError, ValueError):
        return False, "auto"
    if not math.isfinite(delta) or delta <= 0.0:
        return False, "auto"
    return True, delta


def validate_epsilon(value: Any) -> Tuple[bool, Any]:
    """Validate epsilon: "auto" or a number in (0, 1]."""
    if isinstance(value, str) and value.strip().lower() == "auto":
        return True, "auto"
    try:
        epsilon = float(value)
    except (TypeError, ValueError):
        return False, "auto"
    if not (0.0 < epsilon <= 1.0):
        return False, "auto"
    return True, epsilon


def validate_threads(value: Any) -> Tuple[bool, int]:
    """Validate a worker thread count."""
    try:
        threads = int(value)
    except (TypeError, ValueError):
        return False, 1
    if threads < 1:
        return False, 1
    return True, threads
