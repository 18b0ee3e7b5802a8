"""Registries of generators, input functions and audits."""

GENERATORS = {
    "grid": {
        "description": "Uniform grid, weights = spacing^dim",
        "detailed_info": """
Cartesian grid of points with Euclidean distance. Every point carries the
measure of its grid cell.

Parameters:
• dims: list of axis lengths, e.g. [16] or [64, 64]
• spacing: distance between neighbouring points (default 1.0)

No subset mask is produced; pair it with a mask file or another generator.
        """.strip(),
        "parameters": {"dims": [16], "spacing": 1.0},
    },
    "fat_cantor": {
        "description": "1D grid with a fat Cantor subset",
        "detailed_info": """
At step k the middle fraction schedule(k) of every remaining interval is
removed (default 4^-k). The retained set keeps positive measure.

Parameters:
• level: number of removal steps
• resolution: number of cells (default 4^(level+1))
• spacing: cell length (default 1.0)
• schedule: schedule name (see SCHEDULES) or explicit list of fractions

Recommended delta: 4 cell diameters.
        """.strip(),
        "parameters": {"level": 3, "spacing": 1.0},
    },
    "fat_sierpinski": {
        "description": "2D grid with a fat Sierpinski carpet subset",
        "detailed_info": """
Every current rectangle loses a centred hole with side fraction
schedule(k) (default 3^-1 2^-(k-1)) and splits 3 x 3; the outer eight
blocks continue.

Parameters:
• level: number of removal steps
• resolution: cells per side (default 3^(level+1))
• spacing: cell side (default 1.0)
• schedule: schedule name (see SCHEDULES) or explicit list of side fractions

Recommended delta: 4 cell diameters.
        """.strip(),
        "parameters": {"level": 2, "spacing": 1.0},
    },
}

SCHEDULES = {
    "cantor": {
        "description": "Fraction 4^-k of every interval removed at step k",
        "detailed_info": "Sum of the removed fractions stays below 1/3, so the set keeps positive measure.",
    },
    "carpet": {
        "description": "Hole side fraction (1/3) 2^-(k-1) at step k",
        "detailed_info": "Ordinary Sierpinski carpet at step 1, shrinking holes afterwards.",
    },
}

INPUT_FUNCTIONS = {
    "constant": {
        "description": "u = c on S",
        "parameters": {"c": 1.0},
    },
    "coordinate": {
        "description": "u = coordinate along an axis (Euclidean spaces only)",
        "parameters": {"axis": 0},
    },
    "random": {
        "description": "u uniform in [-1, 1] on S, seeded",
        "parameters": {"seed": 0},
    },
    "indicator": {
        "description": "u = 1 on a sub-mask of S, 0 elsewhere on S",
        "parameters": {"ids": []},
    },
}

# ceiling None: the audit passes whenever the observed constant is finite
AUDITS = {
    "scale_bounds": {
        "description": "Ball measure comparison across scales from C_d and C_rd",
        "ceiling": 1.0 + 1e-12,
    },
    "gradient_inequality": {
        "description": "|u~(x) - u~(y)| <= C d(x,y)(g~(x) + g~(y)) on X",
        "ceiling": None,
    },
    "oscillation_lemma": {
        "description": "|u_H - u_H'| <= diam(H ∪ H')(g_H + g_H') for subsets of S",
        "ceiling": 1.0 + 1e-12,
    },
    "lp_bounds": {
        "description": "L^p bounds of the extension, its gradient and the F / G functions",
        "ceiling": None,
    },
    "sharp_bounds": {
        "description": "Pointwise sharp maximal bounds for the extension",
        "ceiling": None,
        "restriction_ceiling": 2.0 + 1e-12,
    },
    "ball_lemmas": {
        "description": "Ball-family estimates behind the sharp maximal bounds",
        "ceiling": None,
    },
    "trace_equivalence": {
        "description": "Trace norm on S versus Calderon norm of the extension",
        "ceiling": None,
        "lower_ceiling": 2.0 + 1e-12,
    },
    "maximal_boundedness": {
        "description": "||Mf||_p <= K_p ||f||_p",
        "ceiling": None,
    },
    "sharp_gradient": {
        "description": "c f#_1 is a generalized gradient of f on X",
        "ceiling": None,
    },
}

DEFAULT_AUDITS = [
    "scale_bounds",
    "gradient_inequality",
    "oscillation_lemma",
    "lp_bounds",
    "sharp_bounds",
    "ball_lemmas",
    "trace_equivalence",
    "maximal_boundedness",
    "sharp_gradient",
]

DEFAULT_GENERATOR = "fat_cantor"


def audit_ceiling(name: str, overrides=None, key: str = "ceiling"):
    """Ceiling for an audit, taking a run configuration override first."""
    if overrides and name in overrides:
        return overrides[name]
    return AUDITS.get(name, {}).get(key)
