"""Synthetic spaces: uniform grids and fat Cantor / Sierpiński subsets of grids."""

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from config.registry import SCHEDULES
from config.settings import DEFAULT_REGULARITY_DELTA_CELLS
from core.errors import SpaceError
from core.space import MetricMeasureSpace

Schedule = Union[str, Sequence[float], Callable[[int], float], None]


@dataclass
class GeneratedSpace:
    """A generated space, its optional subset mask and facts about the construction."""

    space: MetricMeasureSpace
    mask: Optional[np.ndarray] = None
    recommended_delta: Optional[float] = None
    info: Dict[str, Any] = field(default_factory=dict)


def cantor_schedule(k: int) -> float:
    """Fraction of each interval removed at step k (k >= 1)."""
    return 4.0 ** (-k)


def carpet_schedule(k: int) -> float:
    """Side fraction of the hole cut from each square at step k (k >= 1)."""
    return (1.0 / 3.0) * 2.0 ** (-(k - 1))


SCHEDULE_FUNCTIONS = {
    'cantor': cantor_schedule,
    'carpet': carpet_schedule,
}


def resolve_schedule(schedule: Schedule, level: int, default: Callable[[int], float]) -> List[float]:
    """Turn a schedule (registry name, sequence, callable or None) into the first `level` fractions."""
    if isinstance(schedule, str):
        if schedule not in SCHEDULE_FUNCTIONS:
            raise SpaceError(f"unknown schedule '{schedule}', expected one of {', '.join(sorted(SCHEDULES))}")
        schedule = SCHEDULE_FUNCTIONS[schedule]
    if schedule is None:
        fractions = [default(k) for k in range(1, level + 1)]
    elif callable(schedule):
        fractions = [float(schedule(k)) for k in range(1, level + 1)]
    else:
        fractions = [float(f) for f in schedule]
        if len(fractions) < level:
            raise SpaceError(f"schedule has {len(fractions)} entries, level {level} needs {level}")
        fractions = fractions[:level]
    for k, f in enumerate(fractions, start=1):
        if not (0.0 <= f < 1.0):
            raise SpaceError(f"schedule removing everything: fraction {f} at step {k}")
    return fractions


def _centered_block(length: int, fraction: float) -> int:
    """Length of a centred block close to fraction * length that leaves equal sides."""
    target = fraction * length
    lower = int(math.floor(target))
    if (length - lower) % 2:
        lower -= 1
    upper = lower + 2
    candidates = [c for c in (lower, upper) if 0 <= c <= length]
    if not candidates:
        return 0
    return min(candidates, key=lambda c: (abs(c - target), -c))


def _grid_coords(dims: Sequence[int], spacing: float) -> np.ndarray:
    axes = [np.arange(d, dtype=np.float64) * spacing for d in dims]
    mesh = np.meshgrid(*axes, indexing='ij')
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


def gen_grid(dims: Sequence[int], spacing: float = 1.0, logger=None) -> GeneratedSpace:
    """Uniform grid with unit-cell weights spacing^dim."""
    dims = [int(d) for d in dims]
    if not dims or any(d < 1 for d in dims):
        raise SpaceError(f"invalid grid dimensions {dims}")
    if not spacing > 0.0:
        raise SpaceError(f"grid spacing must be positive, got {spacing}")
    coords = _grid_coords(dims, spacing)
    weights = np.full(coords.shape[0], spacing ** len(dims))
    space = MetricMeasureSpace.from_coords(coords, weights, logger=logger)
    if logger:
        logger.debug(f"Generated grid {dims} with spacing {spacing}: {space.n} points")
    return GeneratedSpace(space=space, info={'generator': 'grid', 'dims': dims, 'spacing': spacing})


def gen_fat_cantor(level: int, schedule: Schedule = None, resolution: Optional[int] = None,
                   spacing: float = 1.0, logger=None) -> GeneratedSpace:
    """1D grid with a fat Cantor mask.

    At step k the middle fraction schedule(k) of every remaining interval is
    removed. The removed blocks are rounded to whole cells, symmetric inside
    their interval.
    """
    if level < 0:
        raise SpaceError(f"level must be non-negative, got {level}")
    fractions = resolve_schedule(schedule, level, cantor_schedule)
    cells = int(resolution) if resolution is not None else 4 ** (level + 1)
    if cells < 1:
        raise SpaceError(f"resolution must be positive, got {cells}")

    mask = np.ones(cells, dtype=bool)
    intervals: List[Tuple[int, int]] = [(0, cells)]
    for k, fraction in enumerate(fractions, start=1):
        next_intervals = []
        for start, length in intervals:
            hole = _centered_block(length, fraction)
            if hole >= length:
                raise SpaceError(f"schedule removing everything at step {k}")
            if hole == 0:
                next_intervals.append((start, length))
                continue
            side = (length - hole) // 2
            mask[start + side:start + side + hole] = False
            next_intervals.append((start, side))
            next_intervals.append((start + side + hole, side))
        intervals = next_intervals

    coords = np.arange(cells, dtype=np.float64)[:, None] * spacing
    weights = np.full(cells, spacing)
    space = MetricMeasureSpace.from_coords(coords, weights, logger=logger)
    ambient = cells * spacing
    info = {
        'generator': 'fat_cantor',
        'level': level,
        'schedule': fractions,
        'resolution': cells,
        'spacing': spacing,
        'ambient_measure': ambient,
        'retained_measure': float(mask.sum()) * spacing,
        'nominal_retained_measure': ambient * float(np.prod([1.0 - f for f in fractions])),
    }
    if logger:
        logger.debug(f"Fat Cantor level {level}: {int(mask.sum())}/{cells} cells retained")
    return GeneratedSpace(space=space, mask=mask,
                          recommended_delta=DEFAULT_REGULARITY_DELTA_CELLS * spacing, info=info)


def _split3(start: int, length: int) -> List[Tuple[int, int]]:
    sizes = [len(part) for part in np.array_split(np.arange(length), 3)]
    out, pos = [], start
    for size in sizes:
        out.append((pos, size))
        pos += size
    return out


def gen_fat_sierpinski(level: int, schedule: Schedule = None, resolution: Optional[int] = None,
                       spacing: float = 1.0, logger=None) -> GeneratedSpace:
    """2D grid with a fat Sierpiński carpet mask.

    At step k every current rectangle loses a centred hole whose sides are the
    fraction schedule(k) of its own sides, and is then split 3 x 3; the eight
    outer blocks carry on to step k + 1.
    """
    if level < 0:
        raise SpaceError(f"level must be non-negative, got {level}")
    fractions = resolve_schedule(schedule, level, carpet_schedule)
    side = int(resolution) if resolution is not None else 3 ** (level + 1)
    if side < 1:
        raise SpaceError(f"resolution must be positive, got {side}")

    mask = np.ones((side, side), dtype=bool)
    rects = [(0, side, 0, side)]
    for k, fraction in enumerate(fractions, start=1):
        next_rects = []
        for x0, w, y0, h in rects:
            hole_w = _centered_block(w, fraction)
            hole_h = _centered_block(h, fraction)
            if hole_w >= w and hole_h >= h:
                raise SpaceError(f"schedule removing everything at step {k}")
            if hole_w and hole_h:
                hx = x0 + (w - hole_w) // 2
                hy = y0 + (h - hole_h) // 2
                mask[hx:hx + hole_w, hy:hy + hole_h] = False
            for i, (bx, bw) in enumerate(_split3(x0, w)):
                for j, (by, bh) in enumerate(_split3(y0, h)):
                    if (i, j) == (1, 1) or bw == 0 or bh == 0:
                        continue
                    next_rects.append((bx, bw, by, bh))
        rects = next_rects

    if not mask.any():
        raise SpaceError("schedule removing everything")
    coords = _grid_coords([side, side], spacing)
    weights = np.full(side * side, spacing ** 2)
    space = MetricMeasureSpace.from_coords(coords, weights, logger=logger)
    ambient = side * side * spacing ** 2
    removed_nominal = sum((8.0 / 9.0) ** (k - 1) * f * f for k, f in enumerate(fractions, start=1))
    info = {
        'generator': 'fat_sierpinski',
        'level': level,
        'schedule': fractions,
        'resolution': side,
        'spacing': spacing,
        'ambient_measure': ambient,
        'retained_measure': float(mask.sum()) * spacing ** 2,
        'nominal_retained_measure': ambient * (1.0 - removed_nominal),
    }
    if logger:
        logger.debug(f"Fat Sierpinski level {level}: {int(mask.sum())}/{side * side} cells retained")
    return GeneratedSpace(space=space, mask=mask.reshape(-1),
                          recommended_delta=DEFAULT_REGULARITY_DELTA_CELLS * spacing * math.sqrt(2.0),
                          info=info)


GENERATOR_FUNCTIONS = {
    'grid': gen_grid,
    'fat_cantor': gen_fat_cantor,
    'fat_sierpinski': gen_fat_sierpinski,
}


def generate(name: str, logger=None, **params) -> GeneratedSpace:
    """Dispatch to a named generator."""
    if name not in GENERATOR_FUNCTIONS:
        raise SpaceError(f"unknown generator '{name}'")
    return GENERATOR_FUNCTIONS[name](logger=logger, **params)
