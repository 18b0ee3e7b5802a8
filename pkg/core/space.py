"""Finite metric measure spaces, balls, scalar fields and space-level estimates."""

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from config.settings import (
    AUTO_DELTA_THETA_CEILING,
    EXHAUSTIVE_TRIANGLE_LIMIT,
    TRIANGLE_SAMPLE_SIZE,
)
from core.errors import DomainError, RegularityError, SpaceError
from core.kernels import (
    KERNEL_RUNTIME,
    doubling_scan_parallel,
    doubling_scan_sequential,
    regularity_scan_parallel,
    regularity_scan_sequential,
)

try:
    from utils.system_utils import check_available_memory_for_space
    UTILS_AVAILABLE = True
except ImportError:
    UTILS_AVAILABLE = False


@dataclass(frozen=True)
class Ball:
    """Open ball {y : d(center, y) < radius} around a point id."""

    center: int
    radius: float

    def __post_init__(self):
        if not self.radius >= 0.0:
            raise SpaceError(f"ball radius must be non-negative, got {self.radius}")

    def scaled(self, factor: float) -> "Ball":
        return Ball(self.center, self.radius * factor)


@dataclass(frozen=True)
class SpaceParams:
    """Doubling / reverse doubling constants estimated inside a scale window."""

    C_d: float
    C_rd: float
    scale_window: Tuple[float, float]
    doubling_witness: Tuple[int, float] = (-1, math.nan)
    reverse_witness: Tuple[int, float] = (-1, math.nan)

    def __post_init__(self):
        if self.C_d < 1.0 or self.C_rd < 1.0 or self.C_rd > self.C_d:
            raise SpaceError(f"inconsistent doubling constants C_d={self.C_d}, C_rd={self.C_rd}")

    @property
    def alpha(self) -> float:
        return math.log2(self.C_rd)

    @property
    def beta(self) -> float:
        return math.log2(self.C_d)

    @property
    def reverse_doubling(self) -> bool:
        """True when the reverse doubling constant is nontrivial (C_rd > 1)."""
        return self.C_rd > 1.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            'C_d': self.C_d,
            'C_rd': self.C_rd,
            'alpha': self.alpha,
            'beta': self.beta,
            'scale_window': list(self.scale_window),
            'doubling_witness': list(self.doubling_witness),
            'reverse_witness': list(self.reverse_witness),
        }


@dataclass(frozen=True, eq=False)
class RegularSubset:
    """Boolean mask S together with its regularity scale delta and constant theta."""

    mask: np.ndarray = field(repr=False)
    delta: float
    theta: float
    theta_witness: Tuple[int, float] = (-1, math.nan)

    @cached_property
    def ids(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    @property
    def size(self) -> int:
        return int(self.mask.sum())

    def complement_ids(self) -> np.ndarray:
        return np.flatnonzero(~self.mask)


class ScalarField:
    """Real values on a sorted set of point ids."""

    def __init__(self, domain: Iterable[int], values: Iterable[float]):
        domain = np.asarray(domain, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        if domain.shape != values.shape:
            raise DomainError("domain and values differ in length")
        order = np.argsort(domain, kind='stable')
        domain = domain[order]
        if domain.size > 1 and np.any(np.diff(domain) == 0):
            raise DomainError("duplicate ids in field domain")
        self.domain = domain
        self.values = values[order]

    @classmethod
    def from_dense(cls, values: Sequence[float], domain: Optional[Iterable[int]] = None) -> "ScalarField":
        values = np.asarray(values, dtype=np.float64)
        if domain is None:
            return cls(np.arange(values.size), values)
        domain = np.asarray(domain, dtype=np.int64)
        return cls(domain, values[domain])

    def __len__(self) -> int:
        return int(self.domain.size)

    def __call__(self, point: int) -> float:
        return float(self.values_on([point])[0])

    def positions(self, ids: Iterable[int]) -> np.ndarray:
        ids = np.asarray(ids, dtype=np.int64)
        pos = np.searchsorted(self.domain, ids)
        if self.domain.size == 0:
            bad = np.ones(ids.shape, dtype=bool)
        else:
            bad = self.domain[np.minimum(pos, self.domain.size - 1)] != ids
        if np.any(bad):
            missing = ids[bad][0]
            raise DomainError(f"point {missing} is outside the field domain")
        return pos

    def values_on(self, ids: Iterable[int]) -> np.ndarray:
        return self.values[self.positions(ids)]

    def covers(self, ids: Iterable[int]) -> bool:
        try:
            self.positions(ids)
        except DomainError:
            return False
        return True

    def restrict(self, ids: Iterable[int]) -> "ScalarField":
        ids = np.asarray(ids, dtype=np.int64)
        return ScalarField(ids, self.values_on(ids))

    def dense(self, n: int, fill: float = 0.0) -> np.ndarray:
        out = np.full(n, fill, dtype=np.float64)
        out[self.domain] = self.values
        return out

    def domain_mask(self, n: int) -> np.ndarray:
        mask = np.zeros(n, dtype=bool)
        mask[self.domain] = True
        return mask

    def __repr__(self) -> str:
        return f"ScalarField(size={len(self)})"


class MetricMeasureSpace:
    """Finite metric space with positive point weights.

    Distances come either from Euclidean coordinates or from an explicit
    symmetric matrix. The dense distance matrix and the per-row stable
    distance ordering are built lazily and cached.
    """

    def __init__(
        self,
        weights: Sequence[float],
        coords: Optional[np.ndarray] = None,
        matrix: Optional[np.ndarray] = None,
        scale_window: Optional[Tuple[float, float]] = None,
        logger=None,
    ):
        if (coords is None) == (matrix is None):
            raise SpaceError("exactly one of coords or matrix must be given")
        self.logger = logger
        self.weights = np.ascontiguousarray(weights, dtype=np.float64)
        if self.weights.ndim != 1 or self.weights.size == 0:
            raise SpaceError("weights must be a non-empty vector")
        if not np.all(np.isfinite(self.weights)) or np.any(self.weights <= 0.0):
            bad = int(np.flatnonzero(~(self.weights > 0.0) | ~np.isfinite(self.weights))[0])
            raise SpaceError(f"weight of point {bad} must be positive and finite")

        self.coords = None
        self._matrix = None
        if coords is not None:
            coords = np.asarray(coords, dtype=np.float64)
            if coords.ndim == 1:
                coords = coords[:, None]
            if coords.shape[0] != self.weights.size:
                raise SpaceError("coords and weights differ in length")
            if not np.all(np.isfinite(coords)):
                raise SpaceError("coordinates must be finite")
            self.coords = coords
        else:
            matrix = np.ascontiguousarray(matrix, dtype=np.float64)
            if matrix.shape != (self.weights.size, self.weights.size):
                raise SpaceError("distance matrix must be n x n with n = number of weights")
            self._matrix = matrix
            self._validate_matrix(matrix)

        if self.coords is not None and self.n > 1:
            off = self.distances[~np.eye(self.n, dtype=bool)]
            if np.any(off <= 0.0):
                i, j = np.argwhere((self.distances <= 0.0) & ~np.eye(self.n, dtype=bool))[0]
                raise SpaceError(f"points {i} and {j} coincide")

        self._scale_window = None
        if scale_window is not None:
            r_min, r_max = float(scale_window[0]), float(scale_window[1])
            if not (0.0 < r_min <= r_max):
                raise SpaceError(f"invalid scale window ({r_min}, {r_max})")
            self._scale_window = (r_min, r_max)

    @classmethod
    def from_coords(cls, coords, weights, scale_window=None, logger=None) -> "MetricMeasureSpace":
        return cls(weights, coords=coords, scale_window=scale_window, logger=logger)

    @classmethod
    def from_matrix(cls, matrix, weights, scale_window=None, logger=None) -> "MetricMeasureSpace":
        return cls(weights, matrix=matrix, scale_window=scale_window, logger=logger)

    def _validate_matrix(self, matrix: np.ndarray) -> None:
        n = matrix.shape[0]
        if not np.all(np.isfinite(matrix)):
            raise SpaceError("distance matrix must be finite")
        if np.any(np.diag(matrix) != 0.0):
            i = int(np.flatnonzero(np.diag(matrix) != 0.0)[0])
            raise SpaceError(f"d({i},{i}) must be zero")
        asym = np.argwhere(matrix != matrix.T)
        if asym.size:
            i, j = asym[0]
            raise SpaceError(f"distance matrix not symmetric at ({i},{j})")
        off = ~np.eye(n, dtype=bool)
        if np.any(matrix[off] <= 0.0):
            i, j = np.argwhere((matrix <= 0.0) & off)[0]
            raise SpaceError(f"d({i},{j}) must be positive")
        violation = find_triangle_violation(matrix)
        if violation is not None:
            i, j, k = violation
            raise SpaceError(f"triangle inequality fails for d({i},{j}) > d({i},{k}) + d({k},{j})")

    @property
    def n(self) -> int:
        return int(self.weights.size)

    @property
    def is_euclidean(self) -> bool:
        return self.coords is not None

    @cached_property
    def distances(self) -> np.ndarray:
        if self._matrix is not None:
            return self._matrix
        if UTILS_AVAILABLE:
            check_available_memory_for_space(self.n, self.logger)
        return np.ascontiguousarray(cdist(self.coords, self.coords))

    @cached_property
    def order(self) -> np.ndarray:
        """Per-row stable ordering of points by distance (ties by id)."""
        order = np.argsort(self.distances, axis=1, kind='stable')
        return np.ascontiguousarray(order.astype(np.int64))

    @cached_property
    def total_measure(self) -> float:
        return math.fsum(self.weights.tolist())

    @cached_property
    def min_positive_distance(self) -> float:
        if self.n < 2:
            return math.inf
        dist = self.distances
        return float(dist[dist > 0.0].min())

    @cached_property
    def diameter(self) -> float:
        return float(self.distances.max())

    @property
    def scale_window(self) -> Tuple[float, float]:
        if self._scale_window is not None:
            return self._scale_window
        return (2.0 * self.min_positive_distance, self.diameter / 2.0)

    def has_custom_window(self) -> bool:
        return self._scale_window is not None

    def distance(self, i: int, j: int) -> float:
        self.check_ids([i, j])
        return float(self.distances[i, j])

    def check_ids(self, ids: Iterable[int]) -> np.ndarray:
        ids = np.asarray(list(ids) if not isinstance(ids, np.ndarray) else ids, dtype=np.int64)
        if ids.size and (ids.min() < 0 or ids.max() >= self.n):
            bad = ids[(ids < 0) | (ids >= self.n)][0]
            raise SpaceError(f"invalid point id {bad}")
        return ids

    def mask_from_ids(self, ids: Iterable[int]) -> np.ndarray:
        mask = np.zeros(self.n, dtype=bool)
        mask[self.check_ids(ids)] = True
        return mask

    def measure(self, ids: Iterable[int]) -> float:
        ids = self.check_ids(ids)
        return math.fsum(self.weights[ids].tolist())

    def __repr__(self) -> str:
        kind = "coords" if self.is_euclidean else "matrix"
        return f"MetricMeasureSpace(n={self.n}, {kind})"


def find_triangle_violation(matrix: np.ndarray, seed: int = 0) -> Optional[Tuple[int, int, int]]:
    """Return (i, j, k) with d(i,j) > d(i,k) + d(k,j), or None.

    Exhaustive for small matrices, otherwise a seeded sample of triples.
    """
    n = matrix.shape[0]
    tol = 1e-12 * max(float(matrix.max()), 1.0)
    if n <= EXHAUSTIVE_TRIANGLE_LIMIT:
        for k in range(n):
            through_k = matrix[:, k][:, None] + matrix[k, :][None, :]
            bad = np.argwhere(matrix > through_k + tol)
            if bad.size:
                i, j = bad[0]
                return int(i), int(j), int(k)
        return None
    rng = np.random.default_rng(seed)
    triples = rng.integers(0, n, size=(TRIANGLE_SAMPLE_SIZE, 3))
    i, j, k = triples[:, 0], triples[:, 1], triples[:, 2]
    bad = np.flatnonzero(matrix[i, j] > matrix[i, k] + matrix[k, j] + tol)
    if bad.size:
        t = bad[0]
        return int(i[t]), int(j[t]), int(k[t])
    return None


def ball_members(space: MetricMeasureSpace, ball: Ball) -> np.ndarray:
    """Point ids y with d(center, y) < radius, ascending."""
    space.check_ids([ball.center])
    return np.flatnonzero(space.distances[ball.center] < ball.radius)


def closed_ball_members(space: MetricMeasureSpace, center: int, radius: float) -> np.ndarray:
    space.check_ids([center])
    return np.flatnonzero(space.distances[center] <= radius)


def ball_measure(space: MetricMeasureSpace, ball: Ball) -> float:
    return space.measure(ball_members(space, ball))


def average(space: MetricMeasureSpace, f: ScalarField, subset: Iterable[int]) -> float:
    """Weighted mean of f over a subset of f's domain; 0 over the empty set."""
    ids = space.check_ids(subset)
    if ids.size == 0:
        return 0.0
    vals = f.values_on(ids)
    w = space.weights[ids]
    mean = math.fsum((vals * w).tolist()) / math.fsum(w.tolist())
    # exact means lie in the value range; keep floating ones there too
    return float(min(max(mean, vals.min()), vals.max()))


def candidate_radii(space: MetricMeasureSpace, point: int) -> np.ndarray:
    """Distinct positive distances from a point, ascending.

    Every sup over r of an open-ball quantity is attained in the limit
    r -> r_k+ for one of these radii, where the open ball equals the
    closed ball of radius r_k.
    """
    space.check_ids([point])
    row = space.distances[point]
    return np.unique(row[row > 0.0])


def estimate_doubling(space: MetricMeasureSpace, points: Optional[Iterable[int]] = None,
                      logger=None) -> SpaceParams:
    """Estimate C_d (max) and C_rd (min) of mu(B(x,2r))/mu(B(x,r)) over the scale window."""
    r_min, r_max = space.scale_window
    r_hi = r_max / 2.0
    if not (r_min <= r_hi):
        raise SpaceError(f"empty radius window [{r_min}, {r_hi}]")
    pts = np.arange(space.n) if points is None else space.check_ids(points)
    m = pts.size
    ratio_max = np.empty(m)
    ratio_min = np.empty(m)
    at_max = np.empty(m)
    at_min = np.empty(m)
    evaluated = np.zeros(m, dtype=np.int64)
    kernel = KERNEL_RUNTIME.pick(doubling_scan_parallel, doubling_scan_sequential)
    kernel(space.distances, space.order, space.weights, pts, r_min, r_hi,
           ratio_max, ratio_min, at_max, at_min, evaluated)
    if not np.any(evaluated > 0):
        raise SpaceError(f"empty radius window [{r_min}, {r_hi}]")
    valid = evaluated > 0
    i_max = int(np.argmax(np.where(valid, ratio_max, -np.inf)))
    i_min = int(np.argmin(np.where(valid, ratio_min, np.inf)))
    params = SpaceParams(
        C_d=float(ratio_max[i_max]),
        C_rd=float(ratio_min[i_min]),
        scale_window=(r_min, r_max),
        doubling_witness=(int(pts[i_max]), float(at_max[i_max])),
        reverse_witness=(int(pts[i_min]), float(at_min[i_min])),
    )
    if logger:
        logger.debug(f"Doubling estimate over {int(evaluated.sum())} (x, r) pairs: "
                     f"C_d={params.C_d:.6g}, C_rd={params.C_rd:.6g}")
    return params


def _regularity_theta(space: MetricMeasureSpace, mask: np.ndarray, delta: float) -> Tuple[float, Tuple[int, float]]:
    pts = np.flatnonzero(mask)
    ratio_max = np.empty(pts.size)
    at_max = np.empty(pts.size)
    kernel = KERNEL_RUNTIME.pick(regularity_scan_parallel, regularity_scan_sequential)
    kernel(space.distances, space.order, space.weights, mask, pts, float(delta), ratio_max, at_max)
    i = int(np.argmax(ratio_max))
    return float(ratio_max[i]), (int(pts[i]), float(at_max[i]))


def estimate_regularity(space: MetricMeasureSpace, mask: np.ndarray, delta: float, logger=None) -> RegularSubset:
    """theta = max over x in S and candidate radii r <= delta of mu(B)/mu(B ∩ S)."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (space.n,):
        raise SpaceError("mask length differs from the number of points")
    if not mask.any():
        raise SpaceError("subset S is empty")
    if not delta > 0.0:
        raise RegularityError(f"not regular at scale {delta}")
    theta, witness = _regularity_theta(space, mask, delta)
    if not math.isfinite(theta):
        raise RegularityError(f"not regular at scale {delta}: empty intersection at point {witness[0]}")
    if logger:
        logger.debug(f"Regularity at delta={delta:.6g}: theta={theta:.6g} (witness point {witness[0]})")
    return RegularSubset(mask=mask, delta=float(delta), theta=theta, theta_witness=witness)


def choose_regularity_scale(space: MetricMeasureSpace, mask: np.ndarray,
                            ceiling: float = AUTO_DELTA_THETA_CEILING, logger=None) -> RegularSubset:
    """Largest candidate scale whose regularity constant stays within the ceiling."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise SpaceError("subset S is empty")
    dist = space.distances
    scales = np.unique(dist[dist > 0.0])
    if scales.size == 0:
        return RegularSubset(mask=mask, delta=math.inf, theta=1.0)

    # theta is nondecreasing in delta
    lo, hi = 0, scales.size - 1
    best = -1
    while lo <= hi:
        mid = (lo + hi) // 2
        theta, _ = _regularity_theta(space, mask, scales[mid])
        if theta <= ceiling:
            best = mid
            lo = mid + 1
        else:
            hi = mid - 1
    if best < 0:
        raise RegularityError(f"not regular at scale {scales[0]}: theta exceeds {ceiling}")
    if logger:
        logger.debug(f"Auto delta picked {scales[best]:.6g} out of {scales.size} candidate scales")
    return estimate_regularity(space, mask, float(scales[best]), logger=logger)
