"""Whitney-type ball cover of the complement X \\ S."""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
from scipy import sparse

from config.settings import (
    COVER_CONSTANT_CEILING,
    MULTIPLICITY_FACTOR,
    STAR_FACTOR,
    WHITNEY_RADIUS_FRACTION,
)
from core.errors import CoverError, SpaceError
from core.space import Ball, MetricMeasureSpace, RegularSubset, SpaceParams, ball_members

MaskLike = Union[RegularSubset, np.ndarray, Sequence[bool]]


def as_mask(space: MetricMeasureSpace, subset: MaskLike) -> np.ndarray:
    """Boolean mask of S from a RegularSubset or any boolean sequence."""
    mask = subset.mask if isinstance(subset, RegularSubset) else np.asarray(subset, dtype=bool)
    if mask.shape != (space.n,):
        raise SpaceError("mask length differs from the number of points")
    return mask


def distance_to_subset(space: MetricMeasureSpace, mask: np.ndarray) -> np.ndarray:
    """d(x, S) for every point x."""
    if not mask.any():
        raise CoverError("subset S is empty")
    return space.distances[:, mask].min(axis=1)


def membership_matrix(space: MetricMeasureSpace, centers: np.ndarray, radii: np.ndarray) -> sparse.csr_matrix:
    """Sparse ball x point indicator of the open balls B(centers[b], radii[b])."""
    rows = [np.flatnonzero(space.distances[c] < r) for c, r in zip(centers, radii)]
    indptr = np.zeros(len(rows) + 1, dtype=np.int64)
    if rows:
        indptr[1:] = np.cumsum([row.size for row in rows])
        indices = np.concatenate(rows).astype(np.int64)
    else:
        indices = np.zeros(0, dtype=np.int64)
    data = np.ones(indices.size, dtype=np.float64)
    return sparse.csr_matrix((data, indices, indptr), shape=(len(rows), space.n))


@dataclass(eq=False)
class WhitneyCover:
    """Balls B_i = B(x_i, r_i) covering X \\ S, with anchors y_i in S."""

    space: MetricMeasureSpace = field(repr=False)
    mask: np.ndarray = field(repr=False)
    centers: np.ndarray
    radii: np.ndarray
    anchors: np.ndarray
    fallback_count: int = 0

    @classmethod
    def from_balls(cls, space: MetricMeasureSpace, subset: MaskLike, balls: Sequence[Ball],
                   anchors: Optional[Sequence[int]] = None) -> "WhitneyCover":
        """Rebuild a cover from explicit balls; anchors are selected when omitted."""
        mask = as_mask(space, subset)
        centers = space.check_ids([b.center for b in balls])
        radii = np.array([b.radius for b in balls], dtype=np.float64)
        if anchors is None:
            anchors = [select_anchor(space, mask, b) for b in balls]
        anchors = space.check_ids(anchors)
        if anchors.size and not np.all(mask[anchors]):
            raise CoverError("every anchor must lie in S")
        return cls(space=space, mask=mask, centers=centers, radii=radii, anchors=anchors)

    def __len__(self) -> int:
        return int(self.centers.size)

    @property
    def balls(self) -> List[Ball]:
        return [Ball(int(c), float(r)) for c, r in zip(self.centers, self.radii)]

    def ball(self, index: int) -> Ball:
        return Ball(int(self.centers[index]), float(self.radii[index]))

    @cached_property
    def dist_to_subset(self) -> np.ndarray:
        return distance_to_subset(self.space, self.mask)

    @cached_property
    def membership(self) -> sparse.csr_matrix:
        return membership_matrix(self.space, self.centers, self.radii)

    @cached_property
    def star_membership(self) -> sparse.csr_matrix:
        """Indicator of the enlarged balls B* = B(x_i, 9/8 r_i)."""
        return membership_matrix(self.space, self.centers, STAR_FACTOR * self.radii)

    @cached_property
    def neighbor_index(self) -> List[np.ndarray]:
        """For each ball, the balls K (itself included) with B* ∩ K* non-empty."""
        star = self.star_membership
        overlap = (star @ star.T).tocsr()
        return [np.sort(overlap.indices[overlap.indptr[b]:overlap.indptr[b + 1]]) for b in range(len(self))]

    def members(self, index: int) -> np.ndarray:
        m = self.membership
        return m.indices[m.indptr[index]:m.indptr[index + 1]]

    def star_members(self, index: int) -> np.ndarray:
        m = self.star_membership
        return m.indices[m.indptr[index]:m.indptr[index + 1]]

    def multiplicity(self) -> np.ndarray:
        """Number of balls containing each point."""
        return np.asarray(self.membership.sum(axis=0)).ravel().astype(np.int64)


@dataclass
class CoverReport:
    """Outcome of verify_cover; every field is an observed quantity."""

    coverage: bool
    uncovered: List[int]
    balls_meeting_subset: List[int]
    sandwich_violations: List[int]
    multiplicity: int
    star_multiplicity: int
    multiplicity_bound: Optional[float]
    anchor_constant: float
    measure_comparability: float
    neighbor_radius_constant: float
    distance_ratio_constant: float
    constant_ceiling: float
    fallback_count: int = 0

    @property
    def cover_constant(self) -> float:
        return max(self.anchor_constant, self.neighbor_radius_constant, self.distance_ratio_constant)

    @property
    def multiplicity_ok(self) -> bool:
        return self.multiplicity_bound is None or self.multiplicity <= self.multiplicity_bound

    @property
    def constants_ok(self) -> bool:
        return self.cover_constant <= self.constant_ceiling

    @property
    def passed(self) -> bool:
        return (self.coverage and not self.balls_meeting_subset and not self.sandwich_violations
                and self.multiplicity_ok and self.constants_ok)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'passed': self.passed,
            'coverage': self.coverage,
            'uncovered': self.uncovered,
            'balls_meeting_subset': self.balls_meeting_subset,
            'sandwich_violations': self.sandwich_violations,
            'multiplicity': self.multiplicity,
            'star_multiplicity': self.star_multiplicity,
            'multiplicity_bound': self.multiplicity_bound,
            'anchor_constant': self.anchor_constant,
            'measure_comparability': self.measure_comparability,
            'neighbor_radius_constant': self.neighbor_radius_constant,
            'distance_ratio_constant': self.distance_ratio_constant,
            'cover_constant': self.cover_constant,
            'constant_ceiling': self.constant_ceiling,
            'fallback_count': self.fallback_count,
        }


def select_anchor(space: MetricMeasureSpace, subset: MaskLike, ball: Ball) -> int:
    """Nearest point of S to the ball centre, ties to the lowest id."""
    mask = as_mask(space, subset)
    s_ids = np.flatnonzero(mask)
    if s_ids.size == 0:
        raise CoverError("subset S is empty")
    row = space.distances[ball.center, s_ids]
    return int(s_ids[int(np.argmin(row))])


def build_whitney(space: MetricMeasureSpace, subset: MaskLike, logger=None) -> WhitneyCover:
    """Greedy Whitney cover of X \\ S with radii d(x, S)/4.

    Points are taken in decreasing order of d(x, S) (ties by id); a point
    becomes a centre when it lies farther than r_j/2 from every accepted
    centre x_j.
    """
    mask = as_mask(space, subset)
    if not mask.any():
        raise CoverError("subset S is empty")
    empty = np.zeros(0, dtype=np.int64)
    if mask.all():
        if logger:
            logger.debug("S = X, Whitney cover is empty")
        return WhitneyCover(space=space, mask=mask, centers=empty, radii=np.zeros(0), anchors=empty)

    dist_s = distance_to_subset(space, mask)
    off = np.flatnonzero(~mask)
    rho = WHITNEY_RADIUS_FRACTION * dist_s[off]
    order = np.lexsort((off, -rho))

    dist = space.distances
    blocked = np.zeros(space.n, dtype=bool)
    centers: List[int] = []
    radii: List[float] = []
    for k in order:
        x = int(off[k])
        if blocked[x]:
            continue
        centers.append(x)
        radii.append(float(rho[k]))
        blocked |= dist[x] <= 0.5 * rho[k]

    centers_arr = np.array(centers, dtype=np.int64)
    radii_arr = np.array(radii, dtype=np.float64)
    covered = np.asarray(membership_matrix(space, centers_arr, radii_arr).sum(axis=0)).ravel() > 0
    uncovered = off[~covered[off]]
    if uncovered.size:
        if logger:
            logger.warning(f"Greedy cover left {uncovered.size} points uncovered, adding fallback balls")
        # the open ball of radius d(x,S)/4 around x already contains x
        centers_arr = np.concatenate([centers_arr, uncovered])
        radii_arr = np.concatenate([radii_arr, WHITNEY_RADIUS_FRACTION * dist_s[uncovered]])

    s_ids = np.flatnonzero(mask)
    anchors = s_ids[np.argmin(dist[np.ix_(centers_arr, s_ids)], axis=1)]
    cover = WhitneyCover(space=space, mask=mask, centers=centers_arr, radii=radii_arr,
                         anchors=anchors.astype(np.int64), fallback_count=int(uncovered.size))
    if logger:
        logger.debug(f"Whitney cover: {len(cover)} balls for {off.size} points of X \\ S")
    return cover


def verify_cover(space: MetricMeasureSpace, subset: MaskLike, cover: WhitneyCover,
                 params: Optional[SpaceParams] = None,
                 ceiling: float = COVER_CONSTANT_CEILING) -> CoverReport:
    """Check coverage, the distance sandwich and the comparability constants of a cover."""
    mask = as_mask(space, subset)
    dist = space.distances
    off = np.flatnonzero(~mask)
    bound = None if params is None else MULTIPLICITY_FACTOR * params.C_d ** 4

    if len(cover) == 0:
        return CoverReport(coverage=off.size == 0, uncovered=off.tolist(), balls_meeting_subset=[],
                           sandwich_violations=[], multiplicity=0, star_multiplicity=0,
                           multiplicity_bound=bound, anchor_constant=0.0, measure_comparability=1.0,
                           neighbor_radius_constant=0.0, distance_ratio_constant=0.0,
                           constant_ceiling=ceiling, fallback_count=cover.fallback_count)

    dist_s = distance_to_subset(space, mask)
    counts = cover.multiplicity()
    uncovered = off[counts[off] == 0].tolist()

    meeting, sandwich = [], []
    anchor_c = 0.0
    comparability = 1.0
    ratio_c = 0.0
    for b in range(len(cover)):
        x_b, r_b, y_b = int(cover.centers[b]), float(cover.radii[b]), int(cover.anchors[b])
        members = cover.members(b)
        if np.any(mask[members]):
            meeting.append(b)
            continue
        gap = float(dist_s[members].min())
        if not (r_b <= gap * (1.0 + 1e-12) and gap <= 4.0 * r_b * (1.0 + 1e-12)):
            sandwich.append(b)

        around_anchor = ball_members(space, Ball(y_b, r_b))
        anchor_c = max(anchor_c,
                       float(dist[x_b, around_anchor].max()) / r_b,
                       float(dist[y_b, members].max()) / r_b)
        mu_x = space.measure(members)
        mu_y = space.measure(around_anchor)
        comparability = max(comparability, mu_x / mu_y, mu_y / mu_x)

        star = cover.star_members(b)
        d_star = dist_s[star]
        with np.errstate(divide='ignore'):
            ratio_c = max(ratio_c, float((d_star / r_b).max()), float((r_b / d_star).max()))

    neighbor_c = 0.0
    for b, neighbors in enumerate(cover.neighbor_index):
        neighbor_c = max(neighbor_c, float((cover.radii[neighbors] / cover.radii[b]).max()))
    star_mult = max(len(neighbors) for neighbors in cover.neighbor_index)

    return CoverReport(
        coverage=not uncovered,
        uncovered=uncovered,
        balls_meeting_subset=meeting,
        sandwich_violations=sandwich,
        multiplicity=int(counts.max()),
        star_multiplicity=int(star_mult),
        multiplicity_bound=bound,
        anchor_constant=anchor_c,
        measure_comparability=comparability,
        neighbor_radius_constant=neighbor_c,
        distance_ratio_constant=ratio_c,
        constant_ceiling=ceiling,
        fallback_count=cover.fallback_count,
    )
