"""Lipschitz partition of unity on X \\ S subordinate to the enlarged Whitney balls."""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Tuple

import numpy as np
from scipy import sparse

from config.settings import PARTITION_SUM_TOLERANCE, STAR_FACTOR
from core.errors import CoverError
from core.kernels import KERNEL_RUNTIME, lipschitz_scan_parallel, lipschitz_scan_sequential
from core.space import MetricMeasureSpace
from core.whitney import MaskLike, WhitneyCover, as_mask


@dataclass(eq=False)
class Partition:
    """phi_B(x) stored as a sparse ball x point matrix (zero on S)."""

    matrix: sparse.csr_matrix = field(repr=False)
    lipschitz_constant: float = 0.0

    def __len__(self) -> int:
        return self.matrix.shape[0]

    def row(self, index: int) -> Tuple[np.ndarray, np.ndarray]:
        """(points, values) of phi_B on its support."""
        m = self.matrix
        lo, hi = m.indptr[index], m.indptr[index + 1]
        return m.indices[lo:hi], m.data[lo:hi]

    def value(self, index: int, point: int) -> float:
        return float(self.matrix[index, point])

    def sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=0)).ravel()


def _lipschitz(space: MetricMeasureSpace, mask: np.ndarray, cover: WhitneyCover, matrix: sparse.csr_matrix) -> np.ndarray:
    """Per ball: max over x != y in X \\ S of |phi_B(x) - phi_B(y)| r_B / d(x, y)."""
    matrix = matrix.tocsr()
    off = np.flatnonzero(~mask).astype(np.int64)
    out = np.zeros(matrix.shape[0])
    kernel = KERNEL_RUNTIME.pick(lipschitz_scan_parallel, lipschitz_scan_sequential)
    kernel(space.distances, matrix.indptr.astype(np.int64), matrix.indices.astype(np.int64),
           matrix.data.astype(np.float64), cover.radii.astype(np.float64), off, out)
    return out


def build_partition(space: MetricMeasureSpace, subset: MaskLike, cover: WhitneyCover, logger=None) -> Partition:
    """psi_B = clamp((9/8 r_B - d(x, x_B)) / (r_B / 8), 0, 1), normalised to sum to one off S."""
    mask = as_mask(space, subset)
    star = cover.star_membership
    dist = space.distances
    data = np.empty(star.indices.size)
    for b in range(len(cover)):
        lo, hi = star.indptr[b], star.indptr[b + 1]
        pts = star.indices[lo:hi]
        r = cover.radii[b]
        data[lo:hi] = np.clip((STAR_FACTOR * r - dist[cover.centers[b], pts]) / (r / 8.0), 0.0, 1.0)
    psi = sparse.csr_matrix((data, star.indices.copy(), star.indptr.copy()), shape=star.shape)
    psi.data[mask[psi.indices]] = 0.0
    psi.eliminate_zeros()

    totals = np.asarray(psi.sum(axis=0)).ravel()
    off = np.flatnonzero(~mask)
    holes = off[totals[off] <= 0.0]
    if holes.size:
        raise CoverError(f"coverage hole: point {int(holes[0])} lies in no enlarged ball")
    phi = psi.copy()
    phi.data = phi.data / totals[phi.indices]

    lipschitz = _lipschitz(space, mask, cover, phi) if len(cover) else np.zeros(0)
    constant = float(lipschitz.max()) if lipschitz.size else 0.0
    if logger:
        logger.debug(f"Partition of unity: {phi.nnz} nonzeros, observed Lipschitz constant {constant:.4g}")
    return Partition(matrix=phi, lipschitz_constant=constant)


@dataclass
class PartitionReport:
    """Observed sum deviation, support/range violations and Lipschitz constant."""

    max_sum_deviation: float
    sum_violations: List[int]
    support_violations: List[Tuple[int, int]]
    range_violations: List[Tuple[int, int]]
    lipschitz_constant: float
    tolerance: float = PARTITION_SUM_TOLERANCE

    @property
    def passed(self) -> bool:
        return not (self.sum_violations or self.support_violations or self.range_violations)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'passed': self.passed,
            'max_sum_deviation': self.max_sum_deviation,
            'sum_violations': self.sum_violations,
            'support_violations': [list(p) for p in self.support_violations],
            'range_violations': [list(p) for p in self.range_violations],
            'lipschitz_constant': self.lipschitz_constant,
            'tolerance': self.tolerance,
        }


def verify_partition(space: MetricMeasureSpace, subset: MaskLike, cover: WhitneyCover,
                     partition: Partition, tolerance: float = PARTITION_SUM_TOLERANCE) -> PartitionReport:
    """Sum to one off S, support inside B*, values in [0, 1], observed Lipschitz constant."""
    mask = as_mask(space, subset)
    off = np.flatnonzero(~mask)
    matrix = partition.matrix.tocoo()
    sums = partition.sums()
    deviation = np.abs(sums[off] - 1.0) if off.size else np.zeros(0)
    max_dev = float(deviation.max()) if deviation.size else 0.0
    sum_bad = off[deviation > tolerance].tolist()

    dist = space.distances
    support_bad, range_bad = [], []
    for b, x, v in zip(matrix.row.tolist(), matrix.col.tolist(), matrix.data.tolist()):
        if v == 0.0:
            continue
        if mask[x] or not dist[cover.centers[b], x] < STAR_FACTOR * cover.radii[b]:
            support_bad.append((b, x))
        if v < 0.0 or v > 1.0 + tolerance:
            range_bad.append((b, x))

    lipschitz = _lipschitz(space, mask, cover, partition.matrix) if len(partition) else np.zeros(0)
    return PartitionReport(
        max_sum_deviation=max_dev,
        sum_violations=sum_bad,
        support_violations=sorted(support_bad),
        range_violations=sorted(range_bad),
        lipschitz_constant=float(lipschitz.max()) if lipschitz.size else 0.0,
        tolerance=tolerance,
    )
