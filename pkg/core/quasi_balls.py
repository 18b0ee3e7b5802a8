"""Quasi-balls H_B: carved subsets of S attached to the small Whitney balls."""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from config.settings import EPSILON_FLOOR, EPSILON_START, TUNING_FRACTION
from core.errors import TuningError
from core.space import MetricMeasureSpace
from core.whitney import MaskLike, WhitneyCover, membership_matrix, as_mask


@dataclass(eq=False)
class QuasiBallFamily:
    """Sets H_B (one per Whitney ball, empty when r_B > delta) and their observed constants."""

    epsilon: float
    delta: float
    sets: List[np.ndarray] = field(repr=False)
    eligible: np.ndarray = field(repr=False)
    gamma1: float = 0.0
    gamma2: float = 1.0
    gamma2_alt: float = 0.0
    gamma3: int = 0
    violations: List[int] = field(default_factory=list)
    tuning_attempts: int = 0

    def __len__(self) -> int:
        return len(self.sets)

    def nonempty(self) -> List[int]:
        return [b for b, h in enumerate(self.sets) if h.size]

    def indicator(self, n: int) -> sparse.csr_matrix:
        """Sparse ball x point indicator of the sets H_B."""
        indptr = np.zeros(len(self.sets) + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([h.size for h in self.sets])
        indices = np.concatenate(self.sets).astype(np.int64) if self.sets else np.zeros(0, dtype=np.int64)
        return sparse.csr_matrix((np.ones(indices.size), indices, indptr), shape=(len(self.sets), n))

    def constants(self) -> Dict[str, Any]:
        return {
            'epsilon': self.epsilon,
            'delta': self.delta,
            'gamma1': self.gamma1,
            'gamma2': self.gamma2,
            'gamma2_alt': self.gamma2_alt,
            'gamma3': self.gamma3,
            'violations': list(self.violations),
            'tuning_attempts': self.tuning_attempts,
        }


def strict_scale(distance: float, radius: float) -> float:
    """Smallest float lam with distance < lam * radius as evaluated for Ball(x, radius).scaled(lam)."""
    lam = distance / radius
    while not distance < radius * lam:
        lam = float(np.nextafter(lam, math.inf))
    while distance < radius * float(np.nextafter(lam, 0.0)):
        lam = float(np.nextafter(lam, 0.0))
    return lam


def _observed_constants(space: MetricMeasureSpace, mask: np.ndarray, cover: WhitneyCover,
                        sets: Sequence[np.ndarray], eligible: np.ndarray) -> Tuple[float, float, float, int, List[int]]:
    dist = space.distances
    gamma1 = 0.0
    gamma2 = 1.0
    gamma2_alt = 0.0
    violations = []
    for b, h in enumerate(sets):
        if h.size:
            gamma1 = max(gamma1, strict_scale(float(dist[cover.centers[b], h].max()), float(cover.radii[b])))
        if not eligible[b]:
            continue
        mu_ball = space.measure(cover.members(b))
        if h.size == 0:
            violations.append(b)
            gamma2 = math.inf
            continue
        mu_h = space.measure(h)
        gamma2 = max(gamma2, mu_ball / mu_h)
        gamma2_alt = max(gamma2_alt, mu_h / mu_ball)

    counts = np.zeros(space.n, dtype=np.int64)
    for h in sets:
        counts[h] += 1
    gamma3 = int(counts[mask].max()) if mask.any() else 0
    return gamma1, gamma2, gamma2_alt, gamma3, violations


def _carve(space: MetricMeasureSpace, mask: np.ndarray, cover: WhitneyCover,
           epsilon: float, delta: float) -> Tuple[List[np.ndarray], np.ndarray, np.ndarray]:
    """H_B = (B_eps ∩ S) minus every K_eps with K_eps ∩ B_eps non-empty and r_K <= eps r_B."""
    radii = cover.radii
    eps_radii = epsilon * radii
    small = membership_matrix(space, cover.anchors, eps_radii)
    overlap = (small @ small.T).tocsr()
    eligible = radii <= delta

    sets: List[np.ndarray] = []
    base_measures = np.zeros(len(cover))
    empty = np.zeros(0, dtype=np.int64)
    for b in range(len(cover)):
        if not eligible[b]:
            sets.append(empty)
            continue
        base = small.indices[small.indptr[b]:small.indptr[b + 1]]
        base = np.sort(base[mask[base]])
        base_measures[b] = space.measure(base)
        touching = overlap.indices[overlap.indptr[b]:overlap.indptr[b + 1]]
        # a ball never carves itself (at epsilon = 1 it would pass the radius test)
        carved_by = touching[(radii[touching] <= eps_radii[b]) & (touching != b)]
        if carved_by.size:
            removed = np.concatenate([small.indices[small.indptr[k]:small.indptr[k + 1]] for k in carved_by])
            base = np.setdiff1d(base, removed)
        sets.append(base.astype(np.int64))
    return sets, eligible, base_measures


def build_quasi_balls(space: MetricMeasureSpace, subset: MaskLike, cover: WhitneyCover,
                      epsilon: float, delta: float, logger=None) -> QuasiBallFamily:
    """Build H_B for every Whitney ball with r_B <= delta."""
    if not (0.0 < epsilon <= 1.0):
        raise TuningError(f"epsilon must lie in (0, 1], got {epsilon}")
    mask = as_mask(space, subset)
    sets, eligible, _ = _carve(space, mask, cover, epsilon, delta)
    gamma1, gamma2, gamma2_alt, gamma3, violations = _observed_constants(space, mask, cover, sets, eligible)
    family = QuasiBallFamily(epsilon=float(epsilon), delta=float(delta), sets=sets, eligible=eligible,
                             gamma1=gamma1, gamma2=gamma2, gamma2_alt=gamma2_alt, gamma3=gamma3,
                             violations=violations)
    if logger:
        logger.debug(f"Quasi-balls at epsilon={epsilon:.6g}: {int(eligible.sum())} eligible, "
                     f"{len(violations)} empty, gamma1={gamma1:.4g}, gamma2={gamma2:.4g}, gamma3={gamma3}")
    return family


def family_from_sets(space: MetricMeasureSpace, subset: MaskLike, cover: WhitneyCover, epsilon: float,
                     delta: float, sets: Dict[int, Sequence[int]]) -> QuasiBallFamily:
    """Rebuild a family from explicit H_B sets keyed by ball index (missing keys are empty)."""
    mask = as_mask(space, subset)
    full = [np.sort(np.asarray(sets.get(b, []), dtype=np.int64)) for b in range(len(cover))]
    eligible = cover.radii <= delta
    gamma1, gamma2, gamma2_alt, gamma3, violations = _observed_constants(space, mask, cover, full, eligible)
    return QuasiBallFamily(epsilon=float(epsilon), delta=float(delta), sets=full, eligible=eligible,
                           gamma1=gamma1, gamma2=gamma2, gamma2_alt=gamma2_alt, gamma3=gamma3,
                           violations=violations)


def _tune(space: MetricMeasureSpace, mask: np.ndarray, cover: WhitneyCover, delta: float,
          logger=None) -> QuasiBallFamily:
    epsilon = EPSILON_START
    attempts = 0
    while epsilon >= EPSILON_FLOOR:
        attempts += 1
        sets, eligible, base_measures = _carve(space, mask, cover, epsilon, delta)
        failing = [b for b in np.flatnonzero(eligible)
                   if space.measure(sets[b]) < TUNING_FRACTION * base_measures[b]]
        if not failing:
            gamma1, gamma2, gamma2_alt, gamma3, violations = _observed_constants(space, mask, cover, sets, eligible)
            if logger:
                logger.debug(f"Epsilon tuned to {epsilon:.6g} after {attempts} attempts")
            return QuasiBallFamily(epsilon=epsilon, delta=float(delta), sets=sets, eligible=eligible,
                                   gamma1=gamma1, gamma2=gamma2, gamma2_alt=gamma2_alt, gamma3=gamma3,
                                   violations=violations, tuning_attempts=attempts)
        if logger:
            logger.debug(f"Epsilon {epsilon:.6g}: {len(failing)} quasi-balls below half measure")
        epsilon /= 2.0
    raise TuningError(f"epsilon tuning failed; set is likely not regular at scale delta "
                      f"(last epsilon {epsilon * 2.0:.3g}, floor {EPSILON_FLOOR:.3g})")


def tune_epsilon(space: MetricMeasureSpace, subset: MaskLike, cover: WhitneyCover, delta: float,
                 logger=None) -> Tuple[float, QuasiBallFamily]:
    """Halve epsilon from 1/2 until every eligible H_B keeps half of B_eps ∩ S.

    Returns the accepted epsilon together with the family carved at it.
    """
    family = _tune(space, as_mask(space, subset), cover, delta, logger)
    return family.epsilon, family


def build_tuned_family(space: MetricMeasureSpace, subset: MaskLike, cover: WhitneyCover, delta: float,
                       logger=None) -> QuasiBallFamily:
    return tune_epsilon(space, subset, cover, delta, logger)[1]


@dataclass
class FamilyReport:
    """Observed constants of a quasi-ball family plus every structural violation found."""

    gamma1: float
    gamma2: float
    gamma2_alt: float
    gamma3: int
    empty_violations: List[int]
    containment_violations: List[int]
    gate_violations: List[Tuple[int, int]]
    overlapping_pairs: int

    @property
    def passed(self) -> bool:
        return (not self.empty_violations and not self.containment_violations
                and not self.gate_violations and math.isfinite(self.gamma2))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'passed': self.passed,
            'gamma1': self.gamma1,
            'gamma2': self.gamma2,
            'gamma2_alt': self.gamma2_alt,
            'gamma3': self.gamma3,
            'empty_violations': self.empty_violations,
            'containment_violations': self.containment_violations,
            'gate_violations': [list(p) for p in self.gate_violations],
            'overlapping_pairs': self.overlapping_pairs,
        }


def verify_family(space: MetricMeasureSpace, subset: MaskLike, cover: WhitneyCover,
                  family: QuasiBallFamily) -> FamilyReport:
    """Recompute the constants from the stored sets and check the radius gate on overlaps."""
    mask = as_mask(space, subset)
    eligible = cover.radii <= family.delta
    gamma1, gamma2, gamma2_alt, gamma3, empty = _observed_constants(space, mask, cover, family.sets, eligible)

    dist = space.distances
    eps = family.epsilon
    containment = []
    for b, h in enumerate(family.sets):
        if not h.size:
            continue
        inside = mask[h] & (dist[cover.anchors[b], h] < eps * cover.radii[b])
        if not eligible[b] or not np.all(inside):
            containment.append(b)

    indicator = family.indicator(space.n)
    overlap = sparse.triu(indicator @ indicator.T, k=1).tocoo()
    gate = []
    for b, k in zip(overlap.row.tolist(), overlap.col.tolist()):
        r_b, r_k = cover.radii[b], cover.radii[k]
        if not (eps * r_k < r_b and eps * r_b < r_k):
            gate.append((int(b), int(k)))

    return FamilyReport(gamma1=gamma1, gamma2=gamma2, gamma2_alt=gamma2_alt, gamma3=gamma3,
                        empty_violations=empty, containment_violations=containment,
                        gate_violations=sorted(gate), overlapping_pairs=int(overlap.nnz))
