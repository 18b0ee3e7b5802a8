"""Maximal operators and the norms built from them."""

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Tuple, Union

import numpy as np

from config.settings import (
    WITNESS_RELATIVE_TOLERANCE,
    ZERO_NUMERATOR_TOLERANCE,
    validate_alpha,
    validate_p,
)
from core.errors import ConfigError, DomainError, WitnessError
from core.kernels import (
    KERNEL_RUNTIME,
    hl_fast_parallel,
    hl_fast_sequential,
    hl_naive_parallel,
    hl_naive_sequential,
    pair_ratio_parallel,
    pair_ratio_sequential,
    sharp_fast_parallel,
    sharp_fast_sequential,
    sharp_naive_parallel,
    sharp_naive_sequential,
)
from core.space import MetricMeasureSpace, RegularSubset, ScalarField

SubsetLike = Union[RegularSubset, np.ndarray, Iterable[int], None]


@dataclass(frozen=True)
class NormParams:
    """Integrability exponent p in (1, inf] and smoothness order alpha > 0."""

    p: float
    alpha: float

    def __post_init__(self):
        ok_p, _ = validate_p(self.p)
        ok_alpha, _ = validate_alpha(self.alpha)
        if not ok_p:
            raise ConfigError(f"p > 1 required, got {self.p}")
        if not ok_alpha:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")


def subset_mask(space: MetricMeasureSpace, subset: SubsetLike) -> np.ndarray:
    """Boolean mask from None (all of X), a RegularSubset, a mask or an id list."""
    if subset is None:
        return np.ones(space.n, dtype=bool)
    if isinstance(subset, RegularSubset):
        return subset.mask
    arr = np.asarray(subset)
    if arr.dtype == bool:
        if arr.shape != (space.n,):
            raise DomainError("mask length differs from the number of points")
        return arr
    return space.mask_from_ids(arr.astype(np.int64))


def sharp_maximal(space: MetricMeasureSpace, subset: SubsetLike, f: ScalarField, alpha: float,
                  method: str = "fast") -> ScalarField:
    """Fractional sharp maximal function of f restricted to A, evaluated on A.

    f^#_{alpha,A}(x) = sup_r r^-alpha / mu(B(x,r)) * integral over B(x,r) ∩ A of |f - f_{B∩A}|.
    """
    mask = subset_mask(space, subset)
    ids = np.flatnonzero(mask)
    if not f.covers(ids):
        raise DomainError("field domain does not contain the subset A")
    values = f.dense(space.n)
    out = np.zeros(ids.size)
    if ids.size == 0:
        return ScalarField(ids, out)

    if method == "naive":
        kernel = KERNEL_RUNTIME.pick(sharp_naive_parallel, sharp_naive_sequential)
        kernel(space.distances, space.weights, values, mask, ids, float(alpha), out)
        return ScalarField(ids, out)
    if method != "fast":
        raise ValueError(f"unknown method '{method}'")

    vals = values[ids]
    by_value = np.lexsort((ids, vals))
    ranks = np.zeros(space.n, dtype=np.int64)
    ranks[ids[by_value]] = np.arange(ids.size)
    sorted_values = np.ascontiguousarray(vals[by_value])
    kernel = KERNEL_RUNTIME.pick(sharp_fast_parallel, sharp_fast_sequential)
    kernel(space.distances, space.order, space.weights, values, mask, ranks, sorted_values,
           ids, float(alpha), out)
    return ScalarField(ids, out)


def hl_maximal(space: MetricMeasureSpace, f: ScalarField, method: str = "fast") -> ScalarField:
    """Hardy-Littlewood maximal function of |f| on X (f defined on all of X)."""
    everything = np.arange(space.n)
    if not f.covers(everything):
        raise DomainError("the maximal function needs f on all of X")
    abs_values = np.abs(f.dense(space.n))
    out = np.zeros(space.n)
    if method == "naive":
        kernel = KERNEL_RUNTIME.pick(hl_naive_parallel, hl_naive_sequential)
        kernel(space.distances, space.weights, abs_values, everything, out)
    elif method == "fast":
        kernel = KERNEL_RUNTIME.pick(hl_fast_parallel, hl_fast_sequential)
        kernel(space.distances, space.order, space.weights, abs_values, everything, out)
    else:
        raise ValueError(f"unknown method '{method}'")
    return ScalarField(everything, out)


def lp_norm(space: MetricMeasureSpace, f: ScalarField, p: float) -> float:
    """L^p norm of f over its domain with the space weights."""
    if len(f) == 0:
        return 0.0
    space.check_ids(f.domain)
    abs_values = np.abs(f.values)
    if math.isinf(p):
        return float(abs_values.max())
    return math.fsum((abs_values ** p * space.weights[f.domain]).tolist()) ** (1.0 / p)


def calderon_norm(space: MetricMeasureSpace, f: ScalarField, p: float, alpha: float) -> float:
    """||f||_p + ||f^#_alpha||_p on X."""
    sharp = sharp_maximal(space, None, f, alpha)
    return lp_norm(space, f, p) + lp_norm(space, sharp, p)


def trace_side_norm(space: MetricMeasureSpace, subset: SubsetLike, u: ScalarField, p: float, alpha: float) -> float:
    """||u||_{L^p(S)} + ||u^#_{alpha,S}||_{L^p(S)}."""
    mask = subset_mask(space, subset)
    ids = np.flatnonzero(mask)
    restricted = u.restrict(ids)
    sharp = sharp_maximal(space, mask, restricted, alpha)
    return lp_norm(space, restricted, p) + lp_norm(space, sharp, p)


def max_pair_ratio(space: MetricMeasureSpace, ids: np.ndarray, numer: np.ndarray, denom: np.ndarray,
                   zero_tol: float = ZERO_NUMERATOR_TOLERANCE) -> Tuple[float, Optional[Tuple[int, int]]]:
    """max over x != y in ids of |numer(x) - numer(y)| / (d(x,y) (denom(x) + denom(y))).

    Numerators at or below zero_tol count as 0/0 and pass; a positive
    numerator over a zero denominator gives inf.
    """
    ids = np.ascontiguousarray(ids, dtype=np.int64)
    if ids.size < 2:
        return 0.0, None
    best = np.zeros(ids.size)
    partner = np.full(ids.size, -1, dtype=np.int64)
    kernel = KERNEL_RUNTIME.pick(pair_ratio_parallel, pair_ratio_sequential)
    kernel(space.distances, np.ascontiguousarray(numer, dtype=np.float64),
           np.ascontiguousarray(denom, dtype=np.float64), ids, float(zero_tol), best, partner)
    a = int(np.argmax(best))
    if partner[a] < 0:
        return 0.0, None
    return float(best[a]), (int(ids[a]), int(partner[a]))


def check_gradient(space: MetricMeasureSpace, subset: SubsetLike, u: ScalarField, g: ScalarField,
                   tolerance: float = WITNESS_RELATIVE_TOLERANCE) -> None:
    """Raise WitnessError unless |u(x) - u(y)| <= d(x,y)(g(x) + g(y)) on the subset."""
    mask = subset_mask(space, subset)
    ids = np.flatnonzero(mask)
    if not (u.covers(ids) and g.covers(ids)):
        raise DomainError("u and g must be defined on the whole subset")
    g_values = g.values_on(ids)
    if np.any(g_values < 0.0):
        bad = int(ids[np.flatnonzero(g_values < 0.0)[0]])
        raise DomainError(f"generalized gradient is negative at point {bad}")
    ratio, pair = max_pair_ratio(space, ids, u.dense(space.n), g.dense(space.n))
    if ratio > 1.0 + tolerance:
        raise WitnessError(f"gradient inequality fails for pair {pair} (ratio {ratio:.6g})", pair=pair)


def hajlasz_norm_with_witness(space: MetricMeasureSpace, subset: SubsetLike, u: ScalarField,
                              g: ScalarField, p: float) -> float:
    """||u||_{L^p(A)} + ||g||_{L^p(A)} after checking that g is a generalized gradient of u."""
    mask = subset_mask(space, subset)
    ids = np.flatnonzero(mask)
    check_gradient(space, mask, u, g)
    return lp_norm(space, u.restrict(ids), p) + lp_norm(space, g.restrict(ids), p)
