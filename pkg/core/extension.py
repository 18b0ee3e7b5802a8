"""Whitney-type extension of functions and generalized gradients from S to X."""

from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

from core.errors import DomainError
from core.kernels import KERNEL_RUNTIME, canonical_gradient_parallel, canonical_gradient_sequential
from core.partition import Partition
from core.quasi_balls import QuasiBallFamily
from core.space import MetricMeasureSpace, ScalarField, average
from core.whitney import MaskLike, WhitneyCover, as_mask


def quasi_ball_averages(space: MetricMeasureSpace, family: QuasiBallFamily, f: ScalarField) -> np.ndarray:
    """f_{H_B} for every ball; zero where H_B is empty."""
    return np.array([average(space, f, h) for h in family.sets], dtype=np.float64)


def _require_on_subset(f: ScalarField, mask: np.ndarray, name: str) -> np.ndarray:
    ids = np.flatnonzero(mask)
    if not f.covers(ids):
        raise DomainError(f"{name} must be defined on all of S")
    return ids


def _glue(space: MetricMeasureSpace, mask: np.ndarray, off_values: np.ndarray, f: ScalarField) -> ScalarField:
    values = np.where(mask, 0.0, off_values)
    ids = np.flatnonzero(mask)
    values[ids] = f.values_on(ids)
    return ScalarField(np.arange(space.n), values)


def extend_function(space: MetricMeasureSpace, subset: MaskLike, cover: WhitneyCover, family: QuasiBallFamily,
                    partition: Partition, u: ScalarField) -> ScalarField:
    """u~ = sum_B u_{H_B} phi_B off S and u~ = u on S."""
    mask = as_mask(space, subset)
    _require_on_subset(u, mask, "u")
    if len(cover) == 0:
        return _glue(space, mask, np.zeros(space.n), u)
    averages = quasi_ball_averages(space, family, u)
    off_values = np.asarray(partition.matrix.T @ averages).ravel()
    return _glue(space, mask, off_values, u)


def extend_gradient(space: MetricMeasureSpace, subset: MaskLike, cover: WhitneyCover, family: QuasiBallFamily,
                    u: ScalarField, g: ScalarField) -> ScalarField:
    """g~ = sum_B (g_{H_B} + |u_{H_B}|) chi_{B*} off S and g~ = g on S."""
    mask = as_mask(space, subset)
    ids = _require_on_subset(g, mask, "g")
    _require_on_subset(u, mask, "u")
    g_values = g.values_on(ids)
    if np.any(g_values < 0.0):
        raise DomainError(f"g must be non-negative; g({int(ids[np.flatnonzero(g_values < 0.0)[0]])}) < 0")
    if len(cover) == 0:
        return _glue(space, mask, np.zeros(space.n), g)
    coefficients = quasi_ball_averages(space, family, g) + np.abs(quasi_ball_averages(space, family, u))
    off_values = np.asarray(cover.star_membership.T @ coefficients).ravel()
    return _glue(space, mask, off_values, g)


def extend_abs_average(space: MetricMeasureSpace, subset: MaskLike, cover: WhitneyCover, family: QuasiBallFamily,
                       f: ScalarField) -> ScalarField:
    """F = sum_B |f_{H_B}| chi_{B*} off S and F = f on S."""
    mask = as_mask(space, subset)
    _require_on_subset(f, mask, "f")
    if len(cover) == 0:
        return _glue(space, mask, np.zeros(space.n), f)
    coefficients = np.abs(quasi_ball_averages(space, family, f))
    off_values = np.asarray(cover.star_membership.T @ coefficients).ravel()
    return _glue(space, mask, off_values, f)


def zero_extend(space: MetricMeasureSpace, f: ScalarField) -> ScalarField:
    """f on its domain, zero elsewhere in X."""
    space.check_ids(f.domain)
    return ScalarField(np.arange(space.n), f.dense(space.n, fill=0.0))


def canonical_gradient(space: MetricMeasureSpace, subset: MaskLike, u: ScalarField) -> ScalarField:
    """g(x) = 1/2 max over y in S, y != x of |u(x) - u(y)| / d(x, y) on S."""
    mask = as_mask(space, subset)
    ids = _require_on_subset(u, mask, "u")
    out = np.zeros(ids.size)
    if ids.size > 1:
        kernel = KERNEL_RUNTIME.pick(canonical_gradient_parallel, canonical_gradient_sequential)
        kernel(space.distances, u.dense(space.n), ids.astype(np.int64), out)
    return ScalarField(ids, out)


@dataclass(eq=False)
class ExtensionBundle:
    """Everything the audits need about one extension: inputs, construction and outputs."""

    space: MetricMeasureSpace = field(repr=False)
    mask: np.ndarray = field(repr=False)
    cover: WhitneyCover
    family: QuasiBallFamily
    partition: Partition
    u: ScalarField
    g: Optional[ScalarField]
    u_tilde: ScalarField
    g_tilde: Optional[ScalarField]
    cache: Dict[str, Any] = field(default_factory=dict, repr=False)

    @classmethod
    def build(cls, space: MetricMeasureSpace, subset: MaskLike, cover: WhitneyCover, family: QuasiBallFamily,
              partition: Partition, u: ScalarField, g: Optional[ScalarField] = None) -> "ExtensionBundle":
        mask = as_mask(space, subset)
        u_tilde = extend_function(space, mask, cover, family, partition, u)
        g_tilde = extend_gradient(space, mask, cover, family, u, g) if g is not None else None
        return cls(space=space, mask=mask, cover=cover, family=family, partition=partition,
                   u=u, g=g, u_tilde=u_tilde, g_tilde=g_tilde)

    @property
    def subset_ids(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    def extend(self, f: ScalarField) -> ScalarField:
        """Ext_S applied to another function on S with the same construction."""
        return extend_function(self.space, self.mask, self.cover, self.family, self.partition, f)

    def abs_average(self, f: ScalarField) -> ScalarField:
        return extend_abs_average(self.space, self.mask, self.cover, self.family, f)
