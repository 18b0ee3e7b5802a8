"""Audits: observed constants of the inequalities the extension is expected to satisfy.

Every audit reports the largest observed ratio LHS / RHS over the checked
instances together with the instance (the witness) where it was attained.
A numerator at or below ZERO_NUMERATOR_TOLERANCE counts as 0/0 and passes;
a positive numerator over a zero denominator is an infinite ratio and fails.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from config.registry import audit_ceiling
from config.settings import (
    DEFAULT_SCALE_BOUND_POINTS,
    DEFAULT_SUBSET_PAIR_LIMIT,
    STAR_FACTOR,
    ZERO_NUMERATOR_TOLERANCE,
)
from core.errors import DomainError, WitnessError
from core.extension import ExtensionBundle, quasi_ball_averages, zero_extend
from core.maximal import (
    hajlasz_norm_with_witness,
    hl_maximal,
    lp_norm,
    max_pair_ratio,
    sharp_maximal,
)
from core.quasi_balls import QuasiBallFamily
from core.space import Ball, MetricMeasureSpace, ScalarField, SpaceParams, average, ball_members
from core.whitney import MaskLike, WhitneyCover, as_mask


def plain_json(value: Any) -> Any:
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(value, dict):
        return {str(k): plain_json(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain_json(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return "inf" if value > 0 else ("-inf" if value < 0 else "nan")
    return value


@dataclass
class AuditReport:
    """Observed constant of one audited inequality."""

    name: str
    observed_constant: float
    ceiling: Optional[float] = None
    witness: Optional[Dict[str, Any]] = None
    refinement_ratio: Optional[float] = None
    details: Dict[str, Any] = field(default_factory=dict)
    checks_passed: bool = True
    note: str = ""

    @property
    def passed(self) -> bool:
        if not self.checks_passed or not math.isfinite(self.observed_constant):
            return False
        return self.ceiling is None or self.observed_constant <= self.ceiling

    def sub_constants(self) -> Dict[str, float]:
        """Observed constant of every sub-inequality tracked in details, by key."""
        return {key: float(value['value']) for key, value in self.details.items()
                if isinstance(value, dict) and 'value' in value}

    def to_dict(self) -> Dict[str, Any]:
        return plain_json({
            'name': self.name,
            'observed_constant': self.observed_constant,
            'ceiling': self.ceiling,
            'pass': self.passed,
            'witness': self.witness,
            'refinement_ratio': self.refinement_ratio,
            'details': self.details,
            'note': self.note,
        })


class RatioTracker:
    """Running max of LHS / RHS with the witness of the maximum."""

    def __init__(self, zero_tol: float = ZERO_NUMERATOR_TOLERANCE):
        self.zero_tol = zero_tol
        self.value = 0.0
        self.witness: Optional[Dict[str, Any]] = None
        self.count = 0

    def ratio(self, lhs: float, rhs: float) -> float:
        if lhs <= self.zero_tol:
            return 0.0
        if rhs <= 0.0:
            return math.inf
        return lhs / rhs

    def add(self, lhs: float, rhs: float, witness: Dict[str, Any]) -> None:
        self.count += 1
        r = self.ratio(float(lhs), float(rhs))
        if r > self.value or self.witness is None and r >= self.value:
            self.value = r
            self.witness = dict(witness, lhs=float(lhs), rhs=float(rhs))

    def add_arrays(self, lhs: np.ndarray, rhs: np.ndarray, describe: Callable[[int], Dict[str, Any]]) -> None:
        lhs = np.asarray(lhs, dtype=np.float64)
        rhs = np.asarray(rhs, dtype=np.float64)
        if lhs.size == 0:
            return
        ratios = np.zeros(lhs.size)
        live = lhs > self.zero_tol
        with np.errstate(divide='ignore'):
            ratios[live] = np.where(rhs[live] > 0.0, lhs[live] / np.where(rhs[live] > 0.0, rhs[live], 1.0), np.inf)
        i = int(np.argmax(ratios))
        self.count += lhs.size - 1
        self.add(lhs[i], rhs[i], describe(i))

    def summary(self) -> Dict[str, Any]:
        return {'value': self.value, 'witness': self.witness, 'checked': self.count}


def _integral_abs_dev(space: MetricMeasureSpace, values: np.ndarray, ids: np.ndarray, c: float) -> float:
    return math.fsum((np.abs(values[ids] - c) * space.weights[ids]).tolist())


def _maximal_fields(bundle: ExtensionBundle, alpha: float) -> Dict[str, ScalarField]:
    """Sharp and Hardy-Littlewood maximal functions shared by several audits."""
    key = ('maximal', float(alpha))
    if key not in bundle.cache:
        space = bundle.space
        ids = bundle.subset_ids
        u_s = bundle.u.restrict(ids)
        u_sharp_s = sharp_maximal(space, bundle.mask, u_s, alpha)
        bundle.cache[key] = {
            'U_sharp': sharp_maximal(space, None, bundle.u_tilde, alpha),
            'u_sharp_S': u_sharp_s,
            'M_u_hat': hl_maximal(space, zero_extend(space, u_s)),
            'M_u_sharp_hat': hl_maximal(space, zero_extend(space, u_sharp_s)),
        }
    return bundle.cache[key]


def _gradient_constant(bundle: ExtensionBundle) -> Tuple[float, Optional[Tuple[int, int]]]:
    if bundle.g_tilde is None:
        raise DomainError("the gradient audit needs a generalized gradient g")
    if 'gradient_constant' not in bundle.cache:
        space = bundle.space
        bundle.cache['gradient_constant'] = max_pair_ratio(
            space, np.arange(space.n), bundle.u_tilde.dense(space.n), bundle.g_tilde.dense(space.n))
    return bundle.cache['gradient_constant']


# ---------------------------------------------------------------------------
# Sampling helpers
# ---------------------------------------------------------------------------

def default_ball_samples(space: MetricMeasureSpace, subset: MaskLike, cover: WhitneyCover,
                         n_centers: int, seed: int = 0, radii_per_center: int = 8) -> List[Ball]:
    """Balls centred in S and in X \\ S, radii spread over each centre's candidate scales."""
    mask = as_mask(space, subset)
    rng = np.random.default_rng(seed)
    s_ids = np.flatnonzero(mask)
    off_ids = np.flatnonzero(~mask)
    n_off = min(off_ids.size, n_centers // 2)
    n_in = min(s_ids.size, n_centers - n_off)
    centers = np.concatenate([
        np.sort(rng.choice(s_ids, size=n_in, replace=False)),
        np.sort(rng.choice(off_ids, size=n_off, replace=False)) if n_off else np.zeros(0, dtype=np.int64),
    ]).astype(np.int64)

    samples = []
    for z in centers:
        row = space.distances[z]
        radii = np.unique(row[row > 0.0])
        if radii.size == 0:
            continue
        picks = np.unique(np.linspace(0, radii.size - 1, min(radii_per_center, radii.size)).round().astype(int))
        # just above a candidate radius the open ball equals the closed one
        samples.extend(Ball(int(z), float(np.nextafter(radii[k], np.inf))) for k in picks)
    return samples


def family_subset_pairs(family: QuasiBallFamily, limit: int = DEFAULT_SUBSET_PAIR_LIMIT,
                        seed: int = 0) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Pairs (H_B, H_K) of non-empty quasi-balls; all pairs when few, a seeded sample otherwise."""
    nonempty = family.nonempty()
    pairs = [(a, b) for i, a in enumerate(nonempty) for b in nonempty[i:]]
    if len(pairs) > limit:
        rng = np.random.default_rng(seed)
        chosen = np.sort(rng.choice(len(pairs), size=limit, replace=False))
        pairs = [pairs[k] for k in chosen]
    return [(family.sets[a], family.sets[b]) for a, b in pairs]


# ---------------------------------------------------------------------------
# Audits
# ---------------------------------------------------------------------------

def audit_scale_bounds(space: MetricMeasureSpace, params: SpaceParams, points: Optional[Sequence[int]] = None,
                       max_points: int = DEFAULT_SCALE_BOUND_POINTS, seed: int = 0,
                       ceiling: Optional[float] = None) -> AuditReport:
    """mu(B(x,r)) <= C_rd t^-alpha mu(B(x,tr)) and mu(B(x,tr)) <= C_d t^beta mu(B(x,r))."""
    ceiling = audit_ceiling("scale_bounds") if ceiling is None else ceiling
    r_min, r_max = params.scale_window
    r_hi = r_max / 2.0
    if points is None:
        if space.n <= max_points:
            points = np.arange(space.n)
        else:
            points = np.sort(np.random.default_rng(seed).choice(space.n, size=max_points, replace=False))
    points = space.check_ids(points)

    lower = RatioTracker()
    upper = RatioTracker()
    for x in points:
        order = space.order[x]
        sorted_dist = space.distances[x, order]
        cumulative = np.cumsum(space.weights[order])
        radii = np.unique(sorted_dist[(sorted_dist >= r_min) & (sorted_dist <= r_hi)])
        if radii.size == 0:
            continue
        mu = cumulative[np.searchsorted(sorted_dist, radii, side='right') - 1]
        i, j = np.triu_indices(radii.size)
        t = radii[j] / radii[i]
        lower.add_arrays(mu[i], params.C_rd * t ** (-params.alpha) * mu[j],
                         lambda k: {'point': int(x), 'r': float(radii[i[k]]), 't': float(t[k])})
        upper.add_arrays(mu[j], params.C_d * t ** params.beta * mu[i],
                         lambda k: {'point': int(x), 'r': float(radii[i[k]]), 't': float(t[k])})

    best = lower if lower.value >= upper.value else upper
    return AuditReport(
        name="scale_bounds",
        observed_constant=max(lower.value, upper.value),
        ceiling=ceiling,
        witness=best.witness,
        details={'reverse_doubling_side': lower.summary(), 'doubling_side': upper.summary(),
                 'points': int(points.size), **params.to_dict()},
    )


def audit_gradient_inequality(space: MetricMeasureSpace, bundle: ExtensionBundle,
                              ceiling: Optional[float] = None) -> AuditReport:
    """Observed C in |u~(x) - u~(y)| <= C d(x,y)(g~(x) + g~(y)) over all pairs of X."""
    ceiling = audit_ceiling("gradient_inequality") if ceiling is None else ceiling
    ratio, pair = _gradient_constant(bundle)
    witness = None
    if pair is not None:
        x, y = pair
        u, g = bundle.u_tilde.dense(space.n), bundle.g_tilde.dense(space.n)
        witness = {'pair': [x, y], 'lhs': abs(u[x] - u[y]),
                   'rhs': space.distances[x, y] * (g[x] + g[y]),
                   'in_subset': [bool(bundle.mask[x]), bool(bundle.mask[y])]}
    return AuditReport(name="gradient_inequality", observed_constant=ratio, ceiling=ceiling, witness=witness,
                       details={'pairs': space.n * (space.n - 1) // 2})


def audit_oscillation_lemma(space: MetricMeasureSpace, subset: MaskLike, u: ScalarField, g: ScalarField,
                            subset_pairs: Sequence[Tuple[np.ndarray, np.ndarray]],
                            points: Optional[Sequence[int]] = None, seed: int = 0,
                            ceiling: Optional[float] = None) -> AuditReport:
    """|u_H - u_H'| <= diam(H ∪ H')(g_H + g_H') and |u_H - u(y)| <= diam(H ∪ {y})(g_H + g(y))."""
    ceiling = audit_ceiling("oscillation_lemma") if ceiling is None else ceiling
    mask = as_mask(space, subset)
    s_ids = np.flatnonzero(mask)
    if points is None:
        points = s_ids if s_ids.size <= 512 else np.sort(
            np.random.default_rng(seed).choice(s_ids, size=256, replace=False))
    points = space.check_ids(points)
    dist = space.distances
    u_dense = u.dense(space.n)
    g_dense = g.dense(space.n)

    pair_tracker = RatioTracker()
    point_tracker = RatioTracker()
    seen = set()
    for k, (h1, h2) in enumerate(subset_pairs):
        h1 = np.asarray(h1, dtype=np.int64)
        h2 = np.asarray(h2, dtype=np.int64)
        if not np.all(mask[h1]) or not np.all(mask[h2]):
            raise DomainError("subset pairs must lie inside S")
        u1, u2 = average(space, u, h1), average(space, u, h2)
        g1, g2 = average(space, g, h1), average(space, g, h2)
        union = np.union1d(h1, h2)
        diam = float(dist[np.ix_(union, union)].max())
        pair_tracker.add(abs(u1 - u2), diam * (g1 + g2), {'pair_index': k, 'sizes': [int(h1.size), int(h2.size)]})

        for h, u_h, g_h in ((h1, u1, g1), (h2, u2, g2)):
            key = tuple(h.tolist())
            if key in seen:
                continue
            seen.add(key)
            diam_h = float(dist[np.ix_(h, h)].max())
            diam_y = np.maximum(diam_h, dist[np.ix_(h, points)].max(axis=0))
            point_tracker.add_arrays(np.abs(u_h - u_dense[points]), diam_y * (g_h + g_dense[points]),
                                     lambda i: {'point': int(points[i]), 'subset_size': int(h.size)})

    best = pair_tracker if pair_tracker.value >= point_tracker.value else point_tracker
    return AuditReport(
        name="oscillation_lemma",
        observed_constant=max(pair_tracker.value, point_tracker.value),
        ceiling=ceiling,
        witness=best.witness,
        details={'subset_pairs': pair_tracker.summary(), 'subset_points': point_tracker.summary()},
    )


def audit_lp_bounds(space: MetricMeasureSpace, subset: MaskLike, bundle: ExtensionBundle,
                    f_samples: Sequence[ScalarField], p: float, ceiling: Optional[float] = None) -> AuditReport:
    """||Ext f||_p / ||f||_p, ||F||_p / ||f||_p, ||g~||_p / (||g||_p + ||u||_p) and ||G||_p / ||g||_p."""
    ceiling = audit_ceiling("lp_bounds") if ceiling is None else ceiling
    ids = np.flatnonzero(as_mask(space, subset))
    extension = RatioTracker()
    abs_average = RatioTracker()
    gradient = RatioTracker()
    g_function = RatioTracker()

    samples = [bundle.u.restrict(ids)] + [f.restrict(ids) for f in f_samples]
    for k, f in enumerate(samples):
        norm_f = lp_norm(space, f, p)
        extension.add(lp_norm(space, bundle.extend(f), p), norm_f, {'sample': k})
        abs_average.add(lp_norm(space, bundle.abs_average(f), p), norm_f, {'sample': k})
    if bundle.g is not None and bundle.g_tilde is not None:
        g_s = bundle.g.restrict(ids)
        norm_g = lp_norm(space, g_s, p)
        gradient.add(lp_norm(space, bundle.g_tilde, p), norm_g + lp_norm(space, samples[0], p), {'sample': 0})
        g_function.add(lp_norm(space, bundle.abs_average(g_s), p), norm_g, {'sample': 0})

    trackers = {'extension': extension, 'abs_average': abs_average, 'gradient': gradient, 'g_function': g_function}
    name, best = max(trackers.items(), key=lambda item: item[1].value)
    return AuditReport(
        name="lp_bounds",
        observed_constant=best.value,
        ceiling=ceiling,
        witness=dict(best.witness or {}, inequality=name),
        details={'p': p, **{k: t.summary() for k, t in trackers.items()}},
    )


def audit_sharp_bounds(space: MetricMeasureSpace, subset: MaskLike, bundle: ExtensionBundle, alpha: float,
                       ceiling: Optional[float] = None, restriction_ceiling: Optional[float] = None) -> AuditReport:
    """Pointwise bounds of (u~)^#_alpha by u^#_{alpha,S} and maximal functions of their zero extensions."""
    ceiling = audit_ceiling("sharp_bounds") if ceiling is None else ceiling
    if restriction_ceiling is None:
        restriction_ceiling = audit_ceiling("sharp_bounds", key="restriction_ceiling")
    mask = as_mask(space, subset)
    ids = np.flatnonzero(mask)
    fields = _maximal_fields(bundle, alpha)
    n = space.n
    U = fields['U_sharp'].dense(n)
    u_s = fields['u_sharp_S'].dense(n)
    Mu = fields['M_u_hat'].dense(n)
    Mus = fields['M_u_sharp_hat'].dense(n)
    everything = np.arange(n)

    on_subset = RatioTracker()
    everywhere = RatioTracker()
    pointwise = RatioTracker()
    restriction = RatioTracker()
    on_subset.add_arrays(U[ids], u_s[ids] + Mu[ids], lambda i: {'point': int(ids[i])})
    everywhere.add_arrays(U, Mus + Mu, lambda i: {'point': int(everything[i])})
    pointwise.add_arrays(np.abs(bundle.u_tilde.dense(n)), Mu, lambda i: {'point': int(everything[i])})
    restriction.add_arrays(u_s[ids], U[ids], lambda i: {'point': int(ids[i])})

    trackers = {'on_subset': on_subset, 'everywhere': everywhere, 'pointwise': pointwise}
    name, best = max(trackers.items(), key=lambda item: item[1].value)
    return AuditReport(
        name="sharp_bounds",
        observed_constant=best.value,
        ceiling=ceiling,
        witness=dict(best.witness or {}, inequality=name),
        checks_passed=restriction.value <= restriction_ceiling,
        details={'alpha': alpha, 'restriction': restriction.summary(),
                 'restriction_ceiling': restriction_ceiling,
                 **{k: t.summary() for k, t in trackers.items()}},
    )


def audit_ball_lemmas(space: MetricMeasureSpace, subset: MaskLike, bundle: ExtensionBundle, alpha: float,
                      samples: Sequence[Ball], ceiling: Optional[float] = None) -> AuditReport:
    """Ball-family estimates on sample balls K = B(z, r).

    For K meeting S and the family B_K of Whitney balls whose enlargement
    meets K: the radius ratio eta1 = max r_B / r, the integral comparisons
    between K \\ S and the quasi-ball averages (with c the mean of u over
    (eta2 K) ∩ S and with c = 0), and the oscillation of u~ on K against
    u^#_{alpha,S}(z) (r <= delta/eta1) or the maximal function (r > delta/eta1).
    For centres off S the oscillation is compared with the infimum of
    u^#_{alpha,S} over H_Q plus the maximal function, Q the Whitney ball of z.
    """
    ceiling = audit_ceiling("ball_lemmas") if ceiling is None else ceiling
    mask = as_mask(space, subset)
    cover, family = bundle.cover, bundle.family
    dist = space.distances
    w = space.weights
    n = space.n
    s_ids = np.flatnonzero(mask)
    fields = _maximal_fields(bundle, alpha)
    u_sharp_s = fields['u_sharp_S'].dense(n)
    Mu = fields['M_u_hat'].dense(n)
    u_tilde = bundle.u_tilde.dense(n)
    u_s = bundle.u.restrict(s_ids)
    quasi_avg = quasi_ball_averages(space, family, u_s) if len(cover) else np.zeros(0)
    ball_mu = cover.membership @ w if len(cover) else np.zeros(0)
    star_csc = cover.star_membership.tocsc() if len(cover) else None
    member_csc = cover.membership.tocsc() if len(cover) else None

    def family_of(members: np.ndarray) -> np.ndarray:
        if star_csc is None or members.size == 0:
            return np.zeros(0, dtype=np.int64)
        return np.unique(star_csc[:, members].indices)

    prepared = []
    eta1 = 0.0
    for ball in samples:
        members = ball_members(space, ball)
        meets = bool(np.any(mask[members]))
        b_k = family_of(members)
        if meets and b_k.size:
            eta1 = max(eta1, float((cover.radii[b_k] / ball.radius).max()))
        prepared.append((ball, members, meets, b_k))
    eta2 = 1.0 + (family.gamma1 + STAR_FACTOR) * eta1
    eta3 = 8.0 * (family.gamma1 + 10.0)
    small_scale = family.delta / eta1 if eta1 > 0.0 else math.inf

    integral_i = RatioTracker()
    integral_iii = RatioTracker()
    small = RatioTracker()
    large = RatioTracker()
    inner = RatioTracker()
    outer = RatioTracker()
    for k, (ball, members, meets, b_k) in enumerate(prepared):
        z, r = ball.center, ball.radius
        mu_k = math.fsum(w[members].tolist())
        mean_k = average(space, bundle.u_tilde, members)
        oscillation = r ** (-alpha) / mu_k * _integral_abs_dev(space, u_tilde, members, mean_k)
        tag = {'sample': k, 'center': int(z), 'radius': float(r)}

        if mask[z]:
            if r <= small_scale:
                small.add(oscillation, u_sharp_s[z], tag)
            else:
                large.add(oscillation, Mu[z], tag)
        else:
            q = int(member_csc[:, z].indices.min())
            h_q = family.sets[q]
            rhs = (float(u_sharp_s[h_q].min()) if h_q.size else 0.0) + Mu[z]
            if r <= cover.radii[q] / 8.0:
                inner.add(oscillation, rhs, dict(tag, whitney_ball=q))
            else:
                outer.add(oscillation, rhs, dict(tag, whitney_ball=q))

        if not meets:
            continue
        enlarged = s_ids[dist[z, s_ids] < eta2 * r]
        off_members = members[~mask[members]]
        carried = b_k[[family.sets[b].size > 0 for b in b_k]] if b_k.size else b_k
        for label, c in (('mean', average(space, u_s, enlarged)), ('zero', 0.0)):
            lhs_i = _integral_abs_dev(space, u_tilde, off_members, c)
            rhs_i = math.fsum((ball_mu[b_k] * np.abs(quasi_avg[b_k] - c)).tolist())
            integral_i.add(lhs_i, rhs_i, dict(tag, c=label))
            lhs_iii = math.fsum((ball_mu[carried] * np.abs(quasi_avg[carried] - c)).tolist())
            rhs_iii = _integral_abs_dev(space, u_tilde, enlarged, c)
            integral_iii.add(lhs_iii, rhs_iii, dict(tag, c=label))

    trackers = {
        'integral_off_subset': integral_i,
        'integral_quasi_balls': integral_iii,
        'oscillation_small_scale': small,
        'oscillation_large_scale': large,
        'oscillation_inside_whitney': inner,
        'oscillation_across_whitney': outer,
    }
    name, best = max(trackers.items(), key=lambda item: item[1].value)
    return AuditReport(
        name="ball_lemmas",
        observed_constant=best.value,
        ceiling=ceiling,
        witness=dict(best.witness or {}, inequality=name),
        details={'eta1': eta1, 'eta2': eta2, 'eta3': eta3, 'samples': len(samples),
                 **{k: t.summary() for k, t in trackers.items()}},
    )


def audit_trace_equivalence(space: MetricMeasureSpace, subset: MaskLike, bundle: ExtensionBundle, p: float,
                            alpha: float, ceiling: Optional[float] = None,
                            lower_ceiling: Optional[float] = None) -> AuditReport:
    """||u||_{C(S)} <= 2 ||u~||_{C(X)}, the observed C in ||u~||_{C(X)} <= C ||u||_{C(S)},
    and the Hajlasz-norm ratio with the gradient (C g~) on X."""
    ceiling = audit_ceiling("trace_equivalence") if ceiling is None else ceiling
    if lower_ceiling is None:
        lower_ceiling = audit_ceiling("trace_equivalence", key="lower_ceiling")
    mask = as_mask(space, subset)
    ids = np.flatnonzero(mask)
    fields = _maximal_fields(bundle, alpha)
    u_s = bundle.u.restrict(ids)
    trace = lp_norm(space, u_s, p) + lp_norm(space, fields['u_sharp_S'], p)
    calderon = lp_norm(space, bundle.u_tilde, p) + lp_norm(space, fields['U_sharp'], p)

    upper = RatioTracker()
    lower = RatioTracker()
    upper.add(calderon, trace, {'norm': 'calderon_over_trace'})
    lower.add(trace, calderon, {'norm': 'trace_over_calderon'})

    hajlasz = RatioTracker()
    checks = lower.value <= lower_ceiling
    note = ""
    if bundle.g is not None and bundle.g_tilde is not None:
        constant, _ = _gradient_constant(bundle)
        if math.isfinite(constant):
            scaled = ScalarField(bundle.g_tilde.domain, constant * bundle.g_tilde.values)
            try:
                extended = hajlasz_norm_with_witness(space, None, bundle.u_tilde, scaled, p)
                restricted = hajlasz_norm_with_witness(space, mask, u_s, bundle.g.restrict(ids), p)
                hajlasz.add(extended, restricted, {'gradient_constant': constant})
            except WitnessError as exc:
                checks = False
                note = str(exc)
        else:
            checks = False
            note = "gradient constant is infinite"

    return AuditReport(
        name="trace_equivalence",
        observed_constant=upper.value,
        ceiling=ceiling,
        witness=upper.witness,
        checks_passed=checks,
        note=note,
        details={'p': p, 'alpha': alpha, 'trace_norm': trace, 'calderon_norm': calderon,
                 'lower': lower.summary(), 'lower_ceiling': lower_ceiling,
                 'upper': upper.summary(), 'hajlasz': hajlasz.summary()},
    )


def audit_maximal_boundedness(space: MetricMeasureSpace, f_samples: Sequence[ScalarField], p: float,
                              ceiling: Optional[float] = None) -> AuditReport:
    """Observed K_p in ||Mf||_p <= K_p ||f||_p for fields on X."""
    ceiling = audit_ceiling("maximal_boundedness") if ceiling is None else ceiling
    tracker = RatioTracker()
    for k, f in enumerate(f_samples):
        tracker.add(lp_norm(space, hl_maximal(space, f), p), lp_norm(space, f, p), {'sample': k})
    return AuditReport(name="maximal_boundedness", observed_constant=tracker.value, ceiling=ceiling,
                       witness=tracker.witness, details={'p': p, 'samples': len(f_samples)})


def audit_sharp_gradient(space: MetricMeasureSpace, f: ScalarField, ceiling: Optional[float] = None) -> AuditReport:
    """Observed c with |f(x) - f(y)| <= c d(x,y)(f#_1(x) + f#_1(y)) on X."""
    ceiling = audit_ceiling("sharp_gradient") if ceiling is None else ceiling
    sharp = sharp_maximal(space, None, f, 1.0)
    ratio, pair = max_pair_ratio(space, np.arange(space.n), f.dense(space.n), sharp.dense(space.n))
    return AuditReport(name="sharp_gradient", observed_constant=ratio, ceiling=ceiling,
                       witness=None if pair is None else {'pair': list(pair)})
