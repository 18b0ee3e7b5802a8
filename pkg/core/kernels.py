"""Compiled kernels for ball scans and maximal operators.

Every heavy loop in the toolkit lives here as a numba function. Kernels that
loop over independent points are compiled twice: once with ``parallel=True``
(``prange`` fans out over points) and once sequentially. Per-point work never
shares accumulators, so both flavours produce identical bits.

Maximal operators come in two forms. The naive form evaluates every candidate
radius with a direct O(n) sum in point-id order. The fast form walks the
distance-sorted row once, maintains Fenwick trees over value rank, and gets an
approximate value plus a floating error bound for every radius. It then
re-evaluates radii with the same per-radius routine the naive form uses, in
order of decreasing upper bound, and stops once no remaining radius can beat
the best exact value. The fast result is therefore bit-identical to the naive
one.
"""

import threading
from typing import Callable, Optional

import numpy as np
from numba import njit, prange
import numba

EPS = np.finfo(np.float64).eps


class KernelRuntime:
    """Thread-safe switch between parallel and sequential kernel flavours."""

    def __init__(self):
        self._lock = threading.Lock()
        self._sequential = False
        self._threads: Optional[int] = None

    def configure(self, sequential: Optional[bool] = None, threads: Optional[int] = None) -> None:
        """Select the kernel flavour and the numba worker count."""
        with self._lock:
            if sequential is not None:
                self._sequential = bool(sequential)
            if threads is not None:
                threads = max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS))
                numba.set_num_threads(threads)
                self._threads = threads

    def is_sequential(self) -> bool:
        with self._lock:
            return self._sequential

    def pick(self, parallel_kernel: Callable, sequential_kernel: Callable) -> Callable:
        return sequential_kernel if self.is_sequential() else parallel_kernel

    def get_info(self) -> dict:
        with self._lock:
            return {
                'sequential': self._sequential,
                'threads': self._threads or numba.get_num_threads(),
                'max_threads': numba.config.NUMBA_NUM_THREADS,
            }


KERNEL_RUNTIME = KernelRuntime()


def _both_flavours(func):
    """Compile ``func`` as (parallel, sequential) dispatchers."""
    return njit(parallel=True)(func), njit(func)


# ---------------------------------------------------------------------------
# Fenwick trees over value rank
# ---------------------------------------------------------------------------

@njit(cache=True)
def _fenwick_add(tree, index, value):
    i = index + 1
    size = tree.shape[0]
    while i < size:
        tree[i] += value
        i += i & (-i)


@njit(cache=True)
def _fenwick_prefix(tree, count):
    total = 0.0
    i = count
    while i > 0:
        total += tree[i]
        i -= i & (-i)
    return total


# ---------------------------------------------------------------------------
# Ball measure scans
# ---------------------------------------------------------------------------

@njit(cache=True)
def _closed_measure(sorted_dist, cumulative, radius):
    pos = np.searchsorted(sorted_dist, radius, side='right')
    if pos == 0:
        return 0.0
    return cumulative[pos - 1]


@njit(cache=True)
def _doubling_ratio(sorted_dist, cumulative, radius):
    inner = _closed_measure(sorted_dist, cumulative, radius)
    outer = _closed_measure(sorted_dist, cumulative, 2.0 * radius)
    return outer / inner


def _doubling_scan_impl(dist, order, weights, points, r_lo, r_hi, ratio_max, ratio_min, radius_at_max,
                        radius_at_min, evaluated):
    n = dist.shape[0]
    for t in prange(points.shape[0]):
        x = points[t]
        sorted_dist = np.empty(n)
        cumulative = np.empty(n)
        acc = 0.0
        for i in range(n):
            y = order[x, i]
            sorted_dist[i] = dist[x, y]
            acc += weights[y]
            cumulative[i] = acc

        hi = -np.inf
        lo = np.inf
        hi_at = np.nan
        lo_at = np.nan
        count = 0
        # breakpoints of r -> mu(B(x,2r)) / mu(B(x,r)) inside the window
        for i in range(-1, n):
            for half in range(2):
                if i < 0:
                    if half == 1:
                        continue
                    radius = r_lo
                else:
                    s = sorted_dist[i]
                    if s <= 0.0:
                        continue
                    if i + 1 < n and sorted_dist[i + 1] == s:
                        continue
                    radius = s if half == 0 else 0.5 * s
                if radius < r_lo or radius > r_hi:
                    continue
                ratio = _doubling_ratio(sorted_dist, cumulative, radius)
                count += 1
                if ratio > hi:
                    hi = ratio
                    hi_at = radius
                if ratio < lo:
                    lo = ratio
                    lo_at = radius
        ratio_max[t] = hi
        ratio_min[t] = lo
        radius_at_max[t] = hi_at
        radius_at_min[t] = lo_at
        evaluated[t] = count


doubling_scan_parallel, doubling_scan_sequential = _both_flavours(_doubling_scan_impl)


def _regularity_scan_impl(dist, order, weights, in_subset, points, delta, ratio_max, radius_at_max):
    n = dist.shape[0]
    for t in prange(points.shape[0]):
        x = points[t]
        total = 0.0
        inside = 0.0
        best = 1.0
        best_at = 0.0
        i = 0
        while i < n:
            r = dist[x, order[x, i]]
            if r > delta:
                break
            j = i
            while j < n and dist[x, order[x, j]] == r:
                y = order[x, j]
                total += weights[y]
                if in_subset[y]:
                    inside += weights[y]
                j += 1
            if r > 0.0:
                if inside <= 0.0:
                    best = np.inf
                    best_at = r
                    break
                ratio = total / inside
                if ratio > best:
                    best = ratio
                    best_at = r
            i = j
        ratio_max[t] = best
        radius_at_max[t] = best_at


regularity_scan_parallel, regularity_scan_sequential = _both_flavours(_regularity_scan_impl)


# ---------------------------------------------------------------------------
# Sharp fractional maximal function
# ---------------------------------------------------------------------------

@njit(cache=True)
def sharp_ball_value(row, radius, weights, values, in_domain, alpha):
    """Canonical value of one ball: r^-alpha / mu(B) * integral over B∩A of |f - f_{B∩A}|."""
    n = row.shape[0]
    mu = 0.0
    sw = 0.0
    sfw = 0.0
    fmin = np.inf
    fmax = -np.inf
    for y in range(n):
        if row[y] <= radius:
            mu += weights[y]
            if in_domain[y]:
                fy = values[y]
                sw += weights[y]
                sfw += fy * weights[y]
                if fy < fmin:
                    fmin = fy
                if fy > fmax:
                    fmax = fy
    if sw <= 0.0:
        return 0.0
    mean = sfw / sw
    if mean < fmin:
        mean = fmin
    if mean > fmax:
        mean = fmax
    osc = 0.0
    for y in range(n):
        if row[y] <= radius and in_domain[y]:
            osc += abs(values[y] - mean) * weights[y]
    return osc / mu * radius ** (-alpha)


@njit(cache=True)
def _sharp_verify(row, radii, approx, bound, count, weights, values, in_domain, alpha):
    upper = approx[:count] + bound[:count]
    ranking = np.argsort(-upper, kind='mergesort')
    best = 0.0
    for s in range(count):
        c = ranking[s]
        if upper[c] <= best:
            break
        if bound[c] == 0.0:
            value = approx[c]
        else:
            value = sharp_ball_value(row, radii[c], weights, values, in_domain, alpha)
        if value > best:
            best = value
    return best


def _sharp_fast_impl(dist, order, weights, values, in_domain, ranks, sorted_values, points, alpha, out):
    n = dist.shape[0]
    m = sorted_values.shape[0]
    for t in prange(points.shape[0]):
        x = points[t]
        row = dist[x]
        tree_w = np.zeros(m + 1)
        tree_fw = np.zeros(m + 1)
        radii = np.empty(n)
        approx = np.empty(n)
        bound = np.empty(n)
        count = 0
        mu = 0.0
        sw = 0.0
        sfw = 0.0
        sabs = 0.0
        fmin = np.inf
        fmax = -np.inf
        i = 0
        while i < n:
            r = row[order[x, i]]
            j = i
            while j < n and row[order[x, j]] == r:
                y = order[x, j]
                wy = weights[y]
                mu += wy
                if in_domain[y]:
                    fy = values[y]
                    _fenwick_add(tree_w, ranks[y], wy)
                    _fenwick_add(tree_fw, ranks[y], fy * wy)
                    sw += wy
                    sfw += fy * wy
                    sabs += abs(fy) * wy
                    if fy < fmin:
                        fmin = fy
                    if fy > fmax:
                        fmax = fy
                j += 1
            if r > 0.0:
                radii[count] = r
                if sw <= 0.0 or fmin == fmax:
                    approx[count] = 0.0
                    bound[count] = 0.0
                else:
                    scale = r ** (-alpha) / mu
                    mean = sfw / sw
                    if mean < fmin:
                        mean = fmin
                    if mean > fmax:
                        mean = fmax
                    q = np.searchsorted(sorted_values, mean)
                    lw = _fenwick_prefix(tree_w, q)
                    lfw = _fenwick_prefix(tree_fw, q)
                    osc = (mean * lw - lfw) + ((sfw - lfw) - mean * (sw - lw))
                    if osc < 0.0:
                        osc = 0.0
                    approx[count] = osc * scale
                    bound[count] = (8.0 * j + 64.0) * EPS * (abs(mean) * sw + sabs + osc) * scale
                count += 1
            i = j
        out[t] = _sharp_verify(row, radii, approx, bound, count, weights, values, in_domain, alpha)


sharp_fast_parallel, sharp_fast_sequential = _both_flavours(_sharp_fast_impl)


def _sharp_naive_impl(dist, weights, values, in_domain, points, alpha, out):
    for t in prange(points.shape[0]):
        x = points[t]
        row = dist[x]
        radii = np.unique(row[row > 0.0])
        best = 0.0
        for k in range(radii.shape[0]):
            value = sharp_ball_value(row, radii[k], weights, values, in_domain, alpha)
            if value > best:
                best = value
        out[t] = best


sharp_naive_parallel, sharp_naive_sequential = _both_flavours(_sharp_naive_impl)


# ---------------------------------------------------------------------------
# Hardy-Littlewood maximal function
# ---------------------------------------------------------------------------

@njit(cache=True)
def hl_ball_value(row, radius, weights, abs_values):
    """Canonical value of one ball: mean of |f| over B, clamped into the member range."""
    n = row.shape[0]
    s = 0.0
    mu = 0.0
    amin = np.inf
    amax = -np.inf
    for y in range(n):
        if row[y] <= radius:
            a = abs_values[y]
            s += a * weights[y]
            mu += weights[y]
            if a < amin:
                amin = a
            if a > amax:
                amax = a
    avg = s / mu
    if avg < amin:
        avg = amin
    if avg > amax:
        avg = amax
    return avg


@njit(cache=True)
def _hl_verify(row, radii, approx, bound, count, weights, abs_values, start):
    upper = approx[:count] + bound[:count]
    ranking = np.argsort(-upper, kind='mergesort')
    best = start
    for s in range(count):
        c = ranking[s]
        if upper[c] <= best:
            break
        if bound[c] == 0.0:
            value = approx[c]
        else:
            value = hl_ball_value(row, radii[c], weights, abs_values)
        if value > best:
            best = value
    return best


def _hl_fast_impl(dist, order, weights, abs_values, points, out):
    n = dist.shape[0]
    for t in prange(points.shape[0]):
        x = points[t]
        row = dist[x]
        radii = np.empty(n)
        approx = np.empty(n)
        bound = np.empty(n)
        count = 0
        s = 0.0
        mu = 0.0
        amin = np.inf
        amax = -np.inf
        i = 0
        while i < n:
            r = row[order[x, i]]
            j = i
            while j < n and row[order[x, j]] == r:
                y = order[x, j]
                a = abs_values[y]
                s += a * weights[y]
                mu += weights[y]
                if a < amin:
                    amin = a
                if a > amax:
                    amax = a
                j += 1
            if r > 0.0:
                radii[count] = r
                if amin == amax:
                    approx[count] = amin
                    bound[count] = 0.0
                else:
                    avg = s / mu
                    if avg < amin:
                        avg = amin
                    if avg > amax:
                        avg = amax
                    approx[count] = avg
                    bound[count] = (8.0 * j + 32.0) * EPS * amax
                count += 1
            i = j
        out[t] = _hl_verify(row, radii, approx, bound, count, weights, abs_values, abs_values[x])


hl_fast_parallel, hl_fast_sequential = _both_flavours(_hl_fast_impl)


def _hl_naive_impl(dist, weights, abs_values, points, out):
    for t in prange(points.shape[0]):
        x = points[t]
        row = dist[x]
        radii = np.unique(row[row > 0.0])
        best = abs_values[x]
        for k in range(radii.shape[0]):
            value = hl_ball_value(row, radii[k], weights, abs_values)
            if value > best:
                best = value
        out[t] = best


hl_naive_parallel, hl_naive_sequential = _both_flavours(_hl_naive_impl)


# ---------------------------------------------------------------------------
# Pairwise scans
# ---------------------------------------------------------------------------

def _pair_ratio_impl(dist, numer_values, denom_values, idx, zero_tol, best_ratio, best_partner):
    m = idx.shape[0]
    for a in prange(m):
        x = idx[a]
        best = 0.0
        partner = -1
        for b in range(a + 1, m):
            y = idx[b]
            num = abs(numer_values[x] - numer_values[y])
            if num <= zero_tol:
                continue
            den = dist[x, y] * (denom_values[x] + denom_values[y])
            if den <= 0.0:
                ratio = np.inf
            else:
                ratio = num / den
            if ratio > best:
                best = ratio
                partner = y
        best_ratio[a] = best
        best_partner[a] = partner


pair_ratio_parallel, pair_ratio_sequential = _both_flavours(_pair_ratio_impl)


def _canonical_gradient_impl(dist, values, idx, out):
    m = idx.shape[0]
    for a in prange(m):
        x = idx[a]
        best = 0.0
        for b in range(m):
            if b == a:
                continue
            y = idx[b]
            slope = abs(values[x] - values[y]) / dist[x, y]
            if slope > best:
                best = slope
        out[a] = 0.5 * best


canonical_gradient_parallel, canonical_gradient_sequential = _both_flavours(_canonical_gradient_impl)


def _lipschitz_scan_impl(dist, indptr, indices, data, radii, off_idx, out):
    n = dist.shape[0]
    for b in prange(radii.shape[0]):
        row = np.zeros(n)
        for k in range(indptr[b], indptr[b + 1]):
            row[indices[k]] = data[k]
        best = 0.0
        for k in range(indptr[b], indptr[b + 1]):
            x = indices[k]
            vx = data[k]
            for t in range(off_idx.shape[0]):
                y = off_idx[t]
                if y == x:
                    continue
                value = abs(vx - row[y]) * radii[b] / dist[x, y]
                if value > best:
                    best = value
        out[b] = best


lipschitz_scan_parallel, lipschitz_scan_sequential = _both_flavours(_lipschitz_scan_impl)
