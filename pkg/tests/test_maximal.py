import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from core.errors import ConfigError, DomainError, WitnessError
from core.extension import canonical_gradient, zero_extend
from core.maximal import (
    NormParams,
    calderon_norm,
    hajlasz_norm_with_witness,
    hl_maximal,
    lp_norm,
    sharp_maximal,
    trace_side_norm,
)
from core.space import MetricMeasureSpace, ScalarField
from tests.conftest import line_space, random_space, ring_space, tied_grid_space


def field_on(space, seed, low=-1.0, high=1.0):
    values = np.random.default_rng(seed).uniform(low, high, size=space.n)
    return ScalarField(np.arange(space.n), values)


def random_mask(space, seed):
    mask = np.random.default_rng(seed).random(space.n) < 0.5
    mask[0] = True
    return mask


class TestTwoPoints:
    @pytest.fixture
    def pair(self):
        return MetricMeasureSpace.from_coords([0.0, 2.0], [1.0, 1.0])

    def test_sharp(self, pair):
        sharp = sharp_maximal(pair, None, ScalarField([0, 1], [0.0, 1.0]), 0.5)
        assert np.allclose(sharp.values, 2.0 ** -0.5 / 2.0)

    def test_hardy_littlewood(self, pair):
        maximal = hl_maximal(pair, ScalarField([0, 1], [0.0, 1.0]))
        assert maximal.values.tolist() == [0.5, 1.0]


def test_constant_has_no_oscillation(ring8):
    f = ScalarField(np.arange(8), np.full(8, 4.0))
    assert np.all(sharp_maximal(ring8, None, f, 1.0).values == 0.0)
    assert np.all(hl_maximal(ring8, f).values == 4.0)


def test_sharp_needs_subset_in_domain(line16):
    with pytest.raises(DomainError):
        sharp_maximal(line16, None, ScalarField([0, 1], [0.0, 1.0]), 1.0)


def test_maximal_needs_all_points(line16):
    with pytest.raises(DomainError):
        hl_maximal(line16, ScalarField([0, 1], [0.0, 1.0]))


@pytest.mark.parametrize("build", [
    lambda: random_space(1),
    lambda: random_space(2, n=30, dim=1),
    lambda: tied_grid_space(6),
    lambda: ring_space(12),
], ids=["random2d", "random1d", "tied_grid", "ring"])
def test_fast_kernels_match_oracle(build):
    space = build()
    f = field_on(space, 17)
    mask = random_mask(space, 23)
    for subset in (None, mask):
        fast = sharp_maximal(space, subset, f, 0.7)
        naive = sharp_maximal(space, subset, f, 0.7, method="naive")
        assert np.array_equal(fast.values, naive.values)
    assert np.array_equal(hl_maximal(space, f).values, hl_maximal(space, f, method="naive").values)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(50))
def test_fast_kernels_match_oracle_sweep(seed):
    space = random_space(100 + seed, n=50)
    f = field_on(space, seed)
    mask = random_mask(space, seed)
    assert np.array_equal(sharp_maximal(space, mask, f, 1.0).values,
                          sharp_maximal(space, mask, f, 1.0, method="naive").values)
    assert np.array_equal(hl_maximal(space, f).values, hl_maximal(space, f, method="naive").values)


def test_sequential_and_parallel_agree(sequential_kernels):
    space = random_space(4)
    f = field_on(space, 4)
    sequential = sharp_maximal(space, None, f, 0.5).values
    sequential_kernels.configure(sequential=False)
    parallel = sharp_maximal(space, None, f, 0.5).values
    assert np.array_equal(sequential, parallel)


def test_unknown_method(line16):
    with pytest.raises(ValueError):
        hl_maximal(line16, field_on(line16, 0), method="slow")


@given(seed=st.integers(0, 2 ** 16), scale=st.floats(-8.0, 8.0, allow_nan=False))
@settings(max_examples=25, deadline=None)
def test_homogeneity_and_sublinearity(seed, scale):
    space = random_space(seed % 7, n=25)
    f = field_on(space, seed)
    g = field_on(space, seed + 1)
    scaled = ScalarField(f.domain, scale * f.values)
    total = ScalarField(f.domain, f.values + g.values)
    sharp = lambda h: sharp_maximal(space, None, h, 0.5).values
    maximal = lambda h: hl_maximal(space, h).values

    assert np.allclose(sharp(scaled), abs(scale) * sharp(f), rtol=1e-9, atol=1e-12)
    assert np.allclose(maximal(scaled), abs(scale) * maximal(f), rtol=1e-9, atol=1e-12)
    assert np.all(sharp(total) <= sharp(f) + sharp(g) + 1e-12)
    assert np.all(maximal(total) <= maximal(f) + maximal(g) + 1e-12)


def test_maximal_dominates_the_function():
    space = random_space(8)
    f = field_on(space, 8)
    assert np.all(hl_maximal(space, f).values >= np.abs(f.values))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_restriction_bound_for_zero_extension(seed):
    space = random_space(seed, n=35)
    mask = random_mask(space, seed)
    ids = np.flatnonzero(mask)
    u = ScalarField(ids, np.random.default_rng(seed).normal(size=ids.size))
    restricted = sharp_maximal(space, mask, u, 0.5).values
    extended = sharp_maximal(space, None, zero_extend(space, u), 0.5).values_on(ids)
    assert np.all(restricted <= 2.0 * extended + 1e-12)


class TestNorms:
    def test_constant_norm(self):
        space = line_space(4, weights=[1.0, 2.0, 3.0, 4.0])
        f = ScalarField(np.arange(4), np.ones(4))
        assert lp_norm(space, f, 2.0) == pytest.approx(math.sqrt(10.0))

    def test_sup_norm(self):
        space = line_space(2)
        assert lp_norm(space, ScalarField([0, 1], [1.0, -3.0]), math.inf) == 3.0

    def test_scaling(self, line16):
        f = field_on(line16, 3)
        scaled = ScalarField(f.domain, -2.0 * f.values)
        assert lp_norm(line16, scaled, 3.0) == pytest.approx(2.0 * lp_norm(line16, f, 3.0))

    def test_calderon_norm_of_constant(self, ring8):
        f = ScalarField(np.arange(8), np.full(8, 2.0))
        assert calderon_norm(ring8, f, 2.0, 1.0) == pytest.approx(2.0 * math.sqrt(8.0))

    def test_calderon_triangle_inequality(self):
        space = random_space(5, n=30)
        f, g = field_on(space, 1), field_on(space, 2)
        total = ScalarField(f.domain, f.values + g.values)
        assert calderon_norm(space, total, 2.0, 1.0) <= (
            calderon_norm(space, f, 2.0, 1.0) + calderon_norm(space, g, 2.0, 1.0) + 1e-12)

    def test_trace_side_norm_of_constant(self, line16, evens16):
        u = ScalarField(np.arange(16), np.full(16, 3.0))
        assert trace_side_norm(line16, evens16, u, 2.0, 0.5) == pytest.approx(3.0 * math.sqrt(8.0))

    def test_trace_side_norm_matches_oracle(self):
        space = random_space(6, n=30)
        mask = random_mask(space, 6)
        ids = np.flatnonzero(mask)
        u = ScalarField(ids, np.random.default_rng(6).normal(size=ids.size))
        naive = sharp_maximal(space, mask, u, 0.5, method="naive")
        expected = lp_norm(space, u, 2.0) + lp_norm(space, naive, 2.0)
        assert trace_side_norm(space, mask, u, 2.0, 0.5) == expected


class TestHajlasz:
    def test_constant_with_zero_gradient(self, line16, evens16):
        ids = np.flatnonzero(evens16)
        u = ScalarField(ids, np.full(8, 2.0))
        g = ScalarField(ids, np.zeros(8))
        assert hajlasz_norm_with_witness(line16, evens16, u, g, 2.0) == pytest.approx(2.0 * math.sqrt(8.0))

    def test_canonical_gradient_is_accepted(self):
        space = random_space(7, n=30)
        u = field_on(space, 7)
        g = canonical_gradient(space, np.ones(space.n, dtype=bool), u)
        assert hajlasz_norm_with_witness(space, None, u, g, 2.0) > 0.0

    def test_zero_gradient_of_non_constant(self, line16):
        u = ScalarField(np.arange(16), np.arange(16, dtype=np.float64))
        g = ScalarField(np.arange(16), np.zeros(16))
        with pytest.raises(WitnessError) as info:
            hajlasz_norm_with_witness(line16, None, u, g, 2.0)
        assert info.value.pair is not None


def test_norm_params_validation():
    assert NormParams(p=math.inf, alpha=1.0).p == math.inf
    with pytest.raises(ConfigError, match="p > 1 required"):
        NormParams(p=1.0, alpha=1.0)
    with pytest.raises(ConfigError):
        NormParams(p=2.0, alpha=0.0)
