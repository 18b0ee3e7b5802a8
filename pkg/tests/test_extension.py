import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from core.errors import DomainError
from core.extension import (
    ExtensionBundle,
    canonical_gradient,
    extend_abs_average,
    extend_function,
    extend_gradient,
    zero_extend,
)
from core.generators import gen_fat_cantor
from core.maximal import check_gradient, lp_norm
from core.partition import build_partition
from core.quasi_balls import build_quasi_balls, build_tuned_family
from core.space import MetricMeasureSpace, ScalarField
from core.whitney import build_whitney
from tests.conftest import line_space


@pytest.fixture
def evens_construction(line16, evens16):
    cover = build_whitney(line16, evens16)
    family = build_quasi_balls(line16, evens16, cover, 0.5, 1.0)
    partition = build_partition(line16, evens16, cover)
    return line16, evens16, cover, family, partition


@pytest.fixture
def cantor_construction(fat_cantor):
    space, mask = fat_cantor.space, fat_cantor.mask
    cover = build_whitney(space, mask)
    family = build_tuned_family(space, mask, cover, fat_cantor.recommended_delta)
    partition = build_partition(space, mask, cover)
    return space, mask, cover, family, partition


def coordinate_on(space, mask):
    ids = np.flatnonzero(mask)
    return ScalarField(ids, space.coords[ids, 0])


def test_extension_copies_the_anchor_value(evens_construction):
    space, mask, cover, family, partition = evens_construction
    u = coordinate_on(space, mask)
    u_tilde = extend_function(space, mask, cover, family, partition, u)
    odd = np.arange(1, 16, 2)
    assert np.array_equal(u_tilde.values_on(odd), odd - 1.0)


def test_restriction_is_exact(cantor_construction):
    space, mask, cover, family, partition = cantor_construction
    ids = np.flatnonzero(mask)
    rng = np.random.default_rng(11)
    for _ in range(20):
        u = ScalarField(ids, rng.normal(scale=rng.uniform(1e-3, 1e3), size=ids.size))
        u_tilde = extend_function(space, mask, cover, family, partition, u)
        assert np.array_equal(u_tilde.values_on(ids), u.values)
        assert len(u_tilde) == space.n


def test_constants_are_preserved(cantor_construction):
    space, mask, cover, family, partition = cantor_construction
    assert family.eligible.all()
    ids = np.flatnonzero(mask)
    u = ScalarField(ids, np.full(ids.size, 2.5))
    u_tilde = extend_function(space, mask, cover, family, partition, u)
    assert np.allclose(u_tilde.values, 2.5, rtol=1e-12, atol=0.0)


def test_constants_vanish_on_large_balls(line16, evens16):
    cover = build_whitney(line16, evens16)
    family = build_quasi_balls(line16, evens16, cover, 0.5, 0.1)
    partition = build_partition(line16, evens16, cover)
    u = ScalarField(np.flatnonzero(evens16), np.full(8, 3.0))
    u_tilde = extend_function(line16, evens16, cover, family, partition, u)
    assert np.all(u_tilde.values_on(np.arange(1, 16, 2)) == 0.0)


def test_extension_is_linear(cantor_construction):
    space, mask, cover, family, partition = cantor_construction
    ids = np.flatnonzero(mask)
    rng = np.random.default_rng(5)
    f = ScalarField(ids, rng.normal(size=ids.size))
    g = ScalarField(ids, rng.normal(size=ids.size))
    combined = ScalarField(ids, 2.0 * f.values - 3.0 * g.values)
    ext = lambda h: extend_function(space, mask, cover, family, partition, h).values
    assert np.allclose(ext(combined), 2.0 * ext(f) - 3.0 * ext(g), atol=1e-12)


def test_full_subset_is_identity(line16):
    mask = np.ones(16, dtype=bool)
    cover = build_whitney(line16, mask)
    family = build_quasi_balls(line16, mask, cover, 0.5, 1.0)
    partition = build_partition(line16, mask, cover)
    u = ScalarField(np.arange(16), np.linspace(-1.0, 1.0, 16))
    u_tilde = extend_function(line16, mask, cover, family, partition, u)
    assert np.array_equal(u_tilde.values, u.values)


def test_input_must_cover_subset(evens_construction):
    space, mask, cover, family, partition = evens_construction
    with pytest.raises(DomainError, match="u must be defined"):
        extend_function(space, mask, cover, family, partition, ScalarField([0, 2], [1.0, 1.0]))


def test_gradient_extension(evens_construction):
    space, mask, cover, family, partition = evens_construction
    u = coordinate_on(space, mask)
    g = canonical_gradient(space, mask, u)
    g_tilde = extend_gradient(space, mask, cover, family, u, g)
    odd = np.arange(1, 16, 2)
    assert np.allclose(g_tilde.values_on(odd), 0.5 + np.abs(odd - 1.0))
    assert np.array_equal(g_tilde.values_on(np.flatnonzero(mask)), g.values)


def test_negative_gradient_rejected(evens_construction):
    space, mask, cover, family, partition = evens_construction
    u = coordinate_on(space, mask)
    g = ScalarField(np.flatnonzero(mask), -np.ones(8))
    with pytest.raises(DomainError, match="non-negative"):
        extend_gradient(space, mask, cover, family, u, g)


def test_abs_average_extension(evens_construction):
    space, mask, cover, family, partition = evens_construction
    ids = np.flatnonzero(mask)
    f = ScalarField(ids, -np.ones(8))
    big_f = extend_abs_average(space, mask, cover, family, f)
    assert np.all(big_f.values_on(np.arange(1, 16, 2)) == 1.0)
    assert np.all(big_f.values_on(ids) == -1.0)


def test_zero_extend_keeps_norm(fat_cantor):
    space, mask = fat_cantor.space, fat_cantor.mask
    ids = np.flatnonzero(mask)
    f = ScalarField(ids, np.random.default_rng(2).normal(size=ids.size))
    hat = zero_extend(space, f)
    assert np.all(hat.values_on(np.flatnonzero(~mask)) == 0.0)
    assert lp_norm(space, hat, 3.0) == pytest.approx(lp_norm(space, f, 3.0))


class TestCanonicalGradient:
    def test_two_points(self):
        space = MetricMeasureSpace.from_coords([0.0, 4.0], [1.0, 1.0])
        u = ScalarField([0, 1], [0.0, 3.0])
        g = canonical_gradient(space, np.ones(2, dtype=bool), u)
        assert np.allclose(g.values, 3.0 / 8.0)

    def test_singleton(self):
        space = line_space(3)
        mask = np.array([False, True, False])
        g = canonical_gradient(space, mask, ScalarField([1], [7.0]))
        assert g.values.tolist() == [0.0]

    def test_is_a_generalized_gradient(self, fat_cantor):
        space, mask = fat_cantor.space, fat_cantor.mask
        ids = np.flatnonzero(mask)
        u = ScalarField(ids, np.random.default_rng(9).uniform(-1.0, 1.0, size=ids.size))
        check_gradient(space, mask, u, canonical_gradient(space, mask, u))


def test_bundle_extends_other_functions(cantor_construction):
    space, mask, cover, family, partition = cantor_construction
    ids = np.flatnonzero(mask)
    u = ScalarField(ids, np.ones(ids.size))
    bundle = ExtensionBundle.build(space, mask, cover, family, partition, u)
    assert bundle.g_tilde is None
    f = ScalarField(ids, np.arange(ids.size, dtype=np.float64))
    direct = extend_function(space, mask, cover, family, partition, f)
    assert np.array_equal(bundle.extend(f).values, direct.values)


@given(seed=st.integers(0, 2 ** 16), a=st.floats(-4.0, 4.0), b=st.floats(-4.0, 4.0))
@settings(max_examples=20, deadline=None)
def test_extension_is_linear_for_any_coefficients(seed, a, b):
    generated = gen_fat_cantor(level=2)
    space, mask = generated.space, generated.mask
    cover = build_whitney(space, mask)
    family = build_tuned_family(space, mask, cover, generated.recommended_delta)
    partition = build_partition(space, mask, cover)
    ids = np.flatnonzero(mask)
    rng = np.random.default_rng(seed)
    f = ScalarField(ids, rng.uniform(-1.0, 1.0, size=ids.size))
    g = ScalarField(ids, rng.uniform(-1.0, 1.0, size=ids.size))
    ext = lambda h: extend_function(space, mask, cover, family, partition, h).values
    combined = ext(ScalarField(ids, a * f.values + b * g.values))
    assert np.allclose(combined, a * ext(f) + b * ext(g), atol=1e-11 * (1.0 + abs(a) + abs(b)))
