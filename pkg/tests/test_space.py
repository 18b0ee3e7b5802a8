import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from core.errors import DomainError, RegularityError, SpaceError
from core.space import (
    Ball,
    MetricMeasureSpace,
    ScalarField,
    average,
    ball_measure,
    ball_members,
    candidate_radii,
    closed_ball_members,
    choose_regularity_scale,
    estimate_doubling,
    estimate_regularity,
)
from tests.conftest import line_space, random_space, ring_space


@pytest.fixture
def three_points():
    return line_space(3)


class TestConstruction:
    def test_rejects_non_positive_weight(self):
        with pytest.raises(SpaceError, match="weight of point 1"):
            MetricMeasureSpace.from_coords([0.0, 1.0], [1.0, 0.0])

    def test_rejects_coincident_points(self):
        with pytest.raises(SpaceError, match="coincide"):
            MetricMeasureSpace.from_coords([0.0, 0.0], [1.0, 1.0])

    def test_rejects_asymmetric_matrix(self):
        matrix = np.array([[0.0, 1.0], [2.0, 0.0]])
        with pytest.raises(SpaceError, match="not symmetric"):
            MetricMeasureSpace.from_matrix(matrix, [1.0, 1.0])

    def test_rejects_triangle_violation(self):
        matrix = np.array([[0.0, 1.0, 5.0],
                           [1.0, 0.0, 1.0],
                           [5.0, 1.0, 0.0]])
        with pytest.raises(SpaceError, match="triangle inequality"):
            MetricMeasureSpace.from_matrix(matrix, np.ones(3))

    def test_matrix_space_is_not_euclidean(self, ring8):
        assert not ring8.is_euclidean
        assert ring8.diameter == 4.0

    def test_default_scale_window(self, line16):
        assert line16.scale_window == (2.0, 7.5)
        assert not line16.has_custom_window()

    def test_invalid_scale_window(self):
        with pytest.raises(SpaceError, match="invalid scale window"):
            line_space(4, scale_window=(3.0, 1.0))


class TestBalls:
    def test_open_ball(self, three_points):
        assert ball_members(three_points, Ball(0, 1.5)).tolist() == [0, 1]

    def test_boundary_excluded(self, three_points):
        assert ball_members(three_points, Ball(0, 1.0)).tolist() == [0]

    def test_zero_radius_is_empty(self, three_points):
        assert ball_members(three_points, Ball(0, 0.0)).size == 0

    def test_negative_radius(self):
        with pytest.raises(SpaceError, match="non-negative"):
            Ball(0, -1.0)

    def test_invalid_center(self, three_points):
        with pytest.raises(SpaceError, match="invalid point id 7"):
            ball_members(three_points, Ball(7, 1.0))

    def test_ball_measure(self):
        space = line_space(3, weights=[1.0, 2.0, 4.0])
        assert ball_measure(space, Ball(1, 1.5)) == 7.0

    def test_candidate_radii(self, three_points):
        assert candidate_radii(three_points, 0).tolist() == [1.0, 2.0]


class TestAverage:
    def test_unweighted_mean(self):
        space = line_space(2)
        f = ScalarField([0, 1], [2.0, 4.0])
        assert average(space, f, [0, 1]) == 3.0

    def test_weighted_mean(self):
        space = line_space(2, weights=[3.0, 1.0])
        f = ScalarField([0, 1], [1.0, 3.0])
        assert average(space, f, [0, 1]) == 1.5

    def test_empty_set_averages_to_zero(self):
        space = line_space(2)
        f = ScalarField([0, 1], [2.0, 4.0])
        assert average(space, f, []) == 0.0

    def test_outside_domain(self):
        space = line_space(3)
        f = ScalarField([0, 1], [2.0, 4.0])
        with pytest.raises(DomainError, match="point 2"):
            average(space, f, [1, 2])

    def test_mean_stays_in_value_range(self):
        space = line_space(3, weights=[0.1, 0.2, 0.3])
        f = ScalarField([0, 1, 2], [0.1, 0.1, 0.1])
        assert average(space, f, [0, 1, 2]) == 0.1


class TestScalarField:
    def test_unsorted_domain_is_sorted(self):
        f = ScalarField([2, 0], [5.0, 7.0])
        assert f.domain.tolist() == [0, 2]
        assert f(2) == 5.0

    def test_duplicate_ids(self):
        with pytest.raises(DomainError, match="duplicate"):
            ScalarField([1, 1], [0.0, 0.0])

    def test_query_outside_domain(self):
        with pytest.raises(DomainError):
            ScalarField([0], [1.0])(3)

    def test_restrict_is_exact(self):
        values = np.random.default_rng(3).normal(size=10)
        f = ScalarField(np.arange(10), values)
        assert np.array_equal(f.restrict([1, 4]).values, values[[1, 4]])


class TestDoubling:
    def test_line_with_custom_window(self):
        params = estimate_doubling(line_space(16, scale_window=(2.0, 4.0)))
        assert params.C_d == pytest.approx(1.8)
        assert params.C_rd == pytest.approx(1.4)
        assert params.beta == pytest.approx(math.log2(1.8))
        assert params.reverse_doubling

    def test_two_points(self):
        params = estimate_doubling(line_space(2, scale_window=(1.0, 4.0)))
        assert params.C_d == 1.0
        assert params.C_rd == 1.0
        assert not params.reverse_doubling

    def test_empty_window(self):
        with pytest.raises(SpaceError, match="empty radius window"):
            estimate_doubling(line_space(2))

    def test_fine_line_brackets_lebesgue_value(self):
        params = estimate_doubling(line_space(64))
        assert params.C_rd <= 2.0 <= params.C_d

    def test_constants_are_ordered(self):
        params = estimate_doubling(ring_space(32))
        assert 1.0 <= params.C_rd <= params.C_d


class TestRegularity:
    def test_every_other_point(self, line16, evens16):
        regular = estimate_regularity(line16, evens16, 2.0)
        assert regular.theta == pytest.approx(3.0)
        assert regular.size == 8

    def test_full_subset(self, line16):
        regular = estimate_regularity(line16, np.ones(16, dtype=bool), 3.0)
        assert regular.theta == 1.0

    def test_empty_subset(self, line16):
        with pytest.raises(SpaceError, match="empty"):
            estimate_regularity(line16, np.zeros(16, dtype=bool), 1.0)

    def test_non_positive_delta(self, line16, evens16):
        with pytest.raises(RegularityError):
            estimate_regularity(line16, evens16, 0.0)

    def test_auto_scale_takes_largest_admissible(self, line16, evens16):
        regular = choose_regularity_scale(line16, evens16, ceiling=3.0)
        assert regular.delta == 15.0
        assert regular.theta == pytest.approx(3.0)

    def test_auto_scale_below_smallest_theta(self, line16, evens16):
        with pytest.raises(RegularityError):
            choose_regularity_scale(line16, evens16, ceiling=2.5)


@given(seed=st.integers(0, 2 ** 16), power=st.integers(-8, 8))
@settings(max_examples=20, deadline=None)
def test_doubling_ignores_weight_scale(seed, power):
    space = random_space(seed % 11, n=30)
    scaled = MetricMeasureSpace.from_coords(space.coords, space.weights * 2.0 ** power)
    params, scaled_params = estimate_doubling(space), estimate_doubling(scaled)
    assert scaled_params.C_d == params.C_d
    assert scaled_params.C_rd == params.C_rd


@given(seed=st.integers(0, 2 ** 16), center=st.integers(0, 29),
       radii=st.tuples(st.floats(0.01, 15.0), st.floats(0.01, 15.0)))
@settings(max_examples=40, deadline=None)
def test_balls_grow_with_radius(seed, center, radii):
    space = random_space(seed % 11, n=30)
    small, large = sorted(radii)
    inner = set(ball_members(space, Ball(center, small)).tolist())
    outer = set(ball_members(space, Ball(center, large)).tolist())
    assert inner <= outer
    assert ball_measure(space, Ball(center, small)) <= ball_measure(space, Ball(center, large))


@given(seed=st.integers(0, 2 ** 16), power=st.integers(-8, 8))
@settings(max_examples=20, deadline=None)
def test_average_ignores_weight_scale(seed, power):
    space = random_space(seed % 11, n=30)
    scaled = MetricMeasureSpace.from_coords(space.coords, space.weights * 2.0 ** power)
    f = ScalarField(np.arange(30), np.random.default_rng(seed).normal(size=30))
    subset = np.arange(0, 30, 3)
    assert average(scaled, f, subset) == average(space, f, subset)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_dense_radius_sweep_only_changes_at_candidate_radii(seed):
    space = random_space(seed, n=50)
    sweep = np.linspace(0.0, 1.1 * space.diameter, 10_000)
    for x in (0, 25, 49):
        breaks = candidate_radii(space, x)
        for r in sweep:
            below = breaks[breaks < r]
            if below.size:
                expected = closed_ball_members(space, x, below[-1])
            else:
                expected = np.array([x]) if r > 0.0 else np.zeros(0, dtype=np.int64)
            assert np.array_equal(ball_members(space, Ball(x, r)), expected)
