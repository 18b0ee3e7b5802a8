import dataclasses
import math

import numpy as np
import pytest

from core.audits import (
    AuditReport,
    RatioTracker,
    audit_ball_lemmas,
    audit_gradient_inequality,
    audit_lp_bounds,
    audit_maximal_boundedness,
    audit_oscillation_lemma,
    audit_scale_bounds,
    audit_sharp_bounds,
    audit_sharp_gradient,
    audit_trace_equivalence,
    default_ball_samples,
    family_subset_pairs,
)
from core.extension import ExtensionBundle, canonical_gradient
from core.partition import build_partition
from core.quasi_balls import build_tuned_family
from core.space import Ball, ScalarField, estimate_doubling
from core.whitney import build_whitney
from tests.conftest import line_space


def make_bundle(generated, values):
    space, mask = generated.space, generated.mask
    cover = build_whitney(space, mask)
    family = build_tuned_family(space, mask, cover, generated.recommended_delta)
    partition = build_partition(space, mask, cover)
    ids = np.flatnonzero(mask)
    u = ScalarField(ids, values(space, ids))
    return ExtensionBundle.build(space, mask, cover, family, partition, u, canonical_gradient(space, mask, u))


@pytest.fixture
def coordinate_bundle(fat_cantor):
    return make_bundle(fat_cantor, lambda space, ids: space.coords[ids, 0])


@pytest.fixture
def constant_bundle(fat_cantor):
    return make_bundle(fat_cantor, lambda space, ids: np.full(ids.size, 1.5))


class TestRatioConventions:
    def test_zero_over_zero_passes(self):
        tracker = RatioTracker()
        tracker.add(0.0, 0.0, {})
        assert tracker.value == 0.0

    def test_positive_over_zero_fails(self):
        tracker = RatioTracker()
        tracker.add(1.0, 0.0, {'where': 3})
        assert tracker.value == math.inf
        assert tracker.witness['where'] == 3

    def test_report_pass_rules(self):
        assert AuditReport("a", 2.0).passed
        assert not AuditReport("a", 2.0, ceiling=1.0).passed
        assert not AuditReport("a", math.inf).passed
        assert not AuditReport("a", 0.5, checks_passed=False).passed

    def test_infinite_constant_is_json_safe(self):
        assert AuditReport("a", math.inf).to_dict()['observed_constant'] == "inf"


class TestGradientInequality:
    def test_constant_gives_zero(self, constant_bundle):
        report = audit_gradient_inequality(constant_bundle.space, constant_bundle)
        assert report.observed_constant == 0.0
        assert report.passed

    def test_coordinate_is_finite(self, coordinate_bundle):
        report = audit_gradient_inequality(coordinate_bundle.space, coordinate_bundle)
        assert 0.0 < report.observed_constant < math.inf
        assert report.witness['lhs'] == pytest.approx(report.observed_constant * report.witness['rhs'])

    def test_zeroed_gradient_is_caught(self, coordinate_bundle):
        space = coordinate_bundle.space
        broken = dataclasses.replace(coordinate_bundle, g_tilde=ScalarField(np.arange(space.n), np.zeros(space.n)),
                                     cache={})
        report = audit_gradient_inequality(space, broken)
        assert report.observed_constant == math.inf
        assert not report.passed
        assert report.witness is not None


class TestOscillationLemma:
    def test_identical_sets(self, coordinate_bundle):
        bundle = coordinate_bundle
        h = bundle.family.sets[bundle.family.nonempty()[0]]
        report = audit_oscillation_lemma(bundle.space, bundle.mask, bundle.u, bundle.g, [(h, h)],
                                         points=h)
        assert report.details['subset_pairs']['value'] == 0.0

    def test_singletons_reduce_to_the_gradient_inequality(self, coordinate_bundle):
        bundle = coordinate_bundle
        ids = bundle.subset_ids
        pairs = [(ids[[i]], ids[[j]]) for i in range(0, ids.size, 7) for j in range(0, ids.size, 11)]
        report = audit_oscillation_lemma(bundle.space, bundle.mask, bundle.u, bundle.g, pairs)
        assert report.observed_constant <= 1.0 + 1e-12
        assert report.passed

    def test_family_pairs(self, coordinate_bundle):
        bundle = coordinate_bundle
        pairs = family_subset_pairs(bundle.family)
        report = audit_oscillation_lemma(bundle.space, bundle.mask, bundle.u, bundle.g, pairs)
        assert report.passed


class TestLpBounds:
    def test_constant_extension_ratio(self, constant_bundle):
        bundle = constant_bundle
        space = bundle.space
        report = audit_lp_bounds(space, bundle.mask, bundle, [], 2.0)
        expected = math.sqrt(space.total_measure / space.measure(bundle.subset_ids))
        assert report.details['extension']['value'] == pytest.approx(expected)

    def test_zero_sample_is_skipped(self, coordinate_bundle):
        bundle = coordinate_bundle
        zero = ScalarField(bundle.subset_ids, np.zeros(bundle.subset_ids.size))
        with_zero = audit_lp_bounds(bundle.space, bundle.mask, bundle, [zero], 2.0)
        without = audit_lp_bounds(bundle.space, bundle.mask, bundle, [], 2.0)
        assert with_zero.observed_constant == without.observed_constant

    def test_sup_norm(self, coordinate_bundle):
        bundle = coordinate_bundle
        report = audit_lp_bounds(bundle.space, bundle.mask, bundle, [], math.inf)
        assert report.details['extension']['value'] == pytest.approx(1.0)
        assert report.passed


class TestSharpBounds:
    def test_constant_has_no_oscillation(self, constant_bundle):
        bundle = constant_bundle
        report = audit_sharp_bounds(bundle.space, bundle.mask, bundle, 0.5)
        assert report.details['on_subset']['value'] == 0.0
        assert report.details['everywhere']['value'] == 0.0
        assert report.passed

    def test_restriction_factor_two(self, coordinate_bundle):
        bundle = coordinate_bundle
        report = audit_sharp_bounds(bundle.space, bundle.mask, bundle, 1.0)
        assert report.details['restriction']['value'] <= 2.0 + 1e-12
        assert math.isfinite(report.observed_constant)
        assert report.passed


class TestBallLemmas:
    def test_default_samples_cover_both_scales(self, coordinate_bundle):
        bundle = coordinate_bundle
        samples = default_ball_samples(bundle.space, bundle.mask, bundle.cover, 12, seed=3)
        report = audit_ball_lemmas(bundle.space, bundle.mask, bundle, 0.5, samples)
        assert math.isfinite(report.observed_constant)
        assert report.details['eta1'] > 0.0
        assert report.details['oscillation_small_scale']['checked'] > 0
        assert report.details['oscillation_large_scale']['checked'] > 0
        assert report.details['oscillation_inside_whitney']['checked'] + \
            report.details['oscillation_across_whitney']['checked'] > 0

    def test_ball_inside_subset_has_no_whitney_family(self, coordinate_bundle):
        bundle = coordinate_bundle
        report = audit_ball_lemmas(bundle.space, bundle.mask, bundle, 0.5, [Ball(0, 1.5)])
        assert report.details['eta1'] == 0.0
        assert report.details['integral_off_subset']['value'] == 0.0

    def test_eta_constants_follow_gamma1(self, coordinate_bundle):
        bundle = coordinate_bundle
        report = audit_ball_lemmas(bundle.space, bundle.mask, bundle, 0.5, [Ball(0, 1.5)])
        assert report.details['eta3'] == pytest.approx(8.0 * (bundle.family.gamma1 + 10.0))


class TestTraceEquivalence:
    def test_coordinate(self, coordinate_bundle):
        bundle = coordinate_bundle
        report = audit_trace_equivalence(bundle.space, bundle.mask, bundle, 2.0, 1.0)
        assert report.details['lower']['value'] <= 2.0 + 1e-12
        assert math.isfinite(report.observed_constant)
        assert report.details['hajlasz']['checked'] == 1
        assert report.passed

    def test_infinite_gradient_constant_fails(self, coordinate_bundle):
        space = coordinate_bundle.space
        broken = dataclasses.replace(coordinate_bundle, g_tilde=ScalarField(np.arange(space.n), np.zeros(space.n)),
                                     cache={})
        report = audit_trace_equivalence(space, broken.mask, broken, 2.0, 1.0)
        assert not report.passed
        assert "infinite" in report.note


def test_maximal_boundedness_is_at_least_one(coordinate_bundle):
    bundle = coordinate_bundle
    report = audit_maximal_boundedness(bundle.space, [bundle.u_tilde], 2.0)
    assert 1.0 <= report.observed_constant < math.inf


def test_sharp_gradient_is_finite(coordinate_bundle):
    report = audit_sharp_gradient(coordinate_bundle.space, coordinate_bundle.u_tilde)
    assert math.isfinite(report.observed_constant)
    assert report.passed


def test_scale_bounds_on_a_line():
    space = line_space(32)
    params = estimate_doubling(space)
    report = audit_scale_bounds(space, params)
    assert math.isfinite(report.observed_constant)
    assert report.details['points'] == 32
    assert report.witness is not None
