import numpy as np
import pytest

from core.errors import CoverError
from core.generators import gen_fat_sierpinski
from core.space import Ball, estimate_doubling
from core.whitney import WhitneyCover, build_whitney, select_anchor, verify_cover
from tests.conftest import line_space


@pytest.fixture
def two_blocks():
    """64 points on a line with S the first and last eight; a wide gap in between."""
    space = line_space(64)
    mask = np.zeros(64, dtype=bool)
    mask[:8] = True
    mask[56:] = True
    return space, mask


def scaled_cover(cover, factor):
    return WhitneyCover(space=cover.space, mask=cover.mask, centers=cover.centers,
                        radii=cover.radii * factor, anchors=cover.anchors)


def test_every_other_point(line16, evens16):
    cover = build_whitney(line16, evens16)
    assert cover.centers.tolist() == list(range(1, 16, 2))
    assert np.all(cover.radii == 0.25)
    assert cover.anchors.tolist() == list(range(0, 16, 2))


def test_full_subset_gives_empty_cover(line16):
    mask = np.ones(16, dtype=bool)
    cover = build_whitney(line16, mask)
    assert len(cover) == 0
    assert verify_cover(line16, mask, cover).passed


def test_empty_subset(line16):
    with pytest.raises(CoverError, match="empty"):
        build_whitney(line16, np.zeros(16, dtype=bool))


def test_anchor_ties_go_to_lowest_id():
    space = line_space(3)
    mask = np.array([True, False, True])
    assert select_anchor(space, mask, Ball(1, 0.25)) == 0


def test_verify_on_gap(two_blocks):
    space, mask = two_blocks
    cover = build_whitney(space, mask)
    report = verify_cover(space, mask, cover, estimate_doubling(space))
    assert report.passed
    assert report.coverage
    assert report.multiplicity_bound is not None
    assert report.multiplicity <= report.multiplicity_bound
    assert report.cover_constant <= report.constant_ceiling


def test_balls_stay_off_subset(fat_cantor):
    space, mask = fat_cantor.space, fat_cantor.mask
    cover = build_whitney(space, mask)
    membership = cover.membership.toarray().astype(bool)
    assert not membership[:, mask].any()
    assert membership[:, ~mask].any(axis=0).all()


def test_grown_radii_are_flagged(two_blocks):
    space, mask = two_blocks
    cover = build_whitney(space, mask)
    report = verify_cover(space, mask, scaled_cover(cover, 4.0))
    assert report.sandwich_violations
    assert not report.passed


def test_radii_beyond_the_gap_meet_subset(line16, evens16):
    cover = build_whitney(line16, evens16)
    report = verify_cover(line16, evens16, scaled_cover(cover, 8.0))
    assert report.balls_meeting_subset == list(range(8))
    assert not report.passed


def test_shrunk_radii_are_flagged(line16, evens16):
    cover = build_whitney(line16, evens16)
    report = verify_cover(line16, evens16, scaled_cover(cover, 0.5))
    assert report.sandwich_violations == list(range(8))
    assert not report.passed


def test_from_balls_rebuilds_anchors(line16, evens16):
    cover = build_whitney(line16, evens16)
    rebuilt = WhitneyCover.from_balls(line16, evens16, cover.balls)
    assert np.array_equal(rebuilt.anchors, cover.anchors)


def test_from_balls_rejects_anchor_off_subset(line16, evens16):
    with pytest.raises(CoverError, match="anchor"):
        WhitneyCover.from_balls(line16, evens16, [Ball(1, 0.25)], anchors=[3])


def test_neighbors_include_the_ball_itself(two_blocks):
    space, mask = two_blocks
    cover = build_whitney(space, mask)
    for b, neighbors in enumerate(cover.neighbor_index):
        assert b in neighbors


def test_cover_on_matrix_space(ring8):
    mask = np.zeros(8, dtype=bool)
    mask[0] = True
    cover = build_whitney(ring8, mask)
    assert verify_cover(ring8, mask, cover).coverage


@pytest.mark.slow
def test_sierpinski_grid_contract():
    generated = gen_fat_sierpinski(level=2, resolution=32)
    space, mask = generated.space, generated.mask
    params = estimate_doubling(space)
    cover = build_whitney(space, mask)
    report = verify_cover(space, mask, cover, params)
    assert report.coverage
    assert report.sandwich_violations == []
    assert report.balls_meeting_subset == []
    assert report.multiplicity <= 9 * params.C_d ** 4
