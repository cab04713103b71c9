import numpy as np
import pytest
from numpy.testing import assert_array_equal
from scipy import ndimage

from straightkit.baseline.geobase import (
    BendAnalysis,
    analyze_bend,
    count_endpoints,
    find_bending_point,
    geometric_straighten,
    stitch_straighten,
    thin,
    turning_angles,
)
from straightkit.processing.backbone import Axis, draw_capsule
from straightkit.utils.errors import AxisTooShortError, NoForegroundError, NoSignificantBendError

EIGHT = np.ones((3, 3), dtype=int)


def _axis(centers, h1=0):
    centers = np.asarray(centers, dtype=np.float64)
    rows = np.arange(h1, h1 + len(centers))
    return Axis(rows, centers, centers - 5, centers + 5, int(rows[0]), int(rows[-1]))


def _polyline(*segments):
    """Centers for consecutive 50-row segments, each tilted by the given degrees from vertical"""
    centers = [100.0]
    for angle in segments:
        step = np.tan(np.radians(angle))
        centers.extend(centers[-1] + step * np.arange(1, 51))
    return np.array(centers)


def _v_image(radius, length, value=0.8, vertex=(128, 100), half_angle=30.0):
    """'<' shape: two arms leaving the vertex up-right and down-right"""
    img = np.zeros((256, 256), dtype=np.float32)
    dy, dx = length * np.cos(np.radians(half_angle)), length * np.sin(np.radians(half_angle))
    draw_capsule(img, vertex, (vertex[0] - dy, vertex[1] + dx), radius, value)
    draw_capsule(img, vertex, (vertex[0] + dy, vertex[1] + dx), radius, value)
    return img


# Bend analysis


def test_v_shaped_axis_bends_at_the_corner():
    """Test arms at -30 and +30 degrees meet with a 60 degree turn"""
    rows = np.arange(121)
    centers = 100 + np.abs(rows - 60) * np.tan(np.radians(30))
    bend = find_bending_point(_axis(centers))
    assert bend.bend_row == 60
    assert bend.angle == pytest.approx(60.0, abs=2.0)
    assert bend.directions[0][1] < 0 < bend.directions[1][1]


def test_straight_axis_has_no_significant_bend():
    with pytest.raises(NoSignificantBendError):
        find_bending_point(_axis(np.full(80, 64.0)))


def test_strongest_of_two_bends_is_chosen():
    """Test a 40 degree turn at row 50 wins over a 25 degree turn at row 100"""
    axis = _axis(_polyline(0.0, 40.0, 15.0))
    angles = turning_angles(axis.points)
    assert angles[50] == pytest.approx(40.0, abs=0.5)
    assert angles[100] == pytest.approx(25.0, abs=0.5)
    assert find_bending_point(axis).bend_row == 50


def test_short_axis_is_rejected():
    with pytest.raises(AxisTooShortError):
        find_bending_point(_axis(np.arange(20.0)))


def test_turning_angles_are_nan_at_the_ends():
    angles = turning_angles(_axis(np.full(30, 5.0)).points, window=10)
    assert np.isnan(angles[:10]).all() and np.isnan(angles[-10:]).all()
    assert np.all(angles[10:20] == 0.0)


def test_bend_ignores_intensity_scale():
    img = _v_image(radius=6, length=50)
    bend = analyze_bend(img)
    assert abs(bend.bend_row - 128) <= 3
    assert bend.angle > 30
    scaled = analyze_bend(img * 0.5)
    assert (scaled.bend_row, scaled.bend_col, scaled.angle) == (bend.bend_row, bend.bend_col, bend.angle)


def test_arm_masks_partition_the_foreground(bar_image):
    bend = BendAnalysis(bend_index=70, bend_row=120, bend_col=128.0, angle=0.0)
    upper, lower = bend.arm_masks(bar_image)
    assert not (upper & lower).any()
    assert_array_equal(upper | lower, bar_image > 0)
    assert np.flatnonzero(upper.any(axis=1))[-1] == 120


# Stitching


def test_stitching_a_straight_bar_is_identity(bar_image):
    bend = BendAnalysis(bend_index=70, bend_row=120, bend_col=128.0, angle=0.0)
    out, fill = stitch_straighten(bar_image, bend, return_fill_mask=True)
    assert_array_equal(out, bar_image)
    assert not fill.any()


def test_right_angle_v_is_straightened_to_full_length():
    """Test two 40 px arms at a right angle stack into an 80 +- 3 px chromosome"""
    img = _v_image(radius=1, length=40, half_angle=45.0)
    out, bend = geometric_straighten(img)
    rows = np.flatnonzero((out > 0.25).any(axis=1))
    cols = np.flatnonzero((out > 0.25).any(axis=0))
    assert 77 <= rows[-1] - rows[0] + 1 <= 83
    assert cols[-1] - cols[0] + 1 <= 8
    assert bend.angle > 30


def test_seam_fill_uses_the_row_mean():
    img = _v_image(radius=6, length=50)
    bend = analyze_bend(img)
    out, fill = stitch_straighten(img, bend, return_fill_mask=True)
    for r in np.flatnonzero(fill.any(axis=1)):
        known = out[r][(out[r] > 0) & ~fill[r]]
        expected = np.float32(known.astype(np.float64).mean())
        assert np.all(out[r][fill[r]] == expected)

    kept = np.count_nonzero((out > 0.4) & ~fill)
    assert kept == pytest.approx(np.count_nonzero(img > 0.4), rel=0.05)


# Thinning


def test_thin_bar_gives_middle_column():
    img = np.zeros((50, 40), dtype=np.float32)
    img[10:41, 20:23] = 1.0
    rows, cols = np.nonzero(thin(img))
    assert set(cols.tolist()) == {21}
    assert rows.size > 20


def test_thin_keeps_isolated_pixel_and_is_idempotent():
    img = np.zeros((20, 20), dtype=np.float32)
    img[5, 5] = 1.0
    assert_array_equal(thin(img), img)

    blob = _v_image(radius=6, length=50)
    skeleton = thin(blob)
    assert_array_equal(thin(skeleton), skeleton)


def test_thin_preserves_components():
    img = _v_image(radius=6, length=50)
    draw_capsule(img, (30, 30), (30, 70), 5, 0.6)
    skeleton = thin(img)
    assert ndimage.label(skeleton, EIGHT)[1] == ndimage.label(img > 0, EIGHT)[1] == 2


def test_wide_chromosome_skeleton_has_side_branches():
    """Test lateral bulges on a wide body add skeleton endpoints"""
    img = np.zeros((256, 256), dtype=np.float32)
    draw_capsule(img, (60, 128), (190, 128), 10, 0.7)
    draw_capsule(img, (100, 128), (100, 152), 6, 0.7)
    draw_capsule(img, (150, 128), (150, 104), 6, 0.7)
    assert count_endpoints(thin(img)) > 2


def test_thin_rejects_empty_image():
    with pytest.raises(NoForegroundError):
        thin(np.zeros((10, 10), dtype=np.float32))


def test_count_endpoints_of_a_line():
    line = np.zeros((10, 10), dtype=np.float32)
    line[2:8, 4] = 1.0
    assert count_endpoints(line) == 2
