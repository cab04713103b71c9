#!/usr/bin/env python3
"""
Geometric straightening baseline

Finds the single strongest bend on the smoothed central axis, cuts the
chromosome with a horizontal line through it, turns each arm upright about
the bend point and stacks the arms. Pixels left empty around the seam get
the mean foreground value of their row. Also provides parallel thinning,
whose skeletons of wide chromosomes show the spurious branches that make
skeleton-based axes unreliable.
"""

import logging
from dataclasses import dataclass

import cv2
import numpy as np
from scipy import ndimage
from skimage.morphology import thin as skimage_thin

from straightkit.processing.backbone import extract_central_axis, smooth_axis
from straightkit.processing.imgcore import check_gray_image, crop_to_content
from straightkit.utils import config
from straightkit.utils.errors import AxisTooShortError, NoForegroundError, NoSignificantBendError, StitchError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BendAnalysis:
    """Bend location on the axis, turning angle (degrees) and arm directions ((dy, dx) unit vectors)"""

    bend_index: int
    bend_row: int
    bend_col: float
    angle: float
    directions: tuple = ()

    def arm_masks(self, img, threshold=0.0):
        """Upper (rows <= bend_row) and lower foreground masks; together they cover the foreground"""
        foreground = np.asarray(img) > threshold
        rows = np.arange(foreground.shape[0])[:, None]
        return foreground & (rows <= self.bend_row), foreground & (rows > self.bend_row)


def turning_angles(points, window=config.BEND_WINDOW):
    """Angle in degrees between p[i] - p[i-w] and p[i+w] - p[i] for every interior i; NaN elsewhere"""
    points = np.asarray(points, dtype=np.float64)
    angles = np.full(len(points), np.nan)
    if len(points) < 2 * window + 1:
        return angles
    before = points[window:-window] - points[: -2 * window]
    after = points[2 * window :] - points[window:-window]
    cos = np.einsum("ij,ij->i", before, after) / (
        np.linalg.norm(before, axis=1) * np.linalg.norm(after, axis=1)
    )
    angles[window:-window] = np.degrees(np.arccos(np.clip(cos, -1.0, 1.0)))
    return angles


def find_bending_point(axis, window=config.BEND_WINDOW, min_angle=config.MIN_BEND_ANGLE):
    """Global maximum of the windowed turning angle on a smoothed axis"""
    if len(axis) < 2 * window + 1:
        raise AxisTooShortError(f"bend search needs at least {2 * window + 1} axis rows, got {len(axis)}")
    points = axis.points
    angles = turning_angles(points, window)
    i = int(np.nanargmax(angles))
    if angles[i] < min_angle:
        raise NoSignificantBendError(f"no significant bend (strongest turn {angles[i]:.1f} deg)")

    before = points[i] - points[i - window]
    after = points[i + window] - points[i]
    directions = (before / np.linalg.norm(before), after / np.linalg.norm(after))
    logger.debug("Bend at row %d (%.1f deg)", axis.rows[i], angles[i])
    return BendAnalysis(
        bend_index=i,
        bend_row=int(axis.rows[i]),
        bend_col=float(axis.centers[i]),
        angle=float(angles[i]),
        directions=directions,
    )


def analyze_bend(img, smooth_window=config.SMOOTH_WINDOW):
    return find_bending_point(smooth_axis(extract_central_axis(img), smooth_window))


def _arm_tilt(rows, centers, bend_row):
    """Degrees to rotate (OpenCV convention) so the least-squares arm axis becomes vertical"""
    if len(rows) < 2:
        return 0.0
    # The smoothed axis rounds the corner; prefer points away from it
    far = np.abs(rows - bend_row) > config.SMOOTH_WINDOW // 2
    if far.sum() >= 2:
        rows, centers = rows[far], centers[far]
    slope = np.polyfit(rows.astype(np.float64), centers, 1)[0]
    return -float(np.degrees(np.arctan(slope)))


def _rotate_about(img, center, angle):
    if abs(angle) < 1e-9:
        return img.copy()
    height, width = img.shape
    matrix = cv2.getRotationMatrix2D((float(center[0]), float(center[1])), angle, 1.0)
    rotated = cv2.warpAffine(
        img, matrix, (width, height), flags=cv2.INTER_LINEAR, borderMode=cv2.BORDER_CONSTANT, borderValue=0
    )
    return np.clip(rotated, 0.0, 1.0).astype(np.float32)


def _upright_arm(img, mask, rows, centers, bend):
    """Rotate one arm upright and crop it; returns (crop, column of its axis inside the crop)"""
    arm = np.where(mask, img, 0.0).astype(np.float32)
    angle = _arm_tilt(rows, centers, bend.bend_row)
    rotated = _rotate_about(arm, (bend.bend_col, bend.bend_row), angle)
    box = crop_to_content(rotated, config.THIN_THRESHOLD)
    if box is None:
        return None, 0.0
    crop = rotated[box]
    occupied = crop > config.THIN_THRESHOLD
    filled = occupied.any(axis=1)
    lefts = np.argmax(occupied[filled], axis=1)
    rights = crop.shape[1] - 1 - np.argmax(occupied[filled][:, ::-1], axis=1)
    return crop, float(np.mean((lefts + rights) / 2.0))


def stitch_straighten(img, bend, return_fill_mask=False):
    """
    Cut at the bend row, turn both arms upright, stack them and fill the seam.

    The stacked result is centered on the original mean axis column and the
    original vertical midpoint. With return_fill_mask the boolean mask of the
    gap-filled pixels is returned as well.
    """
    img = check_gray_image(img)
    height, width = img.shape
    axis = smooth_axis(extract_central_axis(img))
    upper_mask, lower_mask = bend.arm_masks(img)

    upper_rows = axis.rows <= bend.bend_row
    arms = [
        _upright_arm(img, upper_mask, axis.rows[upper_rows], axis.centers[upper_rows], bend),
        _upright_arm(img, lower_mask, axis.rows[~upper_rows], axis.centers[~upper_rows], bend),
    ]
    arms = [(crop, col) for crop, col in arms if crop is not None]
    if not arms:
        raise NoForegroundError()

    stacked_height = sum(crop.shape[0] for crop, _ in arms)
    target_col = int(round(float(np.mean(axis.centers))))
    top = int(np.floor((axis.h1 + axis.h2) / 2.0 - stacked_height / 2.0 + 0.5))
    if top < 0 or top + stacked_height > height:
        raise StitchError(f"stitched chromosome ({stacked_height} rows) does not fit the {height}-row canvas")

    out = np.zeros_like(img)
    row = top
    seam = top + arms[0][0].shape[0]
    for crop, col in arms:
        left = int(round(target_col - col))
        if left < 0 or left + crop.shape[1] > width:
            raise StitchError(f"stitched arm at column {left} does not fit the {width}-column canvas")
        out[row : row + crop.shape[0], left : left + crop.shape[1]] = crop
        row += crop.shape[0]

    fill_mask = np.zeros(out.shape, dtype=bool)
    if len(arms) == 2:
        half_width = max(int(np.median(axis.rights - axis.lefts) / 2.0), 1)
        lo, hi = max(seam - half_width, 0), min(seam + half_width, height)
        c0, c1 = max(target_col - half_width, 0), min(target_col + half_width + 1, width)
        for r in range(lo, hi):
            values = out[r]
            foreground = values[values > 0]
            if foreground.size == 0:
                continue
            gaps = np.zeros(width, dtype=bool)
            gaps[c0:c1] = values[c0:c1] == 0
            out[r, gaps] = np.float32(foreground.astype(np.float64).mean())
            fill_mask[r] = gaps

    logger.debug("Stitched %d arm(s): %d rows, %d gap pixels filled", len(arms), stacked_height, fill_mask.sum())
    if return_fill_mask:
        return out, fill_mask
    return out


def thin(img, threshold=config.THIN_THRESHOLD):
    """Binary 1-pixel-wide skeleton (0/1 float32) from iterated parallel thinning"""
    mask = np.asarray(img) > threshold
    if not mask.any():
        raise NoForegroundError()
    return skimage_thin(mask).astype(np.float32)


def count_endpoints(skeleton):
    """Skeleton pixels with exactly one 8-neighbour"""
    mask = np.asarray(skeleton) > 0
    kernel = np.ones((3, 3), dtype=np.int32)
    kernel[1, 1] = 0
    neighbours = ndimage.convolve(mask.astype(np.int32), kernel, mode="constant", cval=0)
    return int(np.count_nonzero(mask & (neighbours == 1)))


def geometric_straighten(img):
    """Bend analysis followed by stitching; returns (straightened, BendAnalysis)"""
    img = check_gray_image(img)
    bend = analyze_bend(img)
    return stitch_straighten(img, bend), bend
