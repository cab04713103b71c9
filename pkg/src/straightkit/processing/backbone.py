#!/usr/bin/env python3
"""
Internal backbone extraction

Row-wise central axis of a single chromosome, moving-average smoothing,
a 10-point partition of the axis and the 9-stick figures (curved and
vertical) that condition the translation model.
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from straightkit.processing.imgcore import check_gray_image
from straightkit.utils import config
from straightkit.utils.errors import (
    AxisTooShortError,
    DataError,
    InvalidArgumentError,
    NoForegroundError,
    OutOfCanvasError,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Axis:
    """Per-row central axis; lefts/rights are the first/last foreground columns"""

    rows: np.ndarray
    centers: np.ndarray
    lefts: np.ndarray
    rights: np.ndarray
    h1: int
    h2: int

    def __len__(self):
        return len(self.rows)

    @property
    def points(self):
        """(y, x) polyline as an (n, 2) array"""
        return np.column_stack([self.rows.astype(np.float64), self.centers])

    def with_centers(self, centers):
        return Axis(self.rows, np.asarray(centers, dtype=np.float64), self.lefts, self.rights, self.h1, self.h2)


@dataclass(frozen=True)
class ControlPoints:
    points: np.ndarray  # (10, 2) fractional (y, x)

    @property
    def stick_lengths(self):
        return np.hypot(*np.diff(self.points, axis=0).T)

    def to_text(self):
        return "".join(f"{y:.6f} {x:.6f}\n" for y, x in self.points)

    @classmethod
    def from_text(cls, text):
        rows = [line.split() for line in text.splitlines() if line.strip()]
        try:
            points = np.array([[float(y), float(x)] for y, x in rows], dtype=np.float64)
        except ValueError as e:
            raise DataError(f"control points must be 'y x' number pairs: {e}") from e
        if points.shape != (config.NUM_CONTROL_POINTS, 2):
            raise DataError(
                f"expected {config.NUM_CONTROL_POINTS} 'y x' lines, got {len(points)}"
            )
        return cls(points)


@dataclass(frozen=True)
class BackbonePair:
    curved: np.ndarray
    vertical: np.ndarray
    lengths: np.ndarray


def stick_values(num_sticks=config.NUM_STICKS, step=config.STICK_VALUE_STEP):
    """Label value of every stick in [0,1]: 23/255, 46/255, ..."""
    return [np.float32(step * k / 255.0) for k in range(1, num_sticks + 1)]


def extract_central_axis(img):
    """Midpoint of the first and last foreground column of every row"""
    img = check_gray_image(img)
    mask = img > 0
    occupied = np.flatnonzero(mask.any(axis=1))
    if occupied.size == 0:
        raise NoForegroundError()

    h1, h2 = int(occupied[0]), int(occupied[-1])
    if h2 - h1 + 1 < config.MIN_FOREGROUND_ROWS:
        raise AxisTooShortError(
            f"chromosome spans {h2 - h1 + 1} rows, at least {config.MIN_FOREGROUND_ROWS} needed"
        )

    width = img.shape[1]
    row_masks = mask[occupied]
    lefts = np.argmax(row_masks, axis=1).astype(np.float64)
    rights = (width - 1 - np.argmax(row_masks[:, ::-1], axis=1)).astype(np.float64)

    rows = np.arange(h1, h2 + 1)
    if occupied.size != rows.size:
        # Rows without foreground inside [h1, h2] are bridged linearly
        lefts = np.interp(rows, occupied, lefts)
        rights = np.interp(rows, occupied, rights)
    centers = (lefts + rights) / 2.0
    return Axis(rows, centers, lefts, rights, h1, h2)


def smooth_axis(axis, window=config.SMOOTH_WINDOW):
    """Centered moving average; the window shrinks near both ends"""
    if window < 3 or window % 2 == 0:
        raise InvalidArgumentError(f"smoothing window must be odd and >= 3, got {window}")
    if len(axis) == 0:
        raise InvalidArgumentError("cannot smooth an empty axis")

    values = np.asarray(axis.centers, dtype=np.float64)
    n = values.size
    half = window // 2
    idx = np.arange(n)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half + 1, n)
    csum = np.concatenate([[0.0], np.cumsum(values)])
    return axis.with_centers((csum[hi] - csum[lo]) / (hi - lo))


def make_control_points(axis, parts=config.AXIS_PARTS):
    """Equal division of [h1, h2] into parts; the outermost boundaries are dropped"""
    span = axis.h2 - axis.h1
    if span < parts:
        raise AxisTooShortError(f"axis span {span} is shorter than {parts} parts")
    ys = axis.h1 + np.arange(parts + 1) * span / parts
    xs = np.interp(ys, axis.rows, axis.centers)
    points = np.column_stack([ys, xs])[1:-1]
    return ControlPoints(points)


def _canvas_shape(canvas):
    if isinstance(canvas, (tuple, list)):
        return int(canvas[0]), int(canvas[1])
    return int(canvas), int(canvas)


def draw_capsule(target, p0, p1, radius, value):
    """Fill every pixel within radius of segment p0-p1 (in place)"""
    height, width = target.shape
    (y0, x0), (y1, x1) = p0, p1
    top = max(int(np.floor(min(y0, y1) - radius)), 0)
    bottom = min(int(np.ceil(max(y0, y1) + radius)), height - 1)
    left = max(int(np.floor(min(x0, x1) - radius)), 0)
    right = min(int(np.ceil(max(x0, x1) + radius)), width - 1)
    if top > bottom or left > right:
        return target

    yy, xx = np.mgrid[top : bottom + 1, left : right + 1].astype(np.float64)
    dy, dx = y1 - y0, x1 - x0
    seg_len2 = dy * dy + dx * dx
    if seg_len2 == 0:
        t = np.zeros_like(yy)
    else:
        t = np.clip(((yy - y0) * dy + (xx - x0) * dx) / seg_len2, 0.0, 1.0)
    dist2 = (yy - (y0 + t * dy)) ** 2 + (xx - (x0 + t * dx)) ** 2
    region = target[top : bottom + 1, left : right + 1]
    region[dist2 <= radius * radius + 1e-9] = value
    return target


def _rasterize_points(points, shape, stick_width):
    radius = (stick_width - 1) / 2.0
    img = np.zeros(shape, dtype=np.float32)
    # Ascending k: later sticks overwrite shared joint pixels
    for k, value in enumerate(stick_values(len(points) - 1)):
        draw_capsule(img, points[k], points[k + 1], radius, value)
    return img


def rasterize_backbone(cp, canvas, stick_width=config.STICK_WIDTH):
    """9-stick figure over the original pose"""
    height, width = _canvas_shape(canvas)
    pts = np.asarray(cp.points)
    inside = (pts[:, 0] >= 0) & (pts[:, 0] <= height - 1) & (pts[:, 1] >= 0) & (pts[:, 1] <= width - 1)
    if not inside.all():
        raise OutOfCanvasError(f"control point outside the {width}x{height} canvas")
    return _rasterize_points(pts, (height, width), stick_width)


def vertical_points(cp, canvas, stick_width=config.STICK_WIDTH):
    """Control points re-laid on the canvas center column with the same stick lengths"""
    height, width = _canvas_shape(canvas)
    lengths = cp.stick_lengths
    total = float(lengths.sum())
    if total + stick_width > height:
        raise OutOfCanvasError(
            f"vertical backbone of length {total:.1f} (+{stick_width} caps) exceeds canvas height {height}"
        )
    top = (height - total) / 2.0
    ys = top + np.concatenate([[0.0], np.cumsum(lengths)])
    xs = np.full_like(ys, float(width // 2))
    return np.column_stack([ys, xs])


def make_vertical_backbone(cp, canvas, stick_width=config.STICK_WIDTH):
    """Straightened stick figure, vertically centered on the canvas"""
    height, width = _canvas_shape(canvas)
    return _rasterize_points(vertical_points(cp, canvas, stick_width), (height, width), stick_width)


def extract_backbone(img, stick_width=config.STICK_WIDTH, window=config.SMOOTH_WINDOW):
    """Run the whole extraction: returns (ControlPoints, BackbonePair)"""
    img = check_gray_image(img)
    axis = smooth_axis(extract_central_axis(img), window)
    cp = make_control_points(axis)
    curved = rasterize_backbone(cp, img.shape, stick_width)
    vertical = make_vertical_backbone(cp, img.shape, stick_width)
    logger.debug("Backbone rows %d..%d, total stick length %.1f", axis.h1, axis.h2, cp.stick_lengths.sum())
    return cp, BackbonePair(curved, vertical, cp.stick_lengths)


def save_control_points(cp, path):
    Path(path).write_text(cp.to_text(), encoding="utf-8")


def load_control_points(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise DataError(f"cannot read control points {path}: {e}") from e
    return ControlPoints.from_text(text)
