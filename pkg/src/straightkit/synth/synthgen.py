#!/usr/bin/env python3
"""
Synthetic banded chromosomes with known ground truth

A straight chromosome is drawn from a longitudinal band profile and a
per-row width profile, then bent along a smooth spine by backward mapping.
The straight image and its profile are the oracle a straightening method
is scored against.
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from straightkit.processing.backbone import extract_central_axis
from straightkit.processing.imgcore import check_gray_image, save_image
from straightkit.utils import config, seeds
from straightkit.utils.errors import InvalidArgumentError, ProfileError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BandProfile:
    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size < config.MIN_FOREGROUND_ROWS:
            raise ProfileError(
                f"band profile needs at least {config.MIN_FOREGROUND_ROWS} samples, got {samples.size}"
            )
        if not np.all(np.isfinite(samples)) or samples.min() < 0.0 or samples.max() > 1.0:
            raise ProfileError("band profile values must lie in [0, 1]")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.size

    @property
    def length(self):
        return self.samples.size

    def resampled(self, n=config.PROFILE_SAMPLES):
        """Linear interpolation onto n evenly spaced positions"""
        src = np.linspace(0.0, 1.0, self.samples.size)
        return BandProfile(np.interp(np.linspace(0.0, 1.0, n), src, self.samples))

    def to_text(self):
        return "".join(f"{v:.6f}\n" for v in self.samples)

    @classmethod
    def from_text(cls, text):
        return cls(np.array([float(line) for line in text.split()], dtype=np.float64))


@dataclass(frozen=True)
class Spine:
    """Arc-length sampled (y, x) curve, one sample per pixel of arc"""

    points: np.ndarray
    arc_length: float

    def __post_init__(self):
        points = np.asarray(self.points, dtype=np.float64)
        if points.ndim != 2 or points.shape[1] != 2 or len(points) < 2:
            raise InvalidArgumentError("spine needs at least two (y, x) samples")
        steps = np.diff(points, axis=0)
        if np.any(steps[:, 0] <= 0):
            raise InvalidArgumentError("spine y must be strictly increasing")
        if np.any(np.abs(steps[:, 1]) > 2):
            raise InvalidArgumentError("spine x jumps by more than 2 px between samples")
        object.__setattr__(self, "points", points)

    @classmethod
    def from_curve(cls, ys, xs):
        """Resample a densely sampled curve at unit arc-length spacing"""
        ys, xs = np.asarray(ys, dtype=np.float64), np.asarray(xs, dtype=np.float64)
        seg = np.hypot(np.diff(ys), np.diff(xs))
        arc = np.concatenate([[0.0], np.cumsum(seg)])
        total = float(arc[-1])
        s = np.linspace(0.0, total, int(np.floor(total)) + 1)
        if s[-1] < total:
            s = np.append(s, total)
        return cls(np.column_stack([np.interp(s, arc, ys), np.interp(s, arc, xs)]), total)

    @property
    def arc_positions(self):
        return np.concatenate([[0.0], np.cumsum(np.hypot(*np.diff(self.points, axis=0).T))])

    def tangents(self):
        t = np.gradient(self.points, axis=0)
        return t / np.linalg.norm(t, axis=1, keepdims=True)


def square_wave_profile(length, band=10, levels=(0.9, 0.3)):
    """Alternating bands of `band` rows starting with levels[0]"""
    idx = (np.arange(length) // band) % len(levels)
    return BandProfile(np.asarray(levels, dtype=np.float64)[idx])


def random_band_profile(length, rng, min_band=4, max_band=12, dark=(0.25, 0.45), light=(0.7, 0.95)):
    """Alternating light/dark bands of random width, lightly blurred"""
    values = np.empty(length, dtype=np.float64)
    pos, light_band = 0, bool(rng.integers(2))
    while pos < length:
        size = int(rng.integers(min_band, max_band + 1))
        lo, hi = light if light_band else dark
        values[pos : pos + size] = rng.uniform(lo, hi)
        pos += size
        light_band = not light_band
    values = ndimage.gaussian_filter1d(values, 1.0, mode="nearest")
    return BandProfile(np.clip(values, 0.0, 1.0))


def default_width_profile(length, centromere_width=config.SYNTH_CENTROMERE_WIDTH,
                          end_width=config.SYNTH_END_WIDTH, centromere=0.4):
    """Cosine taper from centromere_width at the centromere to end_width at both ends"""
    s = np.arange(length, dtype=np.float64)
    c = centromere * (length - 1)
    reach = max(c, length - 1 - c, 1.0)
    bump = 0.5 * (1.0 + np.cos(np.pi * np.abs(s - c) / reach))
    return end_width + (centromere_width - end_width) * bump


def make_straight_chromosome(profile, width_profile, canvas=config.CANVAS_SIZE, edge_ramp=config.SYNTH_EDGE_RAMP):
    """Vertical chromosome centered on a canvas x canvas background"""
    if not isinstance(profile, BandProfile):
        profile = BandProfile(profile)
    length = profile.length
    widths = np.broadcast_to(np.asarray(width_profile, dtype=np.float64), (length,))
    if length + 2 > canvas or widths.max() + 2 * edge_ramp > canvas:
        raise ProfileError(f"chromosome of length {length} does not fit a {canvas}x{canvas} canvas")

    top = (canvas - length) // 2
    center = canvas // 2
    dist = np.abs(np.arange(canvas, dtype=np.float64) - center)
    coverage = np.clip((widths[:, None] / 2.0 + 0.5 - dist[None, :]) / edge_ramp, 0.0, 1.0)

    img = np.zeros((canvas, canvas), dtype=np.float32)
    img[top : top + length] = (profile.samples[:, None] * coverage).astype(np.float32)
    return img


def vertical_spine(arc_length, canvas=config.CANVAS_SIZE, center=None):
    """Straight vertical spine centered on `center` ((row, col), default the canvas center)"""
    cy, cx = center if center is not None else ((canvas - 1) / 2.0, float(canvas // 2))
    n = int(np.ceil(arc_length)) + 1
    ys = cy - arc_length / 2.0 + np.linspace(0.0, arc_length, n)
    return Spine.from_curve(ys, np.full(n, cx))


def bezier_spine(curvature, bends=1, arc_length=100.0, canvas=config.CANVAS_SIZE, direction=1, samples=2000):
    """
    Cubic Bezier spine with one bow (bends=1) or an S-curve (bends=2).

    curvature is the lateral control-point offset relative to the spine's
    height; the height is chosen so the curve has the requested arc length.
    """
    if bends not in (1, 2):
        raise InvalidArgumentError(f"bends must be 1 or 2, got {bends}")
    t = np.linspace(0.0, 1.0, samples)
    offsets = (1.0, 1.0) if bends == 1 else (1.0, -1.0)
    k1, k2 = direction * curvature * offsets[0], direction * curvature * offsets[1]
    # Unit-height curve: y is linear in t, x is the Bernstein blend of (0, k1, k2, 0)
    unit_x = 3 * (1 - t) ** 2 * t * k1 + 3 * (1 - t) * t ** 2 * k2
    unit_arc = float(np.sum(np.hypot(np.diff(t), np.diff(unit_x))))
    height = arc_length / unit_arc

    ys = (canvas - 1) / 2.0 - height / 2.0 + height * t
    xs = canvas // 2 + height * unit_x
    if ys[0] < 0 or ys[-1] > canvas - 1 or xs.min() < 0 or xs.max() > canvas - 1:
        raise ProfileError(f"spine does not fit a {canvas}x{canvas} canvas")
    return Spine.from_curve(ys, xs)


def bend_along_spine(img, spine, reach=None):
    """
    Lay the rows of a straight vertical chromosome across the spine.

    Each output pixel is projected onto its nearest spine sample: the
    tangential offset selects the source row, the normal offset the source
    column. Bilinear resampling, background 0.
    """
    img = check_gray_image(img)
    axis = extract_central_axis(img)
    length = axis.h2 - axis.h1
    if spine.arc_length < length:
        raise InvalidArgumentError(
            f"spine arc length {spine.arc_length:.1f} is shorter than the chromosome ({length} px)"
        )
    src_col = float(np.mean(axis.centers))
    if reach is None:
        reach = float(np.max(axis.rights - axis.lefts)) / 2.0 + 3.0

    height, width = img.shape
    rr, cc = np.mgrid[0:height, 0:width]
    query = np.column_stack([rr.ravel(), cc.ravel()]).astype(np.float64)
    dist, nearest = cKDTree(spine.points).query(query, distance_upper_bound=reach + 2.0)
    valid = np.isfinite(dist)
    nearest = nearest[valid]

    offset = query[valid] - spine.points[nearest]
    tangent = spine.tangents()[nearest]
    normal = np.column_stack([-tangent[:, 1], tangent[:, 0]])
    along = np.einsum("ij,ij->i", offset, tangent)
    across = np.einsum("ij,ij->i", offset, normal)

    start = (spine.arc_length - length) / 2.0
    rows = axis.h1 + spine.arc_positions[nearest] + along - start
    cols = src_col + across

    values = ndimage.map_coordinates(img, [rows, cols], order=1, mode="constant", cval=0.0)
    out = np.zeros(height * width, dtype=np.float32)
    out[valid] = np.clip(values, 0.0, 1.0)
    return out.reshape(height, width)


@dataclass(frozen=True)
class SyntheticCase:
    name: str
    straight: np.ndarray
    bent: np.ndarray
    profile: BandProfile
    spine: Spine
    bends: int
    curvature: float

    def save(self, out_dir):
        """straight.png, bent.png and profile.txt"""
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        save_image(self.straight, out_dir / "straight.png")
        save_image(self.bent, out_dir / "bent.png")
        (out_dir / "profile.txt").write_text(self.profile.to_text(), encoding="utf-8")
        return out_dir


def make_synthetic_case(seed, index=0, canvas=config.CANVAS_SIZE, bends=1, curvature=0.35, length=None):
    """One random banded chromosome and its bent version; depends only on (seed, index, params)"""
    rng = seeds.stream_rng(seed, seeds.SYNTH, index)
    scale = canvas / config.CANVAS_SIZE
    if length is None:
        length = int(round(canvas * 0.45))
    length = max(length, config.MIN_FOREGROUND_ROWS)
    widths = default_width_profile(
        length,
        centromere_width=max(config.SYNTH_CENTROMERE_WIDTH * scale, 7.0),
        end_width=max(config.SYNTH_END_WIDTH * scale, 5.0),
        centromere=float(rng.uniform(0.3, 0.5)),
    )
    profile = random_band_profile(length, rng, min_band=max(2, length // 20), max_band=max(4, length // 8))
    straight = make_straight_chromosome(profile, widths, canvas)
    direction = 1 if rng.integers(2) else -1
    spine = bezier_spine(curvature, bends, arc_length=length + 4.0, canvas=canvas, direction=direction)
    bent = bend_along_spine(straight, spine)
    logger.debug("Synthetic case %d: length %d, %d bend(s), curvature %.2f", index, length, bends, curvature)
    return SyntheticCase(
        name=f"case_{index:03d}",
        straight=straight,
        bent=bent,
        profile=profile,
        spine=spine,
        bends=bends,
        curvature=curvature,
    )
