#!/usr/bin/env python3
"""
Comparison of straightening methods

A method is scored per case by the Pearson correlation of its band profile
with the ground-truth straight chromosome's profile, the mean absolute
pixel difference on the foreground overlap and the foreground mass ratio.
"""

import csv
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
from scipy import ndimage

from straightkit.processing.backbone import extract_central_axis, smooth_axis
from straightkit.processing.imgcore import check_gray_image, load_image
from straightkit.synth.synthgen import BandProfile
from straightkit.utils import config
from straightkit.utils.errors import DataError, InvalidArgumentError, NoForegroundError

logger = logging.getLogger(__name__)

METRICS = ("correlation", "mean_abs_diff", "mass_ratio")


def band_profile(img, samples=config.PROFILE_SAMPLES, window=config.SMOOTH_WINDOW):
    """
    Longitudinal intensity signature along the smoothed central axis.

    At every axis row the perpendicular cross-section (half the local width
    to each side) is sampled bilinearly and its foreground samples are
    averaged. The result is resampled to `samples`.
    """
    img = check_gray_image(img)
    axis = smooth_axis(extract_central_axis(img), window)
    points = axis.points
    tangent = np.gradient(points, axis=0)
    tangent /= np.maximum(np.linalg.norm(tangent, axis=1, keepdims=True), 1e-12)
    normal = np.column_stack([-tangent[:, 1], tangent[:, 0]])

    half = (axis.rights - axis.lefts) / 2.0
    reach = int(np.ceil(half.max()))
    offsets = np.arange(-reach, reach + 1, dtype=np.float64)
    ys = points[:, 0, None] + offsets[None, :] * normal[:, 0, None]
    xs = points[:, 1, None] + offsets[None, :] * normal[:, 1, None]
    section = ndimage.map_coordinates(img, [ys.ravel(), xs.ravel()], order=1, mode="constant", cval=0.0)
    section = section.reshape(ys.shape)
    section[np.abs(offsets)[None, :] > half[:, None] + 0.5] = 0.0

    foreground = section > config.FOREGROUND_THRESHOLD
    counts = foreground.sum(axis=1)
    values = np.where(counts > 0, (section * foreground).sum(axis=1) / np.maximum(counts, 1), 0.0)

    src = np.linspace(0.0, 1.0, values.size)
    resampled = np.interp(np.linspace(0.0, 1.0, samples), src, values)
    return BandProfile(np.clip(resampled, 0.0, 1.0))


def _samples(profile):
    return np.asarray(profile.samples if isinstance(profile, BandProfile) else profile, dtype=np.float64)


def profile_correlation(a, b):
    """Pearson correlation; 0 when either profile is constant"""
    a, b = _samples(a), _samples(b)
    if a.shape != b.shape:
        raise InvalidArgumentError(f"profiles must have equal length, got {a.size} and {b.size}")
    da, db = a - a.mean(), b - b.mean()
    denom = np.sqrt(np.dot(da, da) * np.dot(db, db))
    if denom == 0:
        return 0.0
    return float(np.clip(np.dot(da, db) / denom, -1.0, 1.0))


@dataclass
class EvalCase:
    name: str
    curved: np.ndarray
    truth: np.ndarray
    outputs: dict = field(default_factory=dict)  # method name -> straightened image


@dataclass(frozen=True)
class MethodRecord:
    case: str
    method: str
    correlation: float
    mean_abs_diff: float
    mass_ratio: float


@dataclass
class MetricsReport:
    records: list

    @property
    def methods(self):
        return list(dict.fromkeys(r.method for r in self.records))

    @property
    def aggregates(self):
        """method -> {metric: (mean, std)} with population std"""
        result = {}
        for method in self.methods:
            rows = [r for r in self.records if r.method == method]
            result[method] = {
                metric: (
                    float(np.mean([getattr(r, metric) for r in rows])),
                    float(np.std([getattr(r, metric) for r in rows])),
                )
                for metric in METRICS
            }
            result[method]["n"] = len(rows)
        return result

    def ranked(self):
        aggregates = self.aggregates
        return sorted(aggregates.items(), key=lambda item: -item[1]["correlation"][0])

    def to_table(self):
        header = f"{'rank':<5}{'method':<16}{'n':>4}  {'correlation':>17}  {'mean |diff|':>17}  {'mass ratio':>17}"
        lines = [header, "-" * len(header)]
        for rank, (method, agg) in enumerate(self.ranked(), start=1):
            cells = "  ".join(f"{agg[m][0]:>8.4f} ± {agg[m][1]:<6.4f}" for m in METRICS)
            lines.append(f"{rank:<5}{method:<16}{agg['n']:>4}  {cells}")
        return "\n".join(lines)

    def to_csv(self, path=None):
        """Per-case records as comma-separated values; written to path if given"""
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["case", "method", *METRICS])
        for r in self.records:
            writer.writerow([r.case, r.method, *(f"{getattr(r, m):.6f}" for m in METRICS)])
        text = buffer.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


def clean_background(img, threshold=config.THIN_THRESHOLD):
    """Zero pixels at or below threshold; generated backgrounds are near zero rather than exactly zero"""
    return np.where(img > threshold, img, 0.0).astype(np.float32)


def _mean_abs_diff(truth, output):
    overlap = (truth > 0) & (output > 0)
    if not overlap.any():
        overlap = (truth > 0) | (output > 0)
    if not overlap.any():
        return 0.0
    return float(np.abs(truth[overlap].astype(np.float64) - output[overlap]).mean())


def _mass_ratio(truth, output):
    """Output mass over truth mass; > 0 except for a blank output, which scores 0"""
    truth_mass = float(truth.astype(np.float64).sum())
    if truth_mass <= 0.0:
        raise NoForegroundError("ground truth has no foreground")
    output_mass = float(output.astype(np.float64).sum())
    if output_mass <= 0.0:
        return 0.0
    return output_mass / truth_mass


def score_method(case_name, method, truth, truth_profile, output):
    output = clean_background(check_gray_image(output, f"{method} output"))
    if output.shape != truth.shape:
        raise InvalidArgumentError(f"{case_name}/{method}: output {output.shape} differs from truth {truth.shape}")
    try:
        correlation = profile_correlation(truth_profile, band_profile(output, truth_profile.length))
    except DataError as e:
        logger.warning("⚠️ %s/%s: no band profile (%s); correlation set to 0", case_name, method, e)
        correlation = 0.0
    return MethodRecord(case_name, method, correlation, _mean_abs_diff(truth, output), _mass_ratio(truth, output))


def evaluate_methods(cases):
    """Score every method output of every case against its ground truth"""
    cases = list(cases)
    if not cases:
        raise InvalidArgumentError("evaluate_methods needs at least one case")
    records = []
    for case in cases:
        truth = clean_background(check_gray_image(case.truth, f"{case.name} truth"))
        truth_profile = band_profile(truth)
        for method, output in case.outputs.items():
            records.append(score_method(case.name, method, truth, truth_profile, output))
    report = MetricsReport(records)
    logger.info("📊 Evaluated %d case(s), %d method(s)", len(cases), len(report.methods))
    return report


def load_cases(case_dir, truth_name="straight.png", curved_name="bent.png"):
    """
    Cases from a directory of case folders.

    Each folder holds the ground truth, the curved input and one PNG per
    method, named after the method (e.g. pipeline.png, baseline.png).
    """
    case_dir = Path(case_dir)
    try:
        folders = sorted(p for p in case_dir.iterdir() if p.is_dir() and (p / truth_name).exists())
    except OSError as e:
        raise DataError(f"cannot read case directory {case_dir}: {e}") from e
    if (case_dir / truth_name).exists():
        folders.insert(0, case_dir)
    cases = []
    for folder in folders:
        outputs = {
            p.stem: load_image(p)
            for p in sorted(folder.glob("*.png"))
            if p.name not in (truth_name, curved_name) and not p.stem.endswith("_backbone")
        }
        curved = load_image(folder / curved_name) if (folder / curved_name).exists() else None
        cases.append(EvalCase(folder.name, curved, load_image(folder / truth_name), outputs))
    if not cases:
        raise DataError(f"no case folders with {truth_name} under {case_dir}")
    return cases


def save_profile_figure(profiles, path, title=None):
    """Plot named band profiles (the first is drawn as the reference)"""
    fig, ax = plt.subplots(figsize=(7, 3.5))
    for i, (name, profile) in enumerate(profiles.items()):
        samples = _samples(profile)
        style = dict(color="black", linewidth=2.0) if i == 0 else dict(linewidth=1.2)
        ax.plot(np.linspace(0.0, 1.0, samples.size), samples, label=name, **style)
    ax.set_xlabel("position along axis")
    ax.set_ylabel("intensity")
    ax.set_ylim(0.0, 1.0)
    if title:
        ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    logger.info("📁 Profile figure saved: %s", path)
    return Path(path)
