"""
Straightening and synthesis with a trained generator
"""

import logging

import numpy as np
import torch

from straightkit.processing.backbone import ControlPoints, rasterize_backbone, vertical_points
from straightkit.processing.imgcore import check_gray_image, from_model_range, to_model_range
from straightkit.translator.networks import generator_forward
from straightkit.utils import config
from straightkit.utils.errors import InvalidArgumentError, ResolutionMismatchError

logger = logging.getLogger(__name__)


def _run_generator(generator, images):
    batch = torch.from_numpy(np.stack([to_model_range(img) for img in images])).unsqueeze(1)
    with torch.no_grad():
        out = generator_forward(generator, batch, training=False)
    return [from_model_range(o[0].numpy()) for o in out]


def _check_resolution(checkpoint, img):
    if tuple(img.shape) != tuple(checkpoint.image_size):
        raise ResolutionMismatchError(
            f"backbone is {img.shape[1]}x{img.shape[0]} but the checkpoint was trained on "
            f"{checkpoint.image_size[1]}x{checkpoint.image_size[0]}"
        )


def straighten(checkpoint, vertical_backbone):
    """Straightened chromosome predicted from the vertical backbone"""
    img = check_gray_image(vertical_backbone, "backbone")
    _check_resolution(checkpoint, img)
    return _run_generator(checkpoint.build_generator(), [img])[0]


def synthesize(checkpoint, backbones):
    """Generate one chromosome per backbone figure, any curvature"""
    images = [check_gray_image(b, "backbone") for b in backbones]
    if not images:
        return []
    for img in images:
        _check_resolution(checkpoint, img)
    generator = checkpoint.build_generator()
    logger.info("🔄 Synthesizing %d chromosome(s)", len(images))
    return _run_generator(generator, images)


def bend_points(points, angle, pivot_index=None):
    """
    Rotate every control point after pivot_index about that joint.

    Positive angles turn the lower arm counter-clockwise on screen.
    """
    points = np.asarray(points, dtype=np.float64)
    if pivot_index is None:
        pivot_index = len(points) // 2
    if not 0 < pivot_index < len(points) - 1:
        raise InvalidArgumentError(f"pivot must be an interior joint, got {pivot_index}")
    theta = np.radians(angle)
    cos, sin = np.cos(theta), np.sin(theta)
    pivot = points[pivot_index]
    bent = points.copy()
    dy, dx = (points[pivot_index + 1 :] - pivot).T
    bent[pivot_index + 1 :, 0] = pivot[0] + dy * cos - dx * sin
    bent[pivot_index + 1 :, 1] = pivot[1] + dx * cos + dy * sin
    return bent


def make_curvature_variants(control_points, canvas, angles, stick_width=config.STICK_WIDTH):
    """Backbone figures with the same stick lengths bent by each angle at the middle joint"""
    base = vertical_points(control_points, canvas, stick_width)
    return [
        rasterize_backbone(ControlPoints(bend_points(base, angle)), canvas, stick_width)
        for angle in angles
    ]
