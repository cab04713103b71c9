#!/usr/bin/env python3
"""
Image core for the chromosome straightening toolkit

Grayscale images are 2-D float32 numpy arrays with values in [0, 1]
(row-major, shape (height, width)). 8-bit values only exist at file
boundaries. Model-range images hold the same pixels normalized to [-1, 1].
"""

import logging
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from straightkit.utils import config
from straightkit.utils.errors import CanvasError, ImageIOError, InvalidArgumentError

logger = logging.getLogger(__name__)

GrayImage = np.ndarray
ModelImage = np.ndarray

SUPPORTED_SUFFIXES = (".png", ".pgm")


def check_gray_image(img, name="image"):
    """Validate and return img as a float32 GrayImage"""
    arr = np.asarray(img, dtype=np.float32)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidArgumentError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise InvalidArgumentError(f"{name} values must lie in [0, 1]")
    return arr


def _pil_to_unit_array(pil_img):
    """Scale a decoded PIL image to [0,1], averaging channels if needed"""
    mode = pil_img.mode
    if mode in ("I;16", "I;16B", "I;16L"):
        return np.asarray(pil_img, dtype=np.float64) / 65535.0
    if mode == "I":
        # PNG and PGM decode 16-bit samples into 32-bit "I" storage
        data = np.asarray(pil_img, dtype=np.float64)
        if data.size and (data.min() < 0 or data.max() > 65535):
            raise ImageIOError("only 8-bit and 16-bit integer images are supported")
        return data / 65535.0
    if mode == "F":
        return np.clip(np.asarray(pil_img, dtype=np.float64), 0.0, 1.0)
    if mode in ("1", "P", "CMYK", "YCbCr", "HSV"):
        pil_img = pil_img.convert("RGB" if mode != "1" else "L")
        mode = pil_img.mode

    data = np.asarray(pil_img, dtype=np.float64) / 255.0
    if data.ndim == 3:
        # Drop alpha (LA / RGBA), then collapse the colour channels
        channels = data.shape[2]
        if channels in (2, 4):
            data = data[..., : channels - 1]
        data = data.mean(axis=2)
    return data


def center_on_canvas(img, size):
    """Center img on a size x size all-zero background (floor offsets)"""
    img = check_gray_image(img)
    height, width = img.shape
    if height > size or width > size:
        raise CanvasError(f"image {width}x{height} is larger than the {size}x{size} canvas")
    top = (size - height) // 2
    left = (size - width) // 2
    canvas = np.zeros((size, size), dtype=np.float32)
    canvas[top : top + height, left : left + width] = img
    return canvas


def load_image(path, invert=False, canvas=None):
    """
    Load a grayscale raster as a GrayImage.

    Values are scaled to [0,1]; invert maps v -> 1 - v; canvas=S centers the
    result on an S x S black background.
    """
    path = Path(path)
    try:
        with Image.open(path) as pil_img:
            pil_img.load()
            data = _pil_to_unit_array(pil_img)
    except (OSError, UnidentifiedImageError) as e:
        raise ImageIOError(f"cannot read image {path}: {e}") from e

    img = np.clip(data, 0.0, 1.0).astype(np.float32)
    if invert:
        img = (1.0 - img).astype(np.float32)
    if canvas is not None:
        img = center_on_canvas(img, canvas)
    logger.debug("Loaded %s (%dx%d)", path, img.shape[1], img.shape[0])
    return img


def to_uint8(img):
    return np.round(check_gray_image(img) * 255.0).astype(np.uint8)


def save_image(img, path):
    """Write img as a lossless 8-bit single-channel PNG or binary PGM"""
    path = Path(path)
    if path.suffix.lower() not in SUPPORTED_SUFFIXES:
        raise ImageIOError(f"unsupported image format '{path.suffix}' (use {', '.join(SUPPORTED_SUFFIXES)})")
    data = to_uint8(img)
    fmt = "PPM" if path.suffix.lower() == ".pgm" else "PNG"
    try:
        Image.fromarray(data).save(path, format=fmt)
    except (OSError, ValueError) as e:
        raise ImageIOError(f"cannot write image {path}: {e}") from e
    logger.debug("Saved %s", path)
    return path


def to_model_range(img):
    """(v - mean) / std with the default normalization, clamped to [-1, 1]"""
    arr = np.asarray(img, dtype=np.float32)
    return np.clip((arr - config.NORM_MEAN) / config.NORM_STD, -1.0, 1.0).astype(np.float32)


def from_model_range(model_img):
    """Inverse of to_model_range, clamped to [0, 1]"""
    arr = np.asarray(model_img, dtype=np.float32)
    return np.clip(arr * config.NORM_STD + config.NORM_MEAN, 0.0, 1.0).astype(np.float32)


def crop_to_content(img, threshold=0.0):
    """Row and column slices of the bounding box of pixels > threshold"""
    mask = np.asarray(img) > threshold
    if not mask.any():
        return None
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    return slice(rows[0], rows[-1] + 1), slice(cols[0], cols[-1] + 1)
