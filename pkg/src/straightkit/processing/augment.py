#!/usr/bin/env python3
"""
Single-image training set construction

Every augmented pair is produced by rotating and then elastically
deforming the source (chromosome, curved backbone) pair with one shared
geometric transform. The chromosome is resampled bilinearly, the backbone
with nearest neighbour so its stick labels survive untouched.
"""

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np
from scipy import ndimage

from straightkit.processing.imgcore import check_gray_image, load_image, save_image, to_uint8
from straightkit.utils import config
from straightkit.utils.errors import DatasetError, InvalidArgumentError
from straightkit.utils.keyvalue import read_key_values, write_key_values
from straightkit.utils.logs import thread_cap
from straightkit.utils.seeds import stream_rng

logger = logging.getLogger(__name__)

OPERATION_ORDER = "rotate_then_deform"

# SeedSequence spawn-key namespaces
_ITEM_STREAM = 0
_SPLIT_STREAM = 1


@dataclass(frozen=True)
class DeformField:
    """Coarse grid of (dy, dx) displacements, shape (2, points, points)"""

    control: np.ndarray
    sigma: float

    @property
    def points(self):
        return self.control.shape[1]

    def dense(self, shape):
        """Cubic-spline interpolation of the grid over an image of the given shape"""
        height, width = shape
        gy = np.arange(height, dtype=np.float64) * (self.points - 1) / max(height - 1, 1)
        gx = np.arange(width, dtype=np.float64) * (self.points - 1) / max(width - 1, 1)
        coords = np.meshgrid(gy, gx, indexing="ij")
        return np.stack(
            [ndimage.map_coordinates(self.control[c], coords, order=3, mode="mirror") for c in range(2)]
        )


@dataclass(frozen=True)
class PairTransform:
    angle: float
    field: DeformField = None
    index: int = 0
    seed: int = 0


@dataclass(frozen=True)
class TrainingPair:
    x: np.ndarray  # backbone stick figure (condition)
    y: np.ndarray  # chromosome (target)
    transform: PairTransform


@dataclass
class AugmentedDataset:
    pairs: list
    train_indices: list
    val_indices: list
    seed: int
    points: int = config.DEFORM_POINTS
    sigma: float = config.DEFORM_SIGMA
    max_angle: float = config.MAX_ROTATION

    def __len__(self):
        return len(self.pairs)

    @property
    def k(self):
        return len(self.pairs)

    @property
    def image_shape(self):
        return self.pairs[0].x.shape

    def arrays(self, indices):
        """Stacked (x, y) float32 arrays of shape (n, H, W) for the given indices"""
        xs = np.stack([self.pairs[i].x for i in indices]).astype(np.float32)
        ys = np.stack([self.pairs[i].y for i in indices]).astype(np.float32)
        return xs, ys

    def content_hash(self):
        return dataset_hash(self.pairs)


def _check_pair(y, x):
    y = check_gray_image(y, "chromosome")
    x = check_gray_image(x, "backbone")
    if y.shape != x.shape:
        raise InvalidArgumentError(f"chromosome {y.shape} and backbone {x.shape} differ in size")
    return y, x


def _item_rng(seed, index):
    return stream_rng(seed, _ITEM_STREAM, index)


def sample_deform_field(rng, points=config.DEFORM_POINTS, sigma=config.DEFORM_SIGMA):
    if points < 2:
        raise InvalidArgumentError(f"deformation grid needs at least 2 points per axis, got {points}")
    control = rng.normal(0.0, sigma, size=(2, points, points)) if sigma > 0 else np.zeros((2, points, points))
    return DeformField(control, float(sigma))


def warp_image(img, field, order):
    """Backward warp: output pixel p samples img at p + field(p); outside reads 0"""
    height, width = img.shape
    dense = field.dense(img.shape)
    rr, cc = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    coords = [rr + dense[0], cc + dense[1]]
    warped = ndimage.map_coordinates(img, coords, order=order, mode="constant", cval=0.0)
    return np.clip(warped, 0.0, 1.0).astype(np.float32)


def warp_pair(y, x, field):
    y, x = _check_pair(y, x)
    return warp_image(y, field, order=1), warp_image(x, field, order=0)


def elastic_deform_pair(y, x, points=config.DEFORM_POINTS, sigma=config.DEFORM_SIGMA, seed=0):
    """Deform chromosome y and backbone x with one random field drawn from seed"""
    y, x = _check_pair(y, x)
    field = sample_deform_field(np.random.default_rng(seed), points, sigma)
    return warp_pair(y, x, field)


def rotate_image(img, angle, nearest=False):
    """Rotate about the canvas center (OpenCV convention: positive is counter-clockwise)"""
    if angle == 0:
        return img.copy()
    height, width = img.shape
    matrix = cv2.getRotationMatrix2D(((width - 1) / 2.0, (height - 1) / 2.0), float(angle), 1.0)
    flags = cv2.INTER_NEAREST if nearest else cv2.INTER_LINEAR
    rotated = cv2.warpAffine(
        img.astype(np.float32),
        matrix,
        (width, height),
        flags=flags,
        borderMode=cv2.BORDER_CONSTANT,
        borderValue=0,
    )
    return np.clip(rotated, 0.0, 1.0).astype(np.float32)


def rotate_pair(y, x, angle):
    y, x = _check_pair(y, x)
    return rotate_image(y, angle), rotate_image(x, angle, nearest=True)


def transform_image(img, transform, nearest=False):
    """Apply a recorded pair transform (rotation, then deformation) to any image"""
    out = rotate_image(np.asarray(img, dtype=np.float32), transform.angle, nearest=nearest)
    if transform.field is not None:
        out = warp_image(out, transform.field, order=0 if nearest else 1)
    return out


def augment_item(y, x, seed, index, points=config.DEFORM_POINTS, sigma=config.DEFORM_SIGMA,
                 max_angle=config.MAX_ROTATION):
    """The index-th augmented pair; depends only on (source, seed, index, params)"""
    rng = _item_rng(seed, index)
    angle = float(rng.uniform(-max_angle, max_angle))
    field = sample_deform_field(rng, points, sigma)
    transform = PairTransform(angle=angle, field=field, index=index, seed=seed)
    return TrainingPair(
        x=transform_image(x, transform, nearest=True),
        y=transform_image(y, transform),
        transform=transform,
    )


def split_indices(k, seed, train_fraction=config.TRAIN_FRACTION):
    """Seeded shuffle into disjoint (train, validation) index lists"""
    rng = stream_rng(seed, _SPLIT_STREAM)
    order = rng.permutation(k)
    n_train = int(round(k * train_fraction))
    return sorted(order[:n_train].tolist()), sorted(order[n_train:].tolist())


def build_augmented_dataset(y, x, k=config.AUGMENT_PAIRS, seed=config.DEFAULT_SEED,
                            points=config.DEFORM_POINTS, sigma=config.DEFORM_SIGMA,
                            max_angle=config.MAX_ROTATION, threads=None):
    """K jointly transformed (backbone, chromosome) pairs with a 9:1 split"""
    if k < config.MIN_AUGMENT_PAIRS:
        raise InvalidArgumentError(f"k must be at least {config.MIN_AUGMENT_PAIRS}, got {k}")
    if points < 2:
        raise InvalidArgumentError(f"deformation grid needs at least 2 points per axis, got {points}")
    y, x = _check_pair(y, x)
    threads = threads or thread_cap()

    def make(index):
        return augment_item(y, x, seed, index, points, sigma, max_angle)

    logger.info("🔄 Generating %d augmented pairs (seed=%d, threads=%d)", k, seed, threads)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            pairs = list(pool.map(make, range(k)))
    else:
        pairs = [make(i) for i in range(k)]

    train, val = split_indices(k, seed)
    return AugmentedDataset(pairs, train, val, seed, points, float(sigma), float(max_angle))


def dataset_hash(pairs):
    """SHA-256 over the 8-bit pixel data of every pair, in index order"""
    digest = hashlib.sha256()
    for pair in pairs:
        for img in (pair.x, pair.y):
            digest.update(np.asarray(img.shape, dtype=np.int64).tobytes())
            digest.update(to_uint8(img).tobytes())
    return digest.hexdigest()


def save_dataset(dataset, out_dir, extra=None):
    """Write pairs/{i:04}_x.png, pairs/{i:04}_y.png and the manifest"""
    out_dir = Path(out_dir)
    pairs_dir = out_dir / config.PAIRS_DIR
    pairs_dir.mkdir(parents=True, exist_ok=True)
    for i, pair in enumerate(dataset.pairs):
        save_image(pair.x, pairs_dir / f"{i:04d}_x.png")
        save_image(pair.y, pairs_dir / f"{i:04d}_y.png")

    manifest = {
        "seed": dataset.seed,
        "k": dataset.k,
        "points": dataset.points,
        "sigma": dataset.sigma,
        "max_angle": dataset.max_angle,
        "order": OPERATION_ORDER,
        "angles": [round(p.transform.angle, 6) for p in dataset.pairs],
        "train": dataset.train_indices,
        "validation": dataset.val_indices,
        "hash": dataset.content_hash(),
    }
    if extra:
        manifest.update(extra)
    write_key_values(out_dir / config.MANIFEST_NAME, manifest, header="straightkit augmented dataset")
    logger.info("📁 Saved %d pairs to %s", dataset.k, out_dir)
    return out_dir


def _int_list(text):
    return [int(v) for v in text.split(",") if v.strip()]


def load_dataset(data_dir):
    """Read a dataset directory written by save_dataset and verify its hash"""
    data_dir = Path(data_dir)
    manifest_path = data_dir / config.MANIFEST_NAME
    if not manifest_path.exists():
        raise DatasetError(f"no {config.MANIFEST_NAME} in {data_dir}")
    manifest = read_key_values(manifest_path)
    try:
        k = int(manifest["k"])
        seed = int(manifest["seed"])
        angles = [float(v) for v in manifest.get("angles", "").split(",") if v.strip()] or [0.0] * k
        train = _int_list(manifest["train"])
        val = _int_list(manifest["validation"])
    except (KeyError, ValueError) as e:
        raise DatasetError(f"malformed manifest {manifest_path}: {e}") from e

    pairs_dir = data_dir / config.PAIRS_DIR
    pairs = []
    for i in range(k):
        x = load_image(pairs_dir / f"{i:04d}_x.png")
        y = load_image(pairs_dir / f"{i:04d}_y.png")
        pairs.append(TrainingPair(x=x, y=y, transform=PairTransform(angle=angles[i], index=i, seed=seed)))

    expected = manifest.get("hash")
    if expected and dataset_hash(pairs) != expected:
        raise DatasetError(f"content hash mismatch in {data_dir}")
    return AugmentedDataset(
        pairs,
        train,
        val,
        seed,
        int(manifest.get("points", config.DEFORM_POINTS)),
        float(manifest.get("sigma", config.DEFORM_SIGMA)),
        float(manifest.get("max_angle", config.MAX_ROTATION)),
    )
