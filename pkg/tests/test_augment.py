import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy import ndimage

from straightkit.processing.augment import (
    DeformField,
    augment_item,
    build_augmented_dataset,
    elastic_deform_pair,
    load_dataset,
    rotate_image,
    rotate_pair,
    sample_deform_field,
    save_dataset,
    split_indices,
    transform_image,
    warp_image,
)
from straightkit.processing.backbone import extract_backbone, stick_values
from straightkit.processing.imgcore import save_image
from straightkit.utils.errors import DatasetError, InvalidArgumentError

SIGMA_64 = 4.5  # 18 px at 256 scaled to 64


@pytest.fixture
def source_pair(small_chromosome):
    _, pair = extract_backbone(small_chromosome, stick_width=9)
    return small_chromosome, pair.curved


def _build(source_pair, k=20, seed=0, **kwargs):
    y, x = source_pair
    kwargs.setdefault("sigma", SIGMA_64)
    return build_augmented_dataset(y, x, k=k, seed=seed, **kwargs)


def test_regeneration_is_hash_identical(source_pair):
    """Test a fixed seed regenerates the same dataset"""
    first = _build(source_pair, seed=7)
    second = _build(source_pair, seed=7)
    assert first.content_hash() == second.content_hash()
    assert first.train_indices == second.train_indices
    assert _build(source_pair, seed=8).content_hash() != first.content_hash()


def test_thread_count_does_not_change_output(source_pair):
    assert _build(source_pair, threads=1).content_hash() == _build(source_pair, threads=3).content_hash()


def test_item_depends_only_on_its_index(source_pair):
    y, x = source_pair
    dataset = _build(source_pair, k=12, seed=3)
    item = augment_item(y, x, seed=3, index=9, sigma=SIGMA_64)
    assert_array_equal(item.y, dataset.pairs[9].y)
    assert_array_equal(item.x, dataset.pairs[9].x)


def test_split_is_nine_to_one_and_disjoint():
    train, val = split_indices(50, seed=1)
    assert len(train) == 45 and len(val) == 5
    assert sorted(train + val) == list(range(50))
    assert split_indices(50, seed=1) == (train, val)


def test_backbone_labels_survive_augmentation(source_pair):
    """Test nearest-neighbour resampling keeps only stick values"""
    allowed = set(stick_values()) | {np.float32(0.0)}
    for pair in _build(source_pair, k=10).pairs:
        assert set(np.unique(pair.x)) <= allowed


def test_joint_transform_moves_markers_together():
    """Test a marker lands within 1 px in both images across 50 seeds"""
    marker = np.zeros((64, 64), dtype=np.float32)
    marker[28:33, 32:37] = 1.0
    rows, cols = np.mgrid[0:64, 0:64]
    for seed in range(50):
        transform = augment_item(marker, marker, seed, 0, sigma=SIGMA_64).transform
        smooth = transform_image(marker, transform)
        labels = transform_image(marker, transform, nearest=True)
        assert labels.sum() > 0
        c_smooth = np.array([(rows * smooth).sum(), (cols * smooth).sum()]) / smooth.sum()
        c_labels = np.array([(rows * labels).sum(), (cols * labels).sum()]) / labels.sum()
        assert np.hypot(*(c_smooth - c_labels)) <= 1.0


def test_rotation_direction_and_center():
    """Test +45 degrees turns a horizontal line counter-clockwise about the center"""
    img = np.zeros((65, 65), dtype=np.float32)
    img[32, 8:57] = 1.0
    rotated = rotate_image(img, 45.0)
    r, c = np.nonzero(rotated > 0.5)
    assert len(r) > 20
    assert np.all(np.abs((c - 32) + (r - 32)) <= 1.5)
    assert_array_equal(rotate_image(img, 0.0), img)


def test_rotate_pair_uses_nearest_for_backbone(source_pair):
    y, x = source_pair
    ry, rx = rotate_pair(y, x, 30.0)
    assert set(np.unique(rx)) <= set(stick_values()) | {np.float32(0.0)}
    assert ry.shape == y.shape


def test_zero_sigma_and_angle_is_identity(source_pair):
    y, x = source_pair
    dataset = _build(source_pair, k=10, sigma=0.0, max_angle=0.0)
    for pair in dataset.pairs:
        assert_allclose(pair.y, y, atol=1e-6)
        assert_array_equal(pair.x, x)


def test_zero_sigma_is_rotation_only(source_pair):
    y, x = source_pair
    dataset = _build(source_pair, k=10, sigma=0.0)
    pair = dataset.pairs[4]
    assert_allclose(pair.y, rotate_image(y, pair.transform.angle), atol=1e-6)


def test_elastic_deformation_is_smooth_and_seeded(source_pair):
    y, x = source_pair
    a = elastic_deform_pair(y, x, points=3, sigma=SIGMA_64, seed=5)
    b = elastic_deform_pair(y, x, points=3, sigma=SIGMA_64, seed=5)
    assert_array_equal(a[0], b[0])
    field = sample_deform_field(np.random.default_rng(0), 3, SIGMA_64).dense((64, 64))
    assert field.shape == (2, 64, 64)
    assert np.abs(np.diff(field, axis=2)).max() < 1.0


def test_constant_field_is_a_translation():
    """Test a (0, 5) grid moves content 5 px left, as backward mapping implies"""
    img = np.zeros((32, 32), dtype=np.float32)
    img[4:28, 15] = 1.0
    control = np.zeros((2, 3, 3))
    control[1] = 5.0
    field = DeformField(control, sigma=0.0)
    assert_allclose(field.dense(img.shape)[1], 5.0, atol=1e-9)
    for order in (0, 1):
        warped = warp_image(img, field, order)
        assert_allclose(warped[:, 10], img[:, 15], atol=1e-6)
        assert warped.sum() == pytest.approx(img.sum(), abs=1e-4)


def test_dense_field_matches_spline_zoom():
    """Test the warp against a field upsampled independently with ndimage.zoom"""
    size = 128
    rr, cc = np.mgrid[0:size, 0:size]
    checker = np.where((rr // 8 + cc // 8) % 2 == 0, 0.9, 0.2).astype(np.float32)
    warped, _ = elastic_deform_pair(checker, np.zeros_like(checker), points=3, sigma=18.0, seed=3)

    control = sample_deform_field(np.random.default_rng(3), 3, 18.0).control
    zoomed = np.stack(
        [ndimage.zoom(control[c], size / 3, order=3, mode="mirror", grid_mode=False) for c in range(2)]
    )
    assert zoomed.shape == (2, size, size)
    assert_allclose(DeformField(control, 18.0).dense((size, size)), zoomed, atol=1e-6)

    expected = ndimage.map_coordinates(checker, [rr + zoomed[0], cc + zoomed[1]], order=1, mode="constant", cval=0.0)
    assert_allclose(warped, np.clip(expected, 0.0, 1.0), atol=1e-5)


def test_different_seeds_give_different_datasets(source_pair):
    first = _build(source_pair, k=10, seed=1)
    second = _build(source_pair, k=10, seed=2)
    assert first.content_hash() != second.content_hash()
    assert any(not np.array_equal(a.y, b.y) for a, b in zip(first.pairs, second.pairs))


def test_negative_seed_is_rejected(source_pair):
    with pytest.raises(InvalidArgumentError):
        _build(source_pair, k=10, seed=-1)


def test_argument_errors(source_pair):
    y, x = source_pair
    with pytest.raises(InvalidArgumentError):
        _build(source_pair, k=9)
    with pytest.raises(InvalidArgumentError):
        _build(source_pair, points=1)
    with pytest.raises(InvalidArgumentError):
        build_augmented_dataset(y, x[:32], k=10)


def test_dataset_directory_roundtrip(tmp_path, source_pair):
    dataset = _build(source_pair, k=10, seed=2)
    save_dataset(dataset, tmp_path / "ds")
    loaded = load_dataset(tmp_path / "ds")
    assert loaded.content_hash() == dataset.content_hash()
    assert (loaded.train_indices, loaded.val_indices) == (dataset.train_indices, dataset.val_indices)
    assert loaded.sigma == SIGMA_64
    manifest = (tmp_path / "ds" / "manifest.txt").read_text()
    assert "order=rotate_then_deform" in manifest


def test_tampered_dataset_is_rejected(tmp_path, source_pair):
    save_dataset(_build(source_pair, k=10), tmp_path / "ds")
    save_image(np.zeros((64, 64), dtype=np.float32), tmp_path / "ds" / "pairs" / "0003_y.png")
    with pytest.raises(DatasetError):
        load_dataset(tmp_path / "ds")
    with pytest.raises(DatasetError):
        load_dataset(tmp_path / "missing")
