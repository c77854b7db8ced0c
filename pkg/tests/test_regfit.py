import math
import warnings

import numpy as np
import pytest

from dentreg.camera import CameraParams
from dentreg.errors import DimensionMismatch
from dentreg.mesh import rasterize_silhouette
from dentreg.mvmo import OptimizerConfig
from dentreg.regfit import (EmptyAfterMask, RegionFitness, SegmentationImage, load_segmentation,
                            masked_dice_error, save_segmentation, score_region_comparison)


def counted_dice(a, b, m):
    """Pixel-by-pixel reference count."""
    na = nb = both = 0
    for x, y, z in zip(a.ravel(), b.ravel(), m.ravel()):
        if z:
            continue
        na += bool(x)
        nb += bool(y)
        both += bool(x) and bool(y)
    return 1.0 if na + nb == 0 else 1.0 - 2.0 * both / (na + nb)


def test_matches_pixel_count(rng):
    for _ in range(200):
        shape = tuple(rng.integers(1, 12, 2))
        a, b, m = (rng.random(shape) < p for p in rng.random(3))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", EmptyAfterMask)
            assert masked_dice_error(a, b, m) == counted_dice(a, b, m)


def test_dice_examples():
    a = np.zeros((4, 4), bool)
    a[:2, :2] = True
    none = np.zeros_like(a)
    assert masked_dice_error(a, a, none) == 0.0
    b = np.zeros_like(a)
    b[2:, 2:] = True
    assert masked_dice_error(a, b, none) == 1.0
    c = np.zeros_like(a)
    c[:2, 1:3] = True
    assert masked_dice_error(a, c, none) == 0.5


def test_dice_empty_after_mask_warns():
    a = np.ones((3, 3), bool)
    with pytest.warns(EmptyAfterMask):
        assert masked_dice_error(a, a, a) == 1.0


def test_dice_shape_mismatch():
    with pytest.raises(DimensionMismatch):
        masked_dice_error(np.zeros((2, 2)), np.zeros((2, 3)), np.zeros((2, 2)))


def test_true_camera_fits_own_case(small_cohort):
    case = small_cohort[0]
    fit = RegionFitness(case.segmentation, case.mesh, case.intrinsics)
    assert fit(case.camera) < 0.02


def test_behind_camera_is_infinite(small_cohort):
    case = small_cohort[0]
    fit = RegionFitness(case.segmentation, case.mesh, case.intrinsics)
    assert fit(CameraParams(0, 0, -420, 0, 0, 0, 50)) == math.inf


def test_fitness_matches_numpy_reference(small_cohort, rng):
    case = small_cohort[3]
    fit = RegionFitness(case.segmentation, case.mesh, case.intrinsics)
    seg = case.segmentation
    for _ in range(20):
        c = CameraParams(*(case.camera.to_array() + rng.normal(0, [3, 3, 10, 3, 3, 3, 10])))
        sil = rasterize_silhouette(case.mesh, c, case.intrinsics)
        expected = masked_dice_error(seg.roi, sil, seg.occlusion) if sil.any() else math.inf
        assert fit(c) == expected


def test_mask_over_disagreement_gives_zero(small_cohort):
    case = small_cohort[0]
    ic = case.intrinsics
    sil = rasterize_silhouette(case.mesh, case.camera, ic)
    nudged = CameraParams(*(case.camera.to_array() + [0.3, 0, 0, 0, 0, 0, 0]))
    other = rasterize_silhouette(case.mesh, nudged, ic)
    seg = SegmentationImage(other, sil ^ other)
    assert RegionFitness(seg, case.mesh, ic)(case.camera) == 0.0


def test_fully_occluded_photo_is_unscorable(small_cohort):
    case = small_cohort[0]
    seg = SegmentationImage(case.segmentation.roi, np.ones_like(case.segmentation.roi))
    cell = score_region_comparison(seg, case.mesh, case.intrinsics, OptimizerConfig(generations=2))
    assert cell.unscorable and "UnusableCase" in cell.reason


def test_region_score_is_deterministic(small_cohort):
    case = small_cohort[1]
    cfg = OptimizerConfig(generations=20, seed=11)
    a = score_region_comparison(case.segmentation, case.mesh, case.intrinsics, cfg)
    b = score_region_comparison(case.segmentation, case.mesh, case.intrinsics, cfg)
    assert a.score == b.score and a.params == b.params


def test_segmentation_png_round_trip(tmp_path, small_cohort):
    seg = small_cohort[2].segmentation
    save_segmentation(seg, tmp_path / "s.png")
    back = load_segmentation(tmp_path / "s.png")
    np.testing.assert_array_equal(back.roi, seg.roi)
    np.testing.assert_array_equal(back.occlusion, seg.occlusion)


def test_segmentation_colour_tolerance(tmp_path):
    from PIL import Image

    img = np.zeros((2, 3, 3), np.uint8)
    img[0, 0] = (250, 248, 252)   # near white
    img[0, 1] = (247, 5, 3)       # near red
    img[0, 2] = (200, 200, 200)   # grey: neither
    Image.fromarray(img).save(tmp_path / "s.png")
    seg = load_segmentation(tmp_path / "s.png")
    assert seg.roi.tolist() == [[True, False, False], [False, False, False]]
    assert seg.occlusion.tolist() == [[False, True, False], [False, False, False]]
