"""Region registration: masked DICE between photo segmentation and mesh silhouette."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from PIL import Image

from . import _raster
from .camera import REGION_LOWER, REGION_UPPER, CameraParams, IntrinsicConventions
from .errors import DimensionMismatch, ParseError, UnusableCase
from .mesh import DentalMesh
from .mvmo import OptimizerConfig, SearchSpace, best_of_restarts
from .records import ComparisonScore

N_RESTARTS = 3
COLOR_TOLERANCE = 10


class EmptyAfterMask(UserWarning):
    """Both operands are empty once the occlusion mask is removed."""


@dataclass(frozen=True)
class SegmentationImage:
    roi: np.ndarray
    occlusion: np.ndarray

    def __post_init__(self):
        roi = np.asarray(self.roi, dtype=bool)
        occ = np.asarray(self.occlusion, dtype=bool)
        if roi.shape != occ.shape or roi.ndim != 2:
            raise DimensionMismatch(f"roi {roi.shape} vs occlusion {occ.shape}")
        object.__setattr__(self, "roi", roi)
        object.__setattr__(self, "occlusion", occ)

    @property
    def width(self) -> int:
        return self.roi.shape[1]

    @property
    def height(self) -> int:
        return self.roi.shape[0]

    @property
    def usable(self) -> bool:
        return bool(np.any(self.roi & ~self.occlusion))

    def to_rgb(self) -> np.ndarray:
        """White region of interest, red occlusion, black background."""
        img = np.zeros(self.roi.shape + (3,), dtype=np.uint8)
        img[self.roi] = 255
        img[self.occlusion] = (255, 0, 0)
        return img


def load_segmentation(path) -> SegmentationImage:
    try:
        rgb = np.asarray(Image.open(path).convert("RGB"), dtype=np.int16)
    except OSError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    tol = COLOR_TOLERANCE
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    roi = (r >= 255 - tol) & (g >= 255 - tol) & (b >= 255 - tol)
    occ = (r >= 255 - tol) & (g <= tol) & (b <= tol)
    return SegmentationImage(roi, occ)


def save_segmentation(seg: SegmentationImage, path):
    Image.fromarray(seg.to_rgb(), "RGB").save(path, format="PNG", optimize=False)


def masked_dice_error(a, b, m) -> float:
    """One minus the DICE overlap of ``a`` and ``b`` with pixels of ``m`` removed.

    0 is a perfect overlap.  When both operands are empty after masking the
    result is 1 and an :class:`EmptyAfterMask` warning is issued.
    """
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    m = np.asarray(m, dtype=bool)
    if not (a.shape == b.shape == m.shape):
        raise DimensionMismatch(f"shapes {a.shape}, {b.shape}, {m.shape}")
    keep = ~m
    A = a & keep
    B = b & keep
    denom = int(A.sum()) + int(B.sum())
    if denom == 0:
        warnings.warn("both silhouettes are empty after masking", EmptyAfterMask, stacklevel=2)
        return 1.0
    return 1.0 - 2.0 * int((A & B).sum()) / denom


class RegionFitness:
    """Fitness closure over camera parameters for one (photo, mesh) pair.

    Calling it with a :class:`CameraParams` (or a 7-vector) returns the
    masked DICE error, or ``inf`` when the silhouette leaves the image
    entirely or falls behind the camera.
    """

    def __init__(self, seg: SegmentationImage, mesh: DentalMesh, ic: IntrinsicConventions):
        if not seg.usable:
            raise UnusableCase("region of interest is empty after removing the occlusion mask")
        if (ic.image_width_px, ic.image_height_px) != (seg.width, seg.height):
            ic = ic.with_image_size(seg.width, seg.height)
        self.seg, self.mesh, self.ic = seg, mesh, ic
        self._keep = np.ascontiguousarray(~seg.occlusion)
        self._roi_keep = np.ascontiguousarray(seg.roi & self._keep)
        self._n_roi_keep = int(self._roi_keep.sum())

    def __call__(self, params) -> float:
        x = params.to_array() if isinstance(params, CameraParams) else np.asarray(params, dtype=float)
        if x.shape != (7,) or not np.all(np.isfinite(x)):
            raise ValueError(f"expected 7 finite camera parameters, got {params!r}")
        ic = self.ic
        cx, cy = ic.principal_point
        return float(_raster.masked_dice_vector(
            self.mesh.vertices, self.mesh.triangles, x, ic.pixels_per_mm, cx, cy,
            ic.base_standoff_mm, ic.z_near_mm, self._roi_keep, self._keep, self._n_roi_keep))


def region_fitness(seg: SegmentationImage, mesh: DentalMesh, ic: IntrinsicConventions) -> RegionFitness:
    return RegionFitness(seg, mesh, ic)


def region_search_space() -> SearchSpace:
    return SearchSpace(REGION_LOWER, REGION_UPPER)


def score_region_comparison(seg: SegmentationImage, mesh: DentalMesh, ic: IntrinsicConventions,
                            opt_config: OptimizerConfig | None = None, n_restarts: int = N_RESTARTS,
                            am_id="", pm_id="") -> ComparisonScore:
    """Best masked DICE error over ``n_restarts`` seeded MVMO-SH runs."""
    cfg = opt_config or OptimizerConfig()
    try:
        fit = RegionFitness(seg, mesh, ic)
    except UnusableCase as exc:
        return ComparisonScore.failed(am_id, pm_id, "regions", f"UnusableCase: {exc}", seed=cfg.seed)
    res = best_of_restarts(fit, region_search_space(), cfg, n_restarts)
    params = CameraParams.from_array(res.best_point)
    if not np.isfinite(res.best_value):
        return ComparisonScore.failed(am_id, pm_id, "regions",
                                      "no candidate produced an on-screen silhouette", seed=cfg.seed)
    return ComparisonScore(
        am_id, pm_id, "regions", res.best_value, params=params, seed=cfg.seed,
        evaluations=res.extra["total_evaluations"], restarts=len(res.extra["runs"]),
        extra={"runs": [[s, v] for s, v in res.extra["runs"]], "winning_seed": res.seed})
