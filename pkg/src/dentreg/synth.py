"""Synthetic dentitions, photographs and cohorts with known ground truth.

A subject is six upper anterior teeth modelled as extruded rounded-rectangle
blocks laid along a circular arch.  Perturbing the per-tooth dimensions,
tilts, gaps, incisal levels and the arch curvature yields individualising
variation between subjects.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass

import numpy as np

from .camera import CameraParams, IntrinsicConventions, project_all
from .errors import InFrameExhausted
from .mesh import (MEDIAL_LINE, TEETH, VOCABULARY, DentalMesh, LandmarkSet,
                   rasterize_silhouette, save_landmarks, save_obj)
from .regfit import SegmentationImage, save_segmentation

MANIFEST_FORMAT = "dentreg-manifest/1"
DEFAULT_IMAGE_SIZE = (320, 240)

# canonical dentition, image left to right (13 12 11 21 22 23)
CANONICAL_WIDTHS = (7.8, 6.6, 8.6, 8.6, 6.6, 7.8)
CANONICAL_HEIGHTS = (10.0, 9.0, 10.5, 10.5, 9.0, 10.0)
CANONICAL_LEVELS = (-0.4, -0.9, 0.0, 0.0, -0.9, -0.4)
CANONICAL_DEPTH = 6.0
CANONICAL_GAP = 0.3
CANONICAL_CURVATURE = 1.0 / 28.0
CORNER_RADIUS = 1.2
CORNER_SEGMENTS = 2

OCCLUSION_BANDS = {"A": (0.0, 0.0), "B": (0.10, 0.25), "C": (0.25, 0.50)}


@dataclass(frozen=True)
class SubjectSpec:
    seed: int
    perturbation: float
    widths: tuple
    heights: tuple
    depths: tuple
    tilts: tuple
    levels: tuple
    gaps: tuple
    curvature: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class CameraSampler:
    """Ranges for plausible portrait cameras (all inside the region search box)."""

    tx: tuple = (-8.0, 8.0)
    ty: tuple = (-8.0, 8.0)
    tz: tuple = (-80.0, 30.0)
    rx: tuple = (-12.0, 12.0)
    ry: tuple = (-20.0, 20.0)
    rz: tuple = (-8.0, 8.0)
    f: tuple = (110.0, 190.0)
    margin_px: int = 4

    def draw(self, rng) -> CameraParams:
        return CameraParams(*(rng.uniform(*getattr(self, n))
                              for n in ("tx", "ty", "tz", "rx", "ry", "rz", "f")))


@dataclass(frozen=True)
class SyntheticCase:
    case_id: str
    subject: SubjectSpec
    mesh: DentalMesh
    landmarks3d: LandmarkSet
    camera: CameraParams
    intrinsics: IntrinsicConventions
    segmentation: SegmentationImage
    landmarks2d: LandmarkSet
    occlusion_level: str
    band_fraction: float


def _rng(*key):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(k) for k in key])))


def subject_spec(seed: int, perturbation: float = 1.0) -> SubjectSpec:
    if perturbation < 0:
        raise ValueError("perturbation must be >= 0")
    rng = _rng(seed, 0x7EE7)
    p = float(perturbation)
    n = len(TEETH)
    z = rng.standard_normal((6, n))
    widths = np.array(CANONICAL_WIDTHS) * (1 + 0.07 * p * z[0])
    heights = np.array(CANONICAL_HEIGHTS) * (1 + 0.07 * p * z[1])
    depths = CANONICAL_DEPTH * (1 + 0.05 * p * z[2])
    tilts = 4.0 * p * z[3]
    levels = np.array(CANONICAL_LEVELS) + 0.5 * p * z[4]
    gaps = np.maximum(CANONICAL_GAP + 0.25 * p * z[5, : n - 1], 0.05)
    curvature = CANONICAL_CURVATURE * (1 + 0.15 * p * rng.standard_normal())
    widths = np.maximum(widths, 3.0)
    heights = np.maximum(heights, 4.0)
    depths = np.maximum(depths, 2.0)
    return SubjectSpec(int(seed), p, *(tuple(float(v) for v in a)
                                       for a in (widths, heights, depths, tilts, levels, gaps)),
                       float(curvature))


def _rounded_rect(w, h, r, seg):
    """Convex outline (a, b) of a w x h rectangle, b in [-h, 0], counter-clockwise."""
    r = min(r, 0.45 * w, 0.45 * h)
    corners = [(w / 2 - r, -r, -90.0), (w / 2 - r, -h + r, 0.0),
               (-w / 2 + r, -h + r, 90.0), (-w / 2 + r, -r, 180.0)]
    pts = []
    for ca, cb, start in corners:
        for k in range(seg + 1):
            ang = np.radians(start + 90.0 * k / seg)
            pts.append((ca + r * np.cos(ang), cb - r * np.sin(ang)))
    return np.array(pts)


def _tooth_frames(spec: SubjectSpec):
    """Per-tooth (origin, tangent, inward normal) on the arch."""
    R = 1.0 / spec.curvature
    widths = np.array(spec.widths)
    total = widths.sum() + sum(spec.gaps)
    s = -total / 2.0
    frames = []
    for i, w in enumerate(widths):
        centre = s + w / 2.0
        theta = centre / R
        origin = np.array([R * np.sin(theta), spec.levels[i], R * (1 - np.cos(theta))])
        tangent = np.array([np.cos(theta), 0.0, np.sin(theta)])
        normal = np.array([-np.sin(theta), 0.0, np.cos(theta)])
        frames.append((origin, tangent, normal))
        s += w + (spec.gaps[i] if i < len(spec.gaps) else 0.0)
    return frames


def _local_to_world(frame, tilt_deg, a, b, c):
    origin, tangent, normal = frame
    t = np.radians(tilt_deg)
    a2 = a * np.cos(t) - b * np.sin(t)
    b2 = a * np.sin(t) + b * np.cos(t)
    up = np.array([0.0, 1.0, 0.0])
    return (origin + np.multiply.outer(a2, tangent) + np.multiply.outer(b2, up)
            + np.multiply.outer(c, normal))


def _zigzag(k):
    """Triangulation of a convex k-gon alternating between its two ends."""
    lo, hi = 0, k - 1
    out = []
    take_low = True
    while hi - lo >= 2:
        if take_low:
            out.append((lo, lo + 1, hi))
            lo += 1
        else:
            out.append((lo, hi - 1, hi))
            hi -= 1
        take_low = not take_low
    return out


def build_mesh(spec: SubjectSpec):
    """Raw (un-centred) vertices and triangles of the six tooth blocks."""
    verts, tris = [], []
    for i, frame in enumerate(_tooth_frames(spec)):
        outline = _rounded_rect(spec.widths[i], spec.heights[i], CORNER_RADIUS, CORNER_SEGMENTS)
        k = len(outline)
        a, b = outline[:, 0], outline[:, 1]
        front = _local_to_world(frame, spec.tilts[i], a, b, np.zeros(k))
        back = _local_to_world(frame, spec.tilts[i], a, b, np.full(k, spec.depths[i]))
        base = sum(len(v) for v in verts)
        verts.append(np.vstack([front, back]))
        f0, b0 = base, base + k
        # zigzag caps pair the two vertical chains, keeping triangles short
        for a0, a1, a2 in _zigzag(k):
            tris.append((f0 + a0, f0 + a1, f0 + a2))
            tris.append((b0 + a0, b0 + a2, b0 + a1))
        for j in range(k):
            jn = (j + 1) % k
            tris.append((f0 + j, b0 + j, b0 + jn))
            tris.append((f0 + j, b0 + jn, f0 + jn))
    return np.vstack(verts), np.array(tris, dtype=np.int64)


def build_landmarks(spec: SubjectSpec) -> dict:
    """Canonical landmark positions (raw frame) keyed by vocabulary name."""
    frames = _tooth_frames(spec)
    out = {}

    def at(i, a, b):
        return _local_to_world(frames[i], spec.tilts[i], np.array([a]), np.array([b]), np.zeros(1))[0]

    for i, tooth in enumerate(TEETH):
        w, h = spec.widths[i], spec.heights[i]
        if tooth in ("13", "23"):
            out[f"S{tooth}_cusp"] = at(i, 0.0, 0.0)
        else:
            # the mesial side faces the midline between 11 and 21
            mesial = 1.0 if i < 3 else -1.0
            inset = min(CORNER_RADIUS, 0.45 * w) * 0.3
            out[f"S{tooth}_mesial"] = at(i, mesial * (w / 2 - inset), -inset)
            out[f"S{tooth}_mid"] = at(i, 0.0, 0.0)
            out[f"S{tooth}_distal"] = at(i, -mesial * (w / 2 - inset), -inset)
        out[f"G{tooth}"] = at(i, 0.0, -h)
    for k, name in enumerate(MEDIAL_LINE):
        contact = name[1:]
        i = k
        left = at(i, spec.widths[i] / 2, -spec.heights[i] / 2)
        right = at(i + 1, -spec.widths[i + 1] / 2, -spec.heights[i + 1] / 2)
        out[f"M{contact}"] = (left + right) / 2
        left = at(i, spec.widths[i] / 2, -spec.heights[i] + 2.0)
        right = at(i + 1, -spec.widths[i + 1] / 2, -spec.heights[i + 1] + 2.0)
        out[f"P{contact}"] = (left + right) / 2
    return out


def generate_subject(seed: int, perturbation: float = 1.0):
    """Deterministic subject: ``(SubjectSpec, DentalMesh, LandmarkSet)``.

    The mesh is centred on its vertex centroid and the 3D landmarks share
    that frame.
    """
    spec = subject_spec(seed, perturbation)
    verts, tris = build_mesh(spec)
    mesh = DentalMesh.normalized(verts, tris)
    lm = build_landmarks(spec)
    pos = np.array([lm[n] for n in VOCABULARY]) - mesh.centroid_offset
    lms = LandmarkSet(VOCABULARY, pos, np.ones(len(VOCABULARY), dtype=bool))
    return spec, mesh, lms


def _in_frame(sil, margin):
    if not sil.any():
        return False
    rows = np.flatnonzero(sil.any(axis=1))
    cols = np.flatnonzero(sil.any(axis=0))
    h, w = sil.shape
    return (rows[0] >= margin and cols[0] >= margin
            and rows[-1] < h - margin and cols[-1] < w - margin)


def render_case(subject, camera_sampler=None, occlusion_level="A", *, rng=None,
                image_size=DEFAULT_IMAGE_SIZE, intrinsics=None, case_id="S000") -> SyntheticCase:
    """Photograph a subject under a random in-frame camera and occlude it.

    ``subject`` is the tuple returned by :func:`generate_subject`.  The lip
    band covers the bottom 0% (A), 10-25% (B) or 25-50% (C) of the
    silhouette's bounding-box height and every image row below it.
    """
    spec, mesh, l3 = subject
    if occlusion_level not in OCCLUSION_BANDS:
        raise ValueError(f"occlusion level must be one of {sorted(OCCLUSION_BANDS)}")
    sampler = camera_sampler or CameraSampler()
    rng = rng if rng is not None else _rng(spec.seed, 0xCA3)
    ic = intrinsics or IntrinsicConventions(*image_size)
    for _ in range(100):
        cam = sampler.draw(rng)
        sil = rasterize_silhouette(mesh, cam, ic)
        if _in_frame(sil, sampler.margin_px):
            break
    else:
        raise InFrameExhausted("no in-frame camera after 100 draws")

    lo, hi = OCCLUSION_BANDS[occlusion_level]
    frac = float(rng.uniform(lo, hi)) if hi > 0 else 0.0
    occ = np.zeros_like(sil)
    uv = project_all(l3.positions, cam, ic)
    present = np.ones(len(l3.names), dtype=bool)
    if frac > 0:
        rows = np.flatnonzero(sil.any(axis=1))
        top, bottom = rows[0], rows[-1] + 1
        band_top = bottom - frac * (bottom - top)
        first_row = int(np.ceil(band_top - 0.5))
        occ[first_row:, :] = True
        present = uv[:, 1] < band_top
    seg = SegmentationImage(sil & ~occ, occ)
    l2 = LandmarkSet(l3.names, uv, present, (ic.image_width_px, ic.image_height_px))
    return SyntheticCase(case_id, spec, mesh, l3, cam, ic, seg, l2, occlusion_level, frac)


def _level_list(counts):
    levels = []
    for level in ("A", "B", "C"):
        levels += [level] * int(counts.get(level, 0))
    return levels


def generate_cohort(counts, seed=0, perturbation=1.0, image_size=DEFAULT_IMAGE_SIZE,
                    camera_sampler=None):
    """In-memory cohort: one :class:`SyntheticCase` per subject."""
    levels = _level_list(counts)
    if not levels:
        raise ValueError("cohort needs at least one case")
    cases = []
    for k, level in enumerate(levels):
        subject = generate_subject(int(seed) * 1_000_003 + k, perturbation)
        cases.append(render_case(subject, camera_sampler, level, rng=_rng(seed, k, 0xCA3),
                                 image_size=image_size, case_id=f"S{k:03d}"))
    return cases


def write_cohort(out_dir, counts, seed=0, perturbation=1.0, image_size=DEFAULT_IMAGE_SIZE,
                 force=False) -> str:
    """Write an ingestible cohort directory and return the manifest path."""
    manifest_path = os.path.join(out_dir, "manifest.json")
    if os.path.exists(manifest_path) and not force:
        raise FileExistsError(f"{manifest_path} exists; pass force=True to overwrite")
    cases = generate_cohort(counts, seed, perturbation, image_size)
    os.makedirs(os.path.join(out_dir, "am"), exist_ok=True)
    os.makedirs(os.path.join(out_dir, "pm"), exist_ok=True)
    am, pm, truth = [], [], {}
    for case in cases:
        cid = case.case_id
        save_obj(case.mesh, os.path.join(out_dir, "pm", f"{cid}.obj"))
        save_landmarks(case.landmarks3d, os.path.join(out_dir, "pm", f"{cid}_landmarks.json"))
        save_segmentation(case.segmentation, os.path.join(out_dir, "am", f"{cid}_seg.png"))
        save_landmarks(case.landmarks2d, os.path.join(out_dir, "am", f"{cid}_landmarks.json"))
        with open(os.path.join(out_dir, "am", f"{cid}_camera.json"), "w", newline="\n") as fh:
            json.dump({"camera": case.camera.to_dict(), "band_fraction": case.band_fraction,
                       "subject": case.subject.to_dict()}, fh, indent=1)
            fh.write("\n")
        am.append({"id": cid, "segmentation": f"am/{cid}_seg.png",
                   "landmarks": f"am/{cid}_landmarks.json", "photo": None,
                   "occlusion_level": case.occlusion_level})
        pm.append({"id": cid, "mesh": f"pm/{cid}.obj", "landmarks": f"pm/{cid}_landmarks.json"})
        truth[cid] = cid
    manifest = {"format": MANIFEST_FORMAT, "am": am, "pm": pm, "truth": truth,
                "synthetic": {"seed": int(seed), "perturbation": float(perturbation),
                              "counts": {k: int(v) for k, v in counts.items()},
                              "image_size": list(image_size)}}
    with open(manifest_path, "w", newline="\n") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")
    return manifest_path
