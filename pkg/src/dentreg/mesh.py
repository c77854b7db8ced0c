"""Dental meshes, landmark sets and silhouette rasterization."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import _raster
from .camera import CameraParams, IntrinsicConventions, rotation_matrix
from .errors import EmptyMesh, ParseError, TooFewPairs

VOCABULARY_VERSION = "dentreg-anterior-30/1"

# Upper anterior teeth in image left-to-right order of a frontal photograph
# (FDI numbering: the patient's right canine appears on the left).
TEETH = ("13", "12", "11", "21", "22", "23")
_CONTACTS = tuple(f"{a}_{b}" for a, b in zip(TEETH[:-1], TEETH[1:]))

SMILE_LINE = tuple(
    name
    for tooth in TEETH
    for name in ((f"S{tooth}_cusp",) if tooth in ("13", "23")
                 else (f"S{tooth}_mesial", f"S{tooth}_mid", f"S{tooth}_distal"))
)
MEDIAL_LINE = tuple(f"M{c}" for c in _CONTACTS)
GINGIVAL_LINE = tuple(f"G{t}" for t in TEETH) + tuple(f"P{c}" for c in _CONTACTS)
VOCABULARY = SMILE_LINE + MEDIAL_LINE + GINGIVAL_LINE

LANDMARK_SETS = {
    "set1": VOCABULARY,
    "set2": SMILE_LINE + MEDIAL_LINE,
    "set3": SMILE_LINE,
}

MIN_PAIRS = 6


@dataclass(frozen=True)
class DentalMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    centroid_offset: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        object.__setattr__(self, "centroid_offset",
                           np.asarray(self.centroid_offset, dtype=float).reshape(3))
        if len(t) == 0:
            raise EmptyMesh("mesh has no triangles")
        if t.min() < 0 or t.max() >= len(v):
            raise ParseError("triangle index out of range")
        if np.any((t[:, 0] == t[:, 1]) & (t[:, 1] == t[:, 2])):
            raise ParseError("degenerate triangle with three identical indices")
        if not np.all(np.isfinite(v)):
            raise ParseError("non-finite vertex coordinate")

    @classmethod
    def normalized(cls, vertices, triangles) -> "DentalMesh":
        """Mesh translated so its vertex centroid is the origin."""
        v = np.asarray(vertices, dtype=float).reshape(-1, 3)
        if len(v) == 0:
            raise EmptyMesh("mesh has no vertices")
        c = v.mean(axis=0)
        return cls(v - c, triangles, c)

    def subset(self, triangle_indices) -> "DentalMesh":
        return DentalMesh(self.vertices, self.triangles[np.asarray(triangle_indices)],
                          self.centroid_offset)


def _parse_obj(path):
    verts, faces = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            try:
                if parts[0] == "v":
                    verts.append([float(x) for x in parts[1:4]])
                elif parts[0] == "f":
                    idx = []
                    for token in parts[1:]:
                        k = int(token.split("/")[0])
                        idx.append(k - 1 if k > 0 else len(verts) + k)
                    if len(idx) < 3:
                        raise ValueError("face with fewer than 3 vertices")
                    # fan-triangulate polygons
                    for a, b in zip(idx[1:-1], idx[2:]):
                        faces.append((idx[0], a, b))
            except (ValueError, IndexError) as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
    return verts, faces


def _parse_ply(path):
    from plyfile import PlyData

    try:
        ply = PlyData.read(str(path))
        vx = ply["vertex"]
        verts = np.column_stack([vx["x"], vx["y"], vx["z"]]).astype(float)
        faces = []
        if "face" in ply:
            face = ply["face"]
            key = "vertex_indices" if "vertex_indices" in face.data.dtype.names else "vertex_index"
            for poly in face[key]:
                poly = [int(k) for k in poly]
                for a, b in zip(poly[1:-1], poly[2:]):
                    faces.append((poly[0], a, b))
    except (KeyError, ValueError, IndexError, TypeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc
    except Exception as exc:  # plyfile raises its own PlyParseError/PlyHeaderParseError
        raise ParseError(f"{path}: {exc}") from exc
    return verts, faces


def load_mesh(path) -> DentalMesh:
    """Read an OBJ or PLY mesh and centre it on its vertex centroid."""
    ext = os.path.splitext(str(path))[1].lower()
    if ext == ".obj":
        verts, faces = _parse_obj(path)
    elif ext == ".ply":
        verts, faces = _parse_ply(path)
    else:
        raise ParseError(f"unsupported mesh format {ext!r}")
    if len(faces) == 0:
        raise EmptyMesh(f"{path}: no triangles")
    return DentalMesh.normalized(np.asarray(verts, dtype=float), np.asarray(faces))


def save_obj(mesh: DentalMesh, path):
    with open(path, "w", newline="\n") as fh:
        fh.write("# dentreg mesh\n")
        for x, y, z in mesh.vertices:
            fh.write(f"v {x:.6f} {y:.6f} {z:.6f}\n")
        for a, b, c in mesh.triangles:
            fh.write(f"f {a + 1} {b + 1} {c + 1}\n")


@dataclass(frozen=True)
class LandmarkSet:
    """Named landmarks; ``positions`` is (n, 3) for scans or (n, 2) for photos."""

    names: tuple
    positions: np.ndarray
    present: np.ndarray
    image_size: tuple | None = None

    def __post_init__(self):
        names = tuple(self.names)
        pos = np.asarray(self.positions, dtype=float)
        present = np.asarray(self.present, dtype=bool).reshape(-1)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "present", present)
        if pos.ndim != 2 or pos.shape[1] not in (2, 3) or len(pos) != len(names):
            raise ParseError("landmark positions must be (n, 2) or (n, 3)")
        if len(present) != len(names):
            raise ParseError("present flags do not match landmark count")
        if len(set(names)) != len(names):
            raise ParseError("duplicate landmark name")
        unknown = set(names) - set(VOCABULARY)
        if unknown:
            raise ParseError(f"unknown landmark names: {sorted(unknown)}")
        if not np.all(np.isfinite(pos[present])):
            raise ParseError("non-finite landmark coordinate")

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def shifted(self, offset) -> "LandmarkSet":
        return LandmarkSet(self.names, self.positions - np.asarray(offset, dtype=float),
                           self.present, self.image_size)

    def with_absent(self, names) -> "LandmarkSet":
        drop = set(names)
        present = np.array([p and n not in drop for n, p in zip(self.names, self.present)])
        return LandmarkSet(self.names, self.positions, present, self.image_size)

    def to_json(self) -> dict:
        out = {"vocabulary_version": VOCABULARY_VERSION}
        if self.image_size is not None:
            out["image_width"], out["image_height"] = (int(s) for s in self.image_size)
        entries = []
        for name, pos, present in zip(self.names, self.positions, self.present):
            entry = {"name": name, "x": float(pos[0]), "y": float(pos[1])}
            if self.dim == 3:
                entry["z"] = float(pos[2])
            entry["present"] = bool(present)
            entries.append(entry)
        out["landmarks"] = entries
        return out

    @classmethod
    def from_json(cls, data) -> "LandmarkSet":
        try:
            entries = data["landmarks"]
            dim = 3 if any("z" in e for e in entries) else 2
            names = [e["name"] for e in entries]
            pos = [[e["x"], e["y"]] + ([e.get("z", np.nan)] if dim == 3 else [])
                   for e in entries]
            present = [bool(e.get("present", True)) for e in entries]
        except (KeyError, TypeError) as exc:
            raise ParseError(f"malformed landmark file: {exc!r}") from exc
        size = None
        if "image_width" in data and "image_height" in data:
            size = (int(data["image_width"]), int(data["image_height"]))
        return cls(tuple(names), np.asarray(pos, dtype=float).reshape(len(names), dim),
                   present, size)


def load_landmarks(path) -> LandmarkSet:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return LandmarkSet.from_json(data)


def save_landmarks(lms: LandmarkSet, path):
    with open(path, "w", newline="\n") as fh:
        json.dump(lms.to_json(), fh, indent=1)
        fh.write("\n")


def pair_landmarks(l3: LandmarkSet, l2: LandmarkSet, subset="set1", min_pairs=MIN_PAIRS):
    """Match 3D and 2D landmarks by name within a landmark set.

    Returns ``(points3d, points2d, names)`` in canonical vocabulary order,
    keeping only names present on both sides.
    """
    key = subset if isinstance(subset, str) else f"set{int(subset)}"
    try:
        wanted = LANDMARK_SETS[key.lower()]
    except KeyError:
        raise ValueError(f"unknown landmark subset {subset!r}") from None
    idx3 = {n: i for i, n in enumerate(l3.names) if l3.present[i]}
    idx2 = {n: i for i, n in enumerate(l2.names) if l2.present[i]}
    names = [n for n in wanted if n in idx3 and n in idx2]
    if len(names) < min_pairs:
        raise TooFewPairs(f"{len(names)} landmark pairs in {key}, need {min_pairs}")
    p3 = l3.positions[[idx3[n] for n in names]][:, :3]
    p2 = l2.positions[[idx2[n] for n in names]][:, :2]
    return p3, p2, tuple(names)


def raster_args(c: CameraParams, ic: IntrinsicConventions):
    """Camera arguments in the order the compiled kernels expect."""
    R = rotation_matrix(c.rx, c.ry, c.rz)
    t = np.array([c.tx, c.ty, c.tz + ic.base_standoff_mm])
    cx, cy = ic.principal_point
    return R, t, ic.pixels_per_mm * c.f, cx, cy, ic.z_near_mm


def rasterize_silhouette(mesh: DentalMesh, c: CameraParams, ic: IntrinsicConventions) -> np.ndarray:
    """Binary silhouette ``(height, width)`` of the projected mesh.

    Triangles with a vertex behind the near plane are skipped rather than
    clipped; no depth test is needed for a silhouette.
    """
    return _raster.rasterize(mesh.vertices, mesh.triangles, *raster_args(c, ic),
                             ic.image_height_px, ic.image_width_px)
