"""Seven-parameter perspective camera.

The model frame is moved into the camera frame by ``R @ p + t`` with
``R = Rz @ Ry @ Rx`` (extrinsic axes, angles in degrees) and
``t = (tx, ty, tz + base_standoff_mm)``.  The camera sits at the origin
looking along +Z; image ``u`` grows rightward with +X and ``v`` downward
with +Y.  Pixel ``(i, j)`` covers ``[i, i+1) x [j, j+1)``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from .errors import BehindCamera, InvalidConfig

PARAM_NAMES = ("tx", "ty", "tz", "rx", "ry", "rz", "f")

#: Search box used by the region optimizer (mm, degrees, mm).
REGION_LOWER = np.array([-150.0, -150.0, -150.0, -90.0, -90.0, -90.0, 10.0])
REGION_UPPER = np.array([150.0, 150.0, 150.0, 90.0, 90.0, 90.0, 200.0])


@dataclass(frozen=True)
class CameraParams:
    tx: float = 0.0
    ty: float = 0.0
    tz: float = 0.0
    rx: float = 0.0
    ry: float = 0.0
    rz: float = 0.0
    f: float = 50.0

    def __post_init__(self):
        if not np.all(np.isfinite(self.to_array())):
            raise ValueError(f"non-finite camera parameter in {self!r}")

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in PARAM_NAMES], dtype=float)

    @classmethod
    def from_array(cls, values) -> "CameraParams":
        values = np.asarray(values, dtype=float).ravel()
        if values.shape != (7,):
            raise ValueError(f"expected 7 camera parameters, got {values.shape}")
        return cls(*(float(v) for v in values))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d) -> "CameraParams":
        return cls(**{f.name: float(d[f.name]) for f in fields(cls)})

    def in_region_bounds(self) -> bool:
        x = self.to_array()
        return bool(np.all(x >= REGION_LOWER) and np.all(x <= REGION_UPPER))


@dataclass(frozen=True)
class IntrinsicConventions:
    image_width_px: int = 1000
    image_height_px: int = 1000
    sensor_width_mm: float = 36.0
    principal_point: tuple | None = None
    base_standoff_mm: float = 400.0
    z_near_mm: float = 1.0

    def __post_init__(self):
        if self.image_width_px < 1 or self.image_height_px < 1:
            raise InvalidConfig("image dimensions must be >= 1")
        if not self.sensor_width_mm > 0:
            raise InvalidConfig("sensor_width_mm must be positive")
        if self.principal_point is None:
            object.__setattr__(
                self, "principal_point",
                (self.image_width_px / 2.0, self.image_height_px / 2.0))
        cx, cy = self.principal_point
        object.__setattr__(self, "principal_point", (float(cx), float(cy)))
        if not (0 <= cx <= self.image_width_px and 0 <= cy <= self.image_height_px):
            raise InvalidConfig("principal point must lie inside the image")

    @property
    def pixels_per_mm(self) -> float:
        return self.image_width_px / self.sensor_width_mm

    def with_image_size(self, width: int, height: int) -> "IntrinsicConventions":
        """Same conventions for another photograph (principal point recentred)."""
        return IntrinsicConventions(
            image_width_px=int(width), image_height_px=int(height),
            sensor_width_mm=self.sensor_width_mm,
            base_standoff_mm=self.base_standoff_mm, z_near_mm=self.z_near_mm)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["principal_point"] = list(self.principal_point)
        return d

    @classmethod
    def from_dict(cls, d) -> "IntrinsicConventions":
        d = dict(d)
        if d.get("principal_point") is not None:
            d["principal_point"] = tuple(d["principal_point"])
        return cls(**d)


def _axis_rotations(rx, ry, rz):
    ax, ay, az = np.radians([rx, ry, rz])
    cx, sx = np.cos(ax), np.sin(ax)
    cy, sy = np.cos(ay), np.sin(ay)
    cz, sz = np.cos(az), np.sin(az)
    Rx = np.array([[1.0, 0.0, 0.0], [0.0, cx, -sx], [0.0, sx, cx]])
    Ry = np.array([[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]])
    Rz = np.array([[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]])
    return Rx, Ry, Rz


def rotation_matrix(rx: float, ry: float, rz: float) -> np.ndarray:
    """``Rz @ Ry @ Rx`` for angles in degrees."""
    Rx, Ry, Rz = _axis_rotations(rx, ry, rz)
    return Rz @ Ry @ Rx


def rotation_derivatives(rx, ry, rz):
    """Partial derivatives of the rotation matrix w.r.t. (rx, ry, rz) in degrees."""
    Rx, Ry, Rz = _axis_rotations(rx, ry, rz)
    ax, ay, az = np.radians([rx, ry, rz])
    dRx = np.array([[0.0, 0.0, 0.0],
                    [0.0, -np.sin(ax), -np.cos(ax)],
                    [0.0, np.cos(ax), -np.sin(ax)]])
    dRy = np.array([[-np.sin(ay), 0.0, np.cos(ay)],
                    [0.0, 0.0, 0.0],
                    [-np.cos(ay), 0.0, -np.sin(ay)]])
    dRz = np.array([[-np.sin(az), -np.cos(az), 0.0],
                    [np.cos(az), -np.sin(az), 0.0],
                    [0.0, 0.0, 0.0]])
    k = np.pi / 180.0
    return (k * (Rz @ Ry @ dRx), k * (Rz @ dRy @ Rx), k * (dRz @ Ry @ Rx))


def to_camera_frame(p, c: CameraParams, ic: IntrinsicConventions) -> np.ndarray:
    """Model-frame point(s) ``(..., 3)`` to camera-frame coordinates."""
    p = np.asarray(p, dtype=float)
    R = rotation_matrix(c.rx, c.ry, c.rz)
    t = np.array([c.tx, c.ty, c.tz + ic.base_standoff_mm])
    return p @ R.T + t


def project_all(points, c: CameraParams, ic: IntrinsicConventions) -> np.ndarray:
    """Project ``(n, 3)`` model points to ``(n, 2)`` pixel coordinates.

    Rows for points closer than the near plane are NaN; they carry no
    projection and must not be read as coordinates.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    cam = to_camera_frame(pts, c, ic)
    out = np.full((len(pts), 2), np.nan)
    front = cam[:, 2] >= ic.z_near_mm
    scale = ic.pixels_per_mm * c.f
    cx, cy = ic.principal_point
    out[front, 0] = cx + scale * cam[front, 0] / cam[front, 2]
    out[front, 1] = cy + scale * cam[front, 1] / cam[front, 2]
    return out


def project(p, c: CameraParams, ic: IntrinsicConventions) -> np.ndarray:
    """Project a single point; raises :class:`BehindCamera` past the near plane."""
    uv = project_all(np.asarray(p, dtype=float).reshape(1, 3), c, ic)[0]
    if np.isnan(uv[0]):
        raise BehindCamera(f"point {tuple(np.ravel(p))} is behind the near plane")
    return uv
