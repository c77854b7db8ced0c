"""Landmark registration: pose and focal length from 3D-2D landmark pairs.

The solver is a Levenberg-Marquardt minimisation of the summed squared
reprojection error over all seven camera parameters, run from a fixed grid
of (focal length, rotation) starts.  For each start the translation is
initialised in closed form, since with rotation and focal length fixed the
projection equations are linear in the translation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .camera import (CameraParams, IntrinsicConventions, project_all,
                     rotation_derivatives, rotation_matrix)
from .errors import BehindCamera, Degenerate, TooFewPairs
from .mesh import MIN_PAIRS, LandmarkSet, pair_landmarks
from .records import ComparisonScore

RMSE_MODES = ("standard", "literal")


@dataclass(frozen=True)
class SolverOptions:
    focal_starts: tuple = (20.0, 35.0, 50.0, 85.0, 135.0)
    rotation_seeds: tuple = (0.0, 30.0, -30.0)
    max_starts: int = 45
    min_pairs: int = MIN_PAIRS
    rmse_mode: str = "standard"
    max_iterations: int = 500
    gtol: float = 1e-8
    ftol: float = 1e-12

    def __post_init__(self):
        if self.min_pairs < 4:
            raise ValueError("min_pairs must be at least 4")
        if self.rmse_mode not in RMSE_MODES:
            raise ValueError(f"rmse_mode must be one of {RMSE_MODES}")
        if self.max_starts < 1:
            raise ValueError("max_starts must be positive")

    def starts(self):
        """Deterministic (rx, ry, rz, f) start list, simplest rotations first."""
        rots = sorted(itertools.product(self.rotation_seeds, repeat=3),
                      key=lambda r: sum(a != 0 for a in r))
        per_f = max(1, self.max_starts // len(self.focal_starts))
        out = [(*r, float(f)) for r in rots[:per_f] for f in self.focal_starts]
        return out[: self.max_starts]


@dataclass(frozen=True)
class PnPSolution:
    params: CameraParams
    rmse_px: float
    n_pairs: int
    converged: bool
    restarts_used: int
    coplanar: bool = False
    iterations: int = 0
    extra: dict = field(default_factory=dict)


def _as_arrays(pairs):
    if isinstance(pairs, tuple) and len(pairs) in (2, 3) and np.ndim(pairs[0]) == 2:
        p3, p2 = pairs[0], pairs[1]
    else:
        p3 = [a for a, _ in pairs]
        p2 = [b for _, b in pairs]
    p3 = np.asarray(p3, dtype=float).reshape(-1, 3)
    p2 = np.asarray(p2, dtype=float).reshape(-1, 2)
    if len(p3) != len(p2):
        raise ValueError("3D and 2D point counts differ")
    return p3, p2


def reprojection_rmse(pairs, c: CameraParams, ic: IntrinsicConventions, mode="standard") -> float:
    """Pixel reprojection error of ``c`` over landmark pairs.

    ``mode="standard"`` is sqrt(mean d_i**2); ``mode="literal"`` is
    sqrt(mean d_i), with d_i the pixel distance of pair i.
    """
    p3, p2 = _as_arrays(pairs)
    if len(p3) == 0:
        raise ValueError("need at least one landmark pair")
    uv = project_all(p3, c, ic)
    if np.isnan(uv).any():
        raise BehindCamera("a landmark projects behind the near plane")
    d = np.hypot(*(uv - p2).T)
    if mode == "standard":
        return float(np.sqrt(np.mean(d ** 2)))
    if mode == "literal":
        return float(np.sqrt(np.mean(d)))
    raise ValueError(f"unknown rmse mode {mode!r}")


class _Problem:
    """Residuals and analytic Jacobian for one landmark set."""

    def __init__(self, p3, p2, ic):
        self.p3, self.p2, self.ic = p3, p2, ic
        self.m = ic.pixels_per_mm
        self.cx, self.cy = ic.principal_point

    def _camera(self, x):
        R = rotation_matrix(x[3], x[4], x[5])
        P = self.p3 @ R.T
        P[:, 0] += x[0]
        P[:, 1] += x[1]
        P[:, 2] += x[2] + self.ic.base_standoff_mm
        return P

    def residuals(self, x):
        P = self._camera(x)
        if P[:, 2].min() < self.ic.z_near_mm or x[6] <= 0:
            return None
        s = self.m * x[6]
        r = np.empty((len(P), 2))
        r[:, 0] = self.cx + s * P[:, 0] / P[:, 2] - self.p2[:, 0]
        r[:, 1] = self.cy + s * P[:, 1] / P[:, 2] - self.p2[:, 1]
        return r.ravel()

    def jacobian(self, x):
        P = self._camera(x)
        X, Y, Z = P.T
        s = self.m * x[6]
        n = len(P)
        # d(u,v)/d(X,Y,Z)
        du = np.stack([s / Z, np.zeros(n), -s * X / Z ** 2], axis=1)
        dv = np.stack([np.zeros(n), s / Z, -s * Y / Z ** 2], axis=1)
        J = np.empty((n, 2, 7))
        J[:, 0, 0:3] = du
        J[:, 1, 0:3] = dv
        for k, dR in enumerate(rotation_derivatives(x[3], x[4], x[5])):
            dP = self.p3 @ dR.T
            J[:, 0, 3 + k] = np.einsum("ij,ij->i", du, dP)
            J[:, 1, 3 + k] = np.einsum("ij,ij->i", dv, dP)
        J[:, 0, 6] = self.m * X / Z
        J[:, 1, 6] = self.m * Y / Z
        return J.reshape(2 * n, 7)

    def initial_translation(self, rx, ry, rz, f):
        """Least-squares translation for fixed rotation and focal length."""
        q = self.p3 @ rotation_matrix(rx, ry, rz).T
        s = self.m * f
        a = (self.p2[:, 0] - self.cx) / s
        b = (self.p2[:, 1] - self.cy) / s
        n = len(q)
        A = np.zeros((2 * n, 3))
        rhs = np.empty(2 * n)
        A[:n, 0] = 1.0
        A[:n, 2] = -a
        rhs[:n] = a * q[:, 2] - q[:, 0]
        A[n:, 1] = 1.0
        A[n:, 2] = -b
        rhs[n:] = b * q[:, 2] - q[:, 1]
        (tx, ty, T), *_ = np.linalg.lstsq(A, rhs, rcond=None)
        floor = self.ic.z_near_mm - q[:, 2].min() + 10.0
        if not np.isfinite(T) or T < floor:
            T = floor
            tx = np.mean(a * (q[:, 2] + T) - q[:, 0])
            ty = np.mean(b * (q[:, 2] + T) - q[:, 1])
        return np.array([tx, ty, T - self.ic.base_standoff_mm, rx, ry, rz, f], dtype=float)


def _levenberg_marquardt(problem: _Problem, x0, opts: SolverOptions):
    x = np.array(x0, dtype=float)
    r = problem.residuals(x)
    if r is None:
        return x, np.inf, False, 0
    cost = 0.5 * r @ r
    lam = 1e-3
    converged = False
    it = 0
    for it in range(1, opts.max_iterations + 1):
        J = problem.jacobian(x)
        g = J.T @ r
        if np.max(np.abs(g)) < opts.gtol:
            converged = True
            break
        A = J.T @ J
        d = np.maximum(np.diag(A), 1e-12)
        accepted = False
        while lam < 1e16:
            try:
                step = np.linalg.solve(A + lam * np.diag(d), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            x_new = x + step
            r_new = problem.residuals(x_new)
            if r_new is not None:
                cost_new = 0.5 * r_new @ r_new
                if cost_new < cost:
                    accepted = True
                    break
            lam *= 10.0
        if not accepted:
            # no descent direction left at machine precision
            converged = True
            break
        rel = (cost - cost_new) / max(cost, np.finfo(float).tiny)
        x, r, cost = x_new, r_new, cost_new
        lam = max(lam / 10.0, 1e-12)
        if rel < opts.ftol or cost == 0.0:
            converged = True
            break
    return x, cost, converged, it


def solve_pnpf(pairs, ic: IntrinsicConventions, options: SolverOptions | None = None) -> PnPSolution:
    """Recover pose and focal length minimising landmark reprojection error.

    Runs the full start grid and keeps the lowest-error solution; the result
    is returned with ``converged=False`` when that solution stopped on the
    iteration cap rather than a tolerance.
    """
    opts = options or SolverOptions()
    p3, p2 = _as_arrays(pairs)
    n = len(p3)
    if n < opts.min_pairs:
        raise TooFewPairs(f"{n} landmark pairs, need {opts.min_pairs}")
    if not (np.all(np.isfinite(p3)) and np.all(np.isfinite(p2))):
        raise ValueError("non-finite landmark coordinates")
    centred = p3 - p3.mean(axis=0)
    _, sv, vt = np.linalg.svd(centred, full_matrices=False)
    if sv[0] <= 1e-12 or sv[1] <= 1e-9 * sv[0]:
        raise Degenerate("3D landmarks are collinear")
    coplanar = bool(np.max(np.abs(centred @ vt[-1])) < 1e-6)

    problem = _Problem(p3, p2, ic)
    best = None
    starts = opts.starts()
    for rx, ry, rz, f in starts:
        x0 = problem.initial_translation(rx, ry, rz, f)
        x, cost, conv, its = _levenberg_marquardt(problem, x0, opts)
        if best is None or cost < best[1]:
            best = (x, cost, conv, its)
    x, cost, conv, its = best
    if not np.isfinite(cost):
        raise Degenerate("no start produced a pose with every landmark in front")
    params = CameraParams.from_array(x)
    rmse = reprojection_rmse((p3, p2), params, ic, opts.rmse_mode)
    return PnPSolution(params, rmse, n, conv, len(starts), coplanar, its)


def score_landmark_comparison(mesh_landmarks: LandmarkSet, photo_landmarks: LandmarkSet,
                              subset, ic: IntrinsicConventions,
                              options: SolverOptions | None = None,
                              am_id="", pm_id="") -> ComparisonScore:
    """Score one AM photo against one PM scan by landmark reprojection error."""
    opts = options or SolverOptions()
    method = f"landmarks-{subset}" if isinstance(subset, str) else f"landmarks-set{subset}"
    try:
        pairs = pair_landmarks(mesh_landmarks, photo_landmarks, subset, opts.min_pairs)
        sol = solve_pnpf(pairs, ic, opts)
    except (TooFewPairs, Degenerate) as exc:
        return ComparisonScore.failed(am_id, pm_id, method, f"{type(exc).__name__}: {exc}")
    return ComparisonScore(
        am_id, pm_id, method, sol.rmse_px, params=sol.params, restarts=sol.restarts_used,
        extra={"n_pairs": sol.n_pairs, "converged": sol.converged, "coplanar": sol.coplanar,
               "rmse_mode": opts.rmse_mode})
