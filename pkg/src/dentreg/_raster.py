"""Compiled kernels for silhouette rasterization and masked-overlap counting.

Coverage rule: pixel (i, j) is set iff its centre (i + 0.5, j + 0.5) lies
strictly inside a projected triangle, or exactly on a top or left edge.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _is_top_left(ax, ay, bx, by):
    # valid for triangles with positive signed area in y-down screen space
    if ay == by and bx > ax:
        return True
    return by < ay


@njit(cache=True)
def _inside(x0, y0, x1, y1, x2, y2, tl0, tl1, tl2, px, py):
    w0 = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
    if w0 < 0.0 or (w0 == 0.0 and not tl0):
        return False
    w1 = (x0 - x2) * (py - y2) - (y0 - y2) * (px - x2)
    if w1 < 0.0 or (w1 == 0.0 and not tl1):
        return False
    w2 = (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0)
    return not (w2 < 0.0 or (w2 == 0.0 and not tl2))


@njit(cache=True)
def _fill_one(x0, y0, x1, y1, x2, y2, out):
    area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
    if area == 0.0 or not np.isfinite(area):
        return 0, 0, -1, -1
    if area < 0.0:
        x1, y1, x2, y2 = x2, y2, x1, y1
    height, width = out.shape
    xmin = max(int(np.floor(min(x0, min(x1, x2)) - 0.5)), 0)
    xmax = min(int(np.ceil(max(x0, max(x1, x2)) - 0.5)), width - 1)
    ymin = max(int(np.floor(min(y0, min(y1, y2)) - 0.5)), 0)
    ymax = min(int(np.ceil(max(y0, max(y1, y2)) - 0.5)), height - 1)
    if xmin > xmax or ymin > ymax:
        return 0, 0, -1, -1
    tl0 = _is_top_left(x1, y1, x2, y2)
    tl1 = _is_top_left(x2, y2, x0, y0)
    tl2 = _is_top_left(x0, y0, x1, y1)
    # edge k as a function of the pixel centre: w = sk * px + (dk * py + ck)
    s0, d0, c0 = -(y2 - y1), x2 - x1, -(x2 - x1) * y1 + (y2 - y1) * x1
    s1, d1, c1 = -(y0 - y2), x0 - x2, -(x0 - x2) * y2 + (y0 - y2) * x2
    s2, d2, c2 = -(y1 - y0), x1 - x0, -(x1 - x0) * y0 + (y1 - y0) * x0
    for j in range(ymin, ymax + 1):
        py = j + 0.5
        # intersect the three half-lines, then settle the span ends with the
        # exact per-pixel test so ties follow the top-left rule
        lo = xmin + 0.5
        hi = xmax + 0.5
        empty = False
        o = d0 * py + c0
        if s0 > 0.0:
            v = -o / s0
            if v > lo:
                lo = v
        elif s0 < 0.0:
            v = -o / s0
            if v < hi:
                hi = v
        elif o < 0.0:
            empty = True
        o = d1 * py + c1
        if s1 > 0.0:
            v = -o / s1
            if v > lo:
                lo = v
        elif s1 < 0.0:
            v = -o / s1
            if v < hi:
                hi = v
        elif o < 0.0:
            empty = True
        o = d2 * py + c2
        if s2 > 0.0:
            v = -o / s2
            if v > lo:
                lo = v
        elif s2 < 0.0:
            v = -o / s2
            if v < hi:
                hi = v
        elif o < 0.0:
            empty = True
        if empty or lo > hi + 1.0:
            continue
        i0 = min(max(int(np.ceil(lo - 0.5)), xmin), xmax)
        i1 = max(min(int(np.floor(hi - 0.5)), xmax), xmin)
        if _inside(x0, y0, x1, y1, x2, y2, tl0, tl1, tl2, i0 + 0.5, py):
            while i0 > xmin and _inside(x0, y0, x1, y1, x2, y2, tl0, tl1, tl2, i0 - 0.5, py):
                i0 -= 1
        else:
            while i0 <= i1 and not _inside(x0, y0, x1, y1, x2, y2, tl0, tl1, tl2, i0 + 0.5, py):
                i0 += 1
        if i1 < i0:
            continue
        if _inside(x0, y0, x1, y1, x2, y2, tl0, tl1, tl2, i1 + 0.5, py):
            while i1 < xmax and _inside(x0, y0, x1, y1, x2, y2, tl0, tl1, tl2, i1 + 1.5, py):
                i1 += 1
        else:
            while i1 >= i0 and not _inside(x0, y0, x1, y1, x2, y2, tl0, tl1, tl2, i1 + 0.5, py):
                i1 -= 1
        for i in range(i0, i1 + 1):
            out[j, i] = True
    return xmin, ymin, xmax, ymax


@njit(cache=True)
def _project(verts, R, t, scale, cx, cy, z_near):
    n = verts.shape[0]
    uv = np.empty((n, 2))
    front = np.empty(n, dtype=np.bool_)
    for k in range(n):
        X = R[0, 0] * verts[k, 0] + R[0, 1] * verts[k, 1] + R[0, 2] * verts[k, 2] + t[0]
        Y = R[1, 0] * verts[k, 0] + R[1, 1] * verts[k, 1] + R[1, 2] * verts[k, 2] + t[1]
        Z = R[2, 0] * verts[k, 0] + R[2, 1] * verts[k, 1] + R[2, 2] * verts[k, 2] + t[2]
        if Z >= z_near:
            front[k] = True
            uv[k, 0] = cx + scale * X / Z
            uv[k, 1] = cy + scale * Y / Z
        else:
            front[k] = False
            uv[k, 0] = np.nan
            uv[k, 1] = np.nan
    return uv, front


@njit(cache=True)
def fill_triangles(uv, front, tris, out):
    """Union-fill every triangle whose three vertices are in front.

    Returns the inclusive bounding box (xmin, ymin, xmax, ymax) of the pixels
    that may have been touched, or (0, 0, -1, -1) if none.
    """
    bx0, by0, bx1, by1 = out.shape[1], out.shape[0], -1, -1
    for k in range(tris.shape[0]):
        a, b, c = tris[k, 0], tris[k, 1], tris[k, 2]
        if not (front[a] and front[b] and front[c]):
            continue
        x0, y0, x1, y1 = _fill_one(uv[a, 0], uv[a, 1], uv[b, 0], uv[b, 1],
                                   uv[c, 0], uv[c, 1], out)
        if x1 >= x0:
            bx0 = min(bx0, x0)
            by0 = min(by0, y0)
            bx1 = max(bx1, x1)
            by1 = max(by1, y1)
    if bx1 < 0:
        return 0, 0, -1, -1
    return bx0, by0, bx1, by1


@njit(cache=True)
def rasterize(verts, tris, R, t, scale, cx, cy, z_near, height, width):
    uv, front = _project(verts, R, t, scale, cx, cy, z_near)
    out = np.zeros((height, width), dtype=np.bool_)
    fill_triangles(uv, front, tris, out)
    return out


@njit(cache=True)
def masked_dice_mesh(verts, tris, R, t, scale, cx, cy, z_near, roi_keep, keep, n_roi_keep):
    """Masked DICE error of the rendered silhouette against a segmentation.

    ``roi_keep`` is roi minus occlusion, ``keep`` is the complement of the
    occlusion mask and ``n_roi_keep`` the pixel count of ``roi_keep``.
    Returns +inf when the silhouette has no pixel inside the image.
    """
    height, width = keep.shape
    uv, front = _project(verts, R, t, scale, cx, cy, z_near)
    sil = np.zeros((height, width), dtype=np.bool_)
    x0, y0, x1, y1 = fill_triangles(uv, front, tris, sil)
    n_sil = 0
    n_b = 0
    n_ab = 0
    for j in range(y0, y1 + 1):
        for i in range(x0, x1 + 1):
            if sil[j, i]:
                n_sil += 1
                if keep[j, i]:
                    n_b += 1
                    if roi_keep[j, i]:
                        n_ab += 1
    if n_sil == 0:
        return np.inf
    denom = n_roi_keep + n_b
    if denom == 0:
        return 1.0
    return 1.0 - 2.0 * n_ab / denom


@njit(cache=True)
def camera_pose(x, standoff):
    """Rotation ``Rz @ Ry @ Rx`` and translation for a 7-parameter vector."""
    k = np.pi / 180.0
    ca, sa = np.cos(x[3] * k), np.sin(x[3] * k)
    cb, sb = np.cos(x[4] * k), np.sin(x[4] * k)
    cc, sc = np.cos(x[5] * k), np.sin(x[5] * k)
    R = np.empty((3, 3))
    R[0, 0] = cc * cb
    R[0, 1] = cc * sb * sa - sc * ca
    R[0, 2] = cc * sb * ca + sc * sa
    R[1, 0] = sc * cb
    R[1, 1] = sc * sb * sa + cc * ca
    R[1, 2] = sc * sb * ca - cc * sa
    R[2, 0] = -sb
    R[2, 1] = cb * sa
    R[2, 2] = cb * ca
    t = np.empty(3)
    t[0] = x[0]
    t[1] = x[1]
    t[2] = x[2] + standoff
    return R, t


@njit(cache=True)
def masked_dice_vector(verts, tris, x, pixels_per_mm, cx, cy, standoff, z_near,
                       roi_keep, keep, n_roi_keep):
    R, t = camera_pose(x, standoff)
    return masked_dice_mesh(verts, tris, R, t, pixels_per_mm * x[6], cx, cy, z_near,
                            roi_keep, keep, n_roi_keep)
