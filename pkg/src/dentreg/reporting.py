"""Report files, plots and overlay composites."""

from __future__ import annotations

import csv
import io
import json

import numpy as np
from PIL import Image

from .ident import STAT_KEYS, RankingReport

RED = (255, 0, 0)
GREEN = (0, 255, 0)
BLUE = (0, 0, 255)


def _contour(mask):
    """Pixels of ``mask`` with at least one 4-neighbour outside it (or on the border)."""
    m = np.asarray(mask, dtype=bool)
    p = np.pad(m, 1, constant_values=False)
    interior = p[:-2, 1:-1] & p[2:, 1:-1] & p[1:-1, :-2] & p[1:-1, 2:]
    return m & ~interior


def overlay_image(photo_mask, mesh_mask, occlusion=None, photo=None) -> np.ndarray:
    """RGB composite of two silhouettes.

    The overlap is filled green; the contour of the photograph silhouette
    is drawn red and that of the projected mesh blue, in both cases only
    where it lies outside the overlap.  Occluded pixels are removed from
    both silhouettes.  Without a ``photo`` the canvas is black with the
    occlusion mask in dark grey; with one, the fill is blended 1:1.
    """
    a = np.asarray(photo_mask, dtype=bool)
    b = np.asarray(mesh_mask, dtype=bool)
    if occlusion is not None:
        keep = ~np.asarray(occlusion, dtype=bool)
        a, b = a & keep, b & keep
    both = a & b
    if photo is None:
        img = np.zeros(a.shape + (3,), dtype=np.uint8)
        if occlusion is not None:
            img[np.asarray(occlusion, dtype=bool)] = 64
        img[both] = GREEN
    else:
        img = np.asarray(photo, dtype=np.uint8)[..., :3].copy()
        if img.shape[:2] != a.shape:
            raise ValueError(f"photo {img.shape[:2]} does not match the silhouettes {a.shape}")
        img[both] = (img[both].astype(np.uint16) // 2 + np.array(GREEN) // 2).astype(np.uint8)
    img[_contour(a) & ~both] = RED
    img[_contour(b) & ~both] = BLUE
    return img


def green_fraction(img, photo_mask, mesh_mask) -> float:
    """Share of the silhouette union drawn as pure overlap green."""
    union = np.asarray(photo_mask, bool) | np.asarray(mesh_mask, bool)
    n = int(union.sum())
    if n == 0:
        return 0.0
    green = np.all(img == np.array(GREEN, dtype=np.uint8), axis=-1)
    return float((green & union).sum()) / n


def save_png(rgb, path):
    Image.fromarray(np.asarray(rgb, dtype=np.uint8), "RGB").save(path, format="PNG", optimize=False)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def report_document(method, report: RankingReport, lr_report=None) -> dict:
    lr = None
    if lr_report is not None:
        n_h0 = sum(1 for r in lr_report.rows if r[5])
        lr = {"cllr": lr_report.cllr,
              "bandwidth_h0": lr_report.model.bandwidth_h0,
              "bandwidth_h1": lr_report.model.bandwidth_h1,
              "leave_one_out": lr_report.leave_one_out,
              "n_h0": n_h0, "n_h1": len(lr_report.rows) - n_h0,
              "excluded": lr_report.excluded}
    return {
        "method": method,
        "n_am": len(report.rankings),
        "n_pm": report.n_pm,
        "statistics": report.statistics,
        "positions": dict(sorted(report.positions.items())),
        "cmc": [[k, v] for k, v in report.cmc],
        "unscorable_cells": report.unscorable_cells,
        "lr": lr,
        "rankings": dict(sorted(report.rankings.items())),
    }


def statistics_csv(report: RankingReport) -> str:
    return _csv_text(STAT_KEYS, [[repr(report.statistics[k]) for k in STAT_KEYS]])


def positions_csv(report: RankingReport, truth) -> str:
    rows = [[am, truth.get(am, ""), pos] for am, pos in sorted(report.positions.items())]
    return _csv_text(("am_id", "truth_pm_id", "position"), rows)


def cmc_csv(report: RankingReport) -> str:
    return _csv_text(("rank", "identification_rate"), [[k, repr(v)] for k, v in report.cmc])


def lr_csv(lr_report) -> str:
    rows = [[a, p, repr(s), repr(lr), repr(lg), int(same)]
            for a, p, s, lr, lg, same in lr_report.rows]
    return _csv_text(("am_id", "pm_id", "score", "LR", "log10LR", "same_source"), rows)


def density_csv(lr_report) -> str:
    d = lr_report.density
    rows = [[repr(float(x)), repr(float(a)), repr(float(b))]
            for x, a, b in zip(d["score"], d["pdf_h0"], d["pdf_h1"])]
    return _csv_text(("score", "pdf_same_source", "pdf_different_source"), rows)


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt



def plot_cmc(report: RankingReport, path, title=None):
    plt = _pyplot()
    from matplotlib.ticker import MaxNLocator
    ks = [k for k, _ in report.cmc]
    rates = [v for _, v in report.cmc]
    fig, ax = plt.subplots(figsize=(5, 4), dpi=100)
    ax.step(ks, rates, where="post", color="tab:blue")
    ax.plot(ks, rates, "o", ms=3, color="tab:blue")
    ax.set_xlim(0.5, max(ks) + 0.5)
    ax.xaxis.set_major_locator(MaxNLocator(integer=True))
    ax.set_ylim(0.0, 1.02)
    ax.set_xlabel("rank")
    ax.set_ylabel("identification rate")
    if title:
        ax.set_title(title)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="png", metadata={"Software": None})
    plt.close(fig)


def plot_density(lr_report, path, title=None):
    plt = _pyplot()
    d = lr_report.density
    fig, ax = plt.subplots(figsize=(5, 4), dpi=100)
    ax.plot(d["score"], d["pdf_h0"], color="tab:green", label="same source")
    ax.plot(d["score"], d["pdf_h1"], color="tab:red", label="different source")
    ax.set_xlabel("score")
    ax.set_ylabel("density")
    ax.set_ylim(bottom=0.0)
    ax.legend()
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="png", metadata={"Software": None})
    plt.close(fig)


def dump_json(doc, path):
    with open(path, "w", newline="\n") as fh:
        json.dump(doc, fh, indent=1, sort_keys=False)
        fh.write("\n")


def write_text(text, path):
    with open(path, "w", newline="") as fh:
        fh.write(text)
