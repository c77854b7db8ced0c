"""Likelihood ratios from comparison scores via Gaussian kernel densities.

Hypothesis labels follow the usual forensic convention: ``h0`` is the
same-source population (the AM photo and PM scan belong to one person) and
``h1`` the different-source population.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (EmptyPopulation, NonpositiveBandwidth, NonpositiveLR,
                     UnfittedModel)

DENSITY_FLOOR = 1e-12
_SQRT_2PI = math.sqrt(2.0 * math.pi)


def kde_pdf(samples, bandwidth, x):
    """Gaussian kernel density estimate at ``x`` (scalar or array)."""
    s = np.asarray(samples, dtype=float).ravel()
    if s.size == 0:
        raise EmptyPopulation("kernel density needs at least one sample")
    if not bandwidth > 0:
        raise NonpositiveBandwidth(f"bandwidth must be positive, got {bandwidth}")
    x_arr = np.asarray(x, dtype=float)
    z = (x_arr[..., None] - s) / bandwidth
    dens = np.exp(-0.5 * z * z).sum(axis=-1) / (s.size * bandwidth * _SQRT_2PI)
    return float(dens) if np.ndim(x) == 0 else dens


def silverman_bandwidth(samples) -> float:
    """Silverman's rule of thumb, 0.9 * min(sd, IQR / 1.34) * n ** -0.2.

    Falls back to the standard deviation when the IQR is zero.  When every
    sample is identical the width is a fixed tiny value independent of n, so
    two constant populations at the same score give identical densities.
    """
    s = np.asarray(samples, dtype=float).ravel()
    if s.size < 2:
        raise EmptyPopulation("bandwidth selection needs at least two samples")
    sd = s.std(ddof=1)
    q75, q25 = np.percentile(s, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34)
    if not spread > 0:
        spread = sd
    if not spread > 0:
        return float(1e-6 * max(abs(s).max(), 1.0))
    return float(0.9 * spread * s.size ** -0.2)


@dataclass(frozen=True)
class LRModel:
    h0_scores: np.ndarray
    h1_scores: np.ndarray
    bandwidth_h0: float
    bandwidth_h1: float
    floor: float = DENSITY_FLOOR

    @classmethod
    def fit(cls, h0_scores, h1_scores, bandwidth="silverman", floor=DENSITY_FLOOR) -> "LRModel":
        h0 = np.asarray(h0_scores, dtype=float).ravel()
        h1 = np.asarray(h1_scores, dtype=float).ravel()
        if h0.size < 2 or h1.size < 2:
            raise EmptyPopulation("each population needs at least two scores")
        if not (np.all(np.isfinite(h0)) and np.all(np.isfinite(h1))):
            raise ValueError("scores must be finite")
        if bandwidth == "silverman":
            b0, b1 = silverman_bandwidth(h0), silverman_bandwidth(h1)
        else:
            b0 = b1 = float(bandwidth)
        if not (b0 > 0 and b1 > 0):
            raise NonpositiveBandwidth("bandwidths must be positive")
        return cls(h0, h1, b0, b1, floor)

    def pdf_h0(self, x):
        return kde_pdf(self.h0_scores, self.bandwidth_h0, x)

    def pdf_h1(self, x):
        return kde_pdf(self.h1_scores, self.bandwidth_h1, x)


def likelihood_ratio(model: LRModel | None, score):
    """Floored density ratio p(score | same source) / p(score | different source)."""
    if model is None:
        raise UnfittedModel("likelihood ratio needs a fitted model")
    num = np.maximum(model.pdf_h0(score), model.floor)
    den = np.maximum(model.pdf_h1(score), model.floor)
    lr = num / den
    return float(lr) if np.ndim(score) == 0 else lr


def cllr(lr_h0, lr_h1) -> float:
    """Log-likelihood-ratio cost of same-source and different-source LRs."""
    a = np.asarray(lr_h0, dtype=float).ravel()
    b = np.asarray(lr_h1, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise EmptyPopulation("cllr needs LRs from both populations")
    if np.any(~(a > 0)) or np.any(~(b > 0)):
        raise NonpositiveLR("likelihood ratios must be positive")
    return float(0.5 * (np.mean(np.log2(1.0 + 1.0 / a)) + np.mean(np.log2(1.0 + b))))


@dataclass
class LRReport:
    rows: list            # (am_id, pm_id, score, LR, log10LR, same_source)
    cllr: float
    model: LRModel
    density: dict         # "score", "pdf_h0", "pdf_h1" arrays
    leave_one_out: bool
    excluded: int


def fit_and_report(cells, truth, bandwidth="silverman", floor=DENSITY_FLOOR,
                   leave_one_out=False, grid_points=256) -> LRReport:
    """Fit both score densities from a score matrix and evaluate every LR.

    ``cells`` maps ``(am_id, pm_id)`` to ComparisonScore (or a plain score);
    a cell is same-source when ``truth[am_id] == pm_id``.  Unscorable cells
    are left out of both populations and counted in ``excluded``.  With
    ``leave_one_out`` each comparison's own score is removed from its
    population before its LR is evaluated.
    """
    keys, scores, labels = [], [], []
    excluded = 0
    for key in sorted(cells):
        cell = cells[key]
        score = getattr(cell, "score", cell)
        if getattr(cell, "unscorable", False) or not math.isfinite(score):
            excluded += 1
            continue
        keys.append(key)
        scores.append(float(score))
        labels.append(truth.get(key[0]) == key[1])
    scores = np.asarray(scores)
    labels = np.asarray(labels, dtype=bool)
    if labels.sum() < 2 or (~labels).sum() < 2:
        raise EmptyPopulation("need at least two same-source and two different-source scores")
    model = LRModel.fit(scores[labels], scores[~labels], bandwidth, floor)

    if leave_one_out:
        lrs = np.empty(len(scores))
        idx0 = np.flatnonzero(labels)
        idx1 = np.flatnonzero(~labels)
        for i in range(len(scores)):
            if labels[i]:
                sub = LRModel(scores[idx0[idx0 != i]], model.h1_scores,
                              model.bandwidth_h0, model.bandwidth_h1, floor)
            else:
                sub = LRModel(model.h0_scores, scores[idx1[idx1 != i]],
                              model.bandwidth_h0, model.bandwidth_h1, floor)
            lrs[i] = likelihood_ratio(sub, scores[i])
    else:
        lrs = likelihood_ratio(model, scores)

    value = cllr(lrs[labels], lrs[~labels])
    rows = [(a, p, float(s), float(lr), float(np.log10(lr)), bool(lab))
            for (a, p), s, lr, lab in zip(keys, scores, lrs, labels)]
    pad = 3.0 * max(model.bandwidth_h0, model.bandwidth_h1)
    grid = np.linspace(scores.min() - pad, scores.max() + pad, grid_points)
    density = {"score": grid, "pdf_h0": model.pdf_h0(grid), "pdf_h1": model.pdf_h1(grid)}
    return LRReport(rows, value, model, density, leave_one_out, excluded)
