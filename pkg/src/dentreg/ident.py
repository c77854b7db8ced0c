"""Cross-comparison engine: score matrices, per-AM rankings, statistics and CMC."""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .camera import IntrinsicConventions
from .errors import (DataError, EmptyInput, ManifestError, MissingScores,
                     PositionOutOfRange)
from .mesh import load_landmarks, load_mesh
from .mvmo import OptimizerConfig
from .pnpf import SolverOptions, score_landmark_comparison
from .records import METHODS, ComparisonScore
from .regfit import load_segmentation, score_region_comparison

STAT_KEYS = ("AVG", "MIN", "Q1", "Q2", "Q3", "P95", "P99", "MAX")
_PERCENTILES = {"Q1": 25, "Q2": 50, "Q3": 75, "P95": 95, "P99": 99}
SCORE_COLUMNS = ("am_id", "pm_id", "method", "score", "unscorable", "seed", "evaluations")


@dataclass(frozen=True)
class AMCase:
    id: str
    segmentation: str | None = None
    landmarks: str | None = None
    photo: str | None = None
    image_size: tuple | None = None
    occlusion_level: str | None = None


@dataclass(frozen=True)
class PMCase:
    id: str
    mesh: str
    landmarks: str | None = None


@dataclass(frozen=True)
class CompareSettings:
    """Everything a single cell evaluation needs besides the two cases."""

    method: str = "regions"
    intrinsics: IntrinsicConventions = field(default_factory=IntrinsicConventions)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    solver: SolverOptions = field(default_factory=SolverOptions)
    restarts: int = 3

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")


@dataclass
class RankingReport:
    rankings: dict
    positions: dict
    statistics: dict
    cmc: list
    n_pm: int
    unscorable_cells: int = 0


def _image_size(am: AMCase, landmarks=None):
    if landmarks is not None and landmarks.image_size is not None:
        return landmarks.image_size
    if am.image_size is not None:
        return tuple(am.image_size)
    for path in (am.segmentation, am.photo):
        if path and os.path.exists(path):
            with Image.open(path) as im:
                return im.size
    raise DataError(f"{am.id}: cannot determine the photograph size")


def evaluate_cell(am: AMCase, pm: PMCase, settings: CompareSettings) -> ComparisonScore:
    """Score one (AM, PM) cell; data problems become an unscorable cell."""
    method = settings.method
    seed = settings.optimizer.seed if method == "regions" else None
    try:
        if method == "regions":
            if not am.segmentation:
                raise DataError("no segmentation for the photograph")
            seg = load_segmentation(am.segmentation)
            mesh = load_mesh(pm.mesh)
            ic = settings.intrinsics.with_image_size(seg.width, seg.height)
            return score_region_comparison(seg, mesh, ic, settings.optimizer, settings.restarts,
                                           am_id=am.id, pm_id=pm.id)
        if not (am.landmarks and os.path.exists(am.landmarks)):
            raise DataError("missing photograph landmark file")
        if not (pm.landmarks and os.path.exists(pm.landmarks)):
            raise DataError("missing scan landmark file")
        l2 = load_landmarks(am.landmarks)
        l3 = load_landmarks(pm.landmarks)
        ic = settings.intrinsics.with_image_size(*_image_size(am, l2))
        subset = method.split("-", 1)[1]
        return score_landmark_comparison(l3, l2, subset, ic, settings.solver,
                                         am_id=am.id, pm_id=pm.id)
    except DataError as exc:
        return ComparisonScore.failed(am.id, pm.id, method, f"{type(exc).__name__}: {exc}", seed)


def _evaluate_packed(args):
    return evaluate_cell(*args)


def check_cases(am_cases, pm_cases, method):
    """Manifest-level checks that abort a run before any work starts."""
    if not am_cases or not pm_cases:
        raise ManifestError("manifest needs at least one AM and one PM case")
    for kind, cases in (("AM", am_cases), ("PM", pm_cases)):
        ids = [c.id for c in cases]
        dup = {i for i in ids if ids.count(i) > 1}
        if dup:
            raise ManifestError(f"duplicate {kind} ids {sorted(dup)}")
    for pm in pm_cases:
        if not os.path.exists(pm.mesh):
            raise ManifestError(f"mesh file not found: {pm.mesh}", pm.id)
    if method == "regions":
        for am in am_cases:
            if not am.segmentation or not os.path.exists(am.segmentation):
                raise ManifestError(f"segmentation not found: {am.segmentation}", am.id)


def run_cells(am_cases, pm_cases, settings: CompareSettings, workers=1, done=None, on_cell=None):
    """Evaluate every (AM, PM) cell not already in ``done``.

    Returns a dict keyed by ``(am_id, pm_id)``.  ``on_cell`` is called with
    each newly computed :class:`ComparisonScore` as it completes.
    """
    check_cases(am_cases, pm_cases, settings.method)
    results = dict(done or {})
    todo = [(am, pm, settings) for am in am_cases for pm in pm_cases
            if (am.id, pm.id) not in results]
    if workers is None or workers < 1:
        workers = os.cpu_count() or 1
    if workers == 1 or len(todo) <= 1:
        outputs = map(_evaluate_packed, todo)
        for cell in outputs:
            results[(cell.am_id, cell.pm_id)] = cell
            if on_cell:
                on_cell(cell)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for cell in pool.map(_evaluate_packed, todo, chunksize=1):
                results[(cell.am_id, cell.pm_id)] = cell
                if on_cell:
                    on_cell(cell)
    return results


def build_ranking(scores, truth_pm=None, pm_ids=None):
    """Order one AM row's candidates from most to least similar.

    Sorted by ascending score with unscorable cells last and ties broken by
    PM id.  Returns ``(ordered_pm_ids, correct_position)``; the position is
    1-based, or None when ``truth_pm`` is not given.
    """
    scores = list(scores)
    rows = {s.am_id for s in scores}
    if len(rows) > 1:
        raise ValueError(f"a ranking must come from one AM row, got {sorted(rows)}")
    present = {s.pm_id for s in scores}
    if len(present) != len(scores):
        raise ValueError("duplicate PM entries in one AM row")
    if pm_ids is not None:
        missing = set(pm_ids) - present
        if missing:
            raise MissingScores(f"no score for PM cases {sorted(missing)}")
    ordered = sorted(scores, key=lambda s: (s.unscorable, s.score if not s.unscorable else 0.0,
                                            s.pm_id))
    ids = [s.pm_id for s in ordered]
    position = None
    if truth_pm is not None:
        if truth_pm not in ids:
            raise MissingScores(f"true match {truth_pm!r} has no score")
        position = ids.index(truth_pm) + 1
    return ids, position


def ranking_statistics(positions) -> dict:
    """AVG, MIN, quartiles, P95, P99 and MAX of correct ranking positions.

    Percentiles interpolate linearly at index q * (n - 1) of the sorted list,
    so fractional values are expected.
    """
    pos = np.sort(np.asarray(list(positions), dtype=float))
    if pos.size == 0:
        raise EmptyInput("no ranking positions")
    stats = {"AVG": float(pos.mean()), "MIN": float(pos[0]), "MAX": float(pos[-1])}
    for key, q in _PERCENTILES.items():
        stats[key] = _percentile(pos, q)
    return {k: stats[k] for k in STAT_KEYS}


def _percentile(sorted_values, q: int) -> float:
    # integer index arithmetic keeps e.g. 95% of 4 at exactly 3 + 80/100
    idx, rem = divmod(q * (len(sorted_values) - 1), 100)
    lo = sorted_values[idx]
    if rem == 0:
        return float(lo)
    return float(lo + (rem / 100) * (sorted_values[idx + 1] - lo))


def cmc_curve(positions, n):
    """``[(k, fraction of positions <= k)]`` for k = 1..n."""
    pos = np.asarray(list(positions), dtype=int)
    if pos.size == 0:
        raise EmptyInput("no ranking positions")
    if pos.min() < 1 or pos.max() > n:
        raise PositionOutOfRange(f"positions must lie in [1, {n}]")
    counts = np.bincount(pos, minlength=n + 1)[1:].cumsum()
    return [(k, float(c) / pos.size) for k, c in zip(range(1, n + 1), counts)]


def rank_matrix(cells, truth, am_ids=None, pm_ids=None) -> RankingReport:
    """Rankings, statistics and CMC from a complete score matrix."""
    cells = dict(cells)
    if am_ids is None:
        am_ids = sorted({a for a, _ in cells})
    if pm_ids is None:
        pm_ids = sorted({p for _, p in cells})
    rankings, positions = {}, {}
    for am in am_ids:
        row = [cells[(am, pm)] for pm in pm_ids if (am, pm) in cells]
        ids, pos = build_ranking(row, truth.get(am), pm_ids)
        rankings[am] = ids
        if pos is not None:
            positions[am] = pos
    stats = ranking_statistics(positions.values())
    cmc = cmc_curve(positions.values(), len(pm_ids))
    unscorable = sum(1 for c in cells.values() if c.unscorable)
    return RankingReport(rankings, positions, stats, cmc, len(pm_ids), unscorable)


def run_cohort(am_cases, pm_cases, settings: CompareSettings, truth, workers=1):
    """Score every cell and assemble the ranking report.

    Returns ``(report, cells)`` where ``cells`` maps ``(am_id, pm_id)`` to
    :class:`ComparisonScore`.
    """
    cells = run_cells(am_cases, pm_cases, settings, workers)
    report = rank_matrix(cells, truth, [a.id for a in am_cases], [p.id for p in pm_cases])
    return report, cells


def _fmt(x):
    return "" if x is None or (isinstance(x, float) and not math.isfinite(x)) else repr(float(x))


def scores_to_csv(cells) -> str:
    """Score matrix as CSV text, rows sorted by (am_id, pm_id)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCORE_COLUMNS)
    for key in sorted(cells):
        c = cells[key]
        w.writerow([c.am_id, c.pm_id, c.method, "" if c.unscorable else _fmt(c.score),
                    int(c.unscorable), "" if c.seed is None else int(c.seed), int(c.evaluations)])
    return buf.getvalue()


def read_scores_csv(path):
    cells = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != SCORE_COLUMNS:
            raise DataError(f"{path}: unexpected score columns {reader.fieldnames}")
        for row in reader:
            unscorable = row["unscorable"] == "1"
            score = math.inf if unscorable else float(row["score"])
            cell = ComparisonScore(row["am_id"], row["pm_id"], row["method"], score, unscorable,
                                   seed=int(row["seed"]) if row["seed"] else None,
                                   evaluations=int(row["evaluations"]))
            cells[(cell.am_id, cell.pm_id)] = cell
    return cells
