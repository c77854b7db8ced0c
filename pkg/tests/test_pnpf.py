import numpy as np
import pytest

from dentreg.camera import CameraParams, IntrinsicConventions, project_all
from dentreg.errors import Degenerate, TooFewPairs
from dentreg.mesh import SMILE_LINE, VOCABULARY, LandmarkSet
from dentreg.pnpf import SolverOptions, reprojection_rmse, score_landmark_comparison, solve_pnpf
from dentreg.synth import generate_subject

IC = IntrinsicConventions(320, 240)


def _case(seed, noise=0.0):
    rng = np.random.default_rng(seed)
    _, _, l3 = generate_subject(seed)
    cam = CameraParams(*rng.uniform([-8, -8, -80, -12, -20, -8, 110], [8, 8, 30, 12, 20, 8, 190]))
    uv = project_all(l3.positions, cam, IC) + rng.normal(0, noise, (30, 2)) * (noise > 0)
    return l3, uv, cam


def test_rmse_examples():
    p3 = np.zeros((1, 3))
    c = CameraParams(0, 0, 0, 0, 0, 0, 50)
    centre = project_all(p3, c, IC)
    assert reprojection_rmse((p3, centre), c, IC) == 0.0
    assert reprojection_rmse((p3, centre + [3, 4]), c, IC) == pytest.approx(5.0)
    p3 = np.zeros((2, 3))
    p2 = np.vstack([centre, centre + [3, 4]])
    assert reprojection_rmse((p3, p2), c, IC) == pytest.approx(np.sqrt(12.5))
    assert reprojection_rmse((p3, p2), c, IC, mode="literal") == pytest.approx(np.sqrt(2.5))


def test_noiseless_recovery():
    l3, uv, cam = _case(1)
    sol = solve_pnpf((l3.positions, uv), IC)
    assert sol.rmse_px < 1e-3
    np.testing.assert_allclose(project_all(l3.positions, sol.params, IC), uv, atol=1e-3)
    assert not sol.coplanar and sol.n_pairs == 30


def test_noisy_median_in_band():
    rmses = []
    for s in range(15):
        l3, uv, _ = _case(s, 2.0)
        rmses.append(solve_pnpf((l3.positions, uv), IC).rmse_px)
    assert 1.0 <= np.median(rmses) <= 4.0


def test_too_few_pairs():
    l3, uv, _ = _case(2)
    with pytest.raises(TooFewPairs):
        solve_pnpf((l3.positions[:5], uv[:5]), IC, SolverOptions(min_pairs=6))


def test_collinear_points_are_degenerate():
    p3 = np.column_stack([np.arange(8.0), np.zeros(8), np.zeros(8)])
    p2 = np.column_stack([np.arange(8.0), np.zeros(8)]) + 100
    with pytest.raises(Degenerate):
        solve_pnpf((p3, p2), IC)


def test_planar_input_does_not_crash():
    # 2D landmarks reused as a flat z = 0 "scan"
    rng = np.random.default_rng(3)
    p2 = rng.uniform(50, 250, (12, 2))
    p3 = np.column_stack([p2 - p2.mean(axis=0), np.zeros(12)])
    sol = solve_pnpf((p3, p2), IC)
    assert sol.coplanar and np.isfinite(sol.rmse_px)


def test_deterministic():
    l3, uv, _ = _case(4, 2.0)
    a = solve_pnpf((l3.positions, uv), IC)
    b = solve_pnpf((l3.positions, uv), IC)
    assert a.params == b.params and a.rmse_px == b.rmse_px


def _sets(seed):
    l3, uv, _ = _case(seed)
    return l3, LandmarkSet(VOCABULARY, uv, np.ones(30, bool), (IC.image_width_px, IC.image_height_px))


def test_matching_scan_scores_lowest():
    _, photo = _sets(10)
    scores = [score_landmark_comparison(_sets(s)[0], photo, "set1", IC).score for s in (10, 11, 12, 13)]
    assert scores[0] == min(scores) and scores[0] < 1e-3


def test_absent_gingival_landmarks_still_solve():
    l3, photo = _sets(5)
    photo = photo.with_absent([n for n in VOCABULARY if n.startswith(("G", "P"))])
    cell = score_landmark_comparison(l3, photo, "set1", IC)
    assert not cell.unscorable and cell.extra["n_pairs"] == 19


def test_too_few_pairs_is_unscorable():
    l3, photo = _sets(6)
    photo = photo.with_absent(SMILE_LINE[3:])
    cell = score_landmark_comparison(l3, photo, "set3", IC, am_id="a", pm_id="b")
    assert cell.unscorable and "TooFewPairs" in cell.reason
