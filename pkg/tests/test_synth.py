import hashlib
import os

import numpy as np

from dentreg.mesh import LANDMARK_SETS, SMILE_LINE
from dentreg.regfit import RegionFitness
from dentreg.synth import generate_cohort, generate_subject, render_case, write_cohort


def _digest(root):
    h = hashlib.sha256()
    for dirpath, _, files in sorted(os.walk(root)):
        for name in sorted(files):
            path = os.path.join(dirpath, name)
            h.update(os.path.relpath(path, root).encode())
            with open(path, "rb") as fh:
                h.update(fh.read())
    return h.hexdigest()


def test_subject_is_deterministic():
    a, b = generate_subject(5), generate_subject(5)
    np.testing.assert_array_equal(a[1].vertices, b[1].vertices)
    np.testing.assert_array_equal(a[2].positions, b[2].positions)


def test_zero_perturbation_is_canonical():
    ref = generate_subject(0, perturbation=0)[1].vertices
    for seed in (1, 2, 99):
        np.testing.assert_array_equal(generate_subject(seed, perturbation=0)[1].vertices, ref)


def test_subjects_differ():
    assert not np.allclose(generate_subject(1)[1].vertices, generate_subject(2)[1].vertices)


def test_landmark_counts():
    _, _, l3 = generate_subject(3)
    assert len(l3.names) == 30 and l3.dim == 3
    assert sum(n in LANDMARK_SETS["set3"] for n in l3.names) == 14


def test_level_a_is_unoccluded():
    case = render_case(generate_subject(4), occlusion_level="A")
    assert not case.segmentation.occlusion.any() and case.landmarks2d.present.all()


def test_level_c_hides_smile_line():
    case = render_case(generate_subject(4), occlusion_level="C")
    present = dict(zip(case.landmarks2d.names, case.landmarks2d.present))
    assert case.segmentation.occlusion.any()
    assert not all(present[n] for n in SMILE_LINE)


def test_true_camera_self_consistent():
    for k, case in enumerate(generate_cohort({"A": 3}, seed=11)):
        fit = RegionFitness(case.segmentation, case.mesh, case.intrinsics)
        assert fit(case.camera) < 0.02, k


def test_write_cohort_is_byte_identical(tmp_path):
    a = write_cohort(tmp_path / "a", {"A": 1, "B": 1, "C": 1}, seed=2)
    write_cohort(tmp_path / "b", {"A": 1, "B": 1, "C": 1}, seed=2)
    assert os.path.basename(a) == "manifest.json"
    assert _digest(tmp_path / "a") == _digest(tmp_path / "b")


def test_large_cohort_manifest(tmp_path):
    # a 142-case cohort (50/50/42), written with tiny images to stay fast
    import json

    path = write_cohort(tmp_path, {"A": 50, "B": 50, "C": 42}, seed=0, image_size=(64, 48))
    with open(path) as fh:
        m = json.load(fh)
    assert len(m["am"]) == len(m["pm"]) == len(m["truth"]) == 142
    levels = [a["occlusion_level"] for a in m["am"]]
    assert (levels.count("A"), levels.count("B"), levels.count("C")) == (50, 50, 42)


def test_true_camera_beats_random_draws():
    from dentreg.camera import REGION_LOWER, REGION_UPPER

    case = generate_cohort({"B": 1}, seed=21)[0]
    fit = RegionFitness(case.segmentation, case.mesh, case.intrinsics)
    rng = np.random.default_rng(0)
    best_random = min(fit(rng.uniform(REGION_LOWER, REGION_UPPER)) for _ in range(1000))
    assert fit(case.camera) < best_random


def test_true_camera_reprojects_exactly():
    from dentreg.mesh import pair_landmarks
    from dentreg.pnpf import reprojection_rmse

    case = generate_cohort({"A": 1}, seed=22)[0]
    pairs = pair_landmarks(case.landmarks3d, case.landmarks2d, "set1")[:2]
    assert reprojection_rmse(pairs, case.camera, case.intrinsics) == 0.0


def test_subjects_are_distinct_under_one_camera():
    from dentreg.camera import CameraParams, IntrinsicConventions
    from dentreg.mesh import rasterize_silhouette

    ic = IntrinsicConventions(320, 240)
    cam = CameraParams(0, 0, -40, 0, 0, 0, 150)
    sils = [rasterize_silhouette(generate_subject(s)[1], cam, ic) for s in range(6)]
    for i in range(6):
        for j in range(i + 1, 6):
            assert (sils[i] ^ sils[j]).sum() >= 0.01 * sils[i].sum()
