import numpy as np
import pytest

from dentreg.errors import EmptyInput, ManifestError, MissingScores, PositionOutOfRange
from dentreg.ident import (AMCase, CompareSettings, PMCase, build_ranking, cmc_curve,
                           rank_matrix, ranking_statistics, read_scores_csv, run_cells,
                           scores_to_csv)
from dentreg.records import ComparisonScore


def cell(pm, score, am="a", unscorable=False):
    if unscorable:
        return ComparisonScore.failed(am, pm, "regions", "test")
    return ComparisonScore(am, pm, "regions", score)


def test_ranking_example():
    ids, pos = build_ranking([cell("B", 0.2), cell("A", 0.1), cell("C", 0.3)], "A")
    assert ids == ["A", "B", "C"] and pos == 1


def test_unscorable_truth_ranks_last():
    row = [cell(f"P{k}", 0.1 * k) for k in range(9)] + [cell("T", 0, unscorable=True)]
    assert build_ranking(row, "T")[1] == 10


def test_unscorable_ties_break_by_id():
    row = [cell("Z", 0, unscorable=True), cell("Y", 0, unscorable=True), cell("A", 0.5)]
    assert build_ranking(row)[0] == ["A", "Y", "Z"]


def test_equal_scores_break_by_id():
    assert build_ranking([cell("b", 0.5), cell("a", 0.5)], "b")[1] == 2


def test_ranking_rejects_mixed_rows():
    with pytest.raises(ValueError):
        build_ranking([cell("A", 0.1, am="x"), cell("B", 0.2, am="y")])


def test_ranking_requires_every_pm():
    with pytest.raises(MissingScores):
        build_ranking([cell("A", 0.1)], "A", pm_ids=["A", "B"])


def test_statistics_examples():
    s = ranking_statistics([1, 1, 2, 1])
    assert (s["AVG"], s["MIN"], s["MAX"]) == (1.25, 1.0, 2.0)
    assert ranking_statistics([1, 1, 1, 2, 6])["P95"] == 5.2
    with pytest.raises(EmptyInput):
        ranking_statistics([])


def test_statistics_interpolation_matches_hand_formula(rng):
    for _ in range(50):
        pos = np.sort(rng.integers(1, 30, rng.integers(1, 40)))
        stats = ranking_statistics(pos)
        for key, q in (("Q1", 25), ("Q2", 50), ("Q3", 75), ("P95", 95), ("P99", 99)):
            h = q / 100 * (len(pos) - 1)
            lo = int(np.floor(h))
            hi = min(lo + 1, len(pos) - 1)
            assert stats[key] == pytest.approx(pos[lo] + (h - lo) * (pos[hi] - pos[lo]), abs=1e-12)


def test_cmc_examples():
    assert cmc_curve([1, 1, 2], 3) == [(1, 2 / 3), (2, 1.0), (3, 1.0)]
    assert all(v == 1.0 for _, v in cmc_curve([1] * 5, 7))
    assert cmc_curve([4], 4) == [(1, 0.0), (2, 0.0), (3, 0.0), (4, 1.0)]
    with pytest.raises(PositionOutOfRange):
        cmc_curve([5], 4)


def test_rank_matrix_uses_rows_only():
    # a row with uniformly worse scores still ranks its own truth first
    cells = {}
    for i, am in enumerate("abc"):
        for j, pm in enumerate("abc"):
            cells[(am, pm)] = ComparisonScore(am, pm, "regions", 10 * i + (0 if i == j else 1 + j))
    rep = rank_matrix(cells, {a: a for a in "abc"})
    assert rep.positions == {"a": 1, "b": 1, "c": 1} and rep.statistics["AVG"] == 1.0


def test_scores_csv_round_trip(tmp_path):
    cells = {("a", "p"): cell("p", 0.1234567890123), ("a", "q"): cell("q", 0, unscorable=True)}
    text = scores_to_csv(cells)
    (tmp_path / "s.csv").write_text(text)
    back = read_scores_csv(tmp_path / "s.csv")
    assert back[("a", "p")].score == 0.1234567890123 and back[("a", "q")].unscorable
    assert scores_to_csv(back) == text


def test_missing_mesh_names_the_case(tmp_path):
    am = [AMCase("a1", segmentation=str(tmp_path / "x.png"))]
    pm = [PMCase("p7", str(tmp_path / "missing.obj"))]
    with pytest.raises(ManifestError, match="p7"):
        run_cells(am, pm, CompareSettings(method="landmarks-set1"))


def test_missing_landmark_files_make_row_unscorable(tmp_path, small_cohort):
    from dentreg.mesh import save_landmarks, save_obj

    pms = []
    for case in small_cohort[:2]:
        save_obj(case.mesh, tmp_path / f"{case.case_id}.obj")
        save_landmarks(case.landmarks3d, tmp_path / f"{case.case_id}_l3.json")
        pms.append(PMCase(case.case_id, str(tmp_path / f"{case.case_id}.obj"),
                          str(tmp_path / f"{case.case_id}_l3.json")))
    c0 = small_cohort[0]
    save_landmarks(c0.landmarks2d, tmp_path / "am0.json")
    ams = [AMCase("good", landmarks=str(tmp_path / "am0.json")),
           AMCase("bad", landmarks=str(tmp_path / "nope.json"))]
    cells = run_cells(ams, pms, CompareSettings(method="landmarks-set3"))
    assert len(cells) == 4
    assert all(cells[("bad", p.id)].unscorable for p in pms)
    assert not cells[("good", c0.case_id)].unscorable
