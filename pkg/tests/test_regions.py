"""判別多項式分類、區域圖與錐內掃描"""

import pytest

from optdes_core import regions
from optdes_core.errors import SingularityError
from optdes_core.model_core import DispersionSpec, cone_contains
from optdes_core.regions import (
    RegionVerdict,
    classify,
    cone_grid,
    conjecture_scan,
    consistency_violations,
    dinv_diagonal_gap,
    region_map,
)
from optdes_core.solvers import numeric_rhombic


def _verdict(d1, d2, confirmed, predicted="vertex", support_orbits=2, boundary_value=-1.0):
    return RegionVerdict(
        row=0,
        col=0,
        d1=d1,
        d2=d2,
        boundary_value=boundary_value,
        predicted=predicted,
        solver_confirmed=confirmed,
        support_orbits=support_orbits,
    )


def test_classify_examples(spec_k2):
    assert classify(spec_k2) == "non_vertex"
    assert classify(DispersionSpec(k=3, d0=1.0, d1=1.0, d2=0.2)) == "vertex"
    assert classify(DispersionSpec(k=2, d0=1.875, d1=2.0, d2=0.5)) == "boundary"


def test_dinv_diagonal_gap(spec_k2):
    assert dinv_diagonal_gap(spec_k2) == pytest.approx(1.75 / 3.75)
    assert dinv_diagonal_gap(DispersionSpec(k=3, d0=1.0, d1=1.0, d2=0.2)) < 0
    with pytest.raises(SingularityError):
        dinv_diagonal_gap(DispersionSpec(k=2, d0=1.0, d1=1.0, d2=1.0))


def test_excluded_cell():
    verdict = regions._evaluate_cell((0, 0, 2, 1.0, 1.0, 1.5, False, False, 10))
    assert verdict.predicted == "excluded"
    assert verdict.boundary_value == pytest.approx(-2.25)
    assert verdict.spec is None


def test_singular_cell_is_not_solved():
    verdict = regions._evaluate_cell((0, 0, 2, 1.0, 1.0, 1.0, True, False, 10))
    assert verdict.predicted == "vertex"
    assert verdict.solver_confirmed == "inconclusive"
    assert verdict.support_orbits == 0


def test_region_map_layout():
    verdicts = region_map(2, d1_range=(0.5, 3.5), d2_range=(-1.4, 3.4), resolution=5)
    assert len(verdicts) == 25
    assert [(v.row, v.col) for v in verdicts] == [(i, j) for i in range(5) for j in range(5)]
    assert verdicts[0].d1 == pytest.approx(0.5)
    assert verdicts[0].d2 == pytest.approx(-1.4)
    assert verdicts[0].predicted == "excluded"
    assert all(v.solver_confirmed is None for v in verdicts)


def test_region_map_confirmed_without_violations():
    verdicts = region_map(2, d1_range=(0.5, 3.5), d2_range=(-1.4, 3.4), resolution=5, confirm=True)
    inside = [v for v in verdicts if v.predicted != "excluded"]
    assert inside
    assert all(v.solver_confirmed in ("vertex", "non_vertex") for v in inside)
    assert consistency_violations(verdicts) == []


def test_region_map_depends_only_on_ratios():
    base = region_map(3, d1_range=(0.5, 3.0), d2_range=(-0.2, 2.0), resolution=4)
    scaled = region_map(3, d1_range=(1.0, 6.0), d2_range=(-0.4, 4.0), resolution=4, d0=2.0)
    for a, b in zip(base, scaled):
        assert (a.d1, a.d2) == pytest.approx((b.d1, b.d2))
        assert a.predicted == b.predicted
        assert a.boundary_value == pytest.approx(b.boundary_value)


def test_region_map_bad_resolution():
    with pytest.raises(ValueError):
        region_map(2, resolution=0)


@pytest.mark.parametrize("k", [2, 3, 5])
def test_cone_grid_is_strictly_inside(k):
    cells = cone_grid(k, d1_range=(0.5, 2.0), resolution=6)
    assert len(cells) == 36
    for _, _, d1, d2 in cells:
        assert cone_contains(k, 1.0, d1, d2)
        assert -d1 / (k - 1) < d2 < d1


def test_consistency_violations():
    verdicts = [
        _verdict(1.0, 0.2, "vertex"),
        _verdict(1.0, 0.2, "non_vertex"),
        _verdict(1.0, 0.2, "vertex", predicted="non_vertex", boundary_value=1.0),
        _verdict(1.0, 0.2, "vertex", predicted="non_vertex", support_orbits=1, boundary_value=1.0),
        _verdict(1.0, 0.2, "non_vertex", predicted="boundary", boundary_value=0.0),
        _verdict(1.0, 0.2, "none_found"),
    ]
    flagged = consistency_violations(verdicts)
    assert flagged == [verdicts[1], verdicts[2]]


def _fake_cells(verdicts):
    def fake(tasks, jobs, progress, desc):
        return verdicts

    return fake


def test_scan_odd_k_failures_above_half(monkeypatch):
    cells = [_verdict(1.0, 0.8, "none_found"), _verdict(1.0, 0.1, "vertex"), _verdict(1.0, 0.3, "inconclusive")]
    monkeypatch.setattr(regions, "_run_cells", _fake_cells(cells))
    summary = conjecture_scan(3, resolution=2)
    assert summary.consistent_with_conjecture
    assert summary.failures == 1
    assert summary.inconclusive == 1
    assert summary.failure_fraction == pytest.approx(1 / 3)
    assert summary.failure_locations == [(1.0, 0.8)]


def test_scan_odd_k_failure_below_half(monkeypatch):
    monkeypatch.setattr(regions, "_run_cells", _fake_cells([_verdict(1.0, 0.4, "none_found")]))
    assert not conjecture_scan(5, resolution=1).consistent_with_conjecture


def test_scan_even_k_rejects_any_failure(monkeypatch):
    monkeypatch.setattr(regions, "_run_cells", _fake_cells([_verdict(1.0, 0.9, "none_found")]))
    assert not conjecture_scan(4, resolution=1).consistent_with_conjecture


def test_scan_k2_small_grid():
    summary = conjecture_scan(2, resolution=3, d1_range=(0.5, 3.0))
    assert summary.cells == 9
    assert summary.failures == 0
    assert summary.consistent_with_conjecture


@pytest.mark.slow
@pytest.mark.parametrize("k", [3, 4, 5])
def test_scan_matches_conjecture(k):
    summary = conjecture_scan(k, resolution=40, jobs=None)
    assert summary.cells == 1600
    assert summary.consistent_with_conjecture
    if k == 4:
        assert summary.failures == 0


@pytest.fixture(scope="module")
def confirmed_k3_map():
    return region_map(3, resolution=60, confirm=True, jobs=None)


def _uncovered(v):
    return v.d2 > v.d1 / 2 and 3.0 + 9.0 * v.d1 <= 22.0 * v.d2


def _on_boundary(v):
    return min(v.d1 - v.d2, v.d1 + 2.0 * v.d2) <= 1e-9 * max(1.0, v.d1)


@pytest.mark.slow
def test_region_map_k2_confirmed():
    verdicts = region_map(2, resolution=60, confirm=True, jobs=None)
    assert consistency_violations(verdicts) == []


@pytest.mark.slow
def test_region_map_k3_confirmed(confirmed_k3_map):
    assert len(confirmed_k3_map) == 3600
    assert consistency_violations(confirmed_k3_map) == []


@pytest.mark.slow
def test_k3_uncovered_cells_have_no_two_orbit_optimum(confirmed_k3_map):
    inside = [v for v in confirmed_k3_map if v.predicted != "excluded" and not _on_boundary(v)]
    uncovered = [v for v in inside if _uncovered(v)]
    assert uncovered
    for v in uncovered:
        assert v.solver_confirmed in ("none_found", "inconclusive", "vertex"), (v.d1, v.d2)
        if v.solver_confirmed == "vertex":
            # 認證的頂點設計只會是 O_1(1) 單一軌道（兩軌道公式的權重為負）
            design = numeric_rhombic(v.spec).design
            assert {o.ell: o.weight for o in design.orbits}.get(0, 0.0) <= 1e-6, (v.d1, v.d2)
    for v in inside:
        if not _uncovered(v):
            assert v.solver_confirmed in ("vertex", "non_vertex"), (v.d1, v.d2)


def test_k3_uncovered_single_orbit_vertex_design():
    result = numeric_rhombic(DispersionSpec(k=3, d0=1.0, d1=0.62, d2=0.40))
    assert result.status == "solved"
    assert result.design.is_vertex()
    weights = {o.ell: o.weight for o in result.design.orbits}
    assert weights.get(0, 0.0) <= 1e-6
    assert weights[1] == pytest.approx(1.0, abs=1e-6)
