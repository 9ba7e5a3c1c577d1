"""敏感度函數、箱型最小化與等價定理判定"""

import itertools
import json
import math

import numpy as np
import pytest

from optdes_core.designs import DiscreteDesign, Orbit, RhombicDesign, to_discrete, vertex_design
from optdes_core.equivalence import (
    kw_verify,
    min_psi_box,
    min_psi_dense,
    nonvertex_condition,
    psi,
    psi_many,
    vertex_conditions,
)
from optdes_core.errors import DomainError
from optdes_core.information import GammaBlocks, gamma_blocks, info_blocks_rhombic, info_dense
from optdes_core.model_core import DispersionSpec, variance_many


def _k2_case_i_design(d0, d1, d2):
    x0, x1 = math.sqrt(d0 / (d1 + d2)), math.sqrt(d0 / (d1 - d2))
    return RhombicDesign(k=2, orbits=[Orbit(ell=0, level=x0, weight=0.5), Orbit(ell=1, level=x1, weight=0.5)])


def test_psi_zero_gamma():
    gb = GammaBlocks(k=3, g0=0.0, g1=0.0, g2=0.0)
    assert psi(gb, [0.3, -0.2, 1.0]) == 0.0


def test_psi_vertex_pattern(rng):
    g0, k = 1.7, 4
    gb = GammaBlocks(k=k, g0=g0, g1=-g0 / k, g2=0.0)
    for x in rng.uniform(-1.0, 1.0, size=(20, k)):
        assert psi(gb, x) == pytest.approx(g0 * (1.0 - x @ x / k))


def test_psi_on_orbit_vertex():
    g0, g1, g2 = 0.3, -0.7, 0.25
    gb = GammaBlocks(k=3, g0=g0, g1=g1, g2=g2)
    assert psi(gb, [-1.0, 1.0, 1.0]) == pytest.approx(g0 + 3 * g1 - 2 * g2)


def test_psi_outside_box():
    with pytest.raises(DomainError):
        psi(GammaBlocks(k=2, g0=0.0, g1=0.0, g2=0.0), [1.5, 0.0])


def test_min_psi_box_examples():
    value, point = min_psi_box(GammaBlocks(k=3, g0=2.0, g1=-2.0 / 3.0, g2=0.0))
    assert value == pytest.approx(0.0, abs=1e-14)
    np.testing.assert_allclose(np.abs(point), 1.0)

    value, point = min_psi_box(GammaBlocks(k=2, g0=1.0, g1=1.0, g2=0.0))
    assert value == pytest.approx(1.0)
    np.testing.assert_allclose(point, [0.0, 0.0])

    value, point = min_psi_box(GammaBlocks(k=2, g0=0.0, g1=0.0, g2=1.0))
    assert value == pytest.approx(-2.0)
    assert point[0] * point[1] == pytest.approx(-1.0)


def test_min_psi_box_is_deterministic():
    gb = GammaBlocks(k=3, g0=2.0, g1=-2.0 / 3.0, g2=0.0)
    first = min_psi_box(gb)[1]
    np.testing.assert_array_equal(first, min_psi_box(gb)[1])
    np.testing.assert_array_equal(first, [-1.0, -1.0, -1.0])


def test_min_psi_box_beats_dense_grid(rng):
    for _ in range(100):
        k = int(rng.integers(2, 4))
        gb = GammaBlocks(k=k, g0=rng.normal(), g1=rng.normal(), g2=rng.normal())
        value, point = min_psi_box(gb)
        n = 101 if k == 2 else 31
        axis = np.linspace(-1.0, 1.0, n)
        grid = np.array(list(itertools.product(axis, repeat=k)))
        assert value <= psi_many(gb, grid).min() + 1e-12
        assert psi(gb, point) == pytest.approx(value, abs=1e-12)
        assert np.all(np.abs(point) <= 1.0)


def test_min_psi_dense_agrees_with_box(rng):
    for _ in range(20):
        gb = GammaBlocks(k=2, g0=rng.normal(), g1=rng.normal(), g2=rng.normal())
        box_value, _ = min_psi_box(gb)
        dense_value, dense_point = min_psi_dense(gb.dense(), 2, grid_points=41)
        assert dense_value >= box_value - 1e-12
        assert dense_value == pytest.approx(box_value, abs=1e-6)
        assert np.all(np.abs(dense_point) <= 1.0)


def test_structural_conditions():
    assert vertex_conditions(GammaBlocks(k=3, g0=0.9, g1=-0.3, g2=0.0), 1e-9)
    assert not vertex_conditions(GammaBlocks(k=3, g0=-0.9, g1=0.3, g2=0.0), 1e-9)
    assert not vertex_conditions(GammaBlocks(k=3, g0=0.9, g1=-0.3, g2=0.01), 1e-9)
    assert nonvertex_condition(GammaBlocks(k=3, g0=1e-12, g1=-1e-12, g2=0.0), 1e-9)
    assert not nonvertex_condition(GammaBlocks(k=3, g0=0.9, g1=-0.3, g2=0.0), 1e-9)


def test_kw_verify_optimal_design():
    spec = DispersionSpec(k=2, d0=0.5, d1=2.0, d2=1.0)
    report = kw_verify(spec, to_discrete(_k2_case_i_design(0.5, 2.0, 1.0)))
    assert report.verdict == "optimal"
    assert report.is_optimal
    assert report.min_psi >= -1e-9
    assert report.max_support_abs <= 1e-9
    assert len(report.support) == 4


def test_kw_verify_singular_design(spec_k2):
    dd = to_discrete(RhombicDesign(k=2, orbits=[Orbit(ell=0, level=1.0, weight=1.0)]))
    report = kw_verify(spec_k2, dd)
    assert report.verdict == "not_optimal"
    assert report.min_psi == -math.inf
    assert report.log_det == -math.inf
    assert report.explanation


def test_kw_verify_perturbed_design(spec_k2):
    optimal = _k2_case_i_design(1.0, 2.0, 0.5)
    assert kw_verify(spec_k2, to_discrete(optimal)).is_optimal
    perturbed = RhombicDesign(
        k=2,
        orbits=[
            Orbit(ell=0, level=optimal.orbits[0].level, weight=0.55),
            Orbit(ell=1, level=optimal.orbits[1].level, weight=0.45),
        ],
    )
    report = kw_verify(spec_k2, to_discrete(perturbed))
    assert report.verdict == "not_optimal"
    assert report.min_psi < -1e-3


def test_support_psi_weighted_average_is_zero(rng):
    spec = DispersionSpec(k=3, d0=1.0, d1=1.2, d2=0.3)
    for _ in range(10):
        weights = rng.dirichlet(np.ones(2))
        rd = RhombicDesign(
            k=3,
            orbits=[
                Orbit(ell=0, level=float(rng.uniform(0.2, 1.0)), weight=float(weights[0])),
                Orbit(ell=1, level=float(rng.uniform(0.2, 1.0)), weight=float(weights[1])),
            ],
        )
        dd = to_discrete(rd)
        report = kw_verify(spec, dd)
        values = np.array([s.psi for s in report.support]) / variance_many(spec, dd.support)
        assert float(dd.weights @ values) == pytest.approx(0.0, abs=1e-10)


def test_kw_verify_block_path_matches_gamma(rng):
    spec = DispersionSpec(k=3, d0=1.0, d1=1.2, d2=0.3)
    rd = vertex_design(3, [0.3, 0.7])
    report = kw_verify(spec, to_discrete(rd))
    gb = gamma_blocks(spec, info_blocks_rhombic(spec, rd))
    assert report.min_psi == pytest.approx(min(min_psi_box(gb)[0], min(s.psi for s in report.support)))
    assert "區塊" in report.explanation


def test_kw_verify_dense_path(spec_k2):
    dd = DiscreteDesign.from_arrays(2, np.array([[1.0, 1.0], [-1.0, 1.0], [1.0, -1.0]]), [1 / 3, 1 / 3, 1 / 3])
    report = kw_verify(spec_k2, dd)
    assert report.verdict == "not_optimal"
    assert "稠密" in report.explanation
    assert report.max_support_abs == pytest.approx(0.0, abs=1e-9)
    assert report.min_psi < 0


def test_kw_verify_origin_in_support(spec_k2):
    points = np.array([[0.0, 0.0], [1.0, 1.0], [-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]])
    dd = DiscreteDesign.from_arrays(2, points, [0.2] * 5)
    report = kw_verify(spec_k2, dd)
    assert report.verdict in ("optimal", "not_optimal", "borderline")
    assert len(report.support) == 5
    assert report.support[0].x == [0.0, 0.0]
    assert math.isfinite(report.log_det)


def test_kw_verify_tolerance_override(monkeypatch, spec_k2):
    monkeypatch.setenv("OPTDES_TOL", "0.5")
    report = kw_verify(spec_k2, to_discrete(vertex_design(2, [0.5, 0.5])))
    assert report.tolerance == 0.5
    assert kw_verify(spec_k2, to_discrete(vertex_design(2, [0.5, 0.5])), tolerance=1e-3).tolerance == 1e-3


def test_report_json_keeps_infinities(spec_k2):
    dd = to_discrete(RhombicDesign(k=2, orbits=[Orbit(ell=0, level=1.0, weight=1.0)]))
    text = kw_verify(spec_k2, dd).model_dump_json()
    assert "-Infinity" in text
    payload = json.loads(text)
    assert payload["min_psi"] == -math.inf


def test_kw_verify_uses_dense_information(spec_k2):
    dd = to_discrete(_k2_case_i_design(1.0, 2.0, 0.5))
    target = np.diag([1.0 / 3.0, 0.0, 0.0])
    target[1:, 1:] = np.linalg.inv(np.array([[2.0, 0.5], [0.5, 2.0]])) / 3.0
    np.testing.assert_allclose(info_dense(spec_k2, dd), target, atol=1e-14)
    assert kw_verify(spec_k2, dd).log_det == pytest.approx(math.log(np.linalg.det(target)))
