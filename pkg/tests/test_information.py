"""區塊資訊矩陣、log det 與 Γ"""

import math

import numpy as np
import pytest

from optdes_core.designs import DiscreteDesign, Orbit, RhombicDesign, to_discrete, vertex_design
from optdes_core.errors import SingularityError
from optdes_core.information import (
    InfoBlocks,
    block_embed,
    blocks_from_dense,
    d_efficiency,
    det_k2_closed,
    directional_values,
    gamma_blocks,
    gamma_dense,
    info_blocks_rhombic,
    info_dense,
    log_det,
    log_det_dense,
    target_info_blocks,
)
from optdes_core.model_core import DispersionSpec, dispersion_matrix, signed_permutation


def _random_rhombic(rng, k):
    n = k // 2 + 1
    weights = rng.dirichlet(np.ones(n))
    levels = rng.uniform(0.05, 1.0, n)
    return RhombicDesign(
        k=k, orbits=[Orbit(ell=ell, level=float(t), weight=float(w)) for ell, (t, w) in enumerate(zip(levels, weights))]
    )


def _random_spec(rng, k):
    d1 = rng.uniform(0.2, 3.0)
    d2 = rng.uniform(-d1 / (k - 1), d1)
    return DispersionSpec(k=k, d0=rng.uniform(0.2, 3.0), d1=d1, d2=d2)


def test_vertex_design_blocks(spec_k2):
    ib = info_blocks_rhombic(spec_k2, vertex_design(2, [0.5, 0.5]))
    assert ib.m0 == pytest.approx(5.0 / 24.0)
    assert ib.m1 == pytest.approx(5.0 / 24.0)
    assert ib.m2 == pytest.approx(-1.0 / 24.0)
    assert log_det(ib) == pytest.approx(math.log(5.0 / 24.0 * 0.25 / 6.0))


def test_vertex_design_dense(spec_k2):
    dense = info_dense(spec_k2, to_discrete(vertex_design(2, [0.5, 0.5])))
    expected = np.array([[5, 0, 0], [0, 5, -1], [0, -1, 5]]) / 24.0
    np.testing.assert_allclose(dense, expected, atol=1e-15)


def test_vertex_designs_have_equal_diagonal_blocks(rng):
    for k in (2, 3, 4, 5):
        spec = _random_spec(rng, k)
        ib = info_blocks_rhombic(spec, vertex_design(k, rng.dirichlet(np.ones(k // 2 + 1))))
        assert ib.m1 == pytest.approx(ib.m0, rel=1e-12)


def test_single_diagonal_orbit(spec_k2):
    t = 0.6
    ib = info_blocks_rhombic(spec_k2, RhombicDesign(k=2, orbits=[Orbit(ell=0, level=t, weight=1.0)]))
    assert ib.m1 == pytest.approx(t * t * ib.m0)
    assert ib.m2 == pytest.approx(ib.m1)
    assert log_det(ib) == -math.inf


def test_block_and_dense_agree(rng):
    for _ in range(200):
        k = int(rng.integers(2, 6))
        spec = _random_spec(rng, k)
        rd = _random_rhombic(rng, k)
        dense = info_dense(spec, to_discrete(rd))
        np.testing.assert_allclose(block_embed(info_blocks_rhombic(spec, rd)), dense, atol=1e-10)


def test_blocks_from_dense_round_trip():
    ib = InfoBlocks(k=4, m0=0.3, m1=0.2, m2=-0.05)
    back = blocks_from_dense(block_embed(ib))
    assert (back.m0, back.m1, back.m2) == pytest.approx((ib.m0, ib.m1, ib.m2))


def test_log_det_examples():
    assert log_det(InfoBlocks(k=3, m0=1.0, m1=1.0, m2=0.0)) == pytest.approx(0.0)
    assert log_det(InfoBlocks(k=3, m0=1.0, m1=0.5, m2=0.5)) == -math.inf
    assert log_det(InfoBlocks(k=2, m0=0.0, m1=1.0, m2=0.0)) == -math.inf


def test_log_det_matches_dense(rng):
    for _ in range(30):
        k = int(rng.integers(2, 6))
        spec = _random_spec(rng, k)
        rd = _random_rhombic(rng, k)
        assert log_det(info_blocks_rhombic(spec, rd)) == pytest.approx(
            log_det_dense(info_dense(spec, to_discrete(rd))), abs=1e-9
        )


def test_singular_dense_designs(spec_k2):
    origin = DiscreteDesign.from_arrays(2, np.array([[0.0, 0.0]]), [1.0])
    info = info_dense(spec_k2, origin)
    np.testing.assert_allclose(info, np.diag([1.0, 0.0, 0.0]))
    assert log_det_dense(info) == -math.inf

    diagonal_only = to_discrete(RhombicDesign(k=2, orbits=[Orbit(ell=0, level=1.0, weight=1.0)]))
    assert np.linalg.matrix_rank(info_dense(spec_k2, diagonal_only)[1:, 1:]) == 1


def test_det_k2_closed_oracle(rng):
    for _ in range(50):
        spec = _random_spec(rng, 2)
        x0, x1 = rng.uniform(0.05, 1.0, 2)
        w = rng.uniform(0.05, 0.95)
        rd = RhombicDesign(k=2, orbits=[Orbit(ell=0, level=x0, weight=w), Orbit(ell=1, level=x1, weight=1 - w)])
        closed = det_k2_closed(spec, x0, x1, w)
        assert math.log(closed) == pytest.approx(log_det(info_blocks_rhombic(spec, rd)), abs=1e-10)


def test_gamma_example(spec_k2):
    gb = gamma_blocks(spec_k2, InfoBlocks(k=2, m0=1.0 / 3.0, m1=1.0 / 3.0, m2=0.0))
    assert (gb.g0, gb.g1, gb.g2) == pytest.approx((0.0, 3.0, 1.5))


def test_gamma_vanishes_at_target(rng):
    for k in (2, 3, 5):
        spec = _random_spec(rng, k)
        if not spec.is_positive_definite:
            continue
        gb = gamma_blocks(spec, target_info_blocks(spec))
        assert gb.max_abs == pytest.approx(0.0, abs=1e-10 * max(1.0, spec.d0, spec.d1))


def test_gamma_singular_slope(spec_k2):
    with pytest.raises(SingularityError):
        gamma_blocks(spec_k2, InfoBlocks(k=2, m0=0.2, m1=0.3, m2=0.3))


def test_gamma_blocks_match_dense(rng):
    spec = DispersionSpec(k=3, d0=0.8, d1=1.4, d2=0.3)
    rd = _random_rhombic(rng, 3)
    info = info_dense(spec, to_discrete(rd))
    gb = gamma_blocks(spec, info_blocks_rhombic(spec, rd))
    np.testing.assert_allclose(gb.dense(), gamma_dense(spec, info), atol=1e-9)
    np.testing.assert_allclose(gamma_dense(spec, info), 4 * dispersion_matrix(spec) - np.linalg.inv(info), atol=1e-9)


def test_directional_values_sum_to_p(rng):
    spec = DispersionSpec(k=3, d0=1.0, d1=2.0, d2=-0.3)
    dd = to_discrete(_random_rhombic(rng, 3))
    values = directional_values(spec, info_dense(spec, dd), dd.support)
    assert float(dd.weights @ values) == pytest.approx(spec.p, rel=1e-10)


def test_criterion_invariant_under_group(rng):
    spec = DispersionSpec(k=3, d0=1.0, d1=1.5, d2=0.4)
    for _ in range(10):
        points = rng.uniform(-1.0, 1.0, size=(6, 3))
        dd = DiscreteDesign.from_arrays(3, points, rng.dirichlet(np.ones(6)))
        perm, flip = rng.permutation(3), bool(rng.integers(2))
        moved = DiscreteDesign.from_arrays(
            3, np.array([signed_permutation(x, perm, flip) for x in points]), dd.weights
        )
        assert log_det_dense(info_dense(spec, moved)) == pytest.approx(
            log_det_dense(info_dense(spec, dd)), abs=1e-10
        )


def test_d_efficiency():
    assert d_efficiency(1.0, 1.0, 3) == pytest.approx(1.0)
    assert d_efficiency(1.0 - 3 * math.log(2.0), 1.0, 3) == pytest.approx(0.5)
    assert d_efficiency(-math.inf, 1.0, 3) == 0.0
