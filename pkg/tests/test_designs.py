"""離散設計、菱形設計與軌道展開"""

import numpy as np
import pytest
from pydantic import ValidationError

from optdes_core.designs import (
    DiscreteDesign,
    Orbit,
    RhombicDesign,
    design_from_dict,
    design_to_dict,
    expand_orbit,
    group_orbits,
    is_invariant,
    is_uniform_factorial,
    orbit_cross_moment,
    orbit_size,
    orbit_variance,
    to_discrete,
    vertex_design,
)
from optdes_core.errors import DomainError
from optdes_core.model_core import DispersionSpec, variance_many


@pytest.mark.parametrize("k, ell, expected", [(3, 1, 6), (4, 2, 6), (2, 0, 2), (2, 1, 2), (5, 2, 20)])
def test_orbit_size(k, ell, expected):
    assert orbit_size(k, ell) == expected


def test_orbit_size_bad_index():
    with pytest.raises(DomainError):
        orbit_size(3, 2)
    with pytest.raises(DomainError):
        orbit_size(1, 0)


def test_expand_orbit_examples():
    np.testing.assert_array_equal(expand_orbit(2, 1, 1.0), [[-1.0, 1.0], [1.0, -1.0]])
    np.testing.assert_array_equal(expand_orbit(3, 0, 0.5), [[0.5, 0.5, 0.5], [-0.5, -0.5, -0.5]])
    block = expand_orbit(4, 2, 1.0)
    assert block.shape == (6, 4)
    assert all(sorted(row) == [-1.0, -1.0, 1.0, 1.0] for row in block.tolist())
    assert len({tuple(row) for row in block.tolist()}) == 6


@pytest.mark.parametrize("k", [2, 3, 4, 5, 6])
def test_expand_orbit_sizes_and_cross_moment(k):
    for ell in range(k // 2 + 1):
        block = expand_orbit(k, ell, 0.7)
        assert block.shape == (orbit_size(k, ell), k)
        second_moment = block.T @ block / block.shape[0]
        c = orbit_cross_moment(k, ell)
        expected = 0.49 * ((1.0 - c) * np.eye(k) + c * np.ones((k, k)))
        np.testing.assert_allclose(second_moment, expected, atol=1e-14)


def test_expand_orbit_bad_level():
    with pytest.raises(DomainError):
        expand_orbit(2, 0, 0.0)
    with pytest.raises(DomainError):
        expand_orbit(2, 0, 1.5)


def test_orbit_variance_is_constant_on_orbit():
    spec = DispersionSpec(k=4, d0=1.0, d1=1.2, d2=0.3)
    for ell in range(3):
        values = variance_many(spec, expand_orbit(4, ell, 0.8))
        np.testing.assert_allclose(values, orbit_variance(spec, ell, 0.8), rtol=1e-14)


def test_to_discrete_examples():
    dd = to_discrete(vertex_design(2, [0.5, 0.5]))
    assert len(dd.points) == 4
    np.testing.assert_allclose(dd.weights, 0.25)

    single = to_discrete(RhombicDesign(k=3, orbits=[Orbit(ell=1, level=1.0, weight=1.0)]))
    assert len(single.points) == 6
    np.testing.assert_allclose(single.weights, 1.0 / 6.0)


def test_to_discrete_drops_zero_weight_orbits():
    rd = RhombicDesign(k=3, orbits=[Orbit(ell=0, level=0.5, weight=0.0), Orbit(ell=1, level=1.0, weight=1.0)])
    assert len(to_discrete(rd).points) == 6


def test_rhombic_validation():
    with pytest.raises(ValidationError):
        RhombicDesign(k=2, orbits=[])
    with pytest.raises(ValidationError):
        RhombicDesign(k=2, orbits=[Orbit(ell=0, level=1.0, weight=0.4), Orbit(ell=1, level=1.0, weight=0.4)])
    with pytest.raises(ValidationError):
        RhombicDesign(k=3, orbits=[Orbit(ell=2, level=1.0, weight=1.0)])
    with pytest.raises(ValidationError):
        RhombicDesign(k=2, orbits=[Orbit(ell=0, level=1.0, weight=0.5), Orbit(ell=0, level=0.5, weight=0.5)])
    with pytest.raises(ValidationError):
        Orbit(ell=0, level=0.0, weight=1.0)


def test_rhombic_orbits_sorted_and_vertex_flag():
    rd = RhombicDesign(k=3, orbits=[Orbit(ell=1, level=1.0, weight=0.75), Orbit(ell=0, level=0.4, weight=0.25)])
    np.testing.assert_array_equal(rd.ells, [0, 1])
    assert not rd.is_vertex()
    assert vertex_design(3, [0.2, 0.8]).is_vertex()


def test_discrete_validation():
    with pytest.raises(ValidationError):
        DiscreteDesign.from_arrays(2, np.array([[1.0, 1.0], [1.0, 1.0]]), [0.5, 0.5])
    with pytest.raises(ValidationError):
        DiscreteDesign.from_arrays(2, np.array([[1.0, 1.0], [-1.0, -1.0]]), [0.5, 0.6])
    with pytest.raises(ValidationError):
        DiscreteDesign.from_arrays(2, np.array([[1.2, 0.0]]), [1.0])
    with pytest.raises(ValidationError):
        DiscreteDesign.from_arrays(2, np.array([[1.0, 0.0, 0.0]]), [1.0])


def test_origin_allowed_in_discrete_design():
    dd = DiscreteDesign.from_arrays(2, np.array([[0.0, 0.0]]), [1.0])
    assert dd.support.shape == (1, 2)


def test_is_invariant_examples():
    assert is_invariant(to_discrete(vertex_design(3, [0.25, 0.75])))
    assert not is_invariant(DiscreteDesign.from_arrays(2, np.array([[1.0, 1.0]]), [1.0]))
    assert not is_invariant(DiscreteDesign.from_arrays(2, np.array([[1.0, 0.0], [0.0, 1.0]]), [0.5, 0.5]))


def test_is_invariant_checks_weights():
    dd = DiscreteDesign.from_arrays(2, np.array([[1.0, 1.0], [-1.0, -1.0]]), [0.6, 0.4])
    assert not is_invariant(dd)


def test_group_orbits_inverts_to_discrete(rng):
    for k in (2, 3, 4, 5):
        n = k // 2 + 1
        weights = rng.dirichlet(np.ones(n))
        levels = rng.uniform(0.1, 1.0, n)
        rd = RhombicDesign(
            k=k, orbits=[Orbit(ell=ell, level=float(t), weight=float(w)) for ell, (t, w) in enumerate(zip(levels, weights))]
        )
        regrouped = group_orbits(to_discrete(rd), tol=1e-9)
        np.testing.assert_array_equal(regrouped.ells, rd.ells)
        np.testing.assert_allclose(regrouped.levels, rd.levels, rtol=1e-12)
        np.testing.assert_allclose(regrouped.weights, rd.weights, rtol=1e-12)


def test_group_orbits_rejects_off_diagonal_points():
    dd = DiscreteDesign.from_arrays(
        2, np.array([[1.0, 0.5], [0.5, 1.0], [-1.0, -0.5], [-0.5, -1.0]]), [0.25] * 4
    )
    assert is_invariant(dd)
    with pytest.raises(DomainError):
        group_orbits(dd)


def test_uniform_factorial_structure():
    assert is_uniform_factorial(vertex_design(2, [0.5, 0.5]))
    assert is_uniform_factorial(vertex_design(3, [0.25, 0.75]))
    assert not is_uniform_factorial(vertex_design(3, [0.5, 0.5]))
    assert not is_uniform_factorial(RhombicDesign(k=2, orbits=[Orbit(ell=0, level=1.0, weight=1.0)]))


def test_design_dict_round_trip():
    rd = RhombicDesign(k=3, orbits=[Orbit(ell=0, level=0.4, weight=0.25), Orbit(ell=1, level=1.0, weight=0.75)])
    assert design_from_dict(design_to_dict(rd)) == rd
    dd = to_discrete(rd)
    assert design_from_dict(design_to_dict(dd)) == dd


def test_design_from_dict_infers_format():
    parsed = design_from_dict({"k": 2, "points": [{"x": [1, 1], "w": 0.5}, {"x": [-1, -1], "w": 0.5}]})
    assert isinstance(parsed, DiscreteDesign)
    parsed = design_from_dict({"k": 2, "orbits": [{"ell": 0, "level": 1.0, "weight": 1.0}]})
    assert isinstance(parsed, RhombicDesign)


def test_design_from_dict_errors():
    with pytest.raises(DomainError):
        design_from_dict({"format": "lattice", "k": 2})
    with pytest.raises(DomainError):
        design_from_dict({"format": "discrete", "k": 2, "points": [{"x": [3, 0], "w": 1.0}]})
    with pytest.raises(DomainError):
        design_from_dict([1, 2, 3])
