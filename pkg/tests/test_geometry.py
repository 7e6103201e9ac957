import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stabfn.geometry import (
    DelzantPolytope,
    WeightSystem,
    canonical_affine,
    full_torus,
    is_stable,
    lattice_points,
    list_presets,
    moment_map,
    preset,
    product_system,
)
from stabfn.kempf_ness import solve_abelian


def brute_lattice(ws, k, bound):
    pts = []
    for m in itertools.product(range(bound + 1), repeat=ws.d):
        if np.array_equal(np.array(m) @ ws.weights, k * ws.level):
            pts.append(m)
    return sorted(pts)


def test_cp1_vertices():
    poly = DelzantPolytope(preset("cp1"))
    assert poly.vertices == ((Fraction(0), Fraction(1)), (Fraction(1), Fraction(0)))
    assert poly.n == 1 and poly.bounded


@pytest.mark.parametrize("k", [1, 2, 5])
def test_projective_lattice_counts(k):
    assert len(lattice_points(DelzantPolytope(preset("cp1")), k)) == k + 1
    assert len(lattice_points(DelzantPolytope(preset("cp2")), k)) == (k + 1) * (k + 2) // 2


@pytest.mark.parametrize("name", ["hirzebruch1", "hirzebruch2"])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_hirzebruch_lattice_points_match_enumeration(name, k):
    ws = preset(name)
    poly = DelzantPolytope(ws)
    assert lattice_points(poly, k) == brute_lattice(ws, k, k * (2 + int(name[-1])))


def test_hirzebruch_vertex_count():
    assert len(DelzantPolytope(preset("hirzebruch1")).vertices) == 4


def test_non_delzant_vertex_rejected():
    with pytest.raises(ValueError, match="lattice basis"):
        DelzantPolytope(WeightSystem([[1], [2]], [2]))


def test_empty_polytope():
    with pytest.raises(ValueError, match="empty"):
        DelzantPolytope(WeightSystem([[1], [1]], [-1]))


def test_unpolarized_has_no_lattice_enumeration():
    ws = WeightSystem([[1], [-1]], [1])
    assert not ws.polarized
    with pytest.raises(ValueError, match="unpolarized"):
        lattice_points(DelzantPolytope(ws), 1)


def test_weight_validation():
    with pytest.raises(ValueError, match="nonzero"):
        WeightSystem([[1], [0]], [1])
    with pytest.raises(ValueError, match="level"):
        WeightSystem([[1], [1]], [1, 2])
    with pytest.raises(ValueError, match="integer"):
        WeightSystem([[0.5], [1]], [1])


def test_presets():
    assert set(list_presets()) == {"cp{n}", "hirzebruch{n}"}
    assert preset("CP3").d == 4
    with pytest.raises(ValueError, match="unknown preset"):
        preset("torus7")


def test_canonical_affine_cp1():
    poly = DelzantPolytope(preset("cp1"))
    ca = canonical_affine(poly, (1, 0))
    assert ca.support == (0,) and ca.free == (1,)
    assert ca.coeffs.tolist() == [[1]] and ca.a.tolist() == [1]
    with pytest.raises(ValueError):
        canonical_affine(poly, (Fraction(1, 2), Fraction(1, 2)))


def test_hirzebruch_chart_expansion():
    ws = preset("hirzebruch2")
    poly = DelzantPolytope(ws)
    for v in poly.vertices:
        ca = canonical_affine(poly, v)
        A_I = ws.weights[list(ca.support)]
        for j, idx in enumerate(ca.free):
            assert np.array_equal(ca.coeffs[j] @ A_I, ws.weights[idx])
        assert np.array_equal(ca.a @ A_I, ws.level)


def test_param_round_trip():
    poly = DelzantPolytope(preset("hirzebruch1"))
    t = poly.interior_point()
    assert poly.contains(t)
    np.testing.assert_allclose(poly.to_moment(poly.from_moment(t)), t)
    for v in poly.vertices_param():
        assert poly.contains(poly.to_moment(v), tol=1e-12)


def test_moment_map_vanishes_at_vertex_lifts():
    ws = preset("hirzebruch1")
    for v in DelzantPolytope(ws).vertices:
        z = np.sqrt(np.array(v, dtype=float))
        np.testing.assert_allclose(moment_map(ws, z), 0, atol=1e-14)


def test_stability_by_support():
    ws = preset("hirzebruch1")
    assert is_stable(ws, [1, 1, 1, 1])
    assert is_stable(ws, [1, 1, 0, 0])
    assert not is_stable(ws, [1, 0, 1, 0])
    assert not is_stable(preset("cp1"), [0, 0])


@given(st.lists(st.booleans(), min_size=4, max_size=4))
def test_support_criterion_matches_solver(mask):
    ws = preset("hirzebruch1")
    z = np.where(mask, 1.0 + 0.5j, 0.0)
    if not any(mask):
        return
    assert is_stable(ws, z) == solve_abelian(ws, z).converged


def test_product_lattice_points():
    a, b = preset("cp1"), preset("cp2")
    prod = DelzantPolytope(product_system(a, b))
    expected = sorted(
        x + y
        for x in lattice_points(DelzantPolytope(a), 2)
        for y in lattice_points(DelzantPolytope(b), 2)
    )
    assert lattice_points(prod, 2) == expected


def test_full_torus_is_a_point():
    ws = full_torus([2, 3])
    poly = DelzantPolytope(ws)
    assert poly.n == 0
    assert lattice_points(poly, 2) == [(4, 6)]


def test_scaling():
    ws = preset("cp2")
    assert np.array_equal(ws.scaled(3).level, [3])
    assert lattice_points(DelzantPolytope(ws).scaled(3), 1) == lattice_points(DelzantPolytope(ws), 3)
