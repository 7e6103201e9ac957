import numpy as np
import pytest
from scipy.stats import unitary_group

from helpers import complex_normal
from stabfn.matrix_varieties import (
    MatrixChainSpec,
    QuiverSpec,
    act_chain,
    bracket_pairing,
    chain_moment,
    chain_section,
    chain_section_printed,
    coadjoint_image,
    generate_level_point,
    grassmannian_section,
    invariant_section_value,
    polygon_bracket_section,
    polygon_level_point,
    polygon_moment,
    polygon_rep,
    polygon_spec,
    polygon_x_section,
    quiver_moment,
    quiver_section,
    random_chain,
)


def test_spec_validation():
    with pytest.raises(ValueError, match="n:"):
        MatrixChainSpec(1, ())
    with pytest.raises(ValueError, match="twists: expected 2"):
        MatrixChainSpec(3, (1.0,))
    with pytest.raises(ValueError, match="positive"):
        MatrixChainSpec(3, (1.0, -1.0))
    spec = MatrixChainSpec(4, (1, 2, 3), top=0.5)
    np.testing.assert_allclose(spec.eigenvalues, [6.5, 5.5, 3.5, 0.5])
    with pytest.raises(ValueError, match="link 2"):
        spec.check_shapes([np.zeros((1, 2)), np.zeros((2, 2)), np.zeros((3, 4))])


@pytest.mark.parametrize("n", [2, 3, 5])
def test_generated_points_are_on_the_level_set(n):
    spec = MatrixChainSpec(n, tuple(range(1, n)))
    Z = generate_level_point(spec, seed=n)
    assert max(np.linalg.norm(M) for M in chain_moment(spec, Z)) < 1e-12


def test_generation_is_seeded():
    spec = MatrixChainSpec(3, (1.0, 1.0))
    a = generate_level_point(spec, seed=9)
    b = generate_level_point(spec, seed=9)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_coadjoint_spectrum():
    spec = MatrixChainSpec(4, (1.0, 2.0, 0.5), top=0.25)
    Z = generate_level_point(spec, seed=1)
    ev = np.sort(np.linalg.eigvalsh(coadjoint_image(spec, Z)))[::-1]
    np.testing.assert_allclose(ev, spec.eigenvalues, atol=1e-12)


def test_grassmannian_sections():
    s, J = grassmannian_section(np.eye(2, 4))
    assert s == 1 and J == (0, 1)
    Z = np.array([[2.0, 5, 1], [0, 3, 7]])
    assert grassmannian_section(Z, 2)[0] == pytest.approx(36.0)
    # the leading minor vanishes, so the next nonzero one is used
    s, J = grassmannian_section(np.array([[0, 1, 0], [0, 0, 1]], dtype=complex))
    assert J == (1, 2) and s == 1


def test_grassmannian_section_equivariance(rng):
    Z = complex_normal(rng, (2, 4))
    g = complex_normal(rng, (2, 2))
    s, J = grassmannian_section(Z, 3)
    gs, _ = grassmannian_section(g @ Z, 3, cols=J)
    assert gs == pytest.approx(np.linalg.det(g) ** 3 * s)


def test_chain_section_equivariance(rng):
    spec = MatrixChainSpec(3, (1.0, 2.0))
    Z = random_chain(spec, rng)
    g = [complex_normal(rng, (1, 1)), complex_normal(rng, (2, 2))]
    s, Js = chain_section(spec, Z)
    gs, _ = chain_section(spec, act_chain(g, Z), cols=Js)
    # pi_k picks up det(g_k)
    expected = s * np.linalg.det(g[0]) ** 1.0 * np.linalg.det(g[1]) ** 2.0
    assert gs == pytest.approx(expected, rel=1e-10)


def test_chain_section_upper_triangular():
    spec = MatrixChainSpec(3, (1.0, 2.0))
    Z1 = np.array([[2.0, 0, 0]])[:, :2]
    Z2 = np.array([[3.0, 1, 0], [0, 5, 1]])
    s, _ = chain_section(spec, [Z1, Z2])
    # pi_1 = Z1 Z2 = [6, 2, 0], pi_2 = Z2
    assert s == pytest.approx(6.0 * 15.0**2)
    assert chain_section_printed(spec, [Z1, Z2]) == pytest.approx(2.0 * 15.0)


def test_bracket_pairing():
    assert sorted(bracket_pairing([1, 1, 1, 1])) == [(0, 1), (2, 3)]
    pairs = bracket_pairing([2, 1, 1])
    counts = np.bincount(np.array(pairs).ravel(), minlength=3)
    assert counts.tolist() == [2, 1, 1]
    with pytest.raises(ValueError, match="integer"):
        bracket_pairing([1.5, 1, 0.5])
    with pytest.raises(ValueError, match="no bracket pairing"):
        bracket_pairing([3, 1, 1])


def test_bracket_section_invariance(rng):
    lam = (-1.0, -1.0, -1.0, -1.0, 2.0)
    Z = complex_normal(rng, (4, 2))
    U = unitary_group.rvs(2, random_state=rng)
    s = polygon_bracket_section(lam, Z)
    # SU(2) acts trivially on brackets; arm phases of weight -1 act by their product
    V = U / np.sqrt(np.linalg.det(U))
    assert polygon_bracket_section(lam, Z @ V.T) == pytest.approx(s)
    ph = np.exp(1j * rng.uniform(0, 2 * np.pi, 4))
    assert polygon_bracket_section(lam, ph[:, None] * Z) == pytest.approx(np.prod(ph) * s)


def test_polygon_x_section():
    Z = np.array([[2.0, 1], [1, 0], [3, 0], [1, 1]])
    assert polygon_x_section((-1, -1, -2, -1, 2.5), Z) == pytest.approx(18.0)
    assert polygon_x_section((-1, -1, -1, -1, 2), np.array([[0, 1], [1, 0], [1, 1], [1, 1.0]])) == 0


def test_quiver_validation():
    with pytest.raises(ValueError, match="acyclic"):
        QuiverSpec((1, 1), ((0, 1), (1, 0)), (0, 0))
    with pytest.raises(ValueError, match="invalid edge"):
        QuiverSpec((1, 1), ((0, 2),), (0, 0))
    with pytest.raises(ValueError, match="levels"):
        QuiverSpec((1, 1), ((0, 1),), (0,))


def test_polygon_spec_checks():
    with pytest.raises(ValueError, match="three sides"):
        polygon_spec((-1, -1, 1))
    with pytest.raises(ValueError, match="negative"):
        polygon_spec((-1, 1, -1, 0.5))
    with pytest.raises(ValueError, match="vanish"):
        polygon_spec((-1, -1, -1, 2))
    spec = polygon_spec((-1, -1, -1, -1, 2))
    defect = spec.flow_defect()
    assert all(defect[i] == 0 for i in range(4))
    # a bracket spends one unit on each of two arms but one determinant of the center
    assert defect[4] == pytest.approx(2.0)


def test_quiver_moment_matches_polygon_moment(rng):
    lam = (-1.0, -2.0, -1.0, -2.0, 3.0)
    Z = complex_normal(rng, (4, 2))
    spec = polygon_spec(lam)
    q = quiver_moment(spec, polygon_rep(Z))
    direct = polygon_moment(lam, Z)
    for v in range(5):
        np.testing.assert_allclose(q[v], direct[v], atol=1e-13)


def test_polygon_level_point_closes():
    lam = (-1.0, -1.0, -1.0, -1.0, 2.0)
    W = polygon_level_point(lam, seed=0)
    assert max(np.linalg.norm(M) for M in polygon_moment(lam, W)) < 1e-10


def test_single_arm_quiver_reproduces_the_chain_moment(rng):
    # a linear quiver 1 -> 2 -> 3 with the last vertex framed is the n = 3 chain
    spec = MatrixChainSpec(3, (1.0, 2.0))
    Z = random_chain(spec, rng)
    # the chain link Z_i maps C^{i+1} to C^i, so the arrow points from i+1 to i
    q = QuiverSpec((1, 2, 3), ((1, 0), (2, 1)), (1.0, 2.0, 0.0), frame={2})
    rep = {(1, 0): Z[0], (2, 1): Z[1]}
    mq = quiver_moment(q, rep)
    mc = chain_moment(spec, Z)
    np.testing.assert_allclose(mq[0], mc[0], atol=1e-13)
    np.testing.assert_allclose(mq[1], mc[1], atol=1e-13)


def test_quiver_section_and_dispatch(rng):
    q = QuiverSpec((1, 1), ((0, 1),), (-1.0, 1.0), twists=(2,))
    assert quiver_section(q, {(0, 1): np.array([[3.0]])}) == pytest.approx(9.0)
    assert invariant_section_value(q, {(0, 1): np.array([[3.0]])}) == pytest.approx(9.0)
    assert invariant_section_value(2, np.eye(2, 3) * 2) == pytest.approx(16.0)
    spec = MatrixChainSpec(3, (1.0, 1.0))
    Z = random_chain(spec, rng)
    assert invariant_section_value(spec, Z) == pytest.approx(chain_section(spec, Z)[0])
    with pytest.raises(TypeError):
        invariant_section_value("chain", Z)
    with pytest.raises(ValueError, match="twists"):
        quiver_section(QuiverSpec((1, 1), ((0, 1),), (0, 0)), {(0, 1): np.ones((1, 1))})
