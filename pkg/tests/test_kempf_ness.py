import numpy as np
import pytest
from hypothesis import given
from scipy.stats import unitary_group

from helpers import complex_normal, complex_vectors
from stabfn.geometry import moment_map, preset
from stabfn.kempf_ness import (
    chain_level_eigenvalues,
    chain_products,
    damped_newton,
    ode_psi,
    project_chain,
    solve_abelian,
    solve_chain,
    solve_grassmannian,
    solve_polygon,
)
from stabfn.matrix_varieties import (
    MatrixChainSpec,
    act_chain,
    chain_moment,
    coadjoint_image,
    generate_level_point,
    polygon_moment,
    random_chain,
)
from stabfn.stability import psi_toric


def test_damped_newton_quadratic_one_step():
    A = np.array([[3.0, 1.0], [1.0, 2.0]])
    b = np.array([1.0, -1.0])
    res = damped_newton(
        lambda x: 0.5 * x @ A @ x - b @ x, lambda x: A @ x - b, lambda x: A, np.zeros(2), gtol=1e-12
    )
    assert res.converged and res.iterations == 1
    np.testing.assert_allclose(res.x, np.linalg.solve(A, b))


def test_damped_newton_detects_unbounded():
    # convex in x but linear in y, hence unbounded below
    res = damped_newton(
        lambda x: np.exp(x[0]) - 2 * x[0] - x[1],
        lambda x: np.array([np.exp(x[0]) - 2, -1.0]),
        lambda x: np.diag([np.exp(x[0]), 0.0]),
        np.zeros(2), gtol=1e-12, diverge_at=1e3,
    )
    assert not res.converged and not res.factorizations_ok


def test_cp1_projection_is_normalization(rng):
    z = complex_normal(rng, 2)
    sol = solve_abelian(preset("cp1"), z)
    assert sol.converged
    np.testing.assert_allclose(sol.projected, z / np.linalg.norm(z), atol=1e-13)
    assert sol.xi[0] == pytest.approx(-np.log(np.linalg.norm(z)))


def test_unstable_point_reported():
    sol = solve_abelian(preset("hirzebruch1"), [1, 0, 1, 0])
    assert not sol.converged and sol.message == "unstable point"


@given(complex_vectors(4))
def test_projection_lands_on_level_set(z):
    ws = preset("hirzebruch2")
    sol = solve_abelian(ws, z)
    assert sol.converged
    assert np.linalg.norm(moment_map(ws, sol.projected)) < 1e-10
    # the projection is a torus orbit point: |z_i| rescaled by exp(alpha_i . xi)
    np.testing.assert_allclose(np.abs(sol.projected), np.abs(z) * np.exp(ws.weights @ sol.xi))


def test_ode_matches_functional(rng):
    ws = preset("hirzebruch1")
    z = complex_normal(rng, 4)
    sol = solve_abelian(ws, z)
    traj = ode_psi(ws, sol.projected, -sol.xi)
    assert traj.psi[-1] == pytest.approx(psi_toric(ws, z).psi, rel=1e-8)
    # the pairing starts at zero on the level set
    assert abs(traj.pairing[0]) < 1e-10


def test_ode_requires_level_point():
    with pytest.raises(ValueError, match="level set"):
        ode_psi(preset("cp1"), [2.0, 0.0], [1.0])


@pytest.mark.parametrize("k,n,m", [(1, 3, 1), (2, 4, 1), (2, 5, 3)])
def test_grassmannian_solver(rng, k, n, m):
    Z = complex_normal(rng, (k, n))
    sol = solve_grassmannian(Z, m)
    W = sol.B[0] @ Z
    np.testing.assert_allclose(W @ W.conj().T, m * np.eye(k), atol=1e-12)


def test_grassmannian_rank_deficient():
    with pytest.raises(ValueError, match="full rank"):
        solve_grassmannian(np.array([[1, 1, 0], [2, 2, 0]], dtype=complex))


def test_chain_link_equations(rng):
    spec = MatrixChainSpec(4, (1.0, 2.0, 0.5))
    Z = random_chain(spec, rng)
    sol = solve_chain(spec, Z)
    assert max(sol.residuals) < 1e-12
    Y = [B @ z for B, z in zip(sol.B, Z)]
    assert max(np.linalg.norm(M) for M in chain_moment(spec, Y)) < 1e-11


def test_chain_projection_lands_on_level_set(rng):
    spec = MatrixChainSpec(4, (1.0, 2.0, 0.5))
    proj = project_chain(spec, random_chain(spec, rng))
    assert proj.residual < 1e-10
    # the flag is orthonormal
    np.testing.assert_allclose(proj.flag @ proj.flag.conj().T, np.eye(3), atol=1e-12)


def test_chain_products_shapes(rng):
    spec = MatrixChainSpec(4, (1.0, 1.0, 1.0))
    pis = chain_products(random_chain(spec, rng))
    assert [P.shape for P in pis] == [(1, 4), (2, 4), (3, 4)]


def test_level_eigenvalues_of_links():
    spec = MatrixChainSpec(4, (1.0, 2.0, 0.5))
    Z = generate_level_point(spec, seed=3)
    for Zk, sig in zip(Z, chain_level_eigenvalues(spec.twists)):
        np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(Zk @ Zk.conj().T)), np.sort(sig), atol=1e-12)


def test_coadjoint_equivariance(rng):
    # the right U(n) action on the last link conjugates the coadjoint image
    spec = MatrixChainSpec(3, (1.0, 2.0), top=0.3)
    Z = generate_level_point(spec, seed=5)
    U = unitary_group.rvs(3, random_state=rng)
    ZU = Z[:-1] + [Z[-1] @ U.conj().T]
    np.testing.assert_allclose(coadjoint_image(spec, ZU), U @ coadjoint_image(spec, Z) @ U.conj().T, atol=1e-13)


def test_projection_commutes_with_gauge(rng):
    spec = MatrixChainSpec(3, (1.0, 2.0))
    Z = random_chain(spec, rng)
    U = [unitary_group.rvs(k, random_state=rng) if k > 1 else np.exp(1j * rng.uniform(0, 6)) * np.eye(1)
         for k in (1, 2)]
    W1 = project_chain(spec, Z).level_point
    W2 = project_chain(spec, act_chain(U, Z)).level_point
    # both land on the level set; their coadjoint images agree
    np.testing.assert_allclose(coadjoint_image(spec, W1), coadjoint_image(spec, W2), atol=1e-10)


def test_polygon_projection(rng):
    lam = [-1.0, -1.0, -1.0, -1.0, 2.0]
    proj = solve_polygon(lam, complex_normal(rng, (4, 2)))
    assert proj.converged
    assert max(np.linalg.norm(M) for M in polygon_moment(lam, proj.level_point)) < 1e-10


def test_polygon_degenerate_input():
    with pytest.raises(ValueError, match="arm vanishes"):
        solve_polygon([-1, -1, -1, -1, 2], np.array([[1, 0], [0, 1], [1, 1], [0, 0]], dtype=complex))
    with pytest.raises(ValueError, match="vanish"):
        solve_polygon([-1, -1, -1, -1, 1], np.ones((4, 2), dtype=complex))
