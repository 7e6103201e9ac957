"""Projection of stable points onto the moment level set.

Conventions
-----------
For a weight system with weights ``alpha_i`` the imaginary torus direction
``exp(i xi)`` multiplies ``z_i`` by ``exp(xi . alpha_i)``.  The Kempf-Ness
functional

    F_z(xi) = sum_i |z_i|^2 exp(2 alpha_i . xi) - 2 alpha . xi

is convex, its gradient ``2 (Phi(g z) - alpha)`` vanishes exactly when the
scaled point ``g z`` lies on the level set, and it is unbounded below
precisely for unstable ``z``.

The matrix families use the same idea with the general linear groups:
Grassmannian and chain solvers factor Hermitian positive definite matrices,
and the polygon solver runs Newton's method on ``PD(2)`` modulo scalars.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import linalg

from ._validation import as_complex_vector
from .geometry import WeightSystem, moment_map

log = logging.getLogger(__name__)

__all__ = [
    "NewtonResult",
    "damped_newton",
    "KempfNessSolution",
    "solve_abelian",
    "ODETrajectory",
    "ode_psi",
    "ChainSolution",
    "solve_grassmannian",
    "solve_chain",
    "ChainProjection",
    "project_chain",
    "chain_products",
    "PolygonProjection",
    "solve_polygon",
]

DIVERGENCE_RADIUS = 1e3
MAX_STEP = 1e2


@dataclass
class NewtonResult:
    x: np.ndarray
    fun: float
    grad_norm: float
    iterations: int
    converged: bool
    message: str
    history: list = field(default_factory=list)
    factorizations_ok: bool = True


def damped_newton(
    fun: Callable,
    grad: Callable,
    hess: Callable,
    x0,
    gtol: float,
    max_iter: int = 200,
    diverge_at: float | None = None,
    max_step: float = MAX_STEP,
) -> NewtonResult:
    """Newton's method with Armijo backtracking for a smooth convex function.

    A Cholesky factorization is attempted at every iterate; if the Hessian is
    numerically singular a growing multiple of the identity is added (this is
    what happens along the escaping directions of an unbounded functional).
    Steps longer than ``max_step`` are shortened.  Once the predicted decrease
    is below roundoff, a full step is accepted whenever it reduces the gradient.
    """
    x = np.array(x0, dtype=float)
    f = fun(x)
    g = grad(x)
    history = [f]
    all_ok = True
    for it in range(max_iter + 1):
        gn = float(np.linalg.norm(g))
        if gn <= gtol:
            return NewtonResult(x, f, gn, it, True, "converged", history, all_ok)
        if diverge_at is not None and np.linalg.norm(x) > diverge_at:
            return NewtonResult(x, f, gn, it, False, "unstable point", history, all_ok)
        if it == max_iter:
            break
        H = hess(x)
        try:
            L = np.linalg.cholesky(H)
            p = -linalg.cho_solve((L, True), g)
        except np.linalg.LinAlgError:
            all_ok = False
            mu = 1e-12 * max(1.0, float(np.trace(H)))
            while True:
                try:
                    L = np.linalg.cholesky(H + mu * np.eye(len(x)))
                    break
                except np.linalg.LinAlgError:
                    mu *= 100.0
            p = -linalg.cho_solve((L, True), g)
        pn = np.linalg.norm(p)
        if pn > max_step:
            p *= max_step / pn
        slope = float(g @ p)
        step = 1.0
        accepted = False
        if abs(slope) <= 1e-12 * (1.0 + abs(f)):
            # function values no longer resolve the decrease; judge by the gradient
            xn = x + p
            fn = fun(xn)
            if np.isfinite(fn) and np.linalg.norm(grad(xn)) < gn:
                x, f = xn, fn
                g = grad(x)
                history.append(f)
                continue
        for _ in range(60):
            xn = x + step * p
            fn = fun(xn)
            if np.isfinite(fn) and fn <= f + 1e-4 * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            xn = x + p
            fn = fun(xn)
            gn_new = np.linalg.norm(grad(xn)) if np.isfinite(fn) else np.inf
            if abs(slope) <= 1e-13 * (1.0 + abs(f)) and gn_new < gn:
                accepted = True
            else:
                return NewtonResult(x, f, gn, it, False, "line search failed", history, all_ok)
        x, f = xn, fn
        g = grad(x)
        history.append(f)
    gn = float(np.linalg.norm(g))
    return NewtonResult(x, f, gn, max_iter, False, "maximum iterations reached", history, all_ok)


@dataclass
class KempfNessSolution:
    """Result of the abelian projection ``z -> g z`` with ``g = exp(i xi)``."""

    xi: np.ndarray
    scale: np.ndarray
    residual: float
    iterations: int
    converged: bool
    message: str = ""
    projected: np.ndarray | None = None
    history: list = field(default_factory=list)
    factorizations_ok: bool = True

    @property
    def gamma_xi(self) -> np.ndarray:
        """Exponent of ``gamma(z) = g^{-1}``, the element carrying the level point back to ``z``."""
        return -self.xi


def _kn_functional(ws: WeightSystem, w: np.ndarray):
    A = ws.weights.astype(float)
    level = ws.level.astype(float)
    mask = w > 0
    logw = np.log(w[mask])
    A = A[mask]

    def terms(xi):
        e = logw + 2.0 * (A @ xi)
        with np.errstate(over="ignore"):
            return np.exp(np.minimum(e, 700.0)), e

    def fun(xi):
        t, e = terms(xi)
        if np.any(e > 700.0):
            return np.inf
        return float(t.sum() - 2.0 * level @ xi)

    def grad(xi):
        t, _ = terms(xi)
        return 2.0 * (t @ A - level)

    def hess(xi):
        t, _ = terms(xi)
        return 4.0 * (A.T * t) @ A

    return fun, grad, hess


def solve_abelian(
    ws: WeightSystem, z, tol: float = 1e-12, max_iter: int = 200, xi0=None
) -> KempfNessSolution:
    """Find ``xi`` such that ``exp(i xi) z`` lies on the level set.

    ``tol`` bounds the shifted moment map relative to ``max(1, |alpha|)``.
    Unstable points are reported with ``converged=False`` and the message
    ``"unstable point"``.
    """
    z = as_complex_vector(z, ws.d)
    if not np.any(z):
        raise ValueError("z must be nonzero")
    w = np.abs(z) ** 2
    scale_ref = max(1.0, float(np.linalg.norm(ws.level)))
    fun, grad, hess = _kn_functional(ws, w)
    x0 = np.zeros(ws.m) if xi0 is None else np.asarray(xi0, dtype=float)
    res = damped_newton(
        fun, grad, hess, x0, gtol=tol * scale_ref, max_iter=max_iter,
        diverge_at=DIVERGENCE_RADIUS,
    )
    xi = res.x
    with np.errstate(over="ignore", invalid="ignore"):
        scale = np.exp(ws.weights @ xi)
        projected = z * scale
        residual = float(np.linalg.norm(moment_map(ws, projected)))
    converged = bool(res.converged and residual <= tol * scale_ref)
    message = res.message
    if not res.converged and message != "unstable point":
        # an escaping iterate that has not yet reached the radius is still divergence
        if np.linalg.norm(xi) > 0.5 * DIVERGENCE_RADIUS or message == "maximum iterations reached":
            message = "unstable point"
    if not converged:
        log.debug("solve_abelian did not converge: %s (|xi|=%.3g)", message, np.linalg.norm(xi))
    return KempfNessSolution(
        xi=xi, scale=scale, residual=residual, iterations=res.iterations,
        converged=converged, message=message, projected=projected,
        history=res.history, factorizations_ok=res.factorizations_ok,
    )


# --- ODE oracle ----------------------------------------------------------------


@dataclass
class ODETrajectory:
    t: np.ndarray
    psi: np.ndarray
    pairing: np.ndarray
    steps: int


def _pairing(ws: WeightSystem, p: np.ndarray, w: np.ndarray, t):
    aw = ws.weights @ w
    t = np.atleast_1d(t)
    vals = (np.abs(p) ** 2)[None, :] * np.exp(2.0 * t[:, None] * aw[None, :])
    return vals @ aw - float(ws.level @ w)


def _rk4(rhs, T: float, steps: int):
    h = T / steps
    ts = np.linspace(0.0, T, steps + 1)
    psi = np.zeros(steps + 1)
    y = 0.0
    for i in range(steps):
        t = ts[i]
        k1 = rhs(t, y)
        k2 = rhs(t + h / 2, y + h * k1 / 2)
        k3 = rhs(t + h / 2, y + h * k2 / 2)
        k4 = rhs(t + h, y + h * k3)
        y = y + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6
        psi[i + 1] = y
    return ts, psi


def ode_psi(
    ws: WeightSystem, p, w, T: float = 1.0, steps: int | None = None,
    endpoint_tol: float = 1e-9, level_tol: float = 1e-8,
) -> ODETrajectory:
    """Integrate ``psi'(t) = -2 <Phi(exp(i t w) p) - alpha, w>`` from ``psi(0) = 0``.

    With ``steps=None`` the step count is doubled until halving the step moves
    the endpoint by less than ``endpoint_tol``.
    """
    p = as_complex_vector(p, ws.d, "p")
    w = np.atleast_1d(np.asarray(w, dtype=float))
    if w.shape != (ws.m,):
        raise ValueError(f"w must have length {ws.m}")
    off = float(np.linalg.norm(moment_map(ws, p)))
    if off > level_tol * max(1.0, float(np.linalg.norm(ws.level))):
        raise ValueError(f"p is not on the level set (residual {off:.3g})")

    def rhs(t, _y):
        return -2.0 * float(_pairing(ws, p, w, t)[0])

    if steps is None:
        n = 16
        ts, psi = _rk4(rhs, T, n)
        while True:
            ts2, psi2 = _rk4(rhs, T, 2 * n)
            if abs(psi2[-1] - psi[-1]) < endpoint_tol or n > 2**16:
                ts, psi, n = ts2, psi2, 2 * n
                break
            ts, psi, n = ts2, psi2, 2 * n
        steps = n
    else:
        ts, psi = _rk4(rhs, T, steps)
    return ODETrajectory(ts, psi, _pairing(ws, p, w, ts), steps)


# --- matrix families -------------------------------------------------------------


@dataclass
class ChainSolution:
    """Square factors ``B_i`` solving link equations, with ``det(B_i B_i^*)`` and residuals."""

    B: list
    det_gram: list
    residuals: list


def _full_rank(Z: np.ndarray, rows: int) -> bool:
    s = np.linalg.svd(Z, compute_uv=False)
    return len(s) >= rows and s[rows - 1] > 1e-12 * max(1.0, s[0])


def solve_grassmannian(Z, m: int = 1) -> ChainSolution:
    """``B`` with ``B Z Z^* B^* = m I`` from a Cholesky factor of ``m (Z Z^*)^{-1}``."""
    Z = np.asarray(Z, dtype=complex)
    k = Z.shape[0]
    if not _full_rank(Z, k):
        raise ValueError("unstable matrix point: Z must have full rank k")
    G = Z @ Z.conj().T
    target = m * np.linalg.inv(G)
    target = 0.5 * (target + target.conj().T)
    L = np.linalg.cholesky(target)  # L L^* = m G^{-1}
    B = L.conj().T
    M = B @ G @ B.conj().T
    res = float(np.linalg.norm(M - m * np.eye(k)))
    det = float(np.real(np.linalg.det(B @ B.conj().T)))
    return ChainSolution([B], [det], [res])


def solve_chain(spec, Z, m=None) -> ChainSolution:
    """Solve the link equations ``B_i Z_i Z_i^* B_i^* = Z_{i-1}^* B_{i-1}^* B_{i-1} Z_{i-1} + m_i I``.

    Each ``B_i`` acts on the left of ``Z_i`` only.  The resulting chain
    ``Y_i = B_i Z_i`` satisfies the level equations, but it is not in general
    in the orbit of ``Z`` under the chain action; :func:`project_chain` gives
    the orbit projection.
    """
    twists = np.asarray(spec.twists if m is None else m, dtype=float)
    Z = [np.asarray(x, dtype=complex) for x in Z]
    spec.check_shapes(Z)
    Bs, dets, res = [], [], []
    prev = None
    for i, Zi in enumerate(Z, start=1):
        if not _full_rank(Zi, i):
            raise ValueError(f"unstable chain point: link {i} is rank deficient")
        rhs = twists[i - 1] * np.eye(i, dtype=complex)
        if prev is not None:
            rhs = rhs + prev.conj().T @ prev
        rhs = 0.5 * (rhs + rhs.conj().T)
        R = np.linalg.cholesky(rhs)
        C = np.linalg.cholesky(Zi @ Zi.conj().T)
        B = R @ np.linalg.inv(C)
        Y = B @ Zi
        res.append(float(np.linalg.norm(Y @ Y.conj().T - rhs)))
        dets.append(float(np.real(np.linalg.det(B @ B.conj().T))))
        Bs.append(B)
        prev = Y
    return ChainSolution(Bs, dets, res)


def chain_products(Z) -> list[np.ndarray]:
    """``pi_k(Z) = Z_k Z_{k+1} ... Z_{n-1}`` for ``k = 1..n-1`` (shapes ``k x n``)."""
    out = [None] * len(Z)
    acc = None
    for k in range(len(Z), 0, -1):
        Zk = np.asarray(Z[k - 1], dtype=complex)
        acc = Zk if acc is None else Zk @ acc
        out[k - 1] = acc
    return out


def chain_level_eigenvalues(twists) -> list[np.ndarray]:
    """Eigenvalues ``sigma_{j,k} = m_j + ... + m_k`` of ``Z_k Z_k^*`` on the level set."""
    tw = np.asarray(twists, dtype=float)
    return [np.array([tw[j:k].sum() for j in range(k)]) for k in range(1, len(tw) + 1)]


@dataclass
class ChainProjection:
    """Orbit projection of a chain: ``W_k = A_k Z_k A_{k+1}^{-1}`` (``W_{n-1} = A_{n-1} Z_{n-1}``)."""

    A: list
    level_point: list
    flag: np.ndarray
    residual: float


def project_chain(spec, Z) -> ChainProjection:
    """Project a full-rank chain to the level set within its complexified orbit.

    The row spaces ``F_k`` of ``pi_k(Z)`` form a flag in ``C^n`` that is
    invariant under the complexified action.  Choosing an adapted orthonormal
    basis ``e_1, ..., e_{n-1}`` and setting ``pi_k(W) = D_k [e_1; ...; e_k]``
    with ``D_k`` diagonal makes every level equation diagonal; the entries of
    ``D_k`` are products of square roots of the level eigenvalues.
    """
    Z = [np.asarray(x, dtype=complex) for x in Z]
    spec.check_shapes(Z)
    n = spec.n
    pis = chain_products(Z)
    for k, P in enumerate(pis, start=1):
        if not _full_rank(P, k):
            raise ValueError(f"unstable chain point: pi_{k}(Z) is rank deficient")
    E = np.zeros((0, n), dtype=complex)
    for k, P in enumerate(pis, start=1):
        Rm = P - (P @ E.conj().T) @ E
        _, _, Vh = np.linalg.svd(Rm)
        E = np.vstack([E, Vh[0]])
    sig = chain_level_eigenvalues(spec.twists)
    A = []
    for k, P in enumerate(pis, start=1):
        d = np.array([np.prod([np.sqrt(sig[r - 1][j]) for r in range(k, n)]) for j in range(k)])
        Q = d[:, None] * E[:k]
        A.append(Q @ np.linalg.pinv(P))
    W = []
    for k in range(1, n):
        Wk = A[k - 1] @ Z[k - 1]
        if k < n - 1:
            Wk = Wk @ np.linalg.inv(A[k])
        W.append(Wk)
    from .matrix_varieties import chain_moment

    residual = float(sum(np.linalg.norm(M) for M in chain_moment(spec, W)))
    return ChainProjection(A, W, E, residual)


@dataclass
class PolygonProjection:
    """Orbit projection of ``m`` arms ``Z_i in C^2`` onto the closed-polygon level set."""

    A: np.ndarray
    arm_scale: np.ndarray
    level_point: np.ndarray
    potential: float
    iterations: int
    converged: bool
    residual: float
    message: str = ""


_PAULI = np.array(
    [[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex
)


def _bloch(Y: np.ndarray) -> np.ndarray:
    u = Y / np.linalg.norm(Y, axis=1)[:, None]
    return np.real(np.einsum("ia,sab,ib->is", u.conj(), _PAULI, u))


def polygon_potential(radii, center, Y) -> float:
    """``sum r_i log |Y_i|^2``; the determinant term is tracked separately by the caller."""
    return float(np.sum(radii * np.log(np.sum(np.abs(Y) ** 2, axis=1))))


def solve_polygon(lambdas, Z, tol: float = 1e-13, max_iter: int = 200) -> PolygonProjection:
    """Project arms ``Z`` (shape ``(m, 2)``) to ``|W_i|^2 = -lambda_i``, ``sum W_i W_i^* = lambda_{m+1} I``.

    Minimizes ``f(P) = sum r_i log(Z_i^* P Z_i) - lambda_{m+1} log det P`` over
    positive Hermitian ``P = A^* A`` by Newton steps ``A <- exp(H/2) A`` with
    traceless Hermitian ``H``; the gradient is the weighted sum of Bloch
    vectors (the closing condition) and the Hessian ``sum r_i (I - n_i n_i^T)``.
    """
    lam = np.asarray(lambdas, dtype=float)
    Z = np.asarray(Z, dtype=complex)
    if Z.ndim != 2 or Z.shape[1] != 2 or Z.shape[0] != lam.shape[0] - 1:
        raise ValueError("Z must have shape (m, 2) with m = len(lambdas) - 1")
    r = -lam[:-1]
    center = lam[-1]
    if np.any(r <= 0):
        raise ValueError("lambdas: arm levels must be negative")
    if abs(r.sum() - 2 * center) > 1e-12 * max(1.0, r.sum()):
        raise ValueError("lambdas: sum of arm levels plus twice the center level must vanish")
    if np.any(np.linalg.norm(Z, axis=1) == 0):
        raise ValueError("unstable polygon point: an arm vanishes")
    A = np.eye(2, dtype=complex)
    total = r.sum()
    logdet = 0.0  # log det(A^* A)
    converged = False
    message = "maximum iterations reached"
    it = 0

    def f_of(Amat, ld):
        return polygon_potential(r, center, Z @ Amat.T) - center * ld

    fval = f_of(A, logdet)
    for it in range(max_iter + 1):
        Y = Z @ A.T
        nvec = _bloch(Y)
        g = r @ nvec
        if np.linalg.norm(g) <= tol * total:
            converged, message = True, "converged"
            break
        if abs(logdet) > DIVERGENCE_RADIUS or np.linalg.norm(A) > 1e150:
            message = "unstable point"
            break
        if it == max_iter:
            break
        H = total * np.eye(3) - (nvec.T * r) @ nvec
        try:
            delta = -np.linalg.solve(H + 1e-300 * np.eye(3), g)
        except np.linalg.LinAlgError:
            delta = -g
        if np.linalg.norm(delta) > 50:
            delta *= 50 / np.linalg.norm(delta)
        slope = float(g @ delta)
        step = 1.0
        # below this decrement f cannot resolve the decrease; take the Newton step
        accepted = -slope < 1e-12 * (1 + abs(fval))
        if accepted:
            An = linalg.expm(np.einsum("s,sab->ab", delta, _PAULI) / 2) @ A
            fn = f_of(An, logdet)
        for _ in range(0 if accepted else 60):
            Hm = np.einsum("s,sab->ab", step * delta, _PAULI)
            An = linalg.expm(Hm / 2) @ A
            fn = f_of(An, logdet)  # det(exp(H)) = 1 for traceless H
            if np.isfinite(fn) and fn <= fval + 1e-4 * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            Hm = np.einsum("s,sab->ab", delta, _PAULI)
            An = linalg.expm(Hm / 2) @ A
            fn = f_of(An, logdet)
            if abs(slope) > 1e-13 * (1 + abs(fval)):
                message = "line search failed"
                break
        A, fval = An, fn
        # keep A well scaled; f is invariant under A -> c A
        s = np.sqrt(abs(np.linalg.det(A)))
        A = A / s
        logdet = 0.0
    Y = Z @ A.T
    norms = np.linalg.norm(Y, axis=1)
    W = Y * (np.sqrt(r) / norms)[:, None]
    arm_scale = norms / np.sqrt(r)
    G = W.T @ W.conj()
    residual = float(
        np.linalg.norm(G - center * np.eye(2)) + np.linalg.norm(np.sum(np.abs(W) ** 2, axis=1) - r)
    )
    logdetP = float(np.log(abs(np.linalg.det(A))) * 2.0)
    potential = polygon_potential(r, center, Y) - center * logdetP
    return PolygonProjection(A, arm_scale, W, potential, it, converged, residual, message)
