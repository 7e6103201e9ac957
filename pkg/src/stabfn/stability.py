"""Stability functions ``psi = log <pi^* s, pi^* s> - pi^* log <s, s>_red``.

Toric data use the Kempf-Ness solution ``g z = exp(i xi) z`` on the level
set; with ``gamma(z) = g^{-1}`` the flat-metric stability function reads

    psi(z) = -|z|^2 + |g z|^2 - 2 alpha . xi.

Every evaluator returns a :class:`StabilityEvaluation`.  Where a printed
closed form is known to differ from the value obtained by the definition,
both are reported and the definition wins.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize

from ._validation import as_complex_vector
from .geometry import (
    DelzantPolytope,
    WeightSystem,
    canonical_affine,
    lattice_points,
)
from .kempf_ness import (
    DIVERGENCE_RADIUS,
    chain_products,
    damped_newton,
    ode_psi,
    project_chain,
    solve_abelian,
    solve_grassmannian,
    solve_polygon,
)
from .matrix_varieties import (
    MatrixChainSpec,
    chain_section,
    grassmannian_section,
    polygon_bracket_section,
)

log = logging.getLogger(__name__)

__all__ = [
    "StabilityEvaluation",
    "ToricMetric",
    "TORIC_METHODS",
    "psi_toric",
    "psi_hirzebruch",
    "psi_legendre",
    "psi_grassmannian",
    "psi_coadjoint",
    "psi_polygon",
    "toric_flow",
    "psi_stages",
    "polytope_of",
    "LEGENDRE_CONVERSION",
    "toric_identity_error",
    "matrix_identity_error",
]

TORIC_METHODS = ("definition", "closed-form", "affine-chart", "monomial", "ode")
NONPOSITIVITY_SLACK = 1e-9

# ToricMetric.log_rho uses the normalization <1,1> = exp(-|z|^2); the
# Legendre-coordinate convention's log rho_k is this factor times it.
LEGENDRE_CONVERSION = 2.0


@dataclass
class StabilityEvaluation:
    psi: float
    method: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def nonpositive(self) -> bool:
        return self.psi <= NONPOSITIVITY_SLACK


_POLY_CACHE: dict = {}


def _ws_key(ws: WeightSystem):
    return (ws.weights.shape, ws.weights.tobytes(), ws.level.tobytes())


def polytope_of(ws: WeightSystem) -> DelzantPolytope:
    """Cached moment polytope of a weight system."""
    key = _ws_key(ws)
    if key not in _POLY_CACHE:
        _POLY_CACHE[key] = DelzantPolytope(ws)
    return _POLY_CACHE[key]


_LATTICE_CACHE: dict = {}


def _lattice(ws: WeightSystem, k: int):
    key = _ws_key(ws) + (k,)
    if key not in _LATTICE_CACHE:
        try:
            pts = np.array(lattice_points(polytope_of(ws), k), dtype=np.int64)
        except ValueError:
            pts = np.zeros((0, ws.d), dtype=np.int64)
        _LATTICE_CACHE[key] = pts
    return _LATTICE_CACHE[key]


def _support(z: np.ndarray) -> set:
    return {i for i in range(len(z)) if z[i] != 0}


def _check_stable(poly: DelzantPolytope, z: np.ndarray) -> None:
    Iz = _support(z)
    if not any(set(S) <= Iz for S in poly.vertex_supports):
        raise ValueError("unstable point: no vertex support lies in the support of z")


def _diag(sol) -> dict:
    return {
        "residual": sol.residual,
        "iterations": sol.iterations,
        "converged": sol.converged,
        "xi": sol.xi.tolist(),
    }


def _solve(ws, z, tol):
    sol = solve_abelian(ws, z, tol=tol)
    if not sol.converged:
        raise ValueError(f"unstable point: Kempf-Ness solver failed ({sol.message})")
    return sol


def _monomial_point(ws: WeightSystem, z: np.ndarray, k: int):
    pts = _lattice(ws, k)
    if len(pts) == 0:
        return None
    zero = np.array([zi == 0 for zi in z])
    ok = ~np.any((pts > 0) & zero[None, :], axis=1)
    cand = pts[ok]
    if len(cand) == 0:
        return None
    # distance to the boundary of the face spanned by the support
    score = np.where(cand > 0, cand, np.iinfo(np.int64).max).min(axis=1)
    best = np.flatnonzero(score == score.max())[0]
    return cand[best]


def _affine_chart_psi(ws: WeightSystem, poly: DelzantPolytope, z: np.ndarray, tol: float):
    Iz = _support(z)
    vertex = next(v for v, S in zip(poly.vertices, poly.vertex_supports) if set(S) <= Iz)
    ca = canonical_affine(poly, vertex)
    I, J = list(ca.support), list(ca.free)
    C = np.zeros((ws.d, ws.m))
    C[I, np.arange(ws.m)] = 1.0
    if J:
        C[J] = ca.coeffs
    w = np.abs(z) ** 2
    a = ca.a.astype(float)
    keep = w > 0
    logw, Ck = np.log(w[keep]), C[keep]

    def fun(u):
        e = logw + 2.0 * Ck @ u
        if np.any(e > 700):
            return np.inf
        return float(np.exp(e).sum() - 2.0 * a @ u)

    def grad(u):
        t = np.exp(np.minimum(logw + 2.0 * Ck @ u, 700))
        return 2.0 * (t @ Ck - a)

    def hess(u):
        t = np.exp(np.minimum(logw + 2.0 * Ck @ u, 700))
        return 4.0 * (Ck.T * t) @ Ck

    scale = max(1.0, float(np.linalg.norm(a)))
    res = damped_newton(fun, grad, hess, np.zeros(ws.m), gtol=tol * scale, diverge_at=DIVERGENCE_RADIUS)
    if not res.converged:
        raise ValueError(f"unstable point: chart solver failed ({res.message})")
    u = res.x
    t = np.exp(logw + 2.0 * Ck @ u)
    psi = -w.sum() + t.sum() - 2.0 * float(a @ u)
    return psi, {"vertex": [str(x) for x in vertex], "log_r": u.tolist(), "iterations": res.iterations}


def psi_toric(
    ws: WeightSystem, z, method: str = "definition", power: int = 1, tol: float = 1e-13
) -> StabilityEvaluation:
    """Stability function of the flat metric on ``C^d`` reduced by the torus ``ws``.

    ``power`` replaces the metric by its tensor power, which multiplies
    ``psi`` by ``power``.
    """
    z = as_complex_vector(z, ws.d)
    if method not in TORIC_METHODS:
        raise ValueError(f"method must be one of {TORIC_METHODS}, got {method!r}")
    poly = polytope_of(ws)
    _check_stable(poly, z)
    w = np.abs(z) ** 2

    if method == "affine-chart":
        psi, diag = _affine_chart_psi(ws, poly, z, tol)
        return StabilityEvaluation(power * psi, method, diag)

    sol = _solve(ws, z, tol)
    t = np.abs(sol.projected) ** 2
    lev = ws.level.astype(float)
    diag = _diag(sol)

    if method == "definition":
        # psi = -(F_z(0) - min F_z) for the Kempf-Ness functional F_z
        F0 = w.sum()
        Fmin = t.sum() - 2.0 * float(lev @ sol.xi)
        return StabilityEvaluation(power * (Fmin - F0), method, diag)

    if method == "closed-form":
        v = ws.diagonal_circle()
        if v is not None:
            # |g z|^2 equals alpha(v) on the level set
            psi = -w.sum() + float(lev @ v) - 2.0 * float(lev @ sol.xi)
            diag["diagonal_circle"] = v.tolist()
        else:
            psi = -w.sum() + float(np.sum(np.abs(np.exp(ws.weights @ sol.gamma_xi) ** -1 * z) ** 2))
            psi -= 2.0 * float(lev @ sol.xi)
        return StabilityEvaluation(power * psi, "toric-closed-form", diag)

    if method == "monomial":
        m = _monomial_point(ws, z, power)
        if m is None:
            warnings.warn(
                "no lattice point with support in that of z; falling back to the definition",
                RuntimeWarning,
                stacklevel=2,
            )
            ev = psi_toric(ws, z, "definition", power, tol)
            ev.diagnostics["fallback"] = True
            return ev
        used = m > 0
        up = float(np.sum(m[used] * np.log(w[used]))) - power * w.sum()
        down = float(np.sum(m[used] * np.log(t[used]))) - power * t.sum()
        diag["lattice_point"] = m.tolist()
        return StabilityEvaluation(up - down, method, diag)

    # ode: integrate from the level point back to z along exp(-i t xi)
    traj = ode_psi(ws, sol.projected, -sol.xi, T=1.0)
    diag["steps"] = traj.steps
    return StabilityEvaluation(power * float(traj.psi[-1]), method, diag)


def toric_flow(ws: WeightSystem, z, v, t: float) -> np.ndarray:
    """``exp(i t v) z``: scales ``z_i`` by ``exp(t alpha_i . v)``."""
    z = as_complex_vector(z, ws.d)
    return z * np.exp(t * (ws.weights @ np.asarray(v, dtype=float)))


# --- Hirzebruch surfaces ----------------------------------------------------------


def _hirzebruch_radii(n: int, a1: float, a2: float, w: np.ndarray):
    w1, w2, w3, w4 = w
    if w2 + w4 == 0 or (w1 == 0 and w3 == 0):
        raise ValueError("unstable point for the Hirzebruch weight system")
    if w3 == 0:
        # decoupled
        r1 = np.sqrt(a1 / w1)
        r2 = np.sqrt(a2 / (w2 + w4))
        return r1, r2

    def h(u):
        return (
            np.exp(2 * u) * (w2 + w4)
            - n * a1 * w3 / (w1 * np.exp(2 * n * u) + w3)
            - a2
        )

    lo, hi = -1.0, 1.0
    while h(lo) > 0:
        lo *= 2
    while h(hi) < 0:
        hi *= 2
    u = optimize.brentq(h, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    r2 = np.exp(u)
    r1 = np.sqrt(a1 / (w1 + r2 ** (-2 * n) * w3))
    return r1, r2


def _hirzebruch_printed(n, a1, a2, w):
    w1, w2, w3, w4 = w

    def eqs(u):
        r1s, r2s = np.exp(2 * u[0]), np.exp(2 * u[1])
        c = r1s**n * r2s * w3
        return [r1s * w1 + c - a1, r2s * w2 - n * c + r1s * w4 - a2]

    sol = optimize.root(eqs, np.zeros(2), method="hybr", tol=1e-14)
    if not sol.success or np.max(np.abs(eqs(sol.x))) > 1e-9:
        return None
    r1, r2 = np.exp(sol.x)
    return float(
        -w.sum() - a1 * np.log(r1) - a2 * np.log(r2) + a1 + a2 - n * r1 ** (2 * n) * r2**2 * w3
    )


def psi_hirzebruch(
    n: int, a1: float, a2: float, z, printed: bool = False
) -> StabilityEvaluation:
    """Closed form for ``H_n``: weights ``(1,0), (0,1), (1,-n), (0,1)``, level ``(a1, a2)``.

    With ``r_1 = e^{xi_1}``, ``r_2 = e^{xi_2}`` the level equations are
    ``r_1^2 |z_1|^2 + r_1^2 r_2^{-2n} |z_3|^2 = a_1`` and
    ``r_2^2 (|z_2|^2 + |z_4|^2) - n r_1^2 r_2^{-2n} |z_3|^2 = a_2``; eliminating
    ``r_1`` leaves a monotone equation in ``r_2``.  Then

        psi = -|z|^2 + a_1 + a_2 + n |w_3|^2 - 2 a_1 log r_1 - 2 a_2 log r_2.

    ``printed=True`` also evaluates the variant with exponents
    ``r_1^{2n} r_2^2`` on ``|z_3|^2`` and reports it under ``"printed_psi"``.
    """
    z = as_complex_vector(z, 4)
    w = np.abs(z) ** 2
    r1, r2 = _hirzebruch_radii(n, a1, a2, w)
    w3 = r1**2 * r2 ** (-2 * n) * w[2]
    psi = -w.sum() + a1 + a2 + n * w3 - 2 * a1 * np.log(r1) - 2 * a2 * np.log(r2)
    diag = {"r1": float(r1), "r2": float(r2)}
    if printed:
        diag["printed_psi"] = _hirzebruch_printed(n, a1, a2, w)
    return StabilityEvaluation(float(psi), "toric-closed-form", diag)


# --- general toric metrics ------------------------------------------------------


def _bump(s):
    out = np.zeros_like(s)
    inside = s < 1
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


@dataclass
class ToricMetric:
    """Torus-invariant metric ``<1,1> = exp(-F(x))`` with ``x_i = log |z_i|^2``.

    The moment coordinates are ``t = grad F(x)``; the Legendre dual is
    ``G(t) = x . t - F(x)`` with ``grad G = x``.
    """

    kind: str
    d: int
    F: Callable | None = None
    grad: Callable | None = None
    hess: Callable | None = None

    def __post_init__(self):
        if self.kind == "flat":
            self.F = lambda x: float(np.sum(np.exp(x)))
            self.grad = lambda x: np.exp(x)
            self.hess = lambda x: np.diag(np.exp(x))
        elif self.kind == "legendre":
            if self.F is None or self.grad is None or self.hess is None:
                raise ValueError("legendre metric needs F, grad and hess")
        else:
            raise ValueError("kind must be 'flat' or 'legendre'")

    @classmethod
    def flat(cls, d: int) -> "ToricMetric":
        return cls("flat", d)

    @classmethod
    def flat_plus_bump(cls, d: int, center, width: float, amplitude: float) -> "ToricMetric":
        """Flat potential plus ``amplitude * exp(-1/(1-s^2))``, ``s = |x - center| / width``."""
        c = np.asarray(center, dtype=float)

        def F(x):
            s = np.linalg.norm(x - c) / width
            return float(np.sum(np.exp(x)) + amplitude * _bump(np.array([s]))[0])

        def grad(x):
            y = x - c
            r = np.linalg.norm(y)
            s = r / width
            g = np.exp(x).copy()
            if 0 < s < 1:
                db = _bump(np.array([s]))[0] * (-2 * s / (1 - s**2) ** 2)
                g += amplitude * db * y / (r * width)
            return g

        def hess(x, h=1e-6):
            H = np.zeros((d, d))
            for j in range(d):
                e = np.zeros(d)
                e[j] = h
                H[:, j] = (grad(x + e) - grad(x - e)) / (2 * h)
            return 0.5 * (H + H.T)

        return cls("legendre", d, F, grad, hess)

    def check_convex(self, x) -> None:
        ev = np.linalg.eigvalsh(self.hess(np.asarray(x, dtype=float)))
        if ev.min() <= 0:
            raise ValueError("metric not strictly convex here")

    def dual_point(self, t, x0=None, tol: float = 1e-13) -> np.ndarray:
        """Solve ``grad F(x) = t``; this is ``grad G(t)``."""
        t = np.asarray(t, dtype=float)
        if np.any(t <= 0):
            raise ValueError("t must lie in the open positive orthant")
        x0 = np.log(t) if x0 is None else np.asarray(x0, dtype=float)
        res = damped_newton(
            lambda x: self.F(x) - x @ t,
            lambda x: self.grad(x) - t,
            self.hess,
            x0,
            gtol=tol * max(1.0, np.abs(t).max()),
        )
        if not res.converged:
            raise ValueError(f"metric not strictly convex here ({res.message})")
        return res.x

    def G(self, t, x=None) -> float:
        t = np.asarray(t, dtype=float)
        x = self.dual_point(t) if x is None else x
        return float(x @ t - self.F(x))

    def log_rho(self, k, t) -> float:
        """``log <s_k, s_k>_red`` at moment coordinates ``t``: ``sum (k_i - t_i) dG/dt_i + G``."""
        t = np.asarray(t, dtype=float)
        x = self.dual_point(t)
        return float(np.sum((np.asarray(k, dtype=float) - t) * x) + self.G(t, x))


def psi_legendre(metric: ToricMetric, ws: WeightSystem, z, k) -> StabilityEvaluation:
    """Stability function of a torus-invariant metric on the open stratum.

    ``k`` is a lattice point of the polytope (``sum k_i alpha_i = alpha``);
    the value is independent of it.
    """
    z = as_complex_vector(z, ws.d)
    if np.any(z == 0):
        raise ValueError("z must lie in the open torus stratum")
    k = np.asarray(k, dtype=float)
    if not np.allclose(k @ ws.weights, ws.level):
        raise ValueError("k is not a lattice point of the polytope")
    x = np.log(np.abs(z) ** 2)
    L = ws.weights.astype(float)
    lev = ws.level.astype(float)

    def fun(xi):
        return metric.F(x + 2 * L @ xi) - 2 * lev @ xi

    def grad(xi):
        return 2 * (L.T @ metric.grad(x + 2 * L @ xi) - lev)

    def hess(xi):
        H = 4 * L.T @ metric.hess(x + 2 * L @ xi) @ L
        if np.linalg.eigvalsh(H).min() <= 0:
            raise ValueError("metric not strictly convex here")
        return H

    res = damped_newton(fun, grad, hess, np.zeros(ws.m), gtol=1e-13 * max(1.0, np.abs(lev).max()))
    if not res.converged:
        raise ValueError(f"unstable point: projection failed ({res.message})")
    xp = x + 2 * L @ res.x
    t = metric.grad(xp)
    log_up = float(k @ x - metric.F(x))
    log_down = metric.log_rho(k, t)
    return StabilityEvaluation(
        log_up - log_down,
        "definition",
        {"xi": res.x.tolist(), "moment": t.tolist(), "log_rho": log_down},
    )


# --- reduction in stages --------------------------------------------------------


def psi_stages(ws: WeightSystem, z, first: int = 0) -> tuple[float, float]:
    """Split ``psi`` for a rank-2 torus into the first-stage circle and the residual circle.

    The first stage reduces by the circle of column ``first``; the second
    stage minimizes the first-stage value function over the remaining
    direction.  Returns ``(psi_1(z), psi_2(z))`` with ``psi_2`` constant on
    first-stage complex orbits.
    """
    if ws.m != 2:
        raise ValueError("psi_stages needs a rank-2 torus")
    z = as_complex_vector(z, ws.d)
    second = 1 - first
    A = ws.weights
    if not np.any(A[:, first] > 0):
        raise ValueError("first stage has no positive weight")
    moved = A[:, first] != 0
    stage1 = WeightSystem(A[moved][:, [first]], [ws.level[first]], name="stage1")
    a1, a2 = float(ws.level[first]), float(ws.level[second])

    def value(s):
        zs = z * np.exp(s * A[:, second])
        sol = _solve(stage1, zs[moved], 1e-14)
        fixed = float(np.sum(np.abs(zs[~moved]) ** 2))
        return fixed + float(np.sum(np.abs(sol.projected) ** 2)) - 2 * a1 * sol.xi[0] - 2 * a2 * s

    # the value function is convex in s
    phi0 = value(0.0)
    psi1 = phi0 - float(np.sum(np.abs(z) ** 2))
    res = optimize.minimize_scalar(value, method="brent", tol=1e-12)
    return psi1, float(res.fun) - phi0


# --- matrix families ---------------------------------------------------------------


def _logdet_gram(M: np.ndarray) -> float:
    sign, ld = np.linalg.slogdet(M @ M.conj().T)
    if sign.real <= 0 or not np.isfinite(ld):
        raise ValueError("rank deficiency: Gram matrix is singular")
    return float(ld)


def psi_grassmannian(
    Z, m: int = 1, method: str = "closed-form", printed: bool = False
) -> StabilityEvaluation:
    """``psi`` on ``Gr(k, n)`` at twist ``m`` (level ``Z Z^* = m I``).

    closed form: ``k m - tr(Z Z^*) + m log det(Z Z^*) - k m log m``.  The
    variant ``k m - tr(Z Z^*) + m^2 log det(Z Z^*)`` is reported under
    ``"printed_psi"`` when ``printed=True``; it agrees only at ``m = 1``.
    """
    Z = np.asarray(Z, dtype=complex)
    k = Z.shape[0]
    tr = float(np.real(np.trace(Z @ Z.conj().T)))
    ld = _logdet_gram(Z)
    diag = {}
    if printed:
        diag["printed_psi"] = k * m - tr + m**2 * ld
    if method == "closed-form":
        psi = k * m - tr + m * ld - k * m * np.log(m)
        return StabilityEvaluation(float(psi), "matrix", diag)
    if method != "definition":
        raise ValueError("method must be 'closed-form' or 'definition'")
    sol = solve_grassmannian(Z, m)
    W = sol.B[0] @ Z
    s, J = grassmannian_section(Z, m)
    if s == 0:
        raise ValueError("zero section value: all maximal minors vanish")
    sW, _ = grassmannian_section(W, m, cols=J)
    psi = (2 * np.log(abs(s)) - tr) - (2 * np.log(abs(sW)) - float(np.real(np.trace(W @ W.conj().T))))
    diag.update({"minor": list(J), "residual": sol.residuals[0]})
    return StabilityEvaluation(float(psi), "definition", diag)


def _chain_constants(twists):
    tw = np.asarray(twists, dtype=float)
    n = len(tw) + 1
    T = sum(sum(l * tw[l - 1] for l in range(1, i + 1)) for i in range(1, n))
    logc = []
    for k in range(1, n):
        s = 0.0
        for j in range(1, k + 1):
            for r in range(k, n):
                s += np.log(tw[j - 1 : r].sum())
        logc.append(s)
    return T, np.array(logc)


def _chain_printed(spec: MatrixChainSpec, Z) -> float:
    tw = spec.twists
    out = sum(i * tw[i - 1] for i in range(1, spec.n))
    prev = 0.0
    for i, Zi in enumerate(Z, start=1):
        out -= float(np.real(np.trace(Zi @ Zi.conj().T)))
        out += (tw[i - 1] - prev) * sum(tw[:i]) * _logdet_gram(np.asarray(Zi))
        prev = tw[i - 1]
    return float(out)


def psi_coadjoint(
    spec: MatrixChainSpec, Z, method: str = "definition", tol: float = 1e-8
) -> StabilityEvaluation:
    """``psi`` on a chain reducing to a ``U(n)`` coadjoint orbit.

    ``definition`` projects ``Z`` onto the level set inside its complexified
    orbit and compares section norms; ``closed-form`` evaluates

        T - sum tr(Z_i Z_i^*) + sum_k m_k log(det(pi_k pi_k^*) / c_k)

    with ``pi_k = Z_k ... Z_{n-1}``, ``T = sum_i sum_{l <= i} l m_l`` and
    ``c_k = prod_{j <= k <= r} (m_j + ... + m_r)``.  The link-by-link variant
    ``sum i m_i - sum tr + sum (m_i - m_{i-1})(m_1 + ... + m_i) log det(Z_i Z_i^*)``
    is always reported under ``"printed_psi"``, with ``"printed_disagrees"``
    set when it differs from the returned value by more than ``tol``.
    """
    Z = [np.asarray(x, dtype=complex) for x in Z]
    spec.check_shapes(Z)
    tr = sum(float(np.real(np.trace(x @ x.conj().T))) for x in Z)
    if method == "closed-form":
        T, logc = _chain_constants(spec.twists)
        psi = T - tr
        for k, P in enumerate(chain_products(Z), start=1):
            psi += spec.twists[k - 1] * (_logdet_gram(P) - logc[k - 1])
        diag = {}
        label = "matrix"
    elif method == "definition":
        proj = project_chain(spec, Z)
        s, Js = chain_section(spec, Z)
        if s == 0:
            raise ValueError("zero section value")
        sW, _ = chain_section(spec, proj.level_point, cols=Js)
        trW = sum(float(np.real(np.trace(x @ x.conj().T))) for x in proj.level_point)
        psi = (2 * np.log(abs(s)) - tr) - (2 * np.log(abs(sW)) - trW)
        diag = {"residual": proj.residual, "minors": [list(J) for J in Js]}
        label = "definition"
    else:
        raise ValueError("method must be 'definition' or 'closed-form'")
    printed = _chain_printed(spec, Z)
    diag["printed_psi"] = printed
    diag["printed_disagrees"] = bool(abs(printed - psi) > tol * max(1.0, abs(psi)))
    return StabilityEvaluation(float(psi), label, diag)


def psi_polygon(lambdas, Z, method: str = "definition") -> StabilityEvaluation:
    """``psi`` on the polygon space with arm levels ``lambda_1..lambda_m < 0``.

    With ``r_i = -lambda_i`` and ``f(P) = sum r_i log(Z_i^* P Z_i) - lambda_{m+1} log det P``,

        psi = -|Z|^2 + sum r_i - sum r_i log r_i + min_P f(P).

    ``stage-one`` evaluates ``f(I)`` in place of the minimum, which is the
    stability function of the arm torus alone and bounds ``psi`` from above.
    """
    lam = np.asarray(lambdas, dtype=float)
    Z = np.asarray(Z, dtype=complex)
    r = -lam[:-1]
    norms = np.sum(np.abs(Z) ** 2, axis=1)
    if np.any(norms == 0):
        raise ValueError("unstable polygon point: an arm vanishes")
    base = -norms.sum() + r.sum() - float(np.sum(r * np.log(r)))
    if method == "stage-one":
        return StabilityEvaluation(
            float(base + np.sum(r * np.log(norms))), "matrix", {"stage": 1}
        )
    proj = solve_polygon(lam, Z)
    if not proj.converged:
        raise ValueError(f"unstable polygon point: projection failed ({proj.message})")
    diag = {"residual": proj.residual, "iterations": proj.iterations}
    if method == "closed-form":
        return StabilityEvaluation(float(base + proj.potential), "matrix", diag)
    if method != "definition":
        raise ValueError("method must be 'definition', 'closed-form' or 'stage-one'")
    s = polygon_bracket_section(lam, Z)
    if s == 0:
        raise ValueError("zero section value: a bracket vanishes")
    sW = polygon_bracket_section(lam, proj.level_point)
    W = proj.level_point
    psi = (2 * np.log(abs(s)) - norms.sum()) - (2 * np.log(abs(sW)) - float(np.sum(np.abs(W) ** 2)))
    return StabilityEvaluation(float(psi), "definition", diag)


# --- the identity <pi^* s, pi^* s> = e^psi pi^* <s, s>_red -----------------------


def toric_identity_error(
    ws: WeightSystem, z, k: int = 1, m=None, tol: float = 1e-13
) -> float:
    """Relative defect of the pointwise norm identity for one monomial section.

    ``psi`` comes from the Kempf-Ness functional value; the section norms are
    evaluated at ``z`` and at its level-set point.  The section ``z^m`` is a
    lattice point of ``k Delta``, by default the one the monomial method picks.
    """
    z = as_complex_vector(z, ws.d)
    psi = psi_toric(ws, z, "definition", power=k, tol=tol).psi
    if m is None:
        m = _monomial_point(ws, z, k)
        if m is None:
            raise ValueError("no section of this power is nonzero at z")
    else:
        m = np.asarray(m, dtype=np.int64)
        if not np.array_equal(m @ ws.weights, k * ws.level) or np.any(m < 0):
            raise ValueError("m is not a lattice point of k Delta")
        if np.any((m > 0) & (z == 0)):
            raise ValueError("the section z^m vanishes at z")
    sol = _solve(ws, z, tol)
    used = m > 0
    w, t = np.abs(z) ** 2, np.abs(sol.projected) ** 2
    up = float(np.sum(m[used] * np.log(w[used]))) - k * w.sum()
    down = float(np.sum(m[used] * np.log(t[used]))) - k * t.sum()
    return float(abs(np.expm1(up - psi - down)))


def _log_norm(s: complex, tr: float) -> float:
    if s == 0:
        raise ValueError("zero section value")
    return 2.0 * np.log(abs(s)) - tr


def _frob2(mats) -> float:
    return sum(float(np.real(np.vdot(x, x))) for x in mats)


def matrix_identity_error(kind: str, Z, **params) -> float:
    """Same check on the matrix families, with ``psi`` from the closed forms.

    ``kind`` is ``"grassmannian"`` (``m``), ``"chain"`` (``spec``) or
    ``"polygon"`` (``lambdas``).
    """
    if kind == "grassmannian":
        m = params.get("m", 1)
        Z = np.asarray(Z, dtype=complex)
        psi = psi_grassmannian(Z, m, "closed-form").psi
        W = solve_grassmannian(Z, m).B[0] @ Z
        s, J = grassmannian_section(Z, m)
        sW, _ = grassmannian_section(W, m, cols=J)
        up, down = _log_norm(s, _frob2([Z])), _log_norm(sW, _frob2([W]))
    elif kind == "chain":
        spec = params["spec"]
        Z = [np.asarray(x, dtype=complex) for x in Z]
        psi = psi_coadjoint(spec, Z, "closed-form").psi
        W = project_chain(spec, Z).level_point
        s, Js = chain_section(spec, Z)
        sW, _ = chain_section(spec, W, cols=Js)
        up, down = _log_norm(s, _frob2(Z)), _log_norm(sW, _frob2(W))
    elif kind == "polygon":
        lam = params["lambdas"]
        Z = np.asarray(Z, dtype=complex)
        psi = psi_polygon(lam, Z, "closed-form").psi
        W = solve_polygon(lam, Z).level_point
        up = _log_norm(polygon_bracket_section(lam, Z), _frob2([Z]))
        down = _log_norm(polygon_bracket_section(lam, W), _frob2([W]))
    else:
        raise ValueError(f"unknown matrix family {kind!r}")
    return float(abs(np.expm1(up - psi - down)))
