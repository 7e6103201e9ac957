"""Quadrature on simplices and on moment polytopes.

Two simplex families are provided:

* conical-product Gauss-Jacobi rules (collapsed coordinates), positive
  weights, exact for total degree ``2N - 1``; these are the default;
* Grundmann-Moeller rules of degree ``2s + 1``, whose weights alternate in
  sign beyond ``s = 0``.

Polytopes are integrated in the parameter coordinates of their canonical
chart, which carry the lattice-normalized Lebesgue measure.  Degrees are
escalated until two successive estimates agree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.spatial import Delaunay
from scipy.special import roots_jacobi

__all__ = [
    "QuadratureError",
    "QuadratureRule",
    "QuadResult",
    "conical_simplex_rule",
    "grundmann_moeller",
    "triangulate",
    "polytope_rule",
    "integrate",
    "integrate_log",
]

DEFAULT_ORDERS = (4, 8, 16, 24, 32, 48, 64, 96, 128, 192, 256)


class QuadratureError(RuntimeError):
    def __init__(self, message: str, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


@lru_cache(maxsize=None)
def conical_simplex_rule(n: int, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on the unit simplex ``{x >= 0, sum x <= 1}``; weights sum to ``1/n!``."""
    if n == 0:
        return np.zeros((1, 0)), np.ones(1)
    grids = []
    for k in range(n):
        a = n - 1 - k
        x, w = roots_jacobi(N, a, 0)
        grids.append(((x + 1) / 2, w / 2 ** (a + 1)))
    U = np.stack(np.meshgrid(*[g[0] for g in grids], indexing="ij"), -1).reshape(-1, n)
    W = np.prod(
        np.stack(np.meshgrid(*[g[1] for g in grids], indexing="ij"), -1).reshape(-1, n), axis=1
    )
    X = np.empty_like(U)
    rem = np.ones(U.shape[0])
    for k in range(n):
        X[:, k] = rem * U[:, k]
        rem = rem * (1 - U[:, k])
    return X, W


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@lru_cache(maxsize=None)
def grundmann_moeller(n: int, s: int) -> tuple[np.ndarray, np.ndarray]:
    """Grundmann-Moeller rule of degree ``2s+1`` on the unit simplex; weights sum to ``1/n!``."""
    d = 2 * s + 1
    pts, wts = [], []
    for i in range(s + 1):
        w = (-1) ** i * 2.0 ** (-2 * s) * (d + n - 2 * i) ** d
        w /= math.factorial(i) * math.factorial(d + n - i)
        for beta in _compositions(s - i, n + 1):
            bary = [(2 * b + 1) / (d + n - 2 * i) for b in beta]
            pts.append(bary[1:])
            wts.append(w)
    return np.array(pts, dtype=float).reshape(-1, n), np.array(wts)


def triangulate(vertices: np.ndarray) -> list[np.ndarray]:
    """Split the convex hull of ``vertices`` (shape ``(V, n)``) into simplices."""
    vertices = np.asarray(vertices, dtype=float)
    V, n = vertices.shape
    if n == 0:
        return [vertices[:1]]
    if n == 1:
        lo, hi = vertices.min(), vertices.max()
        return [np.array([[lo], [hi]])]
    tri = Delaunay(vertices)
    return [vertices[s] for s in tri.simplices]


def _exact_volume(simplices) -> Fraction:
    total = Fraction(0)
    for S in simplices:
        n = S.shape[1]
        if n == 0:
            return Fraction(1)
        E = [[Fraction(x).limit_denominator(10**9) - Fraction(S[0, j]).limit_denominator(10**9)
              for j, x in enumerate(row)] for row in S[1:]]
        total += abs(_fraction_det(E)) / math.factorial(n)
    return total


def _fraction_det(M):
    M = [row[:] for row in M]
    n = len(M)
    det = Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if M[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            M[c], M[piv] = M[piv], M[c]
            det = -det
        det *= M[c][c]
        for r in range(c + 1, n):
            f = M[r][c] / M[c][c]
            M[r] = [a - f * b for a, b in zip(M[r], M[c])]
    return det


@dataclass
class QuadratureRule:
    """Nodes/weights for a simplicial decomposition of an n-dimensional polytope."""

    simplices: list
    nodes: np.ndarray
    weights: np.ndarray
    order: int
    volume: Fraction
    family: str = "conical"

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]


def polytope_rule(vertices, order: int, family: str = "conical") -> QuadratureRule:
    vertices = np.asarray(vertices, dtype=float)
    simplices = triangulate(vertices)
    n = vertices.shape[1]
    if family == "conical":
        X, W = conical_simplex_rule(n, order)
    elif family == "gm":
        X, W = grundmann_moeller(n, order)
    else:
        raise ValueError(f"unknown quadrature family {family!r}")
    nodes, weights = [], []
    for S in simplices:
        J = (S[1:] - S[0]).T if n else np.zeros((0, 0))
        jac = abs(np.linalg.det(J)) if n else 1.0
        nodes.append(S[0] + X @ J.T if n else np.zeros((1, 0)))
        weights.append(W * jac)
    return QuadratureRule(
        simplices, np.vstack(nodes), np.concatenate(weights), order, _exact_volume(simplices), family
    )


@dataclass
class QuadResult:
    value: np.ndarray | float
    error: float
    order: int
    n_nodes: int


def _rel_change(a, b) -> float:
    a, b = np.atleast_1d(a), np.atleast_1d(b)
    den = np.maximum(np.abs(b), 1e-300)
    return float(np.max(np.abs(a - b) / den))


def integrate(
    func, vertices, rtol: float = 1e-9, orders=DEFAULT_ORDERS, family: str = "conical"
) -> QuadResult:
    """Integrate ``func(nodes)`` over the polytope with the given vertices.

    ``func`` receives parameter points of shape ``(N, n)`` and returns shape
    ``(N,)`` or ``(N, K)`` (``K`` integrands at once).
    """
    prev = None
    err = np.inf
    for order in orders:
        rule = polytope_rule(vertices, order, family)
        vals = np.asarray(func(rule.nodes))
        est = np.tensordot(rule.weights, vals, axes=(0, 0))
        if prev is not None:
            err = _rel_change(est, prev)
            if err <= rtol:
                return QuadResult(est if np.ndim(est) else float(est), err, order, rule.n_nodes)
        prev = est
    raise QuadratureError(
        f"quadrature did not reach rtol={rtol:g} (last relative change {err:.3g})", prev, err
    )


def integrate_log(
    logfunc, vertices, rtol: float = 1e-9, orders=DEFAULT_ORDERS
) -> QuadResult:
    """Like :func:`integrate` for a positive integrand given by its logarithm.

    Returns the logarithm of the integral (per column), so integrands far
    below the floating point range are handled.  ``error`` is relative.
    """
    prev = None
    err = np.inf
    for order in orders:
        rule = polytope_rule(vertices, order)
        lv = np.asarray(logfunc(rule.nodes), dtype=float)
        M = np.max(lv, axis=0)
        s = np.tensordot(rule.weights, np.exp(lv - M), axes=(0, 0))
        est = M + np.log(s)
        if prev is not None:
            err = float(np.max(np.abs(np.expm1(np.atleast_1d(est - prev)))))
            if err <= rtol:
                return QuadResult(est if np.ndim(est) else float(est), err, order, rule.n_nodes)
        prev = est
    raise QuadratureError(
        f"quadrature did not reach rtol={rtol:g} (last relative change {err:.3g})", prev, err
    )
