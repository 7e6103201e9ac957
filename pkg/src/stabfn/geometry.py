"""Abelian reduction data: torus weights, moment polytopes and their lattice points.

A :class:`WeightSystem` describes a torus ``T^m`` acting linearly on ``C^d``
with integer weights ``alpha_i`` (rows of ``weights``).  The flat Kähler
structure on ``C^d`` gives the moment map ``Phi(z) = sum_i |z_i|^2 alpha_i``;
reducing at the integer level ``alpha`` produces a toric variety whose moment
polytope is

    Delta = { t in R^d_{>=0} : sum_i t_i alpha_i = alpha }.

Polytope combinatorics (vertices, Delzant checks, charts, lattice points) are
carried out in exact rational arithmetic; floating point is used only for the
analytic layers built on top of this module.

Indices are 0-based throughout.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np
import sympy
from scipy.optimize import linprog

from ._validation import as_complex_vector, as_int_matrix, as_int_vector

__all__ = [
    "WeightSystem",
    "DelzantPolytope",
    "CanonicalAffine",
    "moment_map",
    "unshifted_moment",
    "is_stable",
    "lattice_points",
    "canonical_affine",
    "preset",
    "list_presets",
    "product_system",
    "full_torus",
]


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class WeightSystem:
    """Integer weights ``alpha_i`` (shape ``(d, m)``), level ``alpha`` and optional polarizer.

    When ``polarizer`` is omitted a polarizing vector is searched for by linear
    programming, so the attribute is set exactly when the datum is polarized.
    """

    weights: np.ndarray
    level: np.ndarray
    polarizer: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        w = as_int_matrix(self.weights, "weights")
        d, m = w.shape
        lev = as_int_vector(self.level, "level", length=m)
        if np.any(np.all(w == 0, axis=1)):
            raise ValueError("weights: every weight alpha_i must be nonzero")
        if np.linalg.matrix_rank(w.astype(float)) < m:
            raise ValueError("weights: the weights must span R^m (effective action)")
        pol = self.polarizer
        if pol is None:
            pol = _find_polarizer(w)
        else:
            pol = np.asarray([Fraction(x) for x in np.atleast_1d(pol)], dtype=object)
            if pol.shape != (m,):
                raise ValueError(f"polarizer must have length {m}")
            vals = [sum(Fraction(int(w[i, a])) * pol[a] for a in range(m)) for i in range(d)]
            if min(vals) <= 0:
                raise ValueError("polarizer: alpha_i(v) must be positive for all i")
            pol = np.array([float(x) for x in pol])
        object.__setattr__(self, "weights", _frozen(w))
        object.__setattr__(self, "level", _frozen(lev))
        object.__setattr__(self, "polarizer", None if pol is None else _frozen(pol))

    @property
    def d(self) -> int:
        return self.weights.shape[0]

    @property
    def m(self) -> int:
        return self.weights.shape[1]

    @property
    def n(self) -> int:
        return self.d - self.m

    @property
    def polarized(self) -> bool:
        return self.polarizer is not None

    def scaled(self, k: int) -> "WeightSystem":
        """The datum for the ``k``-th tensor power (level ``k * alpha``)."""
        return WeightSystem(self.weights, k * self.level, self.polarizer, self.name)

    def with_level(self, level) -> "WeightSystem":
        return WeightSystem(self.weights, level, self.polarizer, self.name)

    def diagonal_circle(self) -> np.ndarray | None:
        """Return ``v`` with ``alpha_i(v) = 1`` for all ``i`` if it exists."""
        try:
            x, params = sympy.Matrix(self.weights.tolist()).gauss_jordan_solve(sympy.ones(self.d, 1))
        except ValueError:  # inconsistent system
            return None
        x = x.subs({p: 0 for p in params})
        return np.array([float(v) for v in x])

    def to_dict(self) -> dict:
        out = {"weights": self.weights.tolist(), "level": self.level.tolist()}
        if self.polarizer is not None:
            out["polarizer"] = [float(v) for v in self.polarizer]
        if self.name:
            out["name"] = self.name
        return out


def _find_polarizer(w: np.ndarray) -> np.ndarray | None:
    d, m = w.shape
    res = linprog(
        np.zeros(m),
        A_ub=-w.astype(float),
        b_ub=-np.ones(d),
        bounds=[(None, None)] * m,
        method="highs",
    )
    if res.status != 0:
        return None
    return np.asarray(res.x, dtype=float)


def unshifted_moment(ws: WeightSystem, z) -> np.ndarray:
    """``sum_i |z_i|^2 alpha_i``; accepts a single point or a batch (rows)."""
    z = np.asarray(z, dtype=complex)
    return (np.abs(z) ** 2) @ ws.weights


def moment_map(ws: WeightSystem, z) -> np.ndarray:
    """Shifted moment map ``sum_i |z_i|^2 alpha_i - alpha``; vanishes on the level set."""
    return unshifted_moment(ws, z) - ws.level


@dataclass(frozen=True)
class CanonicalAffine:
    """Chart data attached to a vertex.

    ``support`` is the vertex support ``I_v`` (its weights form a lattice
    basis), ``free`` the complementary indices, ``coeffs[j]`` the integer
    expansion ``alpha_{free[j]} = sum_i coeffs[j, i] alpha_{support[i]}`` and
    ``a`` the expansion of the level in the same basis.
    """

    support: tuple[int, ...]
    free: tuple[int, ...]
    coeffs: np.ndarray
    a: np.ndarray


def _exact_inverse(mat: np.ndarray) -> sympy.Matrix:
    return sympy.Matrix(mat.tolist()).inv()


@dataclass(frozen=True, eq=False)
class DelzantPolytope:
    """The moment polytope of a weight system at its level.

    Points of the polytope are labelled by moment coordinates ``t`` in
    ``R^d``.  The n-dimensional parametrization used for quadrature takes the
    free coordinates ``t_J`` of the canonical affine of the first vertex; the
    lattice-distance functionals are then ``l_i(q) = offset_i + (T q)_i``.
    """

    ws: WeightSystem
    strict: bool = True
    vertices: tuple = field(init=False)
    vertex_supports: tuple = field(init=False)

    def __post_init__(self):
        verts, supports = _enumerate_vertices(self.ws, self.strict)
        if not verts:
            raise ValueError("empty moment polytope: the level is not attained")
        object.__setattr__(self, "vertices", tuple(verts))
        object.__setattr__(self, "vertex_supports", tuple(supports))

    @property
    def n(self) -> int:
        return self.ws.n

    @property
    def bounded(self) -> bool:
        return self.ws.polarized

    @cached_property
    def chart(self) -> CanonicalAffine:
        return canonical_affine(self, self.vertices[0])

    @cached_property
    def _param(self) -> tuple[np.ndarray, np.ndarray]:
        ca = self.chart
        d = self.ws.d
        A_I = self.ws.weights[list(ca.support)].T  # m x m, columns are active weights
        A_J = self.ws.weights[list(ca.free)].T
        inv = np.array(_exact_inverse(A_I), dtype=np.int64)
        offset = np.zeros(d)
        T = np.zeros((d, len(ca.free)))
        offset[list(ca.support)] = inv @ self.ws.level
        T[list(ca.support)] = -(inv @ A_J)
        for j, idx in enumerate(ca.free):
            T[idx, j] = 1.0
        return offset, T

    def to_moment(self, q) -> np.ndarray:
        """Map parameter points ``q`` (shape ``(..., n)``) to moment coordinates."""
        offset, T = self._param
        q = np.asarray(q, dtype=float)
        return offset + q @ T.T

    def from_moment(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return t[..., list(self.chart.free)]

    def lattice_distances(self, q) -> np.ndarray:
        """The functionals ``l_i`` evaluated at parameter points."""
        return self.to_moment(q)

    def vertices_param(self) -> np.ndarray:
        return np.array(
            [[float(v[i]) for i in self.chart.free] for v in self.vertices], dtype=float
        ).reshape(len(self.vertices), self.n)

    def contains(self, t, tol: float = 1e-12) -> bool:
        t = np.asarray(t, dtype=float)
        if t.shape != (self.ws.d,):
            return False
        scale = max(1.0, float(np.abs(self.ws.level).max()))
        if np.any(t < -tol * scale):
            return False
        return bool(np.allclose(t @ self.ws.weights, self.ws.level, atol=tol * scale * 10))

    def scaled(self, k: int) -> "DelzantPolytope":
        return DelzantPolytope(self.ws.scaled(k), self.strict)

    def interior_point(self) -> np.ndarray:
        """Vertex barycenter, in moment coordinates."""
        return np.mean([[float(x) for x in v] for v in self.vertices], axis=0)


def _enumerate_vertices(ws: WeightSystem, strict: bool):
    d, m = ws.d, ws.m
    lev = sympy.Matrix(ws.level.tolist())
    verts: dict[tuple, tuple[int, ...]] = {}
    degenerate = False
    for S in itertools.combinations(range(d), m):
        A = sympy.Matrix(ws.weights[list(S)].T.tolist())
        det = A.det()
        if det == 0:
            continue
        tS = A.LUsolve(lev)
        if any(x < 0 for x in tS):
            continue
        t = [Fraction(0)] * d
        for i, idx in enumerate(S):
            t[idx] = Fraction(int(tS[i].p), int(tS[i].q))
        if any(x == 0 for x in tS):
            degenerate = True
        key = tuple(t)
        if abs(det) != 1 and strict:
            raise ValueError(
                f"weights {list(S)} at vertex {[str(x) for x in key]} are not a lattice basis "
                "(Delzant condition fails)"
            )
        verts.setdefault(key, S)
    if degenerate and strict:
        raise ValueError("polytope is not simple at some vertex (degenerate level)")
    keys = sorted(verts)
    supports = [tuple(i for i, x in enumerate(k) if x != 0) for k in keys]
    return keys, supports


def canonical_affine(poly: DelzantPolytope, vertex) -> CanonicalAffine:
    """Index set, integer expansion coefficients and level coefficients at a vertex."""
    ws = poly.ws
    vertex = tuple(Fraction(x) for x in vertex)
    if vertex not in poly.vertices:
        raise ValueError("not a vertex of the polytope")
    support = tuple(i for i, x in enumerate(vertex) if x != 0)
    if len(support) != ws.m:
        raise ValueError("vertex is not simple: support size differs from the torus rank")
    A_I = ws.weights[list(support)].T
    det = int(round(float(sympy.Matrix(A_I.tolist()).det())))
    if abs(det) != 1:
        raise ValueError(
            f"active weights {list(support)} are not a lattice basis (determinant {det})"
        )
    inv = _exact_inverse(A_I)
    free = tuple(i for i in range(ws.d) if i not in support)
    coeffs = np.zeros((len(free), ws.m), dtype=np.int64)
    for j, idx in enumerate(free):
        c = inv * sympy.Matrix(ws.weights[idx].tolist())
        coeffs[j] = [int(x) for x in c]
    a = inv * sympy.Matrix(ws.level.tolist())
    return CanonicalAffine(support, free, _frozen(coeffs), _frozen(np.array([int(x) for x in a])))


def is_stable(ws_or_poly, z) -> bool:
    """``True`` iff the support of ``z`` contains the support of a point of the polytope."""
    poly = ws_or_poly if isinstance(ws_or_poly, DelzantPolytope) else DelzantPolytope(ws_or_poly)
    z = as_complex_vector(z, poly.ws.d)
    Iz = {i for i in range(poly.ws.d) if z[i] != 0}
    return any(set(S) <= Iz for S in poly.vertex_supports)


def lattice_points(poly: DelzantPolytope, k: int = 1) -> list[tuple[int, ...]]:
    """All ``m`` in ``Z^d_{>=0}`` with ``sum m_i alpha_i = k alpha``, sorted lexicographically."""
    if int(k) != k or k < 1:
        raise ValueError("k must be a positive integer")
    k = int(k)
    if not poly.bounded:
        raise ValueError("unpolarized weight system")
    ws = poly.ws
    ca = poly.chart
    A_I = ws.weights[list(ca.support)].T
    A_J = ws.weights[list(ca.free)].T
    inv = np.array(_exact_inverse(A_I), dtype=np.int64)
    upper = [
        int(max(k * v[i] for v in poly.vertices)) for i in ca.free
    ]
    if not ca.free:
        grid = np.zeros((1, 0), dtype=np.int64)
    else:
        axes = [np.arange(u + 1, dtype=np.int64) for u in upper]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))
    tI = (k * ws.level)[None, :] @ inv.T - grid @ (inv @ A_J).T
    keep = np.all(tI >= 0, axis=1)
    pts = np.zeros((int(keep.sum()), ws.d), dtype=np.int64)
    pts[:, list(ca.support)] = tI[keep]
    pts[:, list(ca.free)] = grid[keep]
    return sorted(tuple(int(x) for x in row) for row in pts)


# --- presets -----------------------------------------------------------------


def _cp(n: int) -> WeightSystem:
    if n < 1:
        raise ValueError("cp{n} needs n >= 1")
    return WeightSystem(np.ones((n + 1, 1), dtype=int), [1], [1], name=f"cp{n}")


def _hirzebruch(n: int, a1: int = 1, a2: int = 2) -> WeightSystem:
    if n < 0:
        raise ValueError("hirzebruch{n} needs n >= 0")
    w = [[1, 0], [0, 1], [1, -n], [0, 1]]
    return WeightSystem(w, [a1, a2], [n + 1, 1], name=f"hirzebruch{n}")


_PRESET_HELP = {
    "cp{n}": "projective space CP^n: d = n+1 coordinates, diagonal circle, level 1",
    "hirzebruch{n}": "Hirzebruch surface H_n: weights (1,0),(0,1),(1,-n),(0,1), level (1,2)",
}


def list_presets() -> dict[str, str]:
    return dict(_PRESET_HELP)


def preset(name: str) -> WeightSystem:
    """Build a bundled weight system such as ``"cp2"`` or ``"hirzebruch1"``."""
    key = name.strip().lower()
    for prefix, factory in (("hirzebruch", _hirzebruch), ("cp", _cp)):
        if key.startswith(prefix):
            tail = key[len(prefix):]
            if not tail.isdigit():
                break
            return factory(int(tail))
    raise ValueError(f"unknown preset {name!r}; available: {', '.join(_PRESET_HELP)}")


def product_system(a: WeightSystem, b: WeightSystem) -> WeightSystem:
    """Block-diagonal datum for the product of two reductions."""
    w = np.zeros((a.d + b.d, a.m + b.m), dtype=np.int64)
    w[: a.d, : a.m] = a.weights
    w[a.d:, a.m:] = b.weights
    level = np.concatenate([a.level, b.level])
    pol = None
    if a.polarizer is not None and b.polarizer is not None:
        pol = np.concatenate([a.polarizer, b.polarizer])
    return WeightSystem(w, level, None if pol is None else _fractions(pol), name=f"{a.name}x{b.name}")


def _fractions(v) -> list[Fraction]:
    return [Fraction(x).limit_denominator(10**6) for x in v]


def full_torus(level) -> WeightSystem:
    """The full diagonal torus ``T^d`` acting on ``C^d`` at the given level."""
    level = as_int_vector(level, "level")
    d = level.shape[0]
    return WeightSystem(np.eye(d, dtype=int), level, np.ones(d), name="torus")
