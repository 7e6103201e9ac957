"""Non-abelian model families: Grassmannians, Martin chains, quivers and polygon spaces.

Chains
------
A chain of length ``n`` is a list ``Z = (Z_1, ..., Z_{n-1})`` with ``Z_i`` of
shape ``i x (i+1)``.  The group ``U(1) x ... x U(n-1)`` acts by

    (U_1 Z_1 U_2^*, ..., U_{n-2} Z_{n-2} U_{n-1}^*, U_{n-1} Z_{n-1})

with moment map components ``Z_i Z_i^* - Z_{i-1}^* Z_{i-1}``.  With positive
twists ``m_i`` the level is ``m_i I_i``.  The products
``pi_k(Z) = Z_k ... Z_{n-1}`` transform by ``pi_k -> A_k pi_k``, so the
invariant sections are products of maximal minors ``det(pi_k(Z)_J)^{m_k}``.

Quivers
-------
A representation assigns to an edge ``(i, j)`` a matrix of shape
``(l_j, l_i)``.  Vertices listed in ``frame`` carry no group.  The moment map
at a gauge vertex ``k`` is ``sum_in Z Z^* - sum_out Z^* Z - lambda_k I``.

Polygon spaces are the star quiver with ``m`` one-dimensional arms pointing
into a two-dimensional center; arms are stored as the rows of an ``(m, 2)``
array.
"""

from __future__ import annotations

import graphlib
import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import unitary_group

from ._validation import check_hermitian_blocks

__all__ = [
    "MatrixChainSpec",
    "QuiverSpec",
    "chain_moment",
    "generate_level_point",
    "coadjoint_image",
    "quiver_moment",
    "polygon_spec",
    "polygon_moment",
    "polygon_level_point",
    "invariant_section_value",
    "grassmannian_section",
    "chain_section",
    "chain_section_printed",
    "quiver_section",
    "bracket_pairing",
    "polygon_bracket_section",
    "polygon_x_section",
    "random_chain",
]


@dataclass(frozen=True)
class MatrixChainSpec:
    """Chain length ``n``, twists ``m_1..m_{n-1}`` and the top level ``a_n``."""

    n: int
    twists: tuple
    top: float = 0.0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n: chain length must be at least 2")
        tw = tuple(float(x) for x in self.twists)
        if len(tw) != self.n - 1:
            raise ValueError(f"twists: expected {self.n - 1} entries, got {len(tw)}")
        if any(x <= 0 for x in tw):
            raise ValueError("twists: all twists must be positive")
        object.__setattr__(self, "twists", tw)

    @property
    def levels(self) -> np.ndarray:
        """``a_1, ..., a_n`` with ``a_i = m_i`` for ``i < n``."""
        return np.array(list(self.twists) + [float(self.top)])

    @property
    def eigenvalues(self) -> np.ndarray:
        """``lambda_i = a_i + ... + a_n``."""
        return np.cumsum(self.levels[::-1])[::-1]

    def shapes(self) -> list[tuple[int, int]]:
        return [(i, i + 1) for i in range(1, self.n)]

    def check_shapes(self, Z) -> None:
        if len(Z) != self.n - 1:
            raise ValueError(f"chain must have {self.n - 1} links, got {len(Z)}")
        for i, (Zi, shp) in enumerate(zip(Z, self.shapes()), start=1):
            if np.shape(Zi) != shp:
                raise ValueError(f"link {i} must have shape {shp}, got {np.shape(Zi)}")


def chain_moment(spec: MatrixChainSpec, Z) -> list[np.ndarray]:
    """Shifted moment ``(Z_1 Z_1^* - m_1, ..., Z_i Z_i^* - Z_{i-1}^* Z_{i-1} - m_i I_i, ...)``."""
    spec.check_shapes(Z)
    out = []
    prev = None
    for i, Zi in enumerate(Z, start=1):
        Zi = np.asarray(Zi, dtype=complex)
        M = Zi @ Zi.conj().T - spec.twists[i - 1] * np.eye(i)
        if prev is not None:
            M = M - prev.conj().T @ prev
        out.append(M)
        prev = Zi
    return check_hermitian_blocks(out)


def generate_level_point(spec: MatrixChainSpec, seed=None) -> list[np.ndarray]:
    """Build ``Z_i = [R_i, 0] U_i`` with ``R_i R_i^* = Z_{i-1}^* Z_{i-1} + m_i I`` and seeded unitaries."""
    rng = np.random.default_rng(seed)
    Z = []
    prev = None
    for i in range(1, spec.n):
        rhs = spec.twists[i - 1] * np.eye(i, dtype=complex)
        if prev is not None:
            rhs = rhs + prev.conj().T @ prev
        R = np.linalg.cholesky(0.5 * (rhs + rhs.conj().T))
        U = unitary_group.rvs(i + 1, random_state=rng)
        Zi = np.hstack([R, np.zeros((i, 1), dtype=complex)]) @ U
        Z.append(Zi)
        prev = Zi
    return Z


def random_chain(spec: MatrixChainSpec, rng) -> list[np.ndarray]:
    """A random (generically full-rank) chain with complex Gaussian entries."""
    return [
        rng.standard_normal(shp) + 1j * rng.standard_normal(shp) for shp in spec.shapes()
    ]


def coadjoint_image(spec: MatrixChainSpec, Z) -> np.ndarray:
    """``Psi(Z) = Z_{n-1}^* Z_{n-1} + a_n I_n``."""
    Zl = np.asarray(Z[-1], dtype=complex)
    M = Zl.conj().T @ Zl + spec.top * np.eye(spec.n)
    return 0.5 * (M + M.conj().T)


def act_chain(U, Z) -> list[np.ndarray]:
    """Apply ``(A_1, ..., A_{n-1})`` to a chain: ``A_i Z_i A_{i+1}^{-1}``, last link ``A_{n-1} Z_{n-1}``."""
    out = []
    for i, Zi in enumerate(Z):
        W = U[i] @ Zi
        if i + 1 < len(Z):
            W = W @ np.linalg.inv(U[i + 1])
        out.append(W)
    return out


# --- quivers -----------------------------------------------------------------------


@dataclass(frozen=True)
class QuiverSpec:
    """Acyclic quiver with dimension vector, frame vertices, levels and edge twists."""

    dims: tuple
    edges: tuple
    levels: tuple
    frame: frozenset = field(default_factory=frozenset)
    twists: tuple | None = None

    def __post_init__(self):
        dims = tuple(int(x) for x in self.dims)
        edges = tuple((int(a), int(b)) for a, b in self.edges)
        frame = frozenset(int(x) for x in self.frame)
        V = len(dims)
        for a, b in edges:
            if not (0 <= a < V and 0 <= b < V) or a == b:
                raise ValueError(f"edges: invalid edge {(a, b)}")
        ts = graphlib.TopologicalSorter({v: set() for v in range(V)})
        for a, b in edges:
            ts.add(b, a)
        try:
            tuple(ts.static_order())
        except graphlib.CycleError as exc:
            raise ValueError("edges: the quiver must be acyclic") from exc
        levels = tuple(float(x) for x in self.levels)
        if len(levels) != V:
            raise ValueError(f"levels: expected {V} entries, got {len(levels)}")
        if self.twists is not None and len(self.twists) != len(edges):
            raise ValueError("twists: one twist per edge required")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "frame", frame)
        object.__setattr__(self, "levels", levels)

    @property
    def gauge_vertices(self) -> list[int]:
        return [v for v in range(len(self.dims)) if v not in self.frame]

    def edge_shape(self, e) -> tuple[int, int]:
        a, b = e
        return (self.dims[b], self.dims[a])

    def check_rep(self, Z) -> None:
        for e in self.edges:
            if e not in Z:
                raise ValueError(f"representation is missing edge {e}")
            if np.shape(Z[e]) != self.edge_shape(e):
                raise ValueError(f"edge {e} must have shape {self.edge_shape(e)}")

    def flow_defect(self) -> dict[int, float]:
        """``sum_in nu - sum_out nu - lambda`` per gauge vertex (zero when the flow condition holds)."""
        if self.twists is None:
            raise ValueError("twists: no edge twists given")
        out = {}
        for v in self.gauge_vertices:
            s = sum(t for (a, b), t in zip(self.edges, self.twists) if b == v)
            s -= sum(t for (a, b), t in zip(self.edges, self.twists) if a == v)
            out[v] = s - self.levels[v]
        return out


def quiver_moment(spec: QuiverSpec, Z) -> dict[int, np.ndarray]:
    spec.check_rep(Z)
    out = {}
    for v in spec.gauge_vertices:
        M = -spec.levels[v] * np.eye(spec.dims[v], dtype=complex)
        for (a, b) in spec.edges:
            X = np.asarray(Z[(a, b)], dtype=complex)
            if b == v:
                M = M + X @ X.conj().T
            if a == v:
                M = M - X.conj().T @ X
        out[v] = 0.5 * (M + M.conj().T)
    return out


def polygon_spec(lambdas) -> QuiverSpec:
    """Star quiver for polygon spaces: arms ``0..m-1`` (dim 1) into center ``m`` (dim 2)."""
    lam = tuple(float(x) for x in lambdas)
    m = len(lam) - 1
    if m < 3:
        raise ValueError("lambdas: a polygon needs at least three sides")
    if any(x >= 0 for x in lam[:-1]):
        raise ValueError("lambdas: arm levels must be negative")
    if abs(sum(lam[:-1]) + 2 * lam[-1]) > 1e-12 * max(1.0, abs(lam[-1])):
        raise ValueError("lambdas: lambda_1 + ... + lambda_m + 2 lambda_{m+1} must vanish")
    edges = tuple((i, m) for i in range(m))
    return QuiverSpec((1,) * m + (2,), edges, lam, twists=tuple(-x for x in lam[:-1]))


def polygon_rep(Z) -> dict:
    Z = np.asarray(Z, dtype=complex)
    m = Z.shape[0]
    return {(i, m): Z[i].reshape(2, 1) for i in range(m)}


def polygon_moment(lambdas, Z) -> list[np.ndarray]:
    """``(-|Z_1|^2 - lambda_1, ..., sum Z_i Z_i^* - lambda_{m+1} I)`` computed directly."""
    lam = np.asarray(lambdas, dtype=float)
    Z = np.asarray(Z, dtype=complex)
    arms = [np.array([[-np.vdot(z, z).real - lam[i]]]) for i, z in enumerate(Z)]
    center = Z.T @ Z.conj() - lam[-1] * np.eye(2)
    return arms + [0.5 * (center + center.conj().T)]


def polygon_level_point(lambdas, seed=None) -> np.ndarray:
    """A closed polygon with side lengths ``-lambda_i`` lifted to ``C^2`` arms.

    Random unit vectors in ``R^3`` are closed up by the projection solver, so
    the output is exactly a level point up to solver tolerance.
    """
    from .kempf_ness import solve_polygon

    rng = np.random.default_rng(seed)
    m = len(lambdas) - 1
    Z = rng.standard_normal((m, 2)) + 1j * rng.standard_normal((m, 2))
    return solve_polygon(lambdas, Z).level_point


# --- invariant sections --------------------------------------------------------


def _minor_columns(M: np.ndarray, cols=None) -> tuple[int, ...]:
    r, c = M.shape
    if cols is not None:
        return tuple(cols)
    scale = max(1.0, float(np.abs(M).max()))
    for J in itertools.combinations(range(c), r):
        if abs(np.linalg.det(M[:, list(J)])) > 1e-12 * scale**r:
            return J
    return tuple(range(r))


def grassmannian_section(Z, m: int = 1, cols=None) -> tuple[complex, tuple]:
    """``det(Z_J)^m`` with ``J`` the leading columns (lexicographic fallback if singular)."""
    Z = np.asarray(Z, dtype=complex)
    J = _minor_columns(Z, cols)
    return complex(np.linalg.det(Z[:, list(J)]) ** m), J


def chain_section(spec: MatrixChainSpec, Z, cols=None) -> tuple[complex, list]:
    """``prod_k det(pi_k(Z)_{J_k})^{m_k}`` with minors of the products ``pi_k``."""
    from .kempf_ness import chain_products

    spec.check_shapes(Z)
    pis = chain_products(Z)
    val = 1.0 + 0j
    Js = []
    for k, P in enumerate(pis, start=1):
        J = _minor_columns(P, None if cols is None else cols[k - 1])
        Js.append(J)
        val *= np.linalg.det(P[:, list(J)]) ** spec.twists[k - 1]
    return complex(val), Js


def chain_section_printed(spec: MatrixChainSpec, Z) -> complex:
    """``prod_i det((Z_i)_{1..i})^{m_i - m_{i-1}}`` (leading minors of the individual links)."""
    val = 1.0 + 0j
    prev = 0.0
    for i, Zi in enumerate(Z, start=1):
        mi = spec.twists[i - 1]
        val *= np.linalg.det(np.asarray(Zi)[:, :i]) ** (mi - prev)
        prev = mi
    return complex(val)


def quiver_section(spec: QuiverSpec, Z) -> complex:
    """``prod_e det((Z_e)_J)^{nu_e}`` with leading square minors.

    This is equivariant when every edge joins vertices of equal dimension;
    for rectangular edges the minor only sees the leading block.
    """
    if spec.twists is None:
        raise ValueError("twists: the quiver has no edge twists")
    spec.check_rep(Z)
    val = 1.0 + 0j
    for e, nu in zip(spec.edges, spec.twists):
        X = np.asarray(Z[e], dtype=complex)
        r = min(X.shape)
        val *= np.linalg.det(X[:r, :r]) ** nu
    return complex(val)


def bracket_pairing(degrees) -> list[tuple[int, int]]:
    """Pair arm indices so that arm ``i`` appears ``degrees[i]`` times (largest-first greedy)."""
    deg = [int(round(x)) for x in degrees]
    if any(abs(d - x) > 1e-12 for d, x in zip(deg, degrees)):
        raise ValueError("bracket sections need integer side lengths")
    total = sum(deg)
    if total % 2 or max(deg) > total // 2:
        raise ValueError("no bracket pairing exists for these side lengths")
    pairs = []
    deg = list(deg)
    while sum(deg):
        order = sorted(range(len(deg)), key=lambda i: (-deg[i], i))
        a, b = sorted(order[:2])
        pairs.append((a, b))
        deg[a] -= 1
        deg[b] -= 1
    return pairs


def polygon_bracket_section(lambdas, Z, pairs=None) -> complex:
    """Product of brackets ``det[Z_a Z_b]``; invariant for the full polygon group."""
    Z = np.asarray(Z, dtype=complex)
    if pairs is None:
        pairs = bracket_pairing(-np.asarray(lambdas[:-1], dtype=float))
    val = 1.0 + 0j
    for a, b in pairs:
        val *= Z[a, 0] * Z[b, 1] - Z[a, 1] * Z[b, 0]
    return complex(val)


def polygon_x_section(lambdas, Z) -> complex:
    """``prod x_i^{-lambda_i}`` with ``x_i`` the first component of arm ``i``."""
    Z = np.asarray(Z, dtype=complex)
    lam = np.asarray(lambdas, dtype=float)
    return complex(np.prod(Z[:, 0] ** (-lam[:-1])))


def invariant_section_value(obj, Z, **kw) -> complex:
    """Dispatch to the section evaluator matching ``obj``.

    ``obj`` may be a :class:`MatrixChainSpec`, a :class:`QuiverSpec`, or an
    integer ``m`` (Grassmannian twist).
    """
    if isinstance(obj, MatrixChainSpec):
        return chain_section(obj, Z, **kw)[0]
    if isinstance(obj, QuiverSpec):
        return quiver_section(obj, Z)
    if isinstance(obj, (int, np.integer)):
        return grassmannian_section(Z, int(obj), **kw)[0]
    raise TypeError(f"no invariant section for {type(obj).__name__}")
