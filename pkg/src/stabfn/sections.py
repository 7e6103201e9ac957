"""Monomial sections: pointwise norms, L2 norms and the orbit volume function.

Normalizations
--------------
Upstairs, the k-th power of the flat metric is ``<1,1>_k = exp(-k |z|^2)``;
:func:`l2_norm_upstairs` integrates against Lebesgue measure ``dx dy`` on
``C^d``, giving ``prod_i pi m_i! / k^{m_i+1}``.  The Liouville measure
``omega^d / d!`` of ``omega = i sum dz ^ dzbar`` is ``2^d`` times that
(:func:`liouville_factor`).

Downstairs, :func:`l2_norm_downstairs` integrates against the lattice-
normalized Lebesgue measure ``dsigma`` on the polytope; the reduced Liouville
measure pushes forward to ``(2 pi)^n dsigma``.

The volume function is the Riemannian volume of the torus orbit in the
Kähler metric ``g = 2 (dx^2 + dy^2)``:

    V(q) = (2 pi)^m sqrt(det(2 Gamma(q))),   Gamma_ab = sum_i alpha_ia alpha_ib q_i.

With these choices ``(k/pi)^{m/2} 2^d ||z^m||^2 / ((2 pi)^n int V |s|^2 dsigma) -> 1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from ._validation import as_complex_vector
from .geometry import DelzantPolytope, WeightSystem, lattice_points
from .quadrature import QuadResult, integrate_log

__all__ = [
    "MonomialSection",
    "liouville_factor",
    "reduced_measure_factor",
    "upstairs_pointwise_norm",
    "log_pointwise_norm_downstairs",
    "pointwise_norm_downstairs",
    "l2_norm_upstairs",
    "log_l2_norm_upstairs",
    "l2_norm_downstairs",
    "log_l2_norm_downstairs",
    "gram_matrix",
    "orbit_gram",
    "volume_function",
    "log_volume_density",
    "level_set_volume",
]


def liouville_factor(d: int) -> float:
    """Density of ``omega^d/d!`` with respect to Lebesgue measure on ``C^d``."""
    return 2.0**d


def reduced_measure_factor(n: int) -> float:
    """Density of the reduced Liouville measure's pushforward with respect to ``dsigma``."""
    return (2 * np.pi) ** n


@dataclass(frozen=True)
class MonomialSection:
    """The section ``z^m`` of the ``k``-th power, ``m`` a lattice point of ``k Delta``."""

    m: tuple
    k: int = 1

    def __post_init__(self):
        m = tuple(int(x) for x in self.m)
        if any(x < 0 for x in m):
            raise ValueError("m: exponents must be nonnegative")
        if int(self.k) != self.k or self.k < 1:
            raise ValueError("k: tensor power must be a positive integer")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "k", int(self.k))

    def check(self, ws: WeightSystem) -> None:
        if len(self.m) != ws.d:
            raise ValueError(f"m must have length {ws.d}")
        if not np.array_equal(np.array(self.m) @ ws.weights, self.k * ws.level):
            raise ValueError("m is not a lattice point of k * Delta")

    @property
    def exponents(self) -> np.ndarray:
        return np.array(self.m, dtype=float)


def upstairs_pointwise_norm(sec: MonomialSection, z) -> float:
    """``|z^m|^2 exp(-k |z|^2)``."""
    z = as_complex_vector(z)
    a = np.abs(z) ** 2
    return float(np.prod(a ** sec.exponents) * np.exp(-sec.k * a.sum()))


def _moment_rows(t):
    t = np.asarray(t, dtype=float)
    return t if t.ndim == 2 else t[None, :]


def log_pointwise_norm_downstairs(sec: MonomialSection, t) -> np.ndarray:
    """``sum m_i log l_i - k l`` at moment coordinates ``t`` (rows); ``-inf`` where a used ``l_i`` vanishes."""
    T = _moment_rows(t)
    m = sec.exponents
    with np.errstate(divide="ignore"):
        logs = np.where(m > 0, np.log(np.maximum(T, 0.0)) * m, 0.0)
    return logs.sum(axis=1) - sec.k * T.sum(axis=1)


def pointwise_norm_downstairs(sec: MonomialSection, poly: DelzantPolytope, q) -> float:
    """``prod l_i(q)^{m_i} exp(-k l(q))`` for ``q`` in the polytope (moment coordinates)."""
    q = np.asarray(q, dtype=float)
    if not poly.contains(q, tol=1e-9):
        raise ValueError("q is outside the moment polytope")
    q = np.maximum(q, 0.0)
    return float(np.exp(log_pointwise_norm_downstairs(sec, q)[0]))


def log_l2_norm_upstairs(sec: MonomialSection) -> float:
    m = sec.exponents
    return float(np.sum(np.log(np.pi) + gammaln(m + 1) - (m + 1) * np.log(sec.k)))


def l2_norm_upstairs(sec: MonomialSection) -> float:
    """``prod_i pi m_i! / k^{m_i+1}`` (Lebesgue measure on ``C^d``)."""
    return float(np.exp(log_l2_norm_upstairs(sec)))


def orbit_gram(ws: WeightSystem, t) -> np.ndarray:
    """``Gamma(t) = sum_i t_i alpha_i alpha_i^T`` for rows of moment coordinates."""
    T = _moment_rows(t)
    A = ws.weights.astype(float)
    return np.einsum("ni,ia,ib->nab", T, A, A)


def log_volume_density(ws: WeightSystem, t) -> np.ndarray:
    """``log V`` at rows of moment coordinates (no interiority check)."""
    G = orbit_gram(ws, t)
    sign, logdet = np.linalg.slogdet(2.0 * G)
    return ws.m * np.log(2 * np.pi) + 0.5 * logdet


def volume_function(ws: WeightSystem, q) -> float:
    """Riemannian volume ``(2 pi)^m sqrt(det 2 Gamma(q))`` of the torus orbit over ``q``."""
    q = np.asarray(q, dtype=float)
    if q.shape != (ws.d,):
        raise ValueError(f"q must have length {ws.d}")
    if np.any(q <= 0):
        raise ValueError("q must be an interior point of the polytope")
    return float(np.exp(log_volume_density(ws, q)[0]))


def _log_density_fn(poly: DelzantPolytope, secs, weight: str):
    ws = poly.ws
    M = np.array([s.exponents for s in secs])
    ks = np.array([s.k for s in secs], dtype=float)

    def logf(qparam):
        T = np.maximum(poly.to_moment(qparam), 1e-300)
        out = np.log(T) @ M.T - T.sum(axis=1)[:, None] * ks[None, :]
        if weight == "V":
            out = out + log_volume_density(ws, T)[:, None]
        elif weight != "plain":
            raise ValueError("weight must be 'plain' or 'V'")
        return out

    return logf


def log_l2_norm_downstairs(
    secs, poly: DelzantPolytope, weight: str = "plain", rtol: float = 1e-9, strict: bool = True
) -> QuadResult:
    """Log of ``int prod l_i^{m_i} e^{-k l} (V) dsigma`` for one or several sections.

    ``strict=False`` skips the lattice-point check and integrates the
    density formally, for exponents that do not label a section.
    """
    single = isinstance(secs, MonomialSection)
    secs = [secs] if single else list(secs)
    if strict:
        for s in secs:
            s.check(poly.ws)
    logf = _log_density_fn(poly, secs, weight)
    res = integrate_log(logf, poly.vertices_param(), rtol=rtol)
    if single:
        res.value = float(np.atleast_1d(res.value)[0])
    return res


def l2_norm_downstairs(
    sec: MonomialSection,
    poly: DelzantPolytope,
    weight: str = "plain",
    rtol: float = 1e-9,
    strict: bool = True,
) -> QuadResult:
    """Downstairs L2 norm ``int_Delta prod l_i^{m_i} e^{-k l} dsigma`` (optionally ``V``-weighted).

    ``poly`` is the polytope at level ``alpha``; the section ``z^m`` of the
    ``k``-th power has ``m`` in ``k Delta``.
    """
    res = log_l2_norm_downstairs(sec, poly, weight, rtol, strict)
    return QuadResult(float(np.exp(res.value)), res.error, res.order, res.n_nodes)


def gram_matrix(
    poly: DelzantPolytope, k: int, weight: str = "plain", rtol: float = 1e-9
) -> tuple[list, np.ndarray]:
    """Diagonal Gram matrix of the monomial basis of ``k Delta``.

    Distinct lattice points carry distinct torus characters, so off-diagonal
    entries vanish identically and are not computed.
    """
    pts = lattice_points(poly, k)
    secs = [MonomialSection(m, k) for m in pts]
    res = log_l2_norm_downstairs(secs, poly, weight, rtol)
    return pts, np.diag(np.exp(np.atleast_1d(res.value)))


def level_set_volume(poly: DelzantPolytope, rtol: float = 1e-10) -> float:
    """Riemannian volume of the level set in the metric ``2 (dx^2 + dy^2)``.

    Parametrized by ``(q, theta)`` with ``|z_i|^2 = t_i(q)``, the metric reads
    ``sum dt_i^2 / (2 t_i) + 2 t_i dtheta_i^2``; the volume element is
    computed directly from it, without using the orbit volume function.
    """
    d = poly.ws.d
    _, T = poly._param

    def logf(qparam):
        t = np.maximum(poly.to_moment(qparam), 1e-300)
        torus = 0.5 * np.sum(np.log(2.0 * t), axis=1)
        G = np.einsum("ia,ni,ib->nab", T, 1.0 / (2.0 * t), T)
        _, ld = np.linalg.slogdet(G) if T.shape[1] else (None, np.zeros(len(t)))
        return torus + 0.5 * ld

    res = integrate_log(logf, poly.vertices_param(), rtol=rtol)
    return float(np.exp(d * np.log(2 * np.pi) + res.value))
