"""Large-parameter experiments: Laplace integrals, half-form ratios, moments, density of states.

Measures follow :mod:`stabfn.sections`: the upstairs Liouville measure is
``2^d`` times Lebesgue measure on ``C^d`` and the reduced measure is
``(2 pi)^n dsigma``.  Torus-invariant integrals over ``C^d`` are split as

    z = exp(i xi) p,   |p_i|^2 = t_i(q),   q in Delta,  xi in R^m,

under which the Liouville measure becomes ``(2 pi)^d |J(q, xi)| dq dxi dtheta/(2 pi)^d``
with ``J`` the Jacobian of ``(q, xi) -> |z|^2``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, roots_legendre

from .geometry import DelzantPolytope, WeightSystem, lattice_points
from .quadrature import QuadratureError, integrate
from .sections import (
    MonomialSection,
    log_l2_norm_downstairs,
    log_l2_norm_upstairs,
    log_volume_density,
    orbit_gram,
)

log = logging.getLogger(__name__)

__all__ = [
    "AsymptoticFit",
    "fit_series",
    "loglog_exponent",
    "orbit_integral",
    "laplace_orbit",
    "laplace_total",
    "halfform_ratio",
    "moment_limits",
    "moment_limit_constant",
    "moment_transfer",
    "density_of_states",
    "upstairs_g_trace",
    "trace_leading_relation",
    "cutoff_transfer",
    "cutoff_radius",
    "smooth_cutoff",
]

TAIL = 46.0  # integrands below exp(-TAIL) times the peak are dropped


@dataclass
class AsymptoticFit:
    """A measured series with its rescaled fit ``c0 + c1 / x``."""

    grid: np.ndarray
    values: np.ndarray
    exponent: float
    rescaled: np.ndarray
    c0: float
    c1: float
    residual: float
    free_exponent: float
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        if g.ndim != 1 or len(g) < 4 or np.any(np.diff(g) <= 0):
            raise ValueError("grid must be strictly increasing with at least 4 points")

    def to_dict(self) -> dict:
        out = {
            "grid": [float(x) for x in self.grid],
            "values": [float(x) for x in self.values],
            "rescaled": [float(x) for x in self.rescaled],
            "exponent": float(self.exponent),
            "c0": float(self.c0),
            "c1": float(self.c1),
            "residual": float(self.residual),
            "free_exponent": float(self.free_exponent),
        }
        out.update({k: _jsonable(v) for k, v in self.extra.items()})
        return out


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def fit_series(x, y, terms: int = 2) -> tuple[np.ndarray, float]:
    """Least squares ``y ~ sum_j c_j x^{-j}``, ``j < terms``; returns coefficients and residual norm."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    X = np.stack([x ** (-j) for j in range(terms)], axis=1)
    c, *_ = np.linalg.lstsq(X, y, rcond=None)
    return c, float(np.linalg.norm(X @ c - y))


def loglog_exponent(x, y) -> float:
    """Slope of the least squares line through ``(log x, log |y|)``."""
    lx, ly = np.log(np.asarray(x, dtype=float)), np.log(np.abs(np.asarray(y, dtype=float)))
    return float(np.polyfit(lx, ly, 1)[0])


def _make_fit(grid, values, exponent, rescaled=None, **extra) -> AsymptoticFit:
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    if rescaled is None:
        rescaled = values * grid ** (-exponent)
    rescaled = np.asarray(rescaled, dtype=float)
    c, res = fit_series(grid, rescaled, 2)
    return AsymptoticFit(
        grid, values, exponent, rescaled, float(c[0]), float(c[1]), res,
        loglog_exponent(grid, values), dict(extra),
    )


# --- orbit integrals ----------------------------------------------------------------


@lru_cache(maxsize=None)
def _gl(n: int):
    return roots_legendre(n)


def _orbit_psi(t, A, lev, xi):
    """``psi(exp(i xi) p)`` for ``|p_i|^2 = t_i`` on the level set (rows of ``xi``)."""
    e = np.exp(np.minimum(2.0 * xi @ A.T, 700.0))
    return -(e * t).sum(axis=1) + t.sum() + 2.0 * xi @ lev


def _radius(t, A, lev, lam, W, m):
    """Radius in whitened coordinates beyond which ``lam psi < -TAIL``."""
    if m == 1:
        dirs = np.array([[1.0], [-1.0]])
    else:
        ang = np.linspace(0, 2 * np.pi, 65)[:-1]
        if m == 2:
            dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        else:
            rng = np.random.default_rng(0)
            dirs = rng.standard_normal((128, m))
            dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    def alive(r):
        return lam * _orbit_psi(t, A, lev, (r[:, None] * dirs) @ W.T) > -TAIL

    lo, hi = np.zeros(len(dirs)), np.ones(len(dirs))
    grow = alive(hi)
    while np.any(grow):
        lo[grow], hi[grow] = hi[grow], 2 * hi[grow]
        if hi.max() > 1e4:
            raise QuadratureError("orbit integrand does not decay")
        grow = alive(hi)
    for _ in range(30):
        mid = 0.5 * (lo + hi)
        a = alive(mid)
        lo = np.where(a, mid, lo)
        hi = np.where(a, hi, mid)
    R = hi
    return R.max() * 1.05


def orbit_integral(
    ws: WeightSystem, t, lam: float, weight, rtol: float = 1e-11, panels: int = 4
) -> tuple[float, float]:
    """``int_{R^m} weight(xi) exp(lam psi(exp(i xi) p)) dxi`` for a level point with ``|p|^2 = t``.

    The integrand is whitened by the orbit Hessian, truncated where
    ``lam psi < -TAIL`` (concavity makes the superlevel set convex) and
    integrated by composite Gauss-Legendre rules, doubling the panel count
    until the estimate changes by less than ``rtol``.  Returns ``(value, error)``.
    """
    t = np.asarray(t, dtype=float)
    A = ws.weights.astype(float)
    lev = ws.level.astype(float)
    m = ws.m
    G = orbit_gram(ws, t)[0]
    # lam psi ~ -2 lam xi^T G xi; whiten so that it reads -|u|^2
    L = np.linalg.cholesky(2.0 * lam * G)
    W = np.linalg.inv(L).T
    R = _radius(t, A, lev, lam, W, m)
    prev = None
    err = np.inf
    jac = abs(np.linalg.det(W))
    while panels <= 256:
        x, w = _gl(16)
        edges = np.linspace(-R, R, panels + 1)
        h = (edges[1] - edges[0]) / 2
        nodes = ((edges[:-1] + h)[:, None] + h * x[None, :]).ravel()
        wts = np.tile(w * h, panels)
        U = np.stack(np.meshgrid(*([nodes] * m), indexing="ij"), -1).reshape(-1, m)
        Wt = np.prod(np.stack(np.meshgrid(*([wts] * m), indexing="ij"), -1).reshape(-1, m), axis=1)
        xi = U @ W.T
        lp = lam * _orbit_psi(t, A, lev, xi)
        keep = lp > -TAIL - 10
        val = float(np.sum(Wt[keep] * np.exp(lp[keep]) * weight(xi[keep]))) * jac
        if prev is not None:
            err = abs(val - prev) / max(abs(val), 1e-300)
            if err <= rtol:
                return val, err
        prev = val
        panels *= 2
    raise QuadratureError(f"orbit quadrature did not reach rtol={rtol:g}", prev, err)


def _orbit_volume_weight(ws: WeightSystem, t):
    A = ws.weights.astype(float)

    def weight(xi):
        s = t[None, :] * np.exp(2.0 * xi @ A.T)
        return np.exp(log_volume_density(ws, s)) / (2 * np.pi) ** ws.m

    return weight


def laplace_orbit(ws: WeightSystem, p, f, lambdas, rtol: float = 1e-11) -> AsymptoticFit:
    """``(lam/pi)^{m/2} int_{exp(i g) p} f e^{lam psi} dvol`` over the imaginary orbit through ``p``.

    ``dvol`` is the Riemannian volume of the induced metric (``sqrt det 2 Gamma``
    in the ``xi`` coordinates); ``f`` maps complex points (rows) to reals.  The
    rescaled series tends to ``f(p)``.
    """
    p = np.asarray(p, dtype=complex)
    resid = np.linalg.norm(np.abs(p) ** 2 @ ws.weights - ws.level)
    if resid > 1e-8 * max(1.0, np.linalg.norm(ws.level)):
        raise ValueError("p is not on the level set")
    t = np.abs(p) ** 2
    A = ws.weights.astype(float)
    vol = _orbit_volume_weight(ws, t)

    def weight(xi):
        Z = p[None, :] * np.exp(xi @ A.T)
        return vol(xi) * np.asarray(f(Z), dtype=float)

    lams = np.asarray(lambdas, dtype=float)
    vals, errs = [], []
    for lam in lams:
        v, e = orbit_integral(ws, t, lam, weight, rtol)
        vals.append(v)
        errs.append(e)
    fp = float(np.asarray(f(p[None, :]))[0])
    vals = np.asarray(vals)
    fit = _make_fit(
        lams, vals, -ws.m / 2, vals * (lams / np.pi) ** (ws.m / 2), target=fp, quad_errors=errs
    )
    fit.extra["deviation"] = (fit.rescaled - fp).tolist()
    return fit


def _split_jacobian(ws: WeightSystem, poly: DelzantPolytope, t, xi):
    """``|det d(|z|^2)/d(q, xi)|`` at rows ``xi`` over the level point ``t``."""
    _, T = poly._param
    A = ws.weights.astype(float)
    E = np.exp(2.0 * xi @ A.T)  # (G, d)
    s = t[None, :] * E
    M = np.concatenate([E[:, :, None] * T[None, :, :], 2.0 * s[:, :, None] * A[None, :, :]], axis=2)
    return np.abs(np.linalg.det(M))


def _total_integrand(ws, poly, lam, rtol_inner, chi=None):
    def outer(qs):
        out = np.empty(len(qs))
        for j, q in enumerate(qs):
            t = np.maximum(poly.to_moment(q), 0.0)

            def weight(xi, t=t):
                w = _split_jacobian(ws, poly, t, xi)
                if chi is not None:
                    w = w * chi(t, xi)
                return w

            out[j], _ = orbit_integral(ws, t, lam, weight, rtol_inner)
        return out

    return outer


def laplace_total(
    ws: WeightSystem, lambdas, rtol: float = 1e-8, orders=(4, 8, 12, 16, 24, 32, 48)
) -> AsymptoticFit:
    """``(lam/pi)^{m/2} int_{C^d} e^{lam psi}`` (Liouville measure) against the level-set volume.

    Computed through the splitting into polytope and orbit directions; the
    target volume comes from :func:`stabfn.sections.level_set_volume`, an
    independent formula.
    """
    from .sections import level_set_volume

    if not ws.polarized:
        raise ValueError("laplace_total needs a polarized weight system")
    poly = DelzantPolytope(ws)
    lams = np.asarray(lambdas, dtype=float)
    vals, errs = [], []
    for lam in lams:
        res = integrate(
            _total_integrand(ws, poly, lam, rtol / 10),
            poly.vertices_param(), rtol=rtol, orders=orders,
        )
        vals.append((2 * np.pi) ** ws.d * res.value)
        errs.append(res.error)
    target = level_set_volume(poly)
    vals = np.asarray(vals)
    fit = _make_fit(
        lams, vals, -ws.m / 2, vals * (lams / np.pi) ** (ws.m / 2), target=target, quad_errors=errs
    )
    fit.extra["relative_deviation"] = (fit.rescaled / target - 1).tolist()
    return fit


# --- half-form correction -------------------------------------------------------------


def _ray_point(beta, k):
    m = np.asarray(beta, dtype=float) * k
    mi = np.rint(m).astype(np.int64)
    if np.any(np.abs(m - mi) > 1e-9):
        raise ValueError(f"k * beta is not integral for k = {k}")
    return tuple(int(x) for x in mi)


def halfform_ratio(poly: DelzantPolytope, beta, ks, rtol: float = 1e-10) -> AsymptoticFit:
    """``(k/pi)^{m/2} ||pi^* s_k||^2 / ||V^{1/2} s_k||^2_red`` along the ray ``m = k beta``.

    Upstairs norms use the Liouville measure (closed form), downstairs norms
    the reduced measure with the orbit volume weight (quadrature).
    """
    ws = poly.ws
    beta = np.asarray(beta, dtype=float)
    if not np.allclose(beta @ ws.weights, ws.level):
        raise ValueError("beta is not a point of the polytope")
    if np.any(beta <= 0):
        raise ValueError("beta must be an interior point")
    ks = np.asarray(ks, dtype=float)
    ratios = []
    for k in ks:
        sec = MonomialSection(_ray_point(beta, k), int(k))
        log_up = log_l2_norm_upstairs(sec) + ws.d * np.log(2.0) + 0.5 * ws.m * np.log(k / np.pi)
        log_down = ws.n * np.log(2 * np.pi) + log_l2_norm_downstairs(sec, poly, "V", rtol).value
        ratios.append(float(np.exp(log_up - log_down)))
    ratios = np.asarray(ratios)
    fit = _make_fit(ks, ratios, 0.0)
    one = np.linalg.lstsq((1 / ks)[:, None], ratios - 1.0, rcond=None)[0][0]
    fit.extra.update(
        {
            "C": float(one),
            "one_term_residual": float(np.linalg.norm(one / ks - (ratios - 1.0))),
            "monotone": bool(np.all(np.diff(np.abs(ratios - 1.0)) < 0)),
        }
    )
    return fit


# --- moments -------------------------------------------------------------------------


def moment_limit_constant(beta) -> float:
    """``c = prod_i (2 pi^2 beta_i)^{-1/2}`` from Stirling's formula."""
    beta = np.asarray(beta, dtype=float)
    return float(np.prod((2 * np.pi**2 * beta) ** -0.5))


def _log_moment(beta, l: int, N: int) -> float:
    """Log of ``int rho^l`` (Lebesgue) for the normalized state ``|z^{N beta}|^2 e^{-N|z|^2}``."""
    M = np.asarray(beta, dtype=float) * N
    one = np.log(np.pi) + gammaln(l * M + 1) - (l * M + 1) * np.log(l * N)
    norm = np.log(np.pi) + gammaln(M + 1) - (M + 1) * np.log(N)
    return float(np.sum(one - l * norm))


def moment_limits(ws, beta, l: int, Ns) -> AsymptoticFit:
    """Rescaled moments ``(N/pi)^{-d(l-1)/2} int rho_N^l`` of normalized states ``z^{N beta}``.

    ``ws`` is a weight system (``beta`` must lie in its polytope) or just the
    dimension ``d``.  The limit is ``c^{l-1} / l^{d/2}``.
    """
    beta = np.asarray(beta, dtype=float)
    if isinstance(ws, WeightSystem):
        d = ws.d
        if not np.allclose(beta @ ws.weights, ws.level):
            raise ValueError("beta is not a point of the polytope")
    else:
        d = int(ws)
    if beta.shape != (d,) or np.any(beta <= 0):
        raise ValueError("beta must be an interior point with d entries")
    if l < 1:
        raise ValueError("l must be a positive integer")
    Ns = np.asarray(Ns, dtype=float)
    for N in Ns:
        _ray_point(beta, N)
    logs = np.array([_log_moment(beta, l, int(N)) for N in Ns])
    rescaled = np.exp(logs - d * (l - 1) / 2 * np.log(Ns / np.pi))
    c = moment_limit_constant(beta)
    limit = c ** (l - 1) / l ** (d / 2)
    fit = _make_fit(Ns, rescaled, 0.0)
    err = np.abs(rescaled - limit)
    fit.extra.update(
        {
            "limit": limit,
            "c": c,
            "errors": err.tolist(),
            "error_ratios": (err[1:] / err[:-1]).tolist() if l > 1 else [],
            "c_empirical": float((fit.c0 * l ** (d / 2)) ** (1 / (l - 1))) if l > 1 else None,
        }
    )
    return fit


def moment_transfer(poly: DelzantPolytope, beta, l: int, ks, rtol: float = 1e-10) -> AsymptoticFit:
    """``m(l, pi^* s_k, mu) / ((lk/pi)^{-m/2} m_red(l, s_k, V mu_red))`` along ``m = k beta``.

    Moments of the unnormalized sections; the upstairs side is in closed form.
    """
    ws = poly.ws
    ks = np.asarray(ks, dtype=float)
    out = []
    for k in ks:
        m = np.array(_ray_point(beta, k))
        lk = l * k
        # |z^m|^{2l} e^{-l k |z|^2} is the pointwise norm of z^{lm} at power lk
        sec = MonomialSection(tuple(int(x) for x in l * m), int(lk))
        log_up = log_l2_norm_upstairs(sec) + ws.d * np.log(2.0)
        log_down = ws.n * np.log(2 * np.pi) + log_l2_norm_downstairs(sec, poly, "V", rtol).value
        out.append(float(np.exp(log_up - log_down + 0.5 * ws.m * np.log(lk / np.pi))))
    return _make_fit(ks, out, 0.0, l=l)


# --- density of states ------------------------------------------------------------------


def _fn_integrals(poly: DelzantPolytope, N: int, f, weight: str, rtol: float, chunk: int = 48):
    """``sum_m int f w_m / int w_m`` over lattice points of ``N Delta`` (``w_m`` optionally times ``V``)."""
    pts = lattice_points(poly, N)
    total = 0.0
    # batches bound the (nodes x sections) work arrays at high quadrature order
    for start in range(0, len(pts), chunk):
        total += _fn_integrals_batch(poly, N, pts[start:start + chunk], f, weight, rtol)
    return total, len(pts)


def _fn_integrals_batch(poly, N, pts, f, weight, rtol):
    secs = [MonomialSection(m, N) for m in pts]
    norms = log_l2_norm_downstairs(secs, poly, weight, rtol).value
    M = np.array([s.exponents for s in secs])
    ws = poly.ws

    def logdens(q):
        T = np.maximum(poly.to_moment(q), 1e-300)
        out = np.log(T) @ M.T - N * T.sum(axis=1)[:, None]
        if weight == "V":
            out = out + log_volume_density(ws, T)[:, None]
        return out

    def integrand(q):
        T = np.maximum(poly.to_moment(q), 0.0)
        fv = np.asarray(f(T), dtype=float)
        return fv[:, None] * np.exp(logdens(q) - np.atleast_1d(norms)[None, :])

    res = integrate(integrand, poly.vertices_param(), rtol=rtol)
    return float(np.sum(res.value))


def density_of_states(
    poly: DelzantPolytope, f, Ns, weight: str = "plain", rtol: float = 1e-10, terms: int = 3
) -> AsymptoticFit:
    """``mu_N(f)`` for ``N`` in ``Ns`` and the fit ``sum_i a_i N^i``, ``i = n, n-1, ...``.

    ``f`` maps moment coordinates (rows) to values.  With ``weight="V"`` the
    basis is orthonormal for the ``V``-weighted reduced measure.
    ``extra["leading"]`` is the fitted ``a_n``; ``extra["leading_exact"]``
    is ``int_Delta f dsigma``, computed independently.
    """
    n = poly.n
    Ns = np.asarray(Ns, dtype=float)
    vals, counts = [], []
    for N in Ns:
        v, c = _fn_integrals(poly, int(N), f, weight, rtol)
        vals.append(v)
        counts.append(c)
    vals = np.asarray(vals)
    powers = [n - j for j in range(terms)]
    X = np.stack([Ns**p for p in powers], axis=1)
    coef, *_ = np.linalg.lstsq(X, vals, rcond=None)
    resid = float(np.linalg.norm(X @ coef - vals))
    exact = integrate(
        lambda q: np.asarray(f(np.maximum(poly.to_moment(q), 0.0)), dtype=float),
        poly.vertices_param(), rtol=1e-12,
    ).value
    fit = AsymptoticFit(
        Ns, vals, float(n), vals * Ns ** (-float(n)), float(coef[0]),
        float(coef[1]) if terms > 1 else 0.0, resid, loglog_exponent(Ns, vals),
        {
            "powers": powers,
            "coefficients": coef.tolist(),
            "leading": float(coef[0]),
            "leading_exact": float(exact),
            "dimensions": counts,
        },
    )
    return fit


def upstairs_g_trace(poly: DelzantPolytope, exponents, N: int) -> float:
    """``tr(pi_N^G M_F pi_N^G)`` for ``F = prod |z_i|^{2 e_i}`` in closed form.

    Each invariant monomial ``z^m`` contributes ``prod_i (m_i+1)...(m_i+e_i) / N^{e_i}``.
    """
    e = np.asarray(exponents, dtype=float)
    pts = np.array(lattice_points(poly, N), dtype=float)
    logs = gammaln(pts + e + 1) - gammaln(pts + 1) - e * np.log(N)
    return float(np.exp(logs.sum(axis=1)).sum())


def trace_leading_relation(
    poly: DelzantPolytope, exponents, Ns, rtol: float = 1e-10, terms: int = 4
) -> dict:
    """Leading coefficients of the upstairs ``G``-trace and of the ``V``-weighted reduced trace.

    The reduced side is ``sum_m int F V w_m / int V w_m`` with ``F`` evaluated on
    the level set; the fit uncertainty is the change of the leading
    coefficient when the fit gains or loses one term (the larger of the two).
    """
    e = np.asarray(exponents, dtype=float)
    n = poly.n
    Ns = np.asarray(Ns, dtype=float)
    up = np.array([upstairs_g_trace(poly, e, int(N)) for N in Ns])

    def F(T):
        return np.prod(T**e, axis=1)

    down = np.array([_fn_integrals(poly, int(N), F, "V", rtol)[0] for N in Ns])

    def lead(y, k):
        X = np.stack([Ns ** (n - j) for j in range(k)], axis=1)
        return float(np.linalg.lstsq(X, y, rcond=None)[0][0])

    aG, aR = lead(up, terms), lead(down, terms)
    uG = max(abs(aG - lead(up, k)) for k in (terms - 1, terms + 1))
    uR = max(abs(aR - lead(down, k)) for k in (terms - 1, terms + 1))
    return {
        "grid": Ns.tolist(),
        "upstairs": up.tolist(),
        "reduced": down.tolist(),
        "a_G": aG,
        "a_red": aR,
        "uncertainty": uG + uR,
        "difference": abs(aG - aR),
    }


def smooth_cutoff(s):
    """Smooth step: 1 for ``s <= 1/2``, 0 for ``s >= 1``."""
    s = np.asarray(s, dtype=float)

    def h(x):
        out = np.zeros_like(x)
        pos = x > 0
        out[pos] = np.exp(-1.0 / x[pos])
        return out

    a, b = h(1.0 - s), h(s - 0.5)
    return a / (a + b)


def cutoff_radius(poly: DelzantPolytope, level: float = -1.0) -> float:
    """A radius ``r0`` with ``psi <= level`` wherever ``|Phi - alpha| >= r0 / 2``.

    Sampled over quadrature nodes of the polytope and directions in the orbit.
    """
    from .quadrature import polytope_rule

    ws = poly.ws
    A = ws.weights.astype(float)
    lev = ws.level.astype(float)
    rule = polytope_rule(poly.vertices_param(), 4)
    qs = np.vstack([rule.nodes, poly.vertices_param()])
    rng = np.random.default_rng(0)
    dirs = rng.standard_normal((64, ws.m))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    worst = 0.0
    for q in qs:
        t = np.maximum(poly.to_moment(q), 0.0)
        for u in dirs:
            # psi is concave along the ray and vanishes at 0, so the
            # moment distance where it crosses `level` bounds the region
            lo, hi = 0.0, 1.0
            while _orbit_psi(t, A, lev, (hi * u)[None, :])[0] > level:
                lo, hi = hi, 2 * hi
            for _ in range(50):
                mid = 0.5 * (lo + hi)
                if _orbit_psi(t, A, lev, (mid * u)[None, :])[0] > level:
                    lo = mid
                else:
                    hi = mid
            s = t * np.exp(2.0 * (hi * u) @ A.T)
            worst = max(worst, float(np.linalg.norm(s @ A - lev)))
    return 2.0 * worst


def cutoff_transfer(
    poly: DelzantPolytope, f, N: int, r0: float, rtol: float = 1e-8, orders=(4, 8, 12, 16, 24, 32)
) -> dict:
    """Compare ``int f mu_N`` with ``(N/pi)^{m/2} int chi f V^{-1} mu_N^G``.

    ``chi`` is a smooth cutoff in the distance ``|Phi(z) - alpha|`` with
    radius ``r0``; ``mu_N^G`` is the upstairs density of states built from
    the pullbacks of a reduced orthonormal basis.
    """
    ws = poly.ws
    A = ws.weights.astype(float)
    lev = ws.level.astype(float)
    pts = lattice_points(poly, N)
    secs = [MonomialSection(m, N) for m in pts]
    log_norms = np.atleast_1d(log_l2_norm_downstairs(secs, poly, "plain", rtol / 10).value)
    M = np.array([s.exponents for s in secs])

    def bergman(T):
        T = np.maximum(T, 1e-300)
        lw = np.log(T) @ M.T - N * T.sum(axis=1)[:, None] - log_norms[None, :]
        return np.exp(lw).sum(axis=1)

    lhs = integrate(
        lambda q: np.asarray(f(np.maximum(poly.to_moment(q), 0.0))) * bergman(poly.to_moment(q)),
        poly.vertices_param(), rtol=rtol,
    ).value

    def chi(t, xi):
        s = t[None, :] * np.exp(2.0 * xi @ A.T)
        return smooth_cutoff(np.linalg.norm(s @ A - lev, axis=1) / r0)

    inner = _total_integrand(ws, poly, float(N), 1e-11, chi)

    def outer(q):
        T = np.maximum(poly.to_moment(q), 0.0)
        V = np.exp(log_volume_density(ws, np.maximum(T, 1e-300)))
        return np.asarray(f(T)) / V * bergman(T) * inner(q)

    raw = integrate(outer, poly.vertices_param(), rtol=rtol, orders=orders).value
    raw *= (2 * np.pi) ** ws.d / (2 * np.pi) ** ws.n
    rhs = (N / np.pi) ** (ws.m / 2) * raw
    return {"N": N, "r0": r0, "lhs": float(lhs), "rhs": float(rhs), "raw": float(raw),
            "ratio": float(rhs / lhs)}
