"""Experiment runners behind the command line interface.

Each runner takes a validated :class:`~stabfn.config.ExperimentConfig` and
returns an :class:`ExperimentResult`: CSV rows, named assertions and a JSON
payload.  Random inputs are drawn up front from the config seed, so the
output does not depend on ``jobs``.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import asymptotics as asy
from .config import ExperimentConfig, parse_grid
from .geometry import DelzantPolytope, lattice_points, moment_map
from .kempf_ness import project_chain, solve_abelian
from .matrix_varieties import (
    MatrixChainSpec,
    coadjoint_image,
    generate_level_point,
    random_chain,
)
from .sections import (
    MonomialSection,
    log_l2_norm_downstairs,
    log_l2_norm_upstairs,
    reduced_measure_factor,
)
from .stability import (
    matrix_identity_error,
    psi_coadjoint,
    psi_grassmannian,
    psi_polygon,
    psi_toric,
    toric_flow,
    toric_identity_error,
)

log = logging.getLogger(__name__)

__all__ = ["Assertion", "ExperimentResult", "run_experiment", "RUNNERS"]


@dataclass
class Assertion:
    name: str
    value: float
    tolerance: float
    passed: bool
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "value": _plain(self.value),
            "tolerance": _plain(self.tolerance),
            "passed": bool(self.passed),
            "detail": self.detail,
        }


@dataclass
class ExperimentResult:
    columns: list
    rows: list
    assertions: list = field(default_factory=list)
    payload: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions)

    def check(self, name, value, tol, ok=None, detail=""):
        value = float(value)
        ok = bool(value <= tol) if ok is None else bool(ok)
        self.assertions.append(Assertion(name, value, float(tol), ok, detail))


def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def _map(fn, items, jobs: int):
    if jobs <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(jobs) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


def _complex_normal(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def _poly(cfg: ExperimentConfig) -> DelzantPolytope:
    return DelzantPolytope(cfg.weight_system())


def _ray(cfg: ExperimentConfig, poly: DelzantPolytope):
    beta = cfg.options.get("ray")
    if beta is None:
        return poly.interior_point()
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (poly.ws.d,):
        raise ValueError(f"options.ray must have length {poly.ws.d}")
    return beta


def _is_projective(ws) -> bool:
    return ws.m == 1 and bool(np.all(ws.weights == 1)) and int(ws.level[0]) == 1


# --- toric psi --------------------------------------------------------------------


def _grid_ray(args):
    ws, z0, v, ts = args
    sol = solve_abelian(ws, z0)
    if not sol.converged:
        raise ValueError(f"unstable sample: {sol.message}")
    out = []
    for t in ts:
        z = toric_flow(ws, sol.projected, v, t)
        ev = psi_toric(ws, z, "definition")
        out.append((ev.psi, toric_identity_error(ws, z), float(np.linalg.norm(moment_map(ws, z)))))
    return out


def run_psi_grid(cfg: ExperimentConfig) -> ExperimentResult:
    ws = cfg.weight_system()
    ts = sorted(cfg.grid["t"], key=abs)
    rng = np.random.default_rng(cfg.seed)
    items = []
    for _ in range(cfg.samples):
        z0 = _complex_normal(rng, ws.d)
        v = rng.standard_normal(ws.m)
        items.append((ws, z0, v / np.linalg.norm(v), ts))
    results = _map(_grid_ray, items, cfg.jobs)

    res = ExperimentResult(["sample", "t", "psi", "identity_error", "moment_residual"], [])
    zero_tol = cfg.tolerances["nonpositive"]
    worst_psi, worst_id, mismatched, nonmonotone, unbounded = -np.inf, 0.0, 0, 0, 0
    for s, rows in enumerate(results):
        psis = np.array([r[0] for r in rows])
        for t, (psi, ide, resid) in zip(ts, rows):
            res.rows.append([s, t, psi, ide, resid])
            worst_psi = max(worst_psi, psi)
            worst_id = max(worst_id, ide)
            if (abs(psi) <= zero_tol) != (resid <= 1e-6):
                mismatched += 1
        if np.any(np.diff(psis) >= 0):
            nonmonotone += 1
        # concavity along the ray: beyond the midpoint, psi stays below the
        # secant line through the midpoint, whose slope is negative
        j = max(1, len(ts) // 2)
        slope = (psis[j] - psis[j - 1]) / (abs(ts[j]) - abs(ts[j - 1]))
        line = psis[j] + slope * (np.abs(ts[j:]) - abs(ts[j]))
        if slope >= 0 or np.any(psis[j:] > line + zero_tol):
            unbounded += 1
    res.check("psi nonpositive", worst_psi, zero_tol)
    res.check("identity", worst_id, cfg.tolerances["identity"])
    res.check("zero set equals level set", mismatched, 0, mismatched == 0, "rows where the two tests disagree")
    res.check("strictly decreasing along rays", nonmonotone, 0, nonmonotone == 0)
    res.check("linear bound with negative slope", unbounded, 0, unbounded == 0)
    res.payload = {"rays": cfg.samples, "t": ts, "max_psi": worst_psi, "max_identity_error": worst_id}
    return res


def _cross_row(args):
    ws, z = args
    vals = {m: psi_toric(ws, z, m).psi for m in ("definition", "closed-form", "affine-chart", "monomial", "ode")}
    if _is_projective(ws):
        r = float(np.sum(np.abs(z) ** 2))
        vals["projective"] = -r + 1.0 + np.log(r)
    return vals


def run_psi_cross_check(cfg: ExperimentConfig) -> ExperimentResult:
    ws = cfg.weight_system()
    rng = np.random.default_rng(cfg.seed)
    items = [(ws, _complex_normal(rng, ws.d)) for _ in range(cfg.samples)]
    results = _map(_cross_row, items, cfg.jobs)
    proj = _is_projective(ws)
    cols = ["sample", "definition", "closed_form", "affine_chart", "monomial", "ode"]
    cols += ["projective"] if proj else []
    cols += ["algebraic_deviation", "ode_deviation"]
    res = ExperimentResult(cols, [])
    worst_alg, worst_ode, worst_proj = 0.0, 0.0, 0.0
    for s, v in enumerate(results):
        ref = v["definition"]
        scale = max(1.0, abs(ref))
        alg = max(abs(v[m] - ref) for m in ("closed-form", "affine-chart", "monomial")) / scale
        ode = abs(v["ode"] - ref) / scale
        row = [s, ref, v["closed-form"], v["affine-chart"], v["monomial"], v["ode"]]
        if proj:
            row.append(v["projective"])
            worst_proj = max(worst_proj, abs(v["projective"] - ref) / scale)
        res.rows.append(row + [alg, ode])
        worst_alg, worst_ode = max(worst_alg, alg), max(worst_ode, ode)
    res.check("algebraic methods agree", worst_alg, cfg.tolerances["agreement"])
    res.check("ode method agrees", worst_ode, cfg.tolerances["ode"])
    if proj:
        res.check("projective closed form", worst_proj, cfg.tolerances["projective"])
    res.payload = {"max_algebraic_deviation": worst_alg, "max_ode_deviation": worst_ode}
    return res


# --- norms and asymptotics ------------------------------------------------------------


def run_norms(cfg: ExperimentConfig) -> ExperimentResult:
    poly = _poly(cfg)
    ws = poly.ws
    res = ExperimentResult(
        ["k", "m", "upstairs", "downstairs", "downstairs_V", "halfform_ratio"], []
    )
    worst = 0.0
    for k in cfg.grid["k"]:
        k = int(k)
        pts = lattice_points(poly, k)
        if not pts:
            continue
        secs = [MonomialSection(m, k) for m in pts]
        plain = log_l2_norm_downstairs(secs, poly, "plain", rtol=cfg.tolerances["quadrature"])
        withV = log_l2_norm_downstairs(secs, poly, "V", rtol=cfg.tolerances["quadrature"])
        worst = max(worst, plain.error, withV.error)
        for sec, lp, lv in zip(secs, np.atleast_1d(plain.value), np.atleast_1d(withV.value)):
            lu = log_l2_norm_upstairs(sec)
            ratio = np.exp(
                lu + ws.d * np.log(2.0) + 0.5 * ws.m * np.log(k / np.pi)
                - np.log(reduced_measure_factor(ws.n)) - lv
            )
            res.rows.append([k, " ".join(map(str, sec.m)), np.exp(lu), np.exp(lp), np.exp(lv), ratio])
    res.check("quadrature converged", worst, cfg.tolerances["quadrature"])
    res.payload = {"sections": len(res.rows)}
    return res


def _series_rows(fit: asy.AsymptoticFit, label: str):
    rows = []
    for i, (x, v, r) in enumerate(zip(fit.grid, fit.values, fit.rescaled)):
        running = fit.c0 + fit.c1 / x
        rows.append([_num(x), v, r, running])
    return ExperimentResult([label, "value", "rescaled", "fit"], rows)


def _num(x):
    x = float(x)
    return int(x) if x.is_integer() else x


def run_halfform(cfg: ExperimentConfig) -> ExperimentResult:
    poly = _poly(cfg)
    beta = _ray(cfg, poly)
    fit = asy.halfform_ratio(poly, beta, cfg.grid["k"])
    res = _series_rows(fit, "k")
    ks = np.asarray(fit.grid)
    scaled = ks * np.abs(fit.values - 1.0)
    C = float(np.max(scaled))
    # an O(1/k) error keeps k |ratio - 1| bounded; a slower rate makes it grow
    # by a factor sqrt(16) = 4 or more across k = 4..64
    growth = float(np.max(scaled[len(ks) // 2:]) / scaled[0])
    res.check("ratio - 1 bounded by C/k", growth, 2.0, np.isfinite(C) and growth <= 2.0,
              f"growth of k |ratio - 1| over the grid; C = {C!r}")
    res.check("residual of the 1/k fit", fit.residual, cfg.tolerances["fit"])
    res.payload = fit.to_dict() | {"ray": beta.tolist(), "C_bound": C}
    return res


def run_laplace(cfg: ExperimentConfig) -> ExperimentResult:
    ws = cfg.weight_system()
    kind = cfg.options.get("kind", "orbit")
    lams = np.asarray(cfg.grid["lam"], dtype=float)
    if kind == "orbit":
        poly = DelzantPolytope(ws)
        t = np.asarray(cfg.options.get("point", poly.interior_point()), dtype=float)
        if not poly.contains(t, tol=1e-9):
            raise ValueError("options.point is not a point of the moment polytope")
        fit = asy.laplace_orbit(ws, np.sqrt(t).astype(complex), lambda Z: np.ones(len(Z)), lams)
        dev = np.abs(fit.rescaled - fit.extra["target"])
    elif kind == "total":
        fit = asy.laplace_total(ws, lams)
        dev = np.abs(np.asarray(fit.extra["relative_deviation"]))
    else:
        raise ValueError("options.kind must be 'orbit' or 'total'")
    res = _series_rows(fit, "lam")
    res.columns.append("deviation")
    for row, d in zip(res.rows, dev):
        row.append(d)
    factor = cfg.tolerances["deviation"]
    res.check("deviation <= c/lambda", float(np.max(dev * lams)), factor)
    target = -ws.m / 2
    res.check(
        "free log-log exponent", abs(fit.free_exponent - target) / abs(target),
        cfg.tolerances["exponent"], detail=f"fitted {fit.free_exponent!r}, expected {target!r}",
    )
    res.payload = fit.to_dict() | {"kind": kind}
    return res


def run_moments(cfg: ExperimentConfig) -> ExperimentResult:
    ws = cfg.weight_system()
    poly = DelzantPolytope(ws)
    beta = _ray(cfg, poly)
    ls = [int(x) for x in np.atleast_1d(cfg.options.get("l", [2, 3]))]
    res = ExperimentResult(["l", "N", "rescaled", "limit", "error"], [])
    fits = {}
    lo, hi = cfg.tolerances["ratio_low"], cfg.tolerances["ratio_high"]
    for l in ls:
        fit = asy.moment_limits(ws, beta, l, cfg.grid["N"])
        fits[str(l)] = fit.to_dict()
        for N, r, e in zip(fit.grid, fit.rescaled, fit.extra["errors"]):
            res.rows.append([l, _num(N), r, fit.extra["limit"], e])
        ratios = np.asarray(fit.extra["error_ratios"])
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        res.check(f"error ratio under doubling, l={l}", float(np.max(np.abs(ratios - mid))), half,
                  detail=f"ratios {ratios.tolist()} must lie in [{lo}, {hi}]")
    payload = {"moments": fits, "ray": beta.tolist()}
    if "transfer_k" in cfg.options:
        ks = parse_grid(cfg.options["transfer_k"], "options.transfer_k")
        lt = int(cfg.options.get("transfer_l", 2))
        tr = asy.moment_transfer(poly, beta, lt, ks)
        payload["transfer"] = tr.to_dict()
        res.check("transfer ratio at the largest k", abs(tr.values[-1] - 1.0), cfg.tolerances["transfer"])
    res.payload = payload
    return res


def _monomial_fn(e):
    e = np.asarray(e, dtype=float)
    return lambda T: np.prod(T**e, axis=1)


def run_dos(cfg: ExperimentConfig) -> ExperimentResult:
    poly = _poly(cfg)
    d = poly.ws.d
    default = [[0] * d, [1] + [0] * (d - 1), [2] + [0] * (d - 1)]
    fs = cfg.options.get("exponents", default)
    weight = cfg.options.get("weight", "plain")
    res = ExperimentResult(["f", "N", "value"], [])
    fits = []
    for e in fs:
        if len(e) != d:
            raise ValueError(f"options.exponents entries must have length {d}")
        fit = asy.density_of_states(poly, _monomial_fn(e), cfg.grid["N"], weight)
        label = " ".join(str(int(x)) for x in e)
        for N, v in zip(fit.grid, fit.values):
            res.rows.append([label, _num(N), v])
        dev = abs(fit.extra["leading"] - fit.extra["leading_exact"])
        res.check(f"leading coefficient, f = t^({label})", dev, cfg.tolerances["leading"])
        fits.append(fit.to_dict() | {"exponents": list(e)})
    payload = {"fits": fits}
    if cfg.options.get("relation", False):
        e = cfg.options.get("relation_exponents", fs[1] if len(fs) > 1 else [1] + [0] * (d - 1))
        Ns = parse_grid(cfg.options.get("relation_N", "4:24:2"), "options.relation_N")
        rel = asy.trace_leading_relation(poly, e, Ns)
        payload["relation"] = rel
        res.check("invariant trace leading coefficient", rel["difference"], rel["uncertainty"],
                  detail="difference of fitted leading coefficients against the fit uncertainty")
    res.payload = payload
    return res


# --- matrix families --------------------------------------------------------------------


def _matrix_row(args):
    kind, Z, params = args
    if kind == "grassmannian":
        m = params["m"]
        d = psi_grassmannian(Z, m, "definition").psi
        c = psi_grassmannian(Z, m, "closed-form", printed=True)
        printed, disagrees = c.diagnostics["printed_psi"], abs(c.diagnostics["printed_psi"] - c.psi) > 1e-8
    elif kind == "chain":
        spec = params["spec"]
        d = psi_coadjoint(spec, Z, "definition").psi
        c = psi_coadjoint(spec, Z, "closed-form")
        printed, disagrees = c.diagnostics["printed_psi"], c.diagnostics["printed_disagrees"]
    else:
        lam = params["lambdas"]
        d = psi_polygon(lam, Z, "definition").psi
        c = psi_polygon(lam, Z, "closed-form")
        printed = psi_polygon(lam, Z, "stage-one").psi
        disagrees = abs(printed - c.psi) > 1e-8
    ide = matrix_identity_error(kind, Z, **params)
    return d, c.psi, ide, printed, bool(disagrees)


def _matrix_samples(cfg: ExperimentConfig, rng):
    m = cfg.model
    kind = m["kind"]
    if kind == "grassmannian":
        params = {"m": int(m["m"])}
        return kind, params, [_complex_normal(rng, (m["k"], m["n"])) for _ in range(cfg.samples)]
    if kind == "chain":
        spec = cfg.chain_spec()
        return kind, {"spec": spec}, [random_chain(spec, rng) for _ in range(cfg.samples)]
    lam = [float(x) for x in m["lambdas"]]
    arms = len(lam) - 1
    return kind, {"lambdas": lam}, [_complex_normal(rng, (arms, 2)) for _ in range(cfg.samples)]


def run_matrix_psi(cfg: ExperimentConfig) -> ExperimentResult:
    rng = np.random.default_rng(cfg.seed)
    kind, params, samples = _matrix_samples(cfg, rng)
    results = _map(_matrix_row, [(kind, Z, params) for Z in samples], cfg.jobs)
    res = ExperimentResult(
        ["sample", "definition", "closed_form", "deviation", "identity_error", "printed", "printed_disagrees"],
        [],
    )
    worst_dev = worst_id = 0.0
    worst_psi = -np.inf
    disagree = 0
    for s, (d, c, ide, printed, dis) in enumerate(results):
        dev = abs(d - c) / max(1.0, abs(d))
        res.rows.append([s, d, c, dev, ide, printed, dis])
        worst_dev, worst_id = max(worst_dev, dev), max(worst_id, ide)
        worst_psi = max(worst_psi, d, c)
        disagree += dis
    res.check("closed form agrees with definition", worst_dev, cfg.tolerances["agreement"])
    res.check("identity", worst_id, cfg.tolerances["identity"])
    res.check("psi nonpositive", worst_psi, cfg.tolerances["nonpositive"])
    res.payload = {"kind": kind, "printed_variant_disagreements": int(disagree)}
    return res


def run_chain_eigen(cfg: ExperimentConfig) -> ExperimentResult:
    spec: MatrixChainSpec = cfg.chain_spec()
    rng = np.random.default_rng(cfg.seed)
    expected = np.sort(spec.eigenvalues)[::-1]
    res = ExperimentResult(["sample", "source", "index", "eigenvalue", "expected", "error"], [])
    worst = 0.0
    sources = cfg.options.get("sources", ["generated", "projected"])
    for s in range(cfg.samples):
        for src in sources:
            if src == "generated":
                Z = generate_level_point(spec, int(rng.integers(2**32)))
            elif src == "projected":
                Z = project_chain(spec, random_chain(spec, rng)).level_point
            else:
                raise ValueError("options.sources entries must be 'generated' or 'projected'")
            ev = np.sort(np.linalg.eigvalsh(coadjoint_image(spec, Z)))[::-1]
            for i, (a, b) in enumerate(zip(ev, expected), start=1):
                err = abs(a - b)
                worst = max(worst, err)
                res.rows.append([s, src, i, a, b, err])
    res.check("spectrum equals level eigenvalues", worst, cfg.tolerances["eigenvalues"])
    res.payload = {"expected": expected.tolist(), "max_error": worst}
    return res


RUNNERS = {
    "psi-grid": run_psi_grid,
    "psi-cross-check": run_psi_cross_check,
    "norms": run_norms,
    "halfform": run_halfform,
    "laplace": run_laplace,
    "moments": run_moments,
    "dos": run_dos,
    "matrix-psi": run_matrix_psi,
    "chain-eigen": run_chain_eigen,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    log.info("running %s on %s", cfg.experiment, cfg.model.get("preset", cfg.model.get("kind")))
    return RUNNERS[cfg.experiment](cfg)
