import numpy as np
from hypothesis import strategies as st


def complex_normal(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def complex_vectors(d, lo=0.05, hi=3.0):
    """Vectors with every coordinate nonzero (so every point is stable)."""
    mod = st.floats(lo, hi)
    ang = st.floats(0, 2 * np.pi)
    return st.lists(st.tuples(mod, ang), min_size=d, max_size=d).map(
        lambda xs: np.array([r * np.exp(1j * a) for r, a in xs])
    )


def herm(rng, k):
    A = complex_normal(rng, (k, k))
    return 0.5 * (A + A.conj().T)


def _expm_h(H, t):
    w, U = np.linalg.eigh(H)
    return (U * np.exp(t * w)) @ U.conj().T


class Family:
    """A family with its psi, a sampler of stable points, the imaginary flow and the moment pairing."""

    def __init__(self, name, psi, sample, flow, pairing, direction):
        self.name, self.psi, self.sample = name, psi, sample
        self.flow, self.pairing, self.direction = flow, pairing, direction


def _toric_family(name, ws):
    from stabfn.geometry import moment_map
    from stabfn.stability import psi_toric, toric_flow

    return Family(
        name,
        lambda z: psi_toric(ws, z).psi,
        lambda rng: complex_normal(rng, ws.d),
        lambda z, v, t: toric_flow(ws, z, v, t),
        lambda z, v: float(moment_map(ws, z) @ v),
        lambda rng: rng.standard_normal(ws.m),
    )


def families():
    """The seven families used throughout the cross-family checks."""
    from stabfn.geometry import preset
    from stabfn.matrix_varieties import MatrixChainSpec, act_chain, chain_moment, polygon_moment
    from stabfn.stability import psi_coadjoint, psi_grassmannian, psi_polygon

    out = [_toric_family(n, preset(n)) for n in ("cp1", "cp2", "hirzebruch1", "hirzebruch2")]

    out.append(Family(
        "gr24",
        lambda Z: psi_grassmannian(Z, 1).psi,
        lambda rng: complex_normal(rng, (2, 4)),
        lambda Z, H, t: _expm_h(H, t) @ Z,
        lambda Z, H: float(np.real(np.trace((Z @ Z.conj().T - np.eye(2)) @ H))),
        lambda rng: herm(rng, 2),
    ))

    spec = MatrixChainSpec(3, (1.0, 2.0))

    def chain_flow(Z, Hs, t):
        return act_chain([_expm_h(H, t) for H in Hs], Z)

    out.append(Family(
        "chain3",
        lambda Z: psi_coadjoint(spec, Z, "closed-form").psi,
        lambda rng: [complex_normal(rng, s) for s in spec.shapes()],
        chain_flow,
        lambda Z, Hs: sum(float(np.real(np.trace(M @ H))) for M, H in zip(chain_moment(spec, Z), Hs)),
        lambda rng: [herm(rng, 1), herm(rng, 2)],
    ))

    lam = (-1.0, -1.0, -1.0, -1.0, 2.0)

    def polygon_flow(Z, v, t):
        h, H = v
        # arm circles act with weight -1, U(2) acts on each arm vector
        return (np.exp(-t * h)[:, None] * Z) @ _expm_h(H, t).T

    out.append(Family(
        "polygon4",
        lambda Z: psi_polygon(lam, Z, "closed-form").psi,
        lambda rng: complex_normal(rng, (4, 2)),
        polygon_flow,
        lambda Z, v: float(sum(M[0, 0].real * h for M, h in zip(polygon_moment(lam, Z)[:4], v[0])))
        + float(np.real(np.trace(polygon_moment(lam, Z)[4] @ v[1]))),
        lambda rng: (rng.standard_normal(4), herm(rng, 2)),
    ))
    return out


FAMILY_SPECS = {
    "chain3": ((1.0, 2.0),),
    "polygon4": (-1.0, -1.0, -1.0, -1.0, 2.0),
}


# criterion number -> list of (part, passed, detail); printed at the end of the run
ACCEPTANCE: dict = {}


def record(criterion: int, part: str, passed: bool, detail: str) -> bool:
    ACCEPTANCE.setdefault(criterion, []).append((part, bool(passed), detail))
    print(f"criterion {criterion} [{part}] {'PASS' if passed else 'FAIL'}: {detail}")
    return passed
