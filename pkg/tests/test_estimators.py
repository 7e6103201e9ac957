import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline

from helpers import complex_normal
from stabfn.estimators import KempfNessProjector, StabilityFunction
from stabfn.geometry import moment_map, preset
from stabfn.stability import psi_toric


def test_params_round_trip():
    est = StabilityFunction("cp2", method="monomial", power=2)
    assert est.get_params()["power"] == 2
    twin = clone(est)
    assert twin.get_params() == est.get_params()
    twin.set_params(method="closed-form")
    assert est.method == "monomial"


def test_projector_lands_on_level_set(rng):
    X = complex_normal(rng, (6, 4))
    out = KempfNessProjector("hirzebruch1").fit(X).transform(X)
    assert out.shape == X.shape and out.dtype == complex
    ws = preset("hirzebruch1")
    for p in out:
        assert np.linalg.norm(moment_map(ws, p)) < 1e-10


def test_projector_from_weights(rng):
    X = complex_normal(rng, (3, 2))
    out = KempfNessProjector(weights=[[1], [1]], level=[2]).fit_transform(X)
    np.testing.assert_allclose(np.sum(np.abs(out) ** 2, axis=1), 2.0)


def test_unstable_rows():
    X = np.array([[1, 0, 1, 0], [1, 1, 1, 1]], dtype=complex)
    est = KempfNessProjector("hirzebruch1").fit()
    with pytest.raises(ValueError, match="row 0"):
        est.transform(X)
    out = est.set_params(on_unstable="nan").transform(X)
    assert np.all(np.isnan(out[0])) and np.all(np.isfinite(out[1]))


def test_stability_scores_match_psi(rng):
    X = complex_normal(rng, (5, 3))
    est = StabilityFunction("cp2").fit(X)
    s = est.score_samples(X)
    assert s.shape == (5,)
    np.testing.assert_allclose(s, [psi_toric(preset("cp2"), z).psi for z in X])
    assert est.transform(X).shape == (5, 1)


def test_pipeline(rng):
    X = complex_normal(rng, (4, 2))
    pipe = make_pipeline(KempfNessProjector("cp1"), StabilityFunction("cp1"))
    np.testing.assert_allclose(pipe.fit_transform(X), 0.0, atol=1e-12)


def test_not_fitted_and_bad_shapes(rng):
    with pytest.raises(NotFittedError):
        StabilityFunction("cp1").score_samples(np.ones((1, 2)))
    est = StabilityFunction("cp1").fit()
    with pytest.raises(ValueError):
        est.score_samples(np.ones((2, 3)))
    with pytest.raises(ValueError, match="method"):
        StabilityFunction("cp1", method="guess").fit()
    with pytest.raises(ValueError, match="either"):
        KempfNessProjector(weights=[[1], [1]]).fit()
