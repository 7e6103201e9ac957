"""scikit-learn style wrappers around the toric solvers.

The transformers take complex points of ``C^d`` (one per row).  ``fit`` only
validates the weight datum and builds the moment polytope; there is nothing
to learn from the data.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_complex_array
from .geometry import WeightSystem, preset
from .kempf_ness import solve_abelian
from .stability import TORIC_METHODS, polytope_of, psi_toric

__all__ = ["KempfNessProjector", "StabilityFunction"]


def _resolve(model, weights, level) -> WeightSystem:
    if isinstance(model, WeightSystem):
        return model
    if model is not None:
        ws = preset(model)
        return ws if level is None else ws.with_level(level)
    if weights is None or level is None:
        raise ValueError("give either a preset name / WeightSystem or both weights and level")
    return WeightSystem(weights, level)


class _ToricBase(BaseEstimator, TransformerMixin):
    def fit(self, X=None, y=None):
        ws = _resolve(self.model, self.weights, self.level)
        self.weight_system_ = ws
        self.polytope_ = polytope_of(ws)
        self.n_features_in_ = ws.d
        if X is not None:
            check_complex_array(X, ws.d)
        return self

    def _check(self, X):
        check_is_fitted(self, "weight_system_")
        return check_complex_array(X, self.weight_system_.d)


class KempfNessProjector(_ToricBase):
    """Map each stable point to the level-set point of its complexified orbit.

    ``transform`` returns the complex projected points; unstable rows raise
    unless ``on_unstable="nan"``.
    """

    def __init__(self, model=None, weights=None, level=None, tol=1e-12, on_unstable="raise"):
        self.model = model
        self.weights = weights
        self.level = level
        self.tol = tol
        self.on_unstable = on_unstable

    def transform(self, X):
        X = self._check(X)
        out = np.empty_like(X)
        for i, z in enumerate(X):
            sol = solve_abelian(self.weight_system_, z, tol=self.tol)
            if not sol.converged:
                if self.on_unstable == "nan":
                    out[i] = np.nan
                    continue
                raise ValueError(f"row {i}: {sol.message}")
            out[i] = sol.projected
        return out


class StabilityFunction(_ToricBase):
    """``psi`` as a one-column transform; ``score_samples`` returns it flat."""

    def __init__(self, model=None, weights=None, level=None, method="definition", power=1,
                 tol=1e-13):
        self.model = model
        self.weights = weights
        self.level = level
        self.method = method
        self.power = power
        self.tol = tol

    def fit(self, X=None, y=None):
        if self.method not in TORIC_METHODS:
            raise ValueError(f"method must be one of {TORIC_METHODS}")
        return super().fit(X, y)

    def score_samples(self, X):
        X = self._check(X)
        ws = self.weight_system_
        return np.array([psi_toric(ws, z, self.method, self.power, self.tol).psi for z in X])

    def transform(self, X):
        return self.score_samples(X)[:, None]
