"""scikit-learn style wrappers around the field pipelines.

``fit`` takes a :class:`MultifieldDataset` (or a scalar field for
:class:`RidgeExtractor`) and stores results in trailing-underscore
attributes; ``transform`` returns node values shaped like the grid.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .edge import edge_strength_field
from .ftle import ftle_field
from .integrate import IntegrationConfig
from .lift import MomentSpec, feature_field
from .ridge import RidgeParams, extract_ridges
from .validation import check_dataset, check_n_jobs, check_scalar_field


class _FlowEstimator(TransformerMixin, BaseEstimator, auto_wrap_output_keys=None):
    # outputs are grid-shaped fields, not tables, so set_output wrapping is off
    def _integration(self) -> IntegrationConfig:
        return IntegrationConfig(self.t0, self.T, self.M, self.substeps, self.boundary_policy)

    def transform(self, X=None):
        """Field values of the fitted dataset, or of ``X`` after refitting on it."""
        if X is not None:
            self.fit(X)
        check_is_fitted(self, "field_")
        return self.field_.values

    def fit_transform(self, X, y=None, **fit_params):
        return self.fit(X, y).field_.values


class LagrangianEdgeStrength(_FlowEstimator):
    """Spectral norm of the spatial Jacobian of per-node pathline moments."""

    def __init__(self, t0=0.0, T=1.0, M=10, substeps=1, boundary_policy="freeze",
                 moments=(1, 2), root_normalize=False, include_space=False,
                 standardize=False, n_jobs=1):
        self.t0 = t0
        self.T = T
        self.M = M
        self.substeps = substeps
        self.boundary_policy = boundary_policy
        self.moments = moments
        self.root_normalize = root_normalize
        self.include_space = include_space
        self.standardize = standardize
        self.n_jobs = n_jobs

    def _moment_spec(self) -> MomentSpec:
        if isinstance(self.moments, str):
            return MomentSpec.parse(self.moments, self.root_normalize)
        return MomentSpec(tuple(self.moments), self.root_normalize)

    def fit(self, X, y=None):
        ds = check_dataset(X)
        self.features_ = feature_field(ds, self._integration(), self._moment_spec(),
                                       self.include_space, n_jobs=check_n_jobs(self.n_jobs))
        self.field_ = edge_strength_field(self.features_, standardize=self.standardize)
        self.feature_names_out_ = np.asarray(self.features_.feature_names, dtype=object)
        return self


class FTLE(_FlowEstimator):
    """Finite-time Lyapunov exponent of the flow map from ``t0`` over ``T``."""

    def __init__(self, t0=0.0, T=1.0, M=10, substeps=1, boundary_policy="freeze", n_jobs=1):
        self.t0 = t0
        self.T = T
        self.M = M
        self.substeps = substeps
        self.boundary_policy = boundary_policy
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        ds = check_dataset(X)
        self.field_ = ftle_field(ds, self._integration(), n_jobs=check_n_jobs(self.n_jobs))
        return self


class RidgeExtractor(BaseEstimator):
    """Height ridges of a 2D scalar field; ``predict`` returns the ridge lines."""

    def __init__(self, smoothing_sigma=None, strength_threshold=-np.inf, strength_quantile=None,
                 eigenvalue_threshold=0.0, min_vertices=2, border=0):
        self.smoothing_sigma = smoothing_sigma
        self.strength_threshold = strength_threshold
        self.strength_quantile = strength_quantile
        self.eigenvalue_threshold = eigenvalue_threshold
        self.min_vertices = min_vertices
        self.border = border

    def _params(self) -> RidgeParams:
        return RidgeParams(self.smoothing_sigma, self.strength_threshold, self.eigenvalue_threshold,
                           self.min_vertices, self.border, self.strength_quantile)

    def fit(self, X, y=None, grid=None):
        values, grid = check_scalar_field(X, grid)
        self.ridges_ = extract_ridges(values, self._params(), grid)
        self.n_ridges_ = len(self.ridges_)
        return self

    def predict(self, X=None, grid=None):
        if X is not None:
            self.fit(X, grid=grid)
        check_is_fitted(self, "ridges_")
        return self.ridges_
