"""Least-squares Jacobians of feature fields and their spectral norm."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DataError, DegenerateNeighborhood
from .grid import GridSpec
from .lift import FeatureField


@dataclass(frozen=True)
class ScalarField:
    """One value per grid node, with free-form provenance."""

    grid: GridSpec
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != tuple(self.grid.dims):
            raise DataError(f"field shape {values.shape} does not match grid {self.grid.dims}")
        object.__setattr__(self, "values", values)


class EdgeField(ScalarField):
    pass


@dataclass(frozen=True)
class LocalLinearFit:
    A: np.ndarray        # (n_features, d)
    b: np.ndarray        # (n_features,)
    residual: float


def lambda_max_sym(S: np.ndarray) -> np.ndarray:
    """Largest eigenvalue of symmetric 1x1, 2x2 or 3x3 matrices (batched over leading axes)."""
    S = np.asarray(S, dtype=np.float64)
    d = S.shape[-1]
    if d == 1:
        return S[..., 0, 0]
    if d == 2:
        a, b, c = S[..., 0, 0], S[..., 0, 1], S[..., 1, 1]
        return 0.5 * (a + c) + np.hypot(0.5 * (a - c), b)
    if d != 3:
        raise DataError(f"closed-form eigensolve supports d <= 3, got {d}")
    q = np.trace(S, axis1=-2, axis2=-1) / 3.0
    off = S[..., 0, 1] ** 2 + S[..., 0, 2] ** 2 + S[..., 1, 2] ** 2
    diag = (S[..., 0, 0] - q) ** 2 + (S[..., 1, 1] - q) ** 2 + (S[..., 2, 2] - q) ** 2
    p = np.sqrt((diag + 2.0 * off) / 6.0)
    # (near-)triple root: the spectrum collapses onto q
    flat = p <= 1e-15 * np.maximum(np.abs(q), np.finfo(float).tiny)
    p_safe = np.where(flat, 1.0, p)
    B = (S - q[..., None, None] * np.eye(3)) / p_safe[..., None, None]
    r = np.clip(np.linalg.det(B) / 2.0, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    top = q + 2.0 * p * np.cos(phi)
    # With r < 0 the two largest roots may nearly coincide and the trig form
    # loses half the digits there.  The smallest root is well conditioned in
    # that regime, so deflate it and solve the remaining 2x2 block exactly.
    close = (r < 0.0) & ~flat
    if np.any(close):
        top = np.where(close, _top_after_deflation(S, q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)), top)
    return np.where(flat, q, top)


def _top_after_deflation(S, low):
    M = S - low[..., None, None] * np.eye(3)
    rows = (M[..., 0, :], M[..., 1, :], M[..., 2, :])
    cands = np.stack([np.cross(rows[0], rows[1]), np.cross(rows[0], rows[2]),
                      np.cross(rows[1], rows[2])], axis=-2)
    norms = np.linalg.norm(cands, axis=-1)
    pick = np.argmax(norms, axis=-1)
    n = np.take_along_axis(cands, pick[..., None, None], axis=-2)[..., 0, :]
    n = n / np.maximum(np.take_along_axis(norms, pick[..., None], axis=-1), np.finfo(float).tiny)
    rn = np.linalg.norm(M, axis=-1)
    u = np.take_along_axis(M, np.argmax(rn, axis=-1)[..., None, None], axis=-2)[..., 0, :]
    u = u - np.sum(u * n, axis=-1, keepdims=True) * n
    u = u / np.maximum(np.linalg.norm(u, axis=-1, keepdims=True), np.finfo(float).tiny)
    w = np.cross(n, u)
    Su, Sw = (np.einsum("...ij,...j->...i", S, v) for v in (u, w))
    a = np.sum(u * Su, axis=-1)
    b = 0.5 * (np.sum(u * Sw, axis=-1) + np.sum(w * Su, axis=-1))
    c = np.sum(w * Sw, axis=-1)
    return 0.5 * (a + c) + np.hypot(0.5 * (a - c), b)


def spectral_norm(A) -> float | np.ndarray:
    """Largest singular value of ``A`` (..., rows, d) via ``A^T A``.

    Each matrix is first scaled by a power of two near its largest entry,
    which is exact and keeps the Gram matrix clear of overflow/underflow.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim == 1:
        A = A[:, None]
    peak = np.max(np.abs(A), axis=(-2, -1), initial=0.0)
    _, expo = np.frexp(peak)
    scale = np.ldexp(1.0, expo)
    As = A / scale[..., None, None]
    gram = np.swapaxes(As, -1, -2) @ As
    out = np.sqrt(np.maximum(lambda_max_sym(gram), 0.0)) * scale
    return float(out) if out.ndim == 0 else out


def _neighbors(grid: GridSpec, node):
    node = tuple(int(i) for i in node)
    for a in range(grid.ndim):
        for step in (-1, 1):
            j = node[a] + step
            if 0 <= j < grid.dims[a]:
                yield node[:a] + (j,) + node[a + 1:]


def fit_local_linear(ff: FeatureField, node) -> LocalLinearFit:
    """Least-squares gradient of the feature field over the axis neighbors of ``node``."""
    g = ff.grid
    node = tuple(int(i) for i in node)
    if len(node) != g.ndim or any(not 0 <= i < n for i, n in zip(node, g.dims)):
        raise DataError(f"node {node} outside grid {g.dims}")
    h = np.asarray(g.spacing)
    center = ff.features[node]
    nbrs = list(_neighbors(g, node))
    X = np.array([(np.subtract(k, node)) * h for k in nbrs])
    Y = np.array([ff.features[k] - center for k in nbrs])
    if np.linalg.matrix_rank(X) < g.ndim:
        raise DegenerateNeighborhood(f"neighbor offsets of node {node} are rank deficient")
    At, _, _, _ = np.linalg.lstsq(X, Y, rcond=None)
    A = At.T
    residual = float(np.sum((X @ At - Y) ** 2))
    x_i = np.asarray(g.origin) + np.asarray(node) * h
    return LocalLinearFit(A, center - A @ x_i, residual)


def jacobian_field(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Closed-form axis-neighbor fit for every node at once.

    ``values`` is ``(*dims, F)``; the result ``(*dims, F, d)``.  Interior
    nodes get central differences, boundary nodes one-sided differences.
    """
    values = np.asarray(values, dtype=np.float64)
    out = np.empty(values.shape + (grid.ndim,))
    for a, h in enumerate(grid.spacing):
        v = np.moveaxis(values, a, 0)
        d = np.empty_like(v)
        d[1:-1] = (v[2:] - v[:-2]) / (2.0 * h)
        d[0] = (v[1] - v[0]) / h
        d[-1] = (v[-1] - v[-2]) / h
        out[..., a] = np.moveaxis(d, 0, a)
    return out


def standardize_features(features: np.ndarray) -> np.ndarray:
    """Scale every feature channel to unit standard deviation over the grid."""
    flat = features.reshape(-1, features.shape[-1])
    std = flat.std(axis=0)
    return features / np.where(std > 0, std, 1.0)


def edge_strength_field(ff: FeatureField, standardize: bool = False) -> EdgeField:
    feats = standardize_features(ff.features) if standardize else ff.features
    J = jacobian_field(feats, ff.grid)
    values = spectral_norm(J)
    meta = {
        "t0": ff.config.t0,
        "T": ff.config.T,
        "moments": list(ff.moments.orders),
        "standardized": bool(standardize),
    }
    return EdgeField(ff.grid, values, meta)
