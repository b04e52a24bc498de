import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from lagedge.edge import (edge_strength_field, fit_local_linear, jacobian_field, lambda_max_sym,
                          spectral_norm)
from lagedge.exceptions import DataError
from lagedge.flows import AnalyticFlow, rasterize_flow
from lagedge.grid import GridSpec, MultifieldDataset, TimeAxis
from lagedge.integrate import IntegrationConfig
from lagedge.lift import FeatureField, MomentSpec, feature_field
from oracles import normal_equations_fit, power_iteration_norm

CFG = IntegrationConfig(0.0, 1.0, 4)


def _still(grid, *scalars):
    names = tuple(f"s{k}" for k in range(len(scalars)))
    return MultifieldDataset(grid, TimeAxis(), np.zeros((*grid.dims, grid.ndim)), scalars, names)


def _ff(grid, features, orders=(1,)):
    return FeatureField(grid, np.asarray(features, dtype=float), CFG, MomentSpec(orders),
                        tuple(f"c{k}" for k in range(features.shape[-1] // len(orders))))


@pytest.mark.parametrize("A, expect", [
    (np.eye(2), 1.0),
    (np.diag([3.0, 4.0]), 4.0),
    (np.array([[0.0, 1.0], [0.0, 0.0]]), 1.0),
    (np.zeros((3, 2)), 0.0),
    (np.diag([1.0, -7.0, 2.0]), 7.0),
])
def test_spectral_norm_examples(A, expect):
    assert spectral_norm(A) == pytest.approx(expect, rel=1e-15, abs=0)


def test_spectral_norm_extreme_scales():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(6, 2))
    ref = np.linalg.norm(A, 2)
    for e in (-300, -150, 0, 150, 300):
        assert spectral_norm(A * 2.0 ** e) == pytest.approx(ref * 2.0 ** e, rel=1e-13)


def test_lambda_max_three_by_three_multiplicities():
    assert lambda_max_sym(np.eye(3) * 2.5) == 2.5
    S = np.diag([1.0, 1.0, 3.0])
    assert lambda_max_sym(S) == pytest.approx(3.0, rel=1e-14)
    S = np.diag([3.0, 3.0, 1.0])
    assert lambda_max_sym(S) == pytest.approx(3.0, rel=1e-14)


@settings(max_examples=200)
@given(arrays(np.float64, st.tuples(st.integers(1, 8), st.sampled_from([2, 3])),
              elements=st.floats(-1e3, 1e3)))
def test_spectral_norm_vs_power_iteration(A):
    ref = power_iteration_norm(A)
    assert spectral_norm(A) == pytest.approx(ref, rel=1e-10, abs=1e-10 * np.max(np.abs(A)))


def test_fit_constant_and_affine():
    g = GridSpec((5, 4), (0.5, 0.25), (1.0, -1.0))
    assert np.all(spectral_norm(
        fit_local_linear(_ff(g, np.full((5, 4, 2), 4.0)), (2, 1)).A) == 0.0)
    x = g.node_positions()
    G = np.array([[1.5, -2.0], [0.25, 3.0], [0.0, 1.0]])
    c = np.array([0.5, -1.0, 2.0])
    feats = x @ G.T + c
    fit = fit_local_linear(_ff(g, feats), (2, 2))
    assert np.allclose(fit.A, G, rtol=0, atol=1e-12)
    assert np.allclose(fit.b, c, rtol=0, atol=1e-12)
    assert 0.0 <= fit.residual <= 1e-12


@settings(max_examples=100)
@given(arrays(np.float64, (3, 3, 3), elements=st.floats(-10, 10)),
       st.sampled_from([(0.5, 0.25), (1.0, 1.0), (0.1, 0.3)]))
def test_fit_vs_normal_equations(patch, h):
    g = GridSpec((3, 3), h)
    fit = fit_local_linear(_ff(g, patch), (1, 1))
    offsets = np.array([[-h[0], 0], [h[0], 0], [0, -h[1]], [0, h[1]]])
    deltas = np.array([patch[0, 1], patch[2, 1], patch[1, 0], patch[1, 2]]) - patch[1, 1]
    assert np.allclose(fit.A, normal_equations_fit(offsets, deltas), rtol=1e-10, atol=1e-10)


def test_fit_errors():
    g = GridSpec((3, 3), (1, 1))
    with pytest.raises(DataError):
        fit_local_linear(_ff(g, np.zeros((3, 3, 1))), (3, 0))


def test_interior_fit_equals_field_everywhere(rng):
    g = GridSpec((6, 5, 4), (0.5, 0.25, 0.2))
    feats = rng.normal(size=(*g.dims, 3))
    J = jacobian_field(feats, g)
    ff = _ff(g, feats)
    for node in np.ndindex(*g.dims):
        assert np.allclose(fit_local_linear(ff, node).A, J[node], rtol=1e-12, atol=1e-12)
    ctr = (feats[3, 2, 1] - feats[1, 2, 1]) / 1.0
    assert J[2, 2, 1, :, 0] == pytest.approx(ctr, rel=1e-15)


def test_linear_scalar_edge_equals_slope():
    g = GridSpec((8, 6), (0.25, 0.4))
    for c in (1.0, 3.5, -2.0):
        ds = _still(g, c * g.node_positions()[..., 0])
        ef = edge_strength_field(feature_field(ds, CFG, MomentSpec((1,))))
        assert np.max(np.abs(ef.values[1:-1, 1:-1] - abs(c))) <= 1e-9


def test_constant_scalar_edge_is_zero():
    g = GridSpec((10, 8), (0.1, 0.125))
    ds = rasterize_flow(AnalyticFlow("saddle", {"lam": 1.3}), g, TimeAxis())
    ds = ds.with_scalar("c", np.full(g.dims, 2.75))
    ef = edge_strength_field(feature_field(ds, IntegrationConfig(0.0, 0.6, 5), MomentSpec((1, 2, 3))))
    assert np.max(ef.values) <= 1e-12


def test_step_profile():
    g = GridSpec((12, 5), (1.0, 1.0))
    f = (g.node_positions()[..., 0] > 5.5).astype(float)
    ef = edge_strength_field(feature_field(_still(g, f), CFG, MomentSpec((1, 2))))
    profile = ef.values[:, 2]
    assert set(np.flatnonzero(profile == profile.max())) == {5, 6}
    assert np.all(profile[:4] == 0) and np.all(profile[8:] == 0)


def test_rotation_covariance(rng):
    g = GridSpec((9, 9), (0.125, 0.125))
    f = rng.normal(size=g.dims)
    spec = MomentSpec((1, 2))
    a = edge_strength_field(feature_field(_still(g, f), CFG, spec)).values
    b = edge_strength_field(feature_field(_still(g, np.rot90(f)), CFG, spec)).values
    assert np.allclose(b[1:-1, 1:-1], np.rot90(a)[1:-1, 1:-1], rtol=1e-12, atol=1e-12)


@given(st.integers(-20, 20), st.floats(0.01, 100))
def test_channel_scaling(e, s):
    g = GridSpec((5, 4), (0.5, 0.25))
    feats = np.random.default_rng(11).normal(size=(*g.dims, 3))
    base = edge_strength_field(_ff(g, feats)).values
    # powers of two scale every intermediate exactly
    p = 2.0 ** e
    assert np.array_equal(edge_strength_field(_ff(g, feats * p)).values, base * p)
    assert np.allclose(edge_strength_field(_ff(g, feats * s)).values, base * s, rtol=1e-13, atol=0)
    assert np.all(edge_strength_field(_ff(g, feats * 0.0)).values == 0.0)


@given(st.permutations(range(4)))
def test_channel_permutation(perm):
    g = GridSpec((5, 6), (0.5, 0.25))
    feats = np.random.default_rng(5).normal(size=(*g.dims, 4))
    a = edge_strength_field(_ff(g, feats)).values
    b = edge_strength_field(_ff(g, feats[..., list(perm)])).values
    assert np.allclose(a, b, rtol=1e-14, atol=0)


def test_standardize_and_meta():
    g = GridSpec((6, 6), (1.0, 1.0))
    x = g.node_positions()
    ff = feature_field(_still(g, 1000.0 * x[..., 0], 0.001 * x[..., 1]), CFG, MomentSpec((1,)))
    raw = edge_strength_field(ff)
    std = edge_strength_field(ff, standardize=True)
    assert raw.meta["standardized"] is False and std.meta["standardized"] is True
    assert raw.meta["moments"] == [1]
    feats = ff.features / ff.features.reshape(-1, 2).std(axis=0)
    assert np.allclose(std.values, spectral_norm(jacobian_field(feats, g)), rtol=1e-15)
    assert np.all(np.isfinite(raw.values)) and np.all(raw.values >= 0)
