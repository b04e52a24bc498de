import numpy as np
import pytest
from hypothesis import given, strategies as st

from lagedge.exceptions import DataError, OutOfDomain, OutOfTimeRange, UnknownAttribute
from lagedge.grid import GridSpec, MultifieldDataset, TimeAxis, bounds, sample_scalar, sample_velocity


def _ds(dims=(3, 3), spacing=(1.0, 1.0), origin=None, frames=1, vel=None, scalars=(), names=()):
    g = GridSpec(dims, spacing, origin)
    t = TimeAxis(0.0, 1.0, frames)
    if vel is None:
        vel = np.zeros((frames, *dims, len(dims)))
    return MultifieldDataset(g, t, vel, scalars, names)


def test_gridspec_validation():
    with pytest.raises(DataError):
        GridSpec((1, 3), (1.0, 1.0))
    with pytest.raises(DataError):
        GridSpec((3, 3), (0.0, 1.0))
    with pytest.raises(DataError):
        GridSpec((3,), (1.0,))
    with pytest.raises(DataError):
        TimeAxis(0.0, 0.0, 2)
    with pytest.raises(DataError):
        TimeAxis(0.0, 1.0, 0)


def test_bounds_examples():
    lo, hi, t0, t1 = bounds(_ds())
    assert tuple(lo) == (0, 0) and tuple(hi) == (2, 2)
    _, hi, _, _ = bounds(_ds(dims=(2, 4), spacing=(0.5, 0.5), origin=(-1, 0)))
    assert tuple(hi) == (-0.5, 1.5)
    assert t0 == t1


def test_uniform_velocity_everywhere():
    vel = np.zeros((2, 4, 5, 2))
    vel[..., 0] = 1.0
    ds = MultifieldDataset(GridSpec((4, 5), (0.3, 0.2)), TimeAxis(0, 1, 2), vel)
    pts = np.random.default_rng(0).uniform([0, 0], [0.9, 0.8], size=(50, 2))
    out = sample_velocity(ds, 0.37, pts)
    assert np.array_equal(out, np.tile([1.0, 0.0], (50, 1)))


def test_linear_velocity_at_node_is_exact():
    g = GridSpec((3, 3), (0.1, 0.1))
    x = g.node_positions()
    vel = np.stack([3.7 * x[..., 0] + 0.1, -x[..., 0]], axis=-1)
    ds = MultifieldDataset(g, TimeAxis(), vel)
    for i in range(3):
        for j in range(3):
            assert np.array_equal(sample_velocity(ds, 0.0, x[i, j]), vel[i, j])


def test_time_interpolation_midpoint():
    vel = np.zeros((2, 3, 3, 2))
    vel[1, ..., 0] = 1.0
    ds = MultifieldDataset(GridSpec((3, 3), (1, 1)), TimeAxis(0, 1, 2), vel)
    assert np.allclose(sample_velocity(ds, 0.5, [1.3, 0.2]), [0.5, 0.0], atol=0, rtol=0)


def test_scalar_examples():
    g = GridSpec((3, 3), (1.0, 1.0))
    x = g.node_positions()
    ds = _ds(scalars=(np.full((3, 3), 2.75), x[..., 0]), names=("c", "fx"))
    assert sample_scalar(ds, "c", 0.0, [0.123, 1.987]) == 2.75
    assert sample_scalar(ds, 1, 0.0, [0.5, 0.25]) == 0.5


@given(st.floats(-1e6, 1e6), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_constant_scalar_exact_anywhere(c, u, v, t):
    g = GridSpec((4, 3), (0.7, 0.3), (-1.0, 2.0))
    ds = MultifieldDataset(g, TimeAxis(0, 1, 2), np.zeros((2, 4, 3, 2)), (np.full((2, 4, 3), c),), ("c",))
    p = np.clip(g.lower + np.array([u, v]) * (g.upper - g.lower), g.lower, g.upper)
    assert sample_scalar(ds, "c", t, p) == c


def test_node_samples_bit_exact_3d(rng):
    g = GridSpec((4, 3, 5), (0.1, 0.37, 1 / 3), (0.2, -0.4, 1.0))
    ta = TimeAxis(1.5, 0.3, 4)
    s = rng.normal(size=(4, 4, 3, 5))
    ds = MultifieldDataset(g, ta, np.zeros((4, 4, 3, 5, 3)), (s,), ("s",))
    pts = g.node_positions().reshape(-1, 3)
    for k, t in enumerate(ta.frame_times()):
        assert np.array_equal(sample_scalar(ds, 0, t, pts), s[k].reshape(-1))


@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3), st.floats(0, 1), st.floats(0, 1))
def test_affine_reproduction(coef, u, v):
    g = GridSpec((5, 4), (0.25, 0.5), (1.0, -1.0))
    x = g.node_positions()
    f = coef[0] * x[..., 0] + coef[1] * x[..., 1] + coef[2]
    ds = MultifieldDataset(g, TimeAxis(), np.zeros((*g.dims, 2)), (f,), ("f",))
    p = np.array([1.0 + u, -1.0 + 1.5 * v])
    expect = coef[0] * p[0] + coef[1] * p[1] + coef[2]
    scale = max(1.0, sum(abs(c) for c in coef) * 3)
    assert abs(sample_scalar(ds, "f", 0.0, p) - expect) <= 1e-12 * scale


def test_sampling_is_pure(rng):
    ds = _ds(dims=(5, 5), scalars=(rng.normal(size=(5, 5)),))
    p = rng.uniform(0, 4, size=(20, 2))
    a = sample_scalar(ds, 0, 0.0, p)
    b = sample_scalar(ds, 0, 0.0, p)
    assert a.tobytes() == b.tobytes()


def test_boundary_points_use_boundary_cell():
    g = GridSpec((3, 3), (1.0, 1.0))
    x = g.node_positions()
    ds = _ds(scalars=(x[..., 0] * 10 + x[..., 1],))
    assert sample_scalar(ds, 0, 0.0, [2.0, 2.0]) == 22.0
    assert sample_scalar(ds, 0, 0.0, [2.0, 0.5]) == 20.5


def test_errors():
    ds = _ds(frames=2, scalars=(np.zeros((2, 3, 3)),), names=("a",))
    with pytest.raises(OutOfDomain):
        sample_velocity(ds, 0.5, [2.5, 0.0])
    with pytest.raises(OutOfTimeRange):
        sample_velocity(ds, 1.5, [0.0, 0.0])
    with pytest.raises(UnknownAttribute):
        sample_scalar(ds, "b", 0.5, [0.0, 0.0])
    with pytest.raises(UnknownAttribute):
        sample_scalar(ds, 3, 0.5, [0.0, 0.0])


def test_steady_accepts_any_time():
    ds = _ds(scalars=(np.ones((3, 3)),))
    assert sample_scalar(ds, 0, 123.0, [1.0, 1.0]) == 1.0


def test_dataset_validation():
    with pytest.raises(DataError):
        _ds(vel=np.zeros((1, 3, 4, 2)))
    with pytest.raises(DataError):
        _ds(scalars=(np.full((3, 3), np.nan),))
    with pytest.raises(DataError):
        _ds(scalars=(np.zeros((3, 3)), np.zeros((3, 3))), names=("a", "a"))
    ds = _ds(scalars=(np.zeros((3, 3)),))
    assert not ds.velocity.flags.writeable
