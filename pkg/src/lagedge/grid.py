"""Uniform-grid multifield datasets and their space-time interpolation.

Arrays are indexed ``[frame, i, j(, k), component]`` where ``i`` runs along
x.  Sampling is multilinear in space and linear in time.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DataError, OutOfDomain, OutOfTimeRange, UnknownAttribute

# relative distance under which a local coordinate snaps onto a node / frame
_SNAP = 1e-12


@dataclass(frozen=True)
class GridSpec:
    """Node layout of a uniform grid: ``x[i] = origin + i * spacing``."""

    dims: tuple[int, ...]
    spacing: tuple[float, ...]
    origin: tuple[float, ...] = None

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        spacing = tuple(float(h) for h in self.spacing)
        origin = (0.0,) * len(dims) if self.origin is None else tuple(float(o) for o in self.origin)
        if len(dims) not in (2, 3):
            raise DataError(f"grid must have 2 or 3 axes, got {len(dims)}")
        if len(spacing) != len(dims) or len(origin) != len(dims):
            raise DataError(
                f"dims/spacing/origin lengths differ: {len(dims)}, {len(spacing)}, {len(origin)}"
            )
        if any(n < 2 for n in dims):
            raise DataError(f"every dims component must be >= 2, got {dims}")
        if any(not h > 0 or not np.isfinite(h) for h in spacing):
            raise DataError(f"every spacing component must be > 0, got {spacing}")
        if not all(np.isfinite(origin)):
            raise DataError(f"origin must be finite, got {origin}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "origin", origin)

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.dims))

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.origin)

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.origin) + (np.asarray(self.dims) - 1) * np.asarray(self.spacing)

    def axis_coords(self, axis: int) -> np.ndarray:
        return self.origin[axis] + np.arange(self.dims[axis]) * self.spacing[axis]

    def node_positions(self) -> np.ndarray:
        """Physical coordinates of every node, shape ``(*dims, ndim)``."""
        axes = [self.axis_coords(a) for a in range(self.ndim)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        """Mask of points inside the closed bounding box, widened by ``tol`` cells."""
        pts = np.asarray(points, dtype=float)
        slack = tol * np.asarray(self.spacing)
        lo, hi = self.lower - slack, self.upper + slack
        return np.all((pts >= lo) & (pts <= hi), axis=-1)


@dataclass(frozen=True)
class TimeAxis:
    t_start: float = 0.0
    t_step: float = 1.0
    frame_count: int = 1

    def __post_init__(self):
        object.__setattr__(self, "t_start", float(self.t_start))
        object.__setattr__(self, "t_step", float(self.t_step))
        object.__setattr__(self, "frame_count", int(self.frame_count))
        if not self.t_step > 0 or not np.isfinite(self.t_step):
            raise DataError(f"t_step must be > 0, got {self.t_step}")
        if self.frame_count < 1:
            raise DataError(f"frame_count must be >= 1, got {self.frame_count}")
        if not np.isfinite(self.t_start):
            raise DataError("t_start must be finite")

    @property
    def t_end(self) -> float:
        return self.t_start + (self.frame_count - 1) * self.t_step

    @property
    def steady(self) -> bool:
        return self.frame_count == 1

    def frame_times(self) -> np.ndarray:
        return self.t_start + np.arange(self.frame_count) * self.t_step

    def contains(self, t: float) -> bool:
        if self.steady:
            return True
        slack = _SNAP * max(1.0, abs(self.t_end), abs(self.t_start))
        return self.t_start - slack <= t <= self.t_end + slack


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class MultifieldDataset:
    """One velocity field plus any number of named scalar fields over time.

    ``velocity`` has shape ``(frame_count, *dims, ndim)`` and every scalar
    ``(frame_count, *dims)``.  A single-frame array may be given without the
    leading frame axis.
    """

    grid: GridSpec
    time: TimeAxis
    velocity: np.ndarray
    scalars: tuple = ()
    names: tuple = ()

    def __post_init__(self):
        g, nf = self.grid, self.time.frame_count
        vel = np.asarray(self.velocity, dtype=np.float64)
        if vel.shape == (*g.dims, g.ndim):
            vel = vel[None]
        if vel.shape != (nf, *g.dims, g.ndim):
            raise DataError(
                f"velocity has shape {vel.shape}, expected {(nf, *g.dims, g.ndim)}"
            )
        scalars = []
        for k, s in enumerate(self.scalars):
            s = np.asarray(s, dtype=np.float64)
            if s.shape == tuple(g.dims):
                s = s[None]
            if s.shape != (nf, *g.dims):
                raise DataError(f"scalar {k} has shape {s.shape}, expected {(nf, *g.dims)}")
            scalars.append(s)
        names = tuple(self.names) if self.names else tuple(f"f{k}" for k in range(len(scalars)))
        if len(names) != len(scalars):
            raise DataError(f"{len(names)} names given for {len(scalars)} scalar fields")
        if len(set(names)) != len(names):
            raise DataError(f"duplicate attribute names {names}")
        for label, arr in [("velocity", vel), *zip(names, scalars)]:
            if not np.all(np.isfinite(arr)):
                raise DataError(f"field {label!r} contains non-finite values")
        object.__setattr__(self, "velocity", _readonly(vel))
        object.__setattr__(self, "scalars", tuple(_readonly(s) for s in scalars))
        object.__setattr__(self, "names", names)

    @property
    def n_scalars(self) -> int:
        return len(self.scalars)

    def attribute_index(self, attr) -> int:
        if isinstance(attr, str):
            if attr not in self.names:
                raise UnknownAttribute(f"unknown attribute {attr!r}; have {list(self.names)}")
            return self.names.index(attr)
        k = int(attr)
        if not 0 <= k < self.n_scalars:
            raise UnknownAttribute(f"attribute index {k} out of range [0, {self.n_scalars})")
        return k

    def with_scalar(self, name: str, values) -> "MultifieldDataset":
        return MultifieldDataset(
            self.grid, self.time, self.velocity, (*self.scalars, values), (*self.names, name)
        )


def bounds(ds: MultifieldDataset):
    """Return ``(min_point, max_point, t_start, t_end)``."""
    return ds.grid.lower, ds.grid.upper, ds.time.t_start, ds.time.t_end


def _snap(u: np.ndarray) -> np.ndarray:
    r = np.round(u)
    close = np.abs(u - r) <= _SNAP * np.maximum(1.0, np.abs(u))
    return np.where(close, r, u)


def frame_weights(time: TimeAxis, t: float):
    """Bracketing frame index and weight of the later frame for time ``t``."""
    if time.steady:
        return 0, 0.0
    u = float(_snap(np.asarray((t - time.t_start) / time.t_step)))
    k = int(min(max(np.floor(u), 0), time.frame_count - 2))
    w = min(max(u - k, 0.0), 1.0)
    return k, w


def _lerp(a, b, f):
    """``a + f (b - a)``, returning ``b`` itself at ``f == 1`` so nodes stay bit-exact."""
    return np.where(f == 1.0, b, a + f * (b - a))


class _Stencil:
    """Base corner, strides and per-axis fractions of the cells containing a batch of points.

    Interpolation nests one linear blend per axis, innermost (last) axis
    first.  Constants are reproduced exactly because a blend of equal
    values is that value.
    """

    __slots__ = ("base", "frac", "strides")

    def __init__(self, grid: GridSpec, points: np.ndarray):
        dims = np.asarray(grid.dims)
        u = _snap((points - grid.lower) / np.asarray(grid.spacing))
        i0 = np.clip(np.floor(u), 0, dims - 2).astype(np.intp)
        self.frac = np.clip(u - i0, 0.0, 1.0)
        self.strides = np.cumprod((1, *grid.dims[:0:-1]))[::-1]
        self.base = i0 @ self.strides

    def apply(self, flat: np.ndarray) -> np.ndarray:
        """Interpolate ``flat`` (nodes x ...) at the stencil points."""
        d = len(self.strides)
        pad = (slice(None),) + (None,) * (flat.ndim - 1)

        def blend(axis, offset):
            if axis == d:
                return flat[self.base + offset]
            a = blend(axis + 1, offset)
            b = blend(axis + 1, offset + self.strides[axis])
            return _lerp(a, b, self.frac[:, axis][pad])

        return blend(0, 0)


def interpolate(values: np.ndarray, grid: GridSpec, time: TimeAxis, t: float, points,
                stencil: _Stencil | None = None) -> np.ndarray:
    """Space-time interpolation of ``values`` (frames x dims x ...) at ``points`` (N x d).

    A single point of shape ``(d,)`` gives an unbatched result.  No bounds
    checking; points outside the box are extrapolated from the boundary cell.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        return interpolate(values, grid, time, t, pts[None], stencil)[0]
    st = stencil if stencil is not None else _Stencil(grid, pts)
    trailing = values.shape[1 + grid.ndim:]
    k, w = frame_weights(time, t)
    a = st.apply(values[k].reshape(grid.n_nodes, *trailing))
    if w == 0.0:
        return a
    b = st.apply(values[k + 1].reshape(grid.n_nodes, *trailing))
    return _lerp(a, b, w)


def _check_inputs(ds: MultifieldDataset, t: float, x):
    pts = np.asarray(x, dtype=np.float64)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[-1] != ds.grid.ndim:
        raise DataError(f"points have {pts.shape[-1]} coordinates, grid has {ds.grid.ndim} axes")
    if not ds.time.contains(t):
        raise OutOfTimeRange(
            f"t={t} outside time axis [{ds.time.t_start}, {ds.time.t_end}]"
        )
    inside = ds.grid.contains(pts)
    if not np.all(inside):
        bad = pts[~inside][0]
        raise OutOfDomain(
            f"point {tuple(bad)} outside domain {tuple(ds.grid.lower)}..{tuple(ds.grid.upper)}"
        )
    return pts, single


def sample_velocity(ds: MultifieldDataset, t: float, x) -> np.ndarray:
    """Velocity at time ``t`` and point(s) ``x`` (shape ``(d,)`` or ``(N, d)``)."""
    pts, single = _check_inputs(ds, t, x)
    out = interpolate(ds.velocity, ds.grid, ds.time, t, pts)
    return out[0] if single else out


def sample_scalar(ds: MultifieldDataset, attr, t: float, x):
    """Scalar attribute ``attr`` (index or name) at time ``t`` and point(s) ``x``."""
    k = ds.attribute_index(attr)
    pts, single = _check_inputs(ds, t, x)
    out = interpolate(ds.scalars[k], ds.grid, ds.time, t, pts)
    return float(out[0]) if single else out
