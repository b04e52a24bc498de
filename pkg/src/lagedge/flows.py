"""Analytic velocity fields and scalar generators for synthetic studies."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DataError
from .grid import GridSpec, MultifieldDataset, TimeAxis
from .integrate import IntegrationConfig, advect

FLOW_DEFAULTS = {
    "uniform": {"u": 1.0, "w": 0.0},
    "rotation": {"omega": 1.0},
    "saddle": {"lam": 1.0},
    "double_gyre": {"A": 0.1, "eps": 0.25, "omega": 2.0 * math.pi / 10.0},
}

DOUBLE_GYRE_DOMAIN = ((0.0, 0.0), (2.0, 1.0))


@dataclass(frozen=True)
class AnalyticFlow:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in FLOW_DEFAULTS:
            raise DataError(f"unknown flow kind {self.kind!r}; choose from {sorted(FLOW_DEFAULTS)}")
        unknown = set(self.params) - set(FLOW_DEFAULTS[self.kind])
        if unknown:
            raise DataError(f"unknown parameters {sorted(unknown)} for flow {self.kind!r}")
        merged = {**FLOW_DEFAULTS[self.kind], **{k: float(v) for k, v in self.params.items()}}
        if not all(np.isfinite(v) for v in merged.values()):
            raise DataError(f"flow parameters must be finite: {merged}")
        object.__setattr__(self, "params", merged)

    def _gyre_f(self, t, x):
        p = self.params
        a = p["eps"] * math.sin(p["omega"] * t)
        return a * x * x + (1.0 - 2.0 * a) * x, 2.0 * a * x + (1.0 - 2.0 * a)

    def velocity(self, t: float, points) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        x, y = pts[..., 0], pts[..., 1]
        p = self.params
        out = np.zeros_like(pts)
        if self.kind == "uniform":
            out[..., 0] = p["u"]
            out[..., 1] = p["w"]
        elif self.kind == "rotation":
            out[..., 0] = -p["omega"] * y
            out[..., 1] = p["omega"] * x
        elif self.kind == "saddle":
            out[..., 0] = p["lam"] * x
            out[..., 1] = -p["lam"] * y
        else:
            f, dfdx = self._gyre_f(t, x)
            amp = math.pi * p["A"]
            out[..., 0] = -amp * np.sin(math.pi * f) * np.cos(math.pi * y)
            out[..., 1] = amp * np.cos(math.pi * f) * np.sin(math.pi * y) * dfdx
        return out

    def stream_function(self, t: float, points) -> np.ndarray:
        """Stream function with ``v = (-dpsi/dy, dpsi/dx)``."""
        pts = np.asarray(points, dtype=np.float64)
        x, y = pts[..., 0], pts[..., 1]
        p = self.params
        if self.kind == "uniform":
            return p["w"] * x - p["u"] * y
        if self.kind == "rotation":
            return 0.5 * p["omega"] * (x * x + y * y)
        if self.kind == "saddle":
            return -p["lam"] * x * y
        f, _ = self._gyre_f(t, x)
        return p["A"] * np.sin(math.pi * f) * np.sin(math.pi * y)


def double_gyre_grid(nx: int, ny: int) -> GridSpec:
    (x0, y0), (x1, y1) = DOUBLE_GYRE_DOMAIN
    return GridSpec((nx, ny), ((x1 - x0) / (nx - 1), (y1 - y0) / (ny - 1)), (x0, y0))


def rasterize_flow(flow: AnalyticFlow, grid: GridSpec, time: TimeAxis) -> MultifieldDataset:
    """Evaluate ``flow`` at every node and frame.  2D grids only."""
    if grid.ndim != 2:
        raise DataError("analytic flows are two-dimensional")
    nodes = grid.node_positions()
    vel = np.stack([flow.velocity(t, nodes) for t in time.frame_times()])
    return MultifieldDataset(grid, time, vel)


SCALAR_KINDS = ("constant", "linear", "gaussian_blob", "stream_function", "advected")


@dataclass(frozen=True)
class ScalarGenSpec:
    """Recipe for one synthetic scalar field.

    ``params`` per kind: constant ``value``; linear ``gradient``, ``offset``;
    gaussian_blob ``center``, ``width``, ``amplitude``.  ``stream_function``
    needs ``flow``; ``advected`` needs ``initial``, ``t_ref`` and ``max_step``.
    """

    kind: str
    params: dict = field(default_factory=dict)
    flow: AnalyticFlow | None = None
    initial: "ScalarGenSpec | None" = None
    t_ref: float = 0.0
    max_step: float = 0.05

    def __post_init__(self):
        if self.kind not in SCALAR_KINDS:
            raise DataError(f"unknown scalar kind {self.kind!r}; choose from {SCALAR_KINDS}")
        if self.kind == "stream_function" and self.flow is None:
            raise DataError("stream_function scalar needs a flow")
        if self.kind == "advected":
            if self.initial is None or self.initial.kind == "advected":
                raise DataError("advected scalar needs a non-advected initial spec")
            if not self.max_step > 0:
                raise DataError(f"max_step must be > 0, got {self.max_step}")

    def evaluate(self, t: float, points) -> np.ndarray:
        """Closed-form value at ``points``; not defined for ``advected``."""
        pts = np.asarray(points, dtype=np.float64)
        p = self.params
        if self.kind == "constant":
            return np.full(pts.shape[:-1], float(p.get("value", 0.0)))
        if self.kind == "linear":
            grad = np.asarray(p.get("gradient", (1.0,) + (0.0,) * (pts.shape[-1] - 1)), dtype=float)
            return pts @ grad + float(p.get("offset", 0.0))
        if self.kind == "gaussian_blob":
            c = np.asarray(p.get("center", (0.0,) * pts.shape[-1]), dtype=float)
            w = float(p.get("width", 1.0))
            r2 = np.sum((pts - c) ** 2, axis=-1)
            return float(p.get("amplitude", 1.0)) * np.exp(-r2 / (2.0 * w * w))
        if self.kind == "stream_function":
            return self.flow.stream_function(t, pts)
        raise DataError("advected scalars depend on a dataset; use attach_scalar")


def attach_scalar(ds: MultifieldDataset, spec: ScalarGenSpec, name: str,
                  n_jobs: int | None = 1) -> MultifieldDataset:
    """Return ``ds`` with one more scalar field generated from ``spec``.

    An advected scalar is ``f0`` evaluated at the point reached by
    integrating backward from every node and frame to ``t_ref``.
    """
    g = ds.grid
    nodes = g.node_positions()
    frames = []
    for t in ds.time.frame_times():
        if spec.kind != "advected":
            frames.append(spec.evaluate(t, nodes))
            continue
        span = spec.t_ref - t
        steps = max(1, math.ceil(abs(span) / spec.max_step - 1e-9))
        cfg = IntegrationConfig(t0=t, T=span, M=1, substeps_per_sample=steps)
        ends, _ = advect(ds, nodes.reshape(-1, g.ndim), cfg, store=False, n_jobs=n_jobs)
        frames.append(spec.initial.evaluate(spec.t_ref, ends).reshape(g.dims))
    return ds.with_scalar(name, np.stack(frames))
