"""Fixed-step RK4 pathline integration and flow maps.

All seeds of a batch advance in lock step, so every stage of every seed is
evaluated at the same time value.  Work is split across threads by seed;
each seed's arithmetic is independent of the split, which keeps results
bitwise identical for any thread count.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidConfig, OutOfDomain
from .grid import GridSpec, MultifieldDataset, frame_weights, interpolate

BOUNDARY_POLICIES = ("freeze", "truncate")

# positions within this many cells outside the box are clamped back onto it
_EXIT_SLACK = 1e-9


@dataclass(frozen=True)
class IntegrationConfig:
    t0: float = 0.0
    T: float = 1.0
    M: int = 10
    substeps_per_sample: int = 1
    boundary_policy: str = "freeze"

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise InvalidConfig(f"M must be a positive integer, got {self.M}")
        if int(self.substeps_per_sample) != self.substeps_per_sample or self.substeps_per_sample < 1:
            raise InvalidConfig(f"substeps_per_sample must be >= 1, got {self.substeps_per_sample}")
        if self.boundary_policy not in BOUNDARY_POLICIES:
            raise InvalidConfig(
                f"boundary_policy must be one of {BOUNDARY_POLICIES}, got {self.boundary_policy!r}"
            )
        if not (np.isfinite(self.t0) and np.isfinite(self.T)):
            raise InvalidConfig("t0 and T must be finite")
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "M", int(self.M))
        object.__setattr__(self, "substeps_per_sample", int(self.substeps_per_sample))

    @property
    def n_steps(self) -> int:
        return self.M * self.substeps_per_sample

    @property
    def step(self) -> float:
        return self.T / self.n_steps

    def sample_times(self) -> np.ndarray:
        return self.t0 + (np.arange(self.M + 1) / self.M) * self.T

    def validate(self, ds: MultifieldDataset) -> "IntegrationConfig":
        for label, t in (("t0", self.t0), ("t0+T", self.t0 + self.T)):
            if not ds.time.contains(t):
                raise InvalidConfig(
                    f"{label}={t} outside dataset time axis [{ds.time.t_start}, {ds.time.t_end}]"
                )
        return self


@dataclass(frozen=True)
class Trajectory:
    """Discrete pathline.  Under ``truncate`` only ``valid_count`` positions exist."""

    seed: np.ndarray
    times: np.ndarray
    positions: np.ndarray
    valid_count: int


@dataclass(frozen=True)
class FlowMap:
    grid: GridSpec
    endpoints: np.ndarray      # (*dims, d)
    valid_counts: np.ndarray   # (*dims,)
    config: IntegrationConfig

    @property
    def complete(self) -> np.ndarray:
        """Mask of nodes whose pathline stayed inside the domain throughout."""
        return self.valid_counts == self.config.M + 1


def resolve_jobs(n_jobs) -> int:
    if n_jobs is None or n_jobs <= 0:
        return os.cpu_count() or 1
    return int(n_jobs)


def advect_reference(ds: MultifieldDataset, seeds, cfg: IntegrationConfig, store: bool = True):
    """Vectorized numpy RK4; slow, kept as an independent check of :func:`trace`."""
    cfg.validate(ds)
    g = ds.grid
    lo, hi = g.lower, g.upper
    slack = _EXIT_SLACK * np.asarray(g.spacing)
    lo_s, hi_s = lo - slack, hi + slack
    seeds = np.atleast_2d(np.asarray(seeds, dtype=np.float64))

    def velocity(t, p):
        return interpolate(ds.velocity, g, ds.time, t, p)

    def inside(p):
        return np.all((p >= lo_s) & (p <= hi_s), axis=1)

    n = len(seeds)
    p = seeds.copy()
    alive = np.ones(n, dtype=bool)
    valid = np.ones(n, dtype=np.intp)
    path = np.empty((n, cfg.M + 1, g.ndim))
    path[:, 0] = seeds
    h = cfg.step
    for m in range(1, cfg.M + 1):
        for s in range(cfg.substeps_per_sample):
            t, th, t1 = _stage_times(cfg, (m - 1) * cfg.substeps_per_sample + s)
            k1 = velocity(t, p)
            p2 = p + (0.5 * h) * k1
            k2 = velocity(th, p2)
            p3 = p + (0.5 * h) * k2
            k3 = velocity(th, p3)
            p4 = p + h * k3
            k4 = velocity(t1, p4)
            new = p + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
            alive &= inside(p2) & inside(p3) & inside(p4) & inside(new)
            p = np.where(alive[:, None], np.clip(new, lo, hi), p)
        valid[alive] = m + 1
        path[:, m] = p
    return (path if store else p), valid


def _stage_times(cfg: IntegrationConfig, step: int):
    total = cfg.n_steps
    return (cfg.t0 + (step / total) * cfg.T,
            cfg.t0 + ((step + 0.5) / total) * cfg.T,
            cfg.t0 + ((step + 1) / total) * cfg.T)


@dataclass(frozen=True)
class Traced:
    """Raw batch integration output; ``paths``/``samples`` are None unless requested."""

    paths: np.ndarray | None    # (N, M+1, d)
    samples: np.ndarray | None  # (N, M+1, C)
    ends: np.ndarray            # (N, d) last in-domain position
    valid: np.ndarray           # (N,)


def trace(ds: MultifieldDataset, seeds, cfg: IntegrationConfig, *, store: bool = False,
          scalars: bool = False, n_jobs: int | None = 1) -> Traced:
    """Integrate many seeds, optionally recording positions and scalar samples.

    With ``scalars`` every attribute of ``ds`` is interpolated at each
    sample point ``(x^m, t^m)``, including the frozen tail of seeds that
    left the domain.
    """
    from . import _kernels

    cfg.validate(ds)
    g = ds.grid
    seeds = np.ascontiguousarray(np.atleast_2d(np.asarray(seeds, dtype=np.float64)))
    if seeds.shape[1] != g.ndim:
        raise InvalidConfig(f"seeds have {seeds.shape[1]} coordinates, grid has {g.ndim} axes")
    inside = g.contains(seeds)
    if not np.all(inside):
        raise OutOfDomain(f"seed {tuple(seeds[~inside][0])} outside the domain")
    n, d, M = len(seeds), g.ndim, cfg.M
    stage_k = np.empty((cfg.n_steps, 3), dtype=np.int64)
    stage_w = np.empty((cfg.n_steps, 3))
    for step in range(cfg.n_steps):
        for c, t in enumerate(_stage_times(cfg, step)):
            stage_k[step, c], stage_w[step, c] = frame_weights(ds.time, t)
    sample_k = np.empty(M + 1, dtype=np.int64)
    sample_w = np.empty(M + 1)
    for m, t in enumerate(cfg.sample_times()):
        sample_k[m], sample_w[m] = frame_weights(ds.time, t)
    nodes = g.n_nodes
    if scalars and ds.n_scalars:
        if ds.n_scalars == 1:
            scal = np.ascontiguousarray(ds.scalars[0].reshape(-1, nodes, 1))
        else:
            scal = np.ascontiguousarray(np.stack([a.reshape(-1, nodes) for a in ds.scalars], axis=-1))
    else:
        scal = np.zeros((1, 1, 0))
    nc = scal.shape[2]
    # time-major buffers; the results below are (seed, sample, .) views
    paths = np.empty((M + 1, n, d)) if store else np.empty((1, n, d))
    samples = np.empty((M + 1, n, nc)) if nc else np.empty((1, n, 1))
    ends = np.empty((n, d))
    valid = np.empty(n, dtype=np.int64)
    slack = _EXIT_SLACK * np.asarray(g.spacing)
    lo, hi = g.lower, g.upper
    geo = np.stack([lo, np.asarray(g.spacing), np.asarray(g.dims, dtype=float),
                    lo, hi, lo - slack, hi + slack], axis=1)
    strides = np.cumprod((1, *g.dims[:0:-1]))[::-1].astype(np.int64)
    vel = np.ascontiguousarray(ds.velocity.reshape(-1, nodes, d))
    kernel = _kernels.rk4_2d if d == 2 else _kernels.rk4_3d

    def run(sl):
        kernel(vel, geo, strides, seeds[sl], stage_k, stage_w, cfg.step, M,
               cfg.substeps_per_sample, scal, sample_k, sample_w, store,
               paths[:, sl], samples[:, sl], ends[sl], valid[sl])

    jobs = min(resolve_jobs(n_jobs), max(n, 1))
    bounds_ = np.linspace(0, n, jobs + 1).astype(int)
    slices = [slice(a, b) for a, b in zip(bounds_[:-1], bounds_[1:])]
    if jobs == 1:
        run(slices[0])
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(run, slices))
    return Traced(np.swapaxes(paths, 0, 1) if store else None,
                  np.swapaxes(samples, 0, 1) if nc else None, ends, valid.astype(np.intp))


def advect(ds: MultifieldDataset, seeds, cfg: IntegrationConfig, store: bool = True,
           n_jobs: int | None = 1):
    """Integrate many seeds at once.

    Returns ``(positions, valid_counts)``; positions has shape ``(N, M+1, d)``
    when ``store`` else ``(N, d)`` (the last in-domain position).  Frozen
    seeds keep their last in-domain position in every later sample.
    """
    out = trace(ds, seeds, cfg, store=store, n_jobs=n_jobs)
    return (out.paths if store else out.ends), out.valid


def integrate_pathline(ds: MultifieldDataset, seed, cfg: IntegrationConfig) -> Trajectory:
    seed = np.asarray(seed, dtype=np.float64).reshape(1, -1)
    path, valid = advect(ds, seed, cfg, store=True, n_jobs=1)
    count = int(valid[0])
    positions = path[0]
    if cfg.boundary_policy == "truncate":
        positions = positions[:count]
    return Trajectory(seed[0].copy(), cfg.sample_times(), positions, count)


def flow_map(ds: MultifieldDataset, cfg: IntegrationConfig, n_jobs: int | None = 1) -> FlowMap:
    """Endpoint of the pathline seeded at every grid node."""
    g = ds.grid
    seeds = g.node_positions().reshape(-1, g.ndim)
    end, valid = advect(ds, seeds, cfg, store=False, n_jobs=n_jobs)
    return FlowMap(g, end.reshape(*g.dims, g.ndim), valid.reshape(g.dims), cfg)
