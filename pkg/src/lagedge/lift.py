"""Lifting pathlines into attribute space and moment feature vectors."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import EmptyTrajectory, InvalidConfig, OutOfDomain
from .grid import GridSpec, MultifieldDataset, interpolate
from .integrate import IntegrationConfig, Trajectory, trace

MAX_ORDER = 5


@dataclass(frozen=True)
class MomentSpec:
    """Moment orders to keep; order 1 is the mean, order k >= 2 the k-th central moment."""

    orders: tuple[int, ...] = (1, 2)
    root_normalize: bool = False

    def __post_init__(self):
        orders = tuple(int(k) for k in self.orders)
        if not orders:
            raise InvalidConfig("moment orders must be non-empty")
        if any(b <= a for a, b in zip(orders, orders[1:])):
            raise InvalidConfig(f"moment orders must be sorted and unique, got {orders}")
        if orders[0] < 1 or orders[-1] > MAX_ORDER:
            raise InvalidConfig(f"moment orders must lie in 1..{MAX_ORDER}, got {orders}")
        object.__setattr__(self, "orders", orders)
        object.__setattr__(self, "root_normalize", bool(self.root_normalize))

    @classmethod
    def parse(cls, text: str, root_normalize: bool = False) -> "MomentSpec":
        """Parse ``"1,2,3"`` or a range ``"1-5"``."""
        orders = set()
        try:
            for part in str(text).split(","):
                part = part.strip()
                if not part:
                    continue
                lo, sep, hi = part.partition("-")
                orders.update(range(int(lo), int(hi) + 1) if sep else [int(lo)])
        except ValueError:
            raise InvalidConfig(f"cannot parse moment list {text!r}") from None
        return cls(tuple(sorted(orders)), root_normalize)


@dataclass(frozen=True)
class DataTrajectory:
    samples: np.ndarray   # (n_samples, channels)
    include_space: bool


@dataclass(frozen=True)
class LiftedField:
    """Attribute samples along the pathline of every node."""

    grid: GridSpec
    samples: np.ndarray       # (n_nodes, M+1, channels)
    counts: np.ndarray        # samples used per node
    config: IntegrationConfig
    channels: tuple[str, ...]
    include_space: bool


@dataclass(frozen=True)
class FeatureField:
    grid: GridSpec
    features: np.ndarray      # (*dims, channels * len(orders)), channel-major
    config: IntegrationConfig
    moments: MomentSpec
    channels: tuple[str, ...]

    @property
    def feature_names(self) -> list[str]:
        return [f"{c}:mu{k}" for c in self.channels for k in self.moments.orders]


def channel_names(ds: MultifieldDataset, include_space: bool) -> tuple[str, ...]:
    space = ("x", "y", "z")[: ds.grid.ndim] if include_space else ()
    return (*space, *ds.names)


def lift_paths(ds: MultifieldDataset, paths: np.ndarray, times: np.ndarray,
               include_space: bool) -> np.ndarray:
    """Sample every scalar along ``paths`` (N x L x d) at ``times`` (L,)."""
    n, length, d = paths.shape
    width = (d if include_space else 0) + ds.n_scalars
    out = np.empty((n, length, width))
    off = d if include_space else 0
    if include_space:
        out[..., :d] = paths
    for m in range(length):
        pts = paths[:, m]
        for a, values in enumerate(ds.scalars):
            out[:, m, off + a] = interpolate(values, ds.grid, ds.time, times[m], pts)
    return out


def lift_trajectory(ds: MultifieldDataset, traj: Trajectory,
                    include_space: bool = False) -> DataTrajectory:
    positions = np.asarray(traj.positions)
    if not np.all(ds.grid.contains(positions, tol=1e-9)):
        raise OutOfDomain("trajectory leaves the domain")
    samples = lift_paths(ds, positions[None], traj.times[: len(positions)], include_space)[0]
    return DataTrajectory(samples, include_space)


def moments_batch(samples: np.ndarray, counts: np.ndarray, spec: MomentSpec) -> np.ndarray:
    """Per-channel moments of ``samples`` (N x L x C) using the first ``counts`` samples.

    Returns ``(N, C * len(orders))`` ordered channel-major.  Sums are
    compensated, and the mean gets a second-pass rounding correction.
    """
    from ._kernels import moments_tm

    samples = np.asarray(samples, dtype=np.float64)
    n, length, c = samples.shape
    counts = np.ascontiguousarray(counts, dtype=np.int64)
    if counts.shape != (n,):
        raise InvalidConfig(f"{counts.shape[0] if counts.ndim else 1} counts for {n} trajectories")
    if np.any(counts < 1):
        raise EmptyTrajectory("cannot take moments of an empty trajectory")
    if np.any(counts > length):
        raise InvalidConfig(f"count exceeds the {length} stored samples")
    out = np.empty((n, c, len(spec.orders)))
    moments_tm(np.swapaxes(samples, 0, 1), counts, np.asarray(spec.orders, dtype=np.int64),
               bool(spec.root_normalize), out)
    return out.reshape(n, c * len(spec.orders))


def compute_moments(dt: DataTrajectory, spec: MomentSpec) -> np.ndarray:
    samples = np.asarray(dt.samples, dtype=np.float64)
    if samples.ndim == 1:
        samples = samples[:, None]
    if len(samples) == 0:
        raise EmptyTrajectory("cannot take moments of an empty trajectory")
    return moments_batch(samples[None], np.array([len(samples)]), spec)[0]


def lift_field(ds: MultifieldDataset, cfg: IntegrationConfig, include_space: bool = False,
               n_jobs: int | None = 1) -> LiftedField:
    g = ds.grid
    seeds = g.node_positions().reshape(-1, g.ndim)
    out = trace(ds, seeds, cfg, store=include_space, scalars=True, n_jobs=n_jobs)
    # trace buffers are time-major underneath; keep that layout for the moments
    parts = []
    if include_space:
        parts.append(np.swapaxes(out.paths, 0, 1))
    if out.samples is not None:
        parts.append(np.swapaxes(out.samples, 0, 1))
    if not parts:
        raise InvalidConfig("nothing to lift: dataset has no scalars and include_space is off")
    samples = np.swapaxes(parts[0] if len(parts) == 1 else np.concatenate(parts, axis=2), 0, 1)
    counts = out.valid if cfg.boundary_policy == "truncate" else np.full(len(out.valid), cfg.M + 1)
    return LiftedField(g, samples, counts, cfg, channel_names(ds, include_space), include_space)


def moment_features(lifted: LiftedField, spec: MomentSpec) -> FeatureField:
    feats = moments_batch(lifted.samples, lifted.counts, spec)
    g = lifted.grid
    return FeatureField(g, feats.reshape(*g.dims, -1), lifted.config, spec, lifted.channels)


def feature_field(ds: MultifieldDataset, cfg: IntegrationConfig, spec: MomentSpec = MomentSpec(),
                  include_space: bool = False, n_jobs: int | None = 1) -> FeatureField:
    """Integrate, lift and reduce the pathline of every grid node."""
    return moment_features(lift_field(ds, cfg, include_space, n_jobs), spec)
