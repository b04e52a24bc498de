"""Finite-time Lyapunov exponent baseline."""
from __future__ import annotations

import numpy as np

from .edge import ScalarField, jacobian_field, spectral_norm
from .exceptions import InvalidConfig
from .grid import MultifieldDataset
from .integrate import FlowMap, IntegrationConfig, flow_map


class FtleField(ScalarField):
    @property
    def direction(self) -> str:
        return self.meta["direction"]


def ftle_from_flow_map(fm: FlowMap) -> FtleField:
    cfg = fm.config
    if cfg.T == 0:
        raise InvalidConfig("FTLE needs a non-zero integration time T")
    grad = jacobian_field(fm.endpoints, fm.grid)
    stretch = np.maximum(spectral_norm(grad), np.finfo(float).tiny)
    values = np.log(stretch) / abs(cfg.T)
    meta = {
        "t0": cfg.t0,
        "T": cfg.T,
        "direction": "forward" if cfg.T > 0 else "backward",
        "complete": fm.complete,
    }
    return FtleField(fm.grid, values, meta)


def ftle_field(ds: MultifieldDataset, cfg: IntegrationConfig, n_jobs: int | None = 1) -> FtleField:
    """sigma = ln(largest singular value of the flow-map gradient) / |T|."""
    if cfg.T == 0:
        raise InvalidConfig("FTLE needs a non-zero integration time T")
    return ftle_from_flow_map(flow_map(ds, cfg, n_jobs=n_jobs))
