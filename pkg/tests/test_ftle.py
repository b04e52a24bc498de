import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lagedge.exceptions import InvalidConfig
from lagedge.flows import AnalyticFlow, rasterize_flow
from lagedge.ftle import ftle_field, ftle_from_flow_map
from lagedge.grid import GridSpec, TimeAxis
from lagedge.integrate import IntegrationConfig, flow_map
from oracles import saddle_flow_map


def centered(n):
    return GridSpec((n, n), (2.0 / (n - 1),) * 2, (-1.0, -1.0))


def trusted(complete):
    """Complete nodes whose axis neighbors are complete too (boundary ring excluded)."""
    ok = np.zeros_like(complete)
    ok[1:-1, 1:-1] = (complete[1:-1, 1:-1] & complete[2:, 1:-1] & complete[:-2, 1:-1]
                      & complete[1:-1, 2:] & complete[1:-1, :-2])
    return ok


def saddle_ftle(n, M=None):
    ds = rasterize_flow(AnalyticFlow("saddle", {"lam": 1.0}), centered(n), TimeAxis())
    return ftle_field(ds, IntegrationConfig(0.0, 1.0, M or (n - 1) + 1))


def test_uniform_is_zero():
    ds = rasterize_flow(AnalyticFlow("uniform", {"u": 0.3, "w": -0.2}), centered(17), TimeAxis())
    ft = ftle_field(ds, IntegrationConfig(0.0, 1.0, 8))
    # seeds pushed out through the box walls freeze, so only nodes whose
    # whole stencil stayed inside see the identity gradient
    mask = trusted(ft.meta["complete"])
    assert mask.sum() > 50
    assert np.max(np.abs(ft.values[mask])) <= 1e-9
    assert ft.direction == "forward"


def test_saddle_closed_form():
    ft = saddle_ftle(64)
    mask = trusted(ft.meta["complete"])
    assert mask.sum() > 100
    assert np.max(np.abs(ft.values[mask] - 1.0)) < 1e-3
    assert np.min(ft.values[mask]) >= -1e-6


def test_saddle_flow_map_matches_oracle():
    g = centered(33)
    ds = rasterize_flow(AnalyticFlow("saddle", {"lam": 1.0}), g, TimeAxis())
    cfg = IntegrationConfig(0.0, 0.5, 32)
    fm = flow_map(ds, cfg)
    x = g.node_positions()
    for node in [(16, 16), (20, 5), (12, 30)]:
        if fm.complete[node]:
            ref = saddle_flow_map(*x[node], 1.0, 0.5)
            assert np.allclose(fm.endpoints[node], ref, atol=1e-9)


@pytest.mark.parametrize("T", [0.5, -1.0, 2.0])
def test_rotation_is_zero(T):
    g = centered(41)
    ds = rasterize_flow(AnalyticFlow("rotation", {"omega": 1.0}), g, TimeAxis())
    ft = ftle_field(ds, IntegrationConfig(0.0, T, 64))
    r = np.linalg.norm(g.node_positions(), axis=-1)
    mask = trusted(ft.meta["complete"]) & (r < 0.8)
    assert mask.sum() > 200
    assert np.max(np.abs(ft.values[mask])) < 1e-6
    assert np.min(ft.values[mask]) >= -1e-6
    assert ft.direction == ("forward" if T > 0 else "backward")


def test_refinement_consistency():
    coarse, fine = saddle_ftle(64), saddle_ftle(127, M=128)
    mc, mf = trusted(coarse.meta["complete"]), trusted(fine.meta["complete"])
    # nodes of the 64 grid sit at every second node of the 127 grid
    sub_vals, sub_mask = fine.values[::2, ::2][:64, :64], mf[::2, ::2][:64, :64]
    both = mc & sub_mask
    assert both.sum() > 100
    assert np.max(np.abs(coarse.values[both] - sub_vals[both])) < 1e-3


@settings(max_examples=20)
@given(st.floats(0.2, 2.0), st.floats(0.1, 1.0))
def test_saddle_rate_property(lam, T):
    ds = rasterize_flow(AnalyticFlow("saddle", {"lam": lam}), centered(21), TimeAxis())
    ft = ftle_field(ds, IntegrationConfig(0.0, T, 40))
    mask = trusted(ft.meta["complete"])
    if mask.any():
        assert np.allclose(ft.values[mask], lam, atol=1e-6)


def test_zero_time_rejected():
    ds = rasterize_flow(AnalyticFlow("uniform", {}), centered(5), TimeAxis())
    with pytest.raises(InvalidConfig):
        ftle_field(ds, IntegrationConfig(0.0, 0.0, 1))
    with pytest.raises(InvalidConfig):
        ftle_from_flow_map(flow_map(ds, IntegrationConfig(0.0, 0.0, 1)))


def test_log_of_stretch_definition():
    ds = rasterize_flow(AnalyticFlow("saddle", {"lam": 1.0}), centered(9), TimeAxis())
    cfg = IntegrationConfig(0.0, 0.25, 10)
    fm = flow_map(ds, cfg)
    ft = ftle_from_flow_map(fm)
    h = 0.25
    e = fm.endpoints
    dx = (e[5, 4] - e[3, 4]) / (2 * h)
    dy = (e[4, 5] - e[4, 3]) / (2 * h)
    J = np.stack([dx, dy], axis=1)
    assert ft.values[4, 4] == pytest.approx(math.log(np.linalg.norm(J, 2)) / 0.25, rel=1e-12)
