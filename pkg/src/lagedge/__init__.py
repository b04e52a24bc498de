"""Lagrangian edge strength of time-dependent multifields.

Pathlines seeded at every grid node are lifted into attribute space,
summarized by moments, and the spectral norm of the spatial Jacobian of
those moments is reported per node.  FTLE and height-ridge extraction are
included for comparison.
"""
from .edge import EdgeField, ScalarField, edge_strength_field, fit_local_linear, spectral_norm
from .estimators import FTLE, LagrangianEdgeStrength, RidgeExtractor
from .exceptions import DataError, IoFailure, LagEdgeError
from .flows import AnalyticFlow, ScalarGenSpec, attach_scalar, double_gyre_grid, rasterize_flow
from .ftle import FtleField, ftle_field
from .grid import GridSpec, MultifieldDataset, TimeAxis, sample_scalar, sample_velocity
from .integrate import FlowMap, IntegrationConfig, flow_map, integrate_pathline
from .lift import MomentSpec, compute_moments, feature_field, lift_trajectory
from .ridge import RidgeLine, RidgeParams, extract_ridges, ridge_dissimilarity, ridge_set_distance

__version__ = "0.1.0"

__all__ = [
    "AnalyticFlow", "DataError", "EdgeField", "FTLE", "FlowMap", "FtleField", "GridSpec",
    "IntegrationConfig", "IoFailure", "LagEdgeError", "LagrangianEdgeStrength", "MomentSpec",
    "MultifieldDataset", "RidgeExtractor", "RidgeLine", "RidgeParams", "ScalarField",
    "ScalarGenSpec", "TimeAxis", "attach_scalar", "compute_moments", "double_gyre_grid",
    "edge_strength_field", "extract_ridges", "feature_field", "fit_local_linear", "flow_map",
    "ftle_field", "integrate_pathline", "lift_trajectory", "rasterize_flow", "ridge_dissimilarity",
    "ridge_set_distance", "sample_scalar", "sample_velocity", "spectral_norm",
]
