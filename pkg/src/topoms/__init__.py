"""Mumford-Shah segmentation by topological insertion of small balls into
the edge set, with an Ambrosio-Tortorelli baseline and numerical oracles."""

from .at import ATConfig, at_solve_u, at_solve_v, run_at, threshold_edges
from .cover import BallCover, ball_count, indicator_field, length_estimate
from .energy import EnergyBreakdown, energy_AT, energy_G, energy_J
from .errors import ConfigError, SolverError
from .fem import SolverReport, SparseSystem, assemble, cell_gradients, solve_cg
from .grid import CellField, ImageGrid, NodalField, bilinear_eval, load_pgm, save_pgm
from .oracle import delta_G_exact, descent_audit, expansion_probe, manufactured_convergence
from .topo import (RunTrace, SegmentationResult, TopoConfig, accept_test, predicted_delta_G,
                   run, select_batch)

__version__ = "0.1.0"

__all__ = [
    "ATConfig", "at_solve_u", "at_solve_v", "run_at", "threshold_edges",
    "BallCover", "ball_count", "indicator_field", "length_estimate",
    "EnergyBreakdown", "energy_AT", "energy_G", "energy_J",
    "ConfigError", "SolverError",
    "SolverReport", "SparseSystem", "assemble", "cell_gradients", "solve_cg",
    "CellField", "ImageGrid", "NodalField", "bilinear_eval", "load_pgm", "save_pgm",
    "delta_G_exact", "descent_audit", "expansion_probe", "manufactured_convergence",
    "RunTrace", "SegmentationResult", "TopoConfig", "accept_test", "predicted_delta_G",
    "run", "select_batch",
]
