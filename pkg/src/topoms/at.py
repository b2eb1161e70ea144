"""Ambrosio-Tortorelli baseline by alternating minimization.

Discrete functional (``v`` nodal, ``v_c`` its value at cell centers)::

    1/2 int (u-f)^2 + alpha/2 sum_c v_c^2 int_c |grad u|^2
        + beta int (eps |grad v|^2 + (v-1)^2 / (4 eps))

For fixed ``v`` it is a quadratic in ``u`` (cellwise coefficient
``v_c^2``), for fixed ``u`` a quadratic in ``v``; each half-step solves
the corresponding linear system exactly (up to the CG tolerance).
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .energy import EnergyBreakdown, cell_integral_grad_sq, energy_AT
from .errors import ConfigError, SolverError
from .fem import (SolverReport, SparseSystem, _connectivity, assemble, default_max_iter,
                  mass_matrix, solve_cg, stiffness_matrix)
from .grid import CellField, ImageGrid, NodalField, cell_average

V_BOUND_TOL = 1e-8


@dataclass(frozen=True)
class ATConfig:
    alpha: float
    beta: float
    eps_at: float
    outer_iters: int = 30
    cg_tol: float = 1e-9
    threshold: float = 0.8
    eta: float = 1e-6
    cg_max_iter: int | None = None

    def __post_init__(self):
        for name in ("alpha", "beta", "eps_at", "cg_tol", "eta"):
            val = getattr(self, name)
            if not (isinstance(val, (int, float)) and np.isfinite(val) and val > 0):
                raise ConfigError(f"{name} must be a positive finite number, got {val!r}")
        if not 0 < self.threshold < 1:
            raise ConfigError(f"threshold must lie strictly between 0 and 1, got {self.threshold}")
        if not (isinstance(self.outer_iters, int) and self.outer_iters >= 1):
            raise ConfigError(f"outer_iters must be a positive integer, got {self.outer_iters!r}")


@dataclass(frozen=True)
class SweepRecord:
    iter: int
    energy: EnergyBreakdown
    u_solver: SolverReport
    v_solver: SolverReport


@dataclass
class ATTrace:
    cg_tol: float
    records: list[SweepRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def totals(self) -> list[float]:
        return [r.energy.total for r in self.records]

    def write_csv(self, path: str | os.PathLike) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iter", "fidelity", "dirichlet", "length", "total", "cg_iters"])
            for r in self.records:
                w.writerow(r.energy.csv_row(r.iter) + [r.u_solver.iterations + r.v_solver.iterations])


def _checked(result, what: str):
    u, rep = result
    if not rep.converged:
        raise SolverError(f"{what}: CG did not converge (residual {rep.final_residual:.3e})", report=rep)
    return u, rep


def u_coefficient(v: NodalField, eta: float) -> np.ndarray:
    vc = cell_average(v.values)
    return np.maximum(vc * vc, eta)


def at_solve_u(v: NodalField, grid: ImageGrid, cfg: ATConfig, warm_start: NodalField | None = None,
               return_report: bool = False):
    """Minimize over ``u`` for fixed ``v``: coefficient ``max(v_c^2, eta)`` per cell."""
    system = assemble(grid, CellField(grid, u_coefficient(v, cfg.eta)), cfg.alpha)
    u, rep = _checked(solve_cg(system, cfg.cg_tol, cfg.cg_max_iter, warm_start), "u-step")
    return (u, rep) if return_report else u


def v_system(u: NodalField, grid: ImageGrid, cfg: ATConfig) -> SparseSystem:
    """Linear system of the ``v`` Euler-Lagrange equation for fixed ``u``.

    ``sum_c alpha |grad u|^2_c v_c phi_c + c0 int v phi + 2 beta eps int <grad v, grad phi>
    = c0 int phi`` with ``c0 = beta / (2 eps)``; the coupling term is taken at
    cell centers to match the discrete energy.
    """
    c0 = cfg.beta / (2.0 * cfg.eps_at)
    gint = cell_integral_grad_sq(u.values, grid.h)  # int_c |grad u|^2
    _, rows, cols = _connectivity(grid.nx, grid.ny)
    n = grid.n_nodes
    coupling = sp.coo_matrix(
        (np.repeat(cfg.alpha * gint.ravel() / 16.0, 16), (rows, cols)), shape=(n, n)
    ).tocsr()
    M = mass_matrix(grid)
    A = coupling + c0 * M + (2.0 * cfg.beta * cfg.eps_at) * stiffness_matrix(grid, np.ones(grid.cell_shape))
    rhs = c0 * (M @ np.ones(n))
    return SparseSystem(grid, A.tocsr(), rhs)


def at_solve_v(u: NodalField, grid: ImageGrid, cfg: ATConfig, warm_start: NodalField | None = None,
               return_report: bool = False):
    """Minimize over ``v`` for fixed ``u``; the result lies in ``(0, 1]``."""
    v, rep = _checked(solve_cg(v_system(u, grid, cfg), cfg.cg_tol, cfg.cg_max_iter, warm_start), "v-step")
    lo, hi = float(v.values.min()), float(v.values.max())
    if not (lo > 0.0 and hi <= 1.0 + V_BOUND_TOL):
        raise SolverError(f"v-step left (0, 1]: min={lo:.3e}, max={hi:.12f}", report=rep)
    return (v, rep) if return_report else v


def run_at(grid: ImageGrid, cfg: ATConfig) -> tuple[NodalField, NodalField, ATTrace]:
    if cfg.cg_max_iter is None:
        cfg = ATConfig(**{**cfg.__dict__, "cg_max_iter": default_max_iter(grid.n_nodes)})
    v = NodalField.constant(grid, 1.0)
    u = None
    trace = ATTrace(cfg.cg_tol)
    for k in range(1, cfg.outer_iters + 1):
        try:
            u, urep = at_solve_u(v, grid, cfg, u, return_report=True)
            v, vrep = at_solve_v(u, grid, cfg, v, return_report=True)
        except SolverError as err:
            err.trace = trace
            raise
        trace.records.append(SweepRecord(k, energy_AT(u, v, grid, cfg.alpha, cfg.beta, cfg.eps_at), urep, vrep))
    return u, v, trace


def threshold_edges(v: NodalField, threshold: float) -> CellField:
    """Cells whose center value of ``v`` is below ``threshold`` (1) or not (0)."""
    if not 0 < threshold < 1:
        raise ConfigError(f"threshold must lie strictly between 0 and 1, got {threshold}")
    return CellField(v.grid, (cell_average(v.values) < threshold).astype(float))
