"""Greedy ball insertion driven by the topological gradient.

Each iteration solves for ``u`` with the current edge indicator, evaluates
``|grad u|^2`` at cell centers, and adds balls at the cells with the
largest gradient as long as the predicted change of ``J``,

    -eps^2 * pi * alpha * (1 - kappa) / (1 + kappa) * |grad u|^2 + 2 * beta * eps,

is non-positive.  The exact ``J`` is re-evaluated after every insertion.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .cover import BallCover, covered_mask, indicator_field
from .energy import EnergyBreakdown, energy_J
from .errors import ConfigError, SolverError
from .fem import SolverReport, assemble, cell_gradients, default_max_iter, solve_cg
from .grid import CellField, ImageGrid, NodalField

Point = tuple[float, float]
StopReason = Literal["threshold", "max_iters", "no_candidates"]


@dataclass(frozen=True)
class TopoConfig:
    """Parameters of the insertion algorithm.

    ``kappa`` defaults to ``min(0.01, epsilon)`` and ``separation`` to
    ``epsilon``.
    """

    alpha: float
    beta: float
    epsilon: float
    kappa: float | None = None
    batch_size: int = 16
    separation: float | None = None
    max_iters: int = 500
    cg_tol: float = 1e-9
    cg_max_iter: int | None = None

    def __post_init__(self):
        if self.kappa is None:
            object.__setattr__(self, "kappa", min(0.01, self.epsilon))
        if self.separation is None:
            object.__setattr__(self, "separation", self.epsilon)
        for name in ("alpha", "beta", "epsilon", "cg_tol"):
            val = getattr(self, name)
            if not (isinstance(val, (int, float)) and math.isfinite(val) and val > 0):
                raise ConfigError(f"{name} must be a positive finite number, got {val!r}")
        if not 0 < self.kappa < 1:
            raise ConfigError(f"kappa must lie in (0, 1), got {self.kappa}")
        if not self.alpha * self.kappa < 1:
            raise ConfigError(f"alpha*kappa must be < 1, got {self.alpha * self.kappa}")
        if self.kappa > self.epsilon:
            raise ConfigError(f"kappa ({self.kappa}) must not exceed epsilon ({self.epsilon})")
        if not (isinstance(self.batch_size, int) and self.batch_size >= 1):
            raise ConfigError(f"batch_size must be a positive integer, got {self.batch_size!r}")
        if not (isinstance(self.max_iters, int) and self.max_iters >= 1):
            raise ConfigError(f"max_iters must be a positive integer, got {self.max_iters!r}")
        if not (math.isfinite(self.separation) and self.separation >= 0):
            raise ConfigError(f"separation must be non-negative, got {self.separation}")

    @property
    def contrast_factor(self) -> float:
        return (1.0 - self.kappa) / (1.0 + self.kappa)

    @property
    def accept_threshold(self) -> float:
        """Smallest ``|grad u|^2`` for which a ball is accepted."""
        return 2.0 * self.beta / (self.epsilon * self.alpha * math.pi * self.contrast_factor)

    def check_grid(self, grid: ImageGrid) -> None:
        if self.epsilon < 2.0 * grid.h:
            raise ConfigError(f"epsilon={self.epsilon} is below 2h={2.0 * grid.h} for this grid")


@dataclass(frozen=True)
class IterationRecord:
    iter: int
    centers: tuple[Point, ...]
    predicted: tuple[float, ...]
    near_boundary: tuple[bool, ...]
    energy: EnergyBreakdown
    n_total_balls: int
    solver: SolverReport


@dataclass
class RunTrace:
    """Per-iteration audit log.

    Record 0 is the initial solve; every later record holds the balls added
    in that iteration and the exact energy after re-solving.
    """

    cg_tol: float
    records: list[IterationRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def totals(self) -> list[float]:
        return [r.energy.total for r in self.records]

    def write_csv(self, path: str | os.PathLike) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iter", "n_new_balls", "n_total_balls", "fidelity", "dirichlet",
                        "length", "total", "cg_iters"])
            for r in self.records:
                e = r.energy
                w.writerow([r.iter, len(r.centers), r.n_total_balls]
                           + [f"{x:.17g}" for x in (e.fidelity, e.dirichlet, e.length, e.total)]
                           + [r.solver.iterations])


@dataclass(frozen=True, eq=False)
class SegmentationResult:
    u: NodalField
    cover: BallCover
    v: CellField
    trace: RunTrace
    stopped_by: StopReason


def predicted_delta_G(gsq_value: float, cfg: TopoConfig) -> float:
    return -cfg.epsilon**2 * math.pi * cfg.alpha * cfg.contrast_factor * gsq_value


def predicted_delta_J(gsq_value: float, cfg: TopoConfig) -> float:
    return predicted_delta_G(gsq_value, cfg) + 2.0 * cfg.beta * cfg.epsilon


def accept_test(gsq_value: float, cfg: TopoConfig) -> bool:
    # equality accepts
    return 0.5 * cfg.alpha * math.pi * cfg.contrast_factor * gsq_value >= cfg.beta / cfg.epsilon


def _select(gsq: np.ndarray, covered: np.ndarray, grid: ImageGrid, cfg: TopoConfig) -> list[int]:
    flat = gsq.ravel()
    order = np.argsort(-flat, kind="stable")
    cov = covered.ravel()
    h, nx = grid.h, grid.nx
    sep2 = cfg.separation**2
    chosen: list[int] = []
    pts: list[Point] = []
    for idx in order:
        if len(chosen) >= cfg.batch_size:
            break
        if cov[idx]:
            continue
        if not accept_test(float(flat[idx]), cfg):
            break  # sorted: nothing further passes
        j, i = divmod(int(idx), nx)
        p = ((i + 0.5) * h, (j + 0.5) * h)
        if any((p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2 < sep2 for q in pts):
            continue
        chosen.append(int(idx))
        pts.append(p)
    return chosen


def select_batch(gsq: CellField, cover: BallCover, cfg: TopoConfig) -> list[Point]:
    """Greedy choice of up to ``batch_size`` new ball centers.

    Candidates are cell centers outside the current cover, scanned by
    decreasing ``gsq`` (ties: smallest row-major cell index), at least
    ``separation`` apart within the batch, and passing :func:`accept_test`.
    """
    grid = gsq.grid
    idx = _select(gsq.values, covered_mask(cover, grid), grid, cfg)
    return [_center(grid, k) for k in idx]


def _center(grid: ImageGrid, k: int) -> Point:
    j, i = divmod(k, grid.nx)
    return ((i + 0.5) * grid.h, (j + 0.5) * grid.h)


def _near_boundary(grid: ImageGrid, p: Point, eps: float) -> bool:
    x, y = p
    return min(x, y, grid.width - x, grid.height - y) < eps


def solve_for_cover(grid: ImageGrid, cover: BallCover, alpha: float, tol: float,
                    max_iter: int | None = None, warm_start: NodalField | None = None):
    v = indicator_field(cover, grid)
    u, report = solve_cg(assemble(grid, v, alpha), tol, max_iter, warm_start)
    return u, v, report


def run(grid: ImageGrid, cfg: TopoConfig) -> SegmentationResult:
    cfg.check_grid(grid)
    max_iter = cfg.cg_max_iter or default_max_iter(grid.n_nodes)
    trace = RunTrace(cfg.cg_tol)
    cover = BallCover(cfg.epsilon, cfg.kappa)

    def solve(cover, warm):
        u, v, rep = solve_for_cover(grid, cover, cfg.alpha, cfg.cg_tol, max_iter, warm)
        if not rep.converged:
            raise SolverError(
                f"CG did not converge at iteration {len(trace)} "
                f"(residual {rep.final_residual:.3e} after {rep.iterations} iterations)",
                report=rep, trace=trace,
            )
        return u, v, rep

    u, v, rep = solve(cover, None)
    trace.records.append(IterationRecord(0, (), (), (), energy_J(u, cover, grid, cfg.alpha, cfg.beta), 0, rep))

    stopped_by: StopReason = "max_iters"
    for k in range(1, cfg.max_iters + 1):
        gsq = cell_gradients(u)[2].values
        covered = v.values != 1.0
        chosen = _select(gsq, covered, grid, cfg)
        if not chosen:
            stopped_by = "no_candidates" if covered.all() else "threshold"
            break
        centers = tuple(_center(grid, c) for c in chosen)
        flat = gsq.ravel()
        predicted = tuple(predicted_delta_J(float(flat[c]), cfg) for c in chosen)
        cover = cover.add(centers)
        u, v, rep = solve(cover, u)
        trace.records.append(IterationRecord(
            k, centers, predicted,
            tuple(_near_boundary(grid, p, cfg.epsilon) for p in centers),
            energy_J(u, cover, grid, cfg.alpha, cfg.beta), len(cover), rep,
        ))
    return SegmentationResult(u, cover, v, trace, stopped_by)
