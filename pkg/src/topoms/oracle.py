"""Independent checks: exact energy changes by re-solving, expansion-error
sweeps, a manufactured-solution convergence study and descent audits."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .cover import BallCover
from .energy import energy_G
from .errors import ConfigError, SolverError
from .fem import assemble, cell_gradients, default_max_iter, mass_matrix, pcg
from .grid import CellField, ImageGrid, NodalField
from .topo import TopoConfig, predicted_delta_G, solve_for_cover

Point = tuple[float, float]
ORACLE_TOL_FACTOR = 100.0
DEGENERATE_THRESHOLD = 1e-12


def _oracle_solve(grid, cover, cfg, warm=None):
    tol = cfg.cg_tol / ORACLE_TOL_FACTOR
    # tight tolerances need more room than the production default
    max_iter = cfg.cg_max_iter or 4 * default_max_iter(grid.n_nodes)
    u, v, rep = solve_for_cover(grid, cover, cfg.alpha, tol, max_iter, warm)
    if not rep.converged:
        raise SolverError(f"oracle solve failed (residual {rep.final_residual:.3e})", report=rep)
    return u, v


def delta_G_exact(grid: ImageGrid, cover: BallCover, y: Point, cfg: TopoConfig,
                  baseline: tuple[NodalField, CellField] | None = None) -> float:
    """``G`` after adding a ball at ``y`` minus ``G`` before, both re-solved.

    ``baseline`` may pass a precomputed ``(u, v)`` solve for ``cover``.
    """
    if cover.contains(*y):
        raise ValueError(f"point {y} already lies inside the cover")
    u0, v0 = baseline if baseline is not None else _oracle_solve(grid, cover, cfg)
    u1, v1 = _oracle_solve(grid, cover.add([y]), cfg, warm=u0)
    return energy_G(u1, v1, grid, cfg.alpha).total - energy_G(u0, v0, grid, cfg.alpha).total


@dataclass(frozen=True)
class ExpansionProbe:
    center: Point
    epsilons: tuple[float, ...]
    predicted: tuple[float, ...]
    exact: tuple[float, ...]
    rel_errors: tuple[float, ...]
    gsq: float
    degenerate: bool = False

    def write_csv(self, path: str | os.PathLike) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epsilon", "predicted", "exact", "rel_error"])
            for row in zip(self.epsilons, self.predicted, self.exact, self.rel_errors):
                w.writerow([f"{x:.17g}" for x in row])


def nearest_cell_center(grid: ImageGrid, y: Point) -> tuple[int, int, Point]:
    i = min(max(int(math.floor(y[0] / grid.h)), 0), grid.nx - 1)
    j = min(max(int(math.floor(y[1] / grid.h)), 0), grid.ny - 1)
    return j, i, ((i + 0.5) * grid.h, (j + 0.5) * grid.h)


def expansion_probe(grid: ImageGrid, y: Point, epsilons: Sequence[float], cfg: TopoConfig) -> ExpansionProbe:
    """Compare the predicted first-order change of ``G`` with exact re-solves.

    ``y`` is snapped to the center of the cell containing it, where the
    gradient is recovered.
    """
    epsilons = tuple(float(e) for e in epsilons)
    if not epsilons or any(b >= a for a, b in zip(epsilons, epsilons[1:])):
        raise ConfigError("epsilons must be a non-empty strictly decreasing list")
    if grid.h > min(epsilons) / 8.0:
        raise ConfigError(f"h={grid.h} exceeds min(epsilons)/8={min(epsilons) / 8.0}")
    j, i, yc = nearest_cell_center(grid, y)
    margin = min(yc[0], yc[1], grid.width - yc[0], grid.height - yc[1])
    if margin < 3.0 * max(epsilons):
        raise ConfigError(f"probe point {yc} is {margin:.4g} from the boundary, need >= {3.0 * max(epsilons)}")
    cfgs = [replace(cfg, epsilon=e) for e in epsilons]  # validates kappa <= eps etc.
    for c in cfgs:
        c.check_grid(grid)

    empty = BallCover(epsilons[0], cfg.kappa)
    u0, v0 = _oracle_solve(grid, empty, cfg)
    gsq = float(cell_gradients(u0)[2].values[j, i])
    predicted, exact = [], []
    for c in cfgs:
        predicted.append(predicted_delta_G(gsq, c))
        exact.append(delta_G_exact(grid, BallCover(c.epsilon, c.kappa), yc, c, baseline=(u0, v0)))
    degenerate = any(abs(p) < DEGENERATE_THRESHOLD for p in predicted)
    if degenerate:
        errs = [abs(e - p) for e, p in zip(exact, predicted)]
    else:
        errs = [abs(e - p) / abs(p) for e, p in zip(exact, predicted)]
    return ExpansionProbe(yc, epsilons, tuple(predicted), tuple(exact), tuple(errs), gsq, degenerate)


def manufactured_exact(X, Y):
    return np.cos(np.pi * X) * np.cos(np.pi * Y)


def manufactured_convergence(levels: Sequence[int], alpha: float = 1.0, tol: float = 1e-12) -> list[tuple[float, float]]:
    """Nodal L2 error of the FEM solve against ``cos(pi x) cos(pi y)`` per level."""
    levels = list(levels)
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ConfigError("levels must be strictly refining")
    out = []
    for n in levels:
        h = 1.0 / n
        X, Y = np.meshgrid(np.arange(n + 1) * h, np.arange(n + 1) * h)
        exact = manufactured_exact(X, Y)
        forcing = (1.0 + 2.0 * alpha * math.pi**2) * exact
        # f may leave [0, 1]; the datum only enters through the load vector
        grid = ImageGrid(np.zeros_like(exact))
        system = assemble(grid, CellField.constant(grid, 1.0), alpha)
        M = mass_matrix(grid)
        rhs = M @ forcing.ravel()
        x, rep = pcg(system.matrix, rhs, tol, 20 * default_max_iter(grid.n_nodes))
        if not rep.converged:
            raise SolverError("manufactured solve failed", report=rep)
        err = x - exact.ravel()
        out.append((h, math.sqrt(float(err @ (M @ err)))))
    return out


def write_convergence_csv(rows: Sequence[tuple[float, float]], path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["h", "l2_error", "ratio"])
        prev = None
        for h, e in rows:
            w.writerow([f"{h:.17g}", f"{e:.17g}", "" if prev is None else f"{prev / e:.17g}"])
            prev = e


def descent_audit(trace, tol: float | None = None) -> bool:
    """True iff recomputed totals strictly decrease, up to ``10 * cg_tol`` noise."""
    slack = 10.0 * (trace.cg_tol if tol is None else tol)
    totals = trace.totals
    return all(b < a + slack for a, b in zip(totals, totals[1:]))
