"""Bilinear finite elements on the pixel grid.

Solves the weak problem

    int (u - f) phi + alpha * int v <grad u, grad phi> = 0   for all phi

with ``v`` constant on each cell and natural (homogeneous Neumann)
boundary conditions.  Local node order is counter-clockwise:
``sw=(j, i), se=(j, i+1), ne=(j+1, i+1), nw=(j+1, i)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .grid import CellField, ImageGrid, NodalField

# element matrices on the reference square, ccw node order
_MASS_REF = np.array(
    [[4.0, 2.0, 1.0, 2.0],
     [2.0, 4.0, 2.0, 1.0],
     [1.0, 2.0, 4.0, 2.0],
     [2.0, 1.0, 2.0, 4.0]]
) / 36.0
_STIFF_REF = np.array(
    [[4.0, -1.0, -2.0, -1.0],
     [-1.0, 4.0, -1.0, -2.0],
     [-2.0, -1.0, 4.0, -1.0],
     [-1.0, -2.0, -1.0, 4.0]]
) / 6.0


def element_mass(h: float) -> np.ndarray:
    """4x4 bilinear mass matrix of an ``h x h`` square."""
    return h * h * _MASS_REF


def element_stiffness(h: float) -> np.ndarray:
    """4x4 bilinear stiffness matrix of a square; independent of ``h`` in 2-D."""
    return _STIFF_REF.copy()


class AssemblyError(ValueError):
    pass


@dataclass(frozen=True)
class SolverReport:
    iterations: int
    final_residual: float
    converged: bool


@dataclass(frozen=True, eq=False)
class SparseSystem:
    grid: ImageGrid
    matrix: sp.csr_matrix
    rhs: np.ndarray


@lru_cache(maxsize=16)
def _connectivity(nx: int, ny: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Element node table (ne, 4) plus COO row/col index arrays."""
    jj, ii = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    sw = (jj * (nx + 1) + ii).ravel()
    conn = np.stack([sw, sw + 1, sw + nx + 2, sw + nx + 1], axis=1)
    rows = np.repeat(conn, 4, axis=1).ravel()
    cols = np.tile(conn, (1, 4)).ravel()
    for a in (conn, rows, cols):
        a.setflags(write=False)
    return conn, rows, cols


def _assemble_weighted(grid: ImageGrid, local: np.ndarray, weights: np.ndarray) -> sp.csr_matrix:
    _, rows, cols = _connectivity(grid.nx, grid.ny)
    data = (weights.ravel()[:, None] * local.ravel()[None, :]).ravel()
    n = grid.n_nodes
    return sp.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()


def mass_matrix(grid: ImageGrid) -> sp.csr_matrix:
    return _assemble_weighted(grid, element_mass(grid.h), np.ones(grid.cell_shape))


def stiffness_matrix(grid: ImageGrid, coeff: np.ndarray) -> sp.csr_matrix:
    return _assemble_weighted(grid, element_stiffness(grid.h), np.asarray(coeff, dtype=float))


def assemble(grid: ImageGrid, coeff: CellField, alpha: float) -> SparseSystem:
    """Assemble ``M + alpha * K(v)`` and the load ``M f``."""
    if not alpha > 0:
        raise AssemblyError(f"alpha must be positive, got {alpha}")
    v = np.asarray(coeff.values, dtype=float)
    if v.shape != grid.cell_shape:
        raise AssemblyError("coefficient does not match grid")
    if np.any(~(v > 0)):
        j, i = np.argwhere(~(v > 0))[0]
        raise AssemblyError(f"non-positive coefficient {v[j, i]} at cell ({j}, {i})")
    # single pass over elements keeps the matrix bitwise symmetric
    local = element_mass(grid.h)[None, :, :] + alpha * v.ravel()[:, None, None] * element_stiffness(grid.h)[None]
    _, rows, cols = _connectivity(grid.nx, grid.ny)
    n = grid.n_nodes
    A = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    rhs = mass_matrix(grid) @ grid.f.ravel()
    return SparseSystem(grid, A, rhs)


def default_max_iter(n_unknowns: int) -> int:
    return max(200, math.ceil(10.0 * math.sqrt(n_unknowns)))


def pcg(A, b: np.ndarray, tol: float, max_iter: int, x0: np.ndarray | None = None):
    """Jacobi-preconditioned conjugate gradients.

    Stops when ``||D^-1/2 r|| / ||D^-1/2 b|| <= tol``.  Returns ``(x, report)``.
    """
    b = np.asarray(b, dtype=float)
    dinv = 1.0 / A.diagonal()
    bnorm = math.sqrt(float(b @ (dinv * b)))
    if bnorm == 0.0:
        return np.zeros_like(b), SolverReport(0, 0.0, True)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float).ravel()
    r = b - A @ x
    z = dinv * r
    rz = float(r @ z)
    res = math.sqrt(max(rz, 0.0)) / bnorm
    if res <= tol:
        return x, SolverReport(0, res, True)
    p = z.copy()
    for it in range(1, max_iter + 1):
        Ap = A @ p
        step = rz / float(p @ Ap)
        x += step * p
        r -= step * Ap
        z = dinv * r
        rz_new = float(r @ z)
        res = math.sqrt(max(rz_new, 0.0)) / bnorm
        if res <= tol:
            return x, SolverReport(it, res, True)
        p *= rz_new / rz
        p += z
        rz = rz_new
    return x, SolverReport(max_iter, res, False)


def solve_cg(system: SparseSystem, tol: float = 1e-9, max_iter: int | None = None,
             warm_start: NodalField | None = None) -> tuple[NodalField, SolverReport]:
    grid = system.grid
    if max_iter is None:
        max_iter = default_max_iter(grid.n_nodes)
    x0 = None if warm_start is None else warm_start.values.ravel()
    x, report = pcg(system.matrix, system.rhs, tol, max_iter, x0)
    return NodalField(grid, x.reshape(grid.node_shape)), report


def nodal_gradients(values: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of the bilinear interpolant at cell centers."""
    sw, se = values[:-1, :-1], values[:-1, 1:]
    nw, ne = values[1:, :-1], values[1:, 1:]
    gx = ((ne + se) - (nw + sw)) / (2.0 * h)
    gy = ((nw + ne) - (sw + se)) / (2.0 * h)
    return gx, gy


def cell_gradients(u: NodalField, grid: ImageGrid | None = None) -> tuple[CellField, CellField, CellField]:
    grid = u.grid if grid is None else grid
    gx, gy = nodal_gradients(u.values, grid.h)
    return CellField(grid, gx), CellField(grid, gy), CellField(grid, gx * gx + gy * gy)
