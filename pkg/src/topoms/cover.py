"""Ball-cover representation of the edge set.

The edge set is the union of open balls ``B_eps(y)`` around a finite list
of centers.  On the grid it induces the piecewise-constant conductivity
``v = kappa`` on cells whose center falls inside some ball and ``v = 1``
elsewhere.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .grid import CellField, ImageGrid

Point = tuple[float, float]


@dataclass(frozen=True)
class BallCover:
    radius: float
    contrast: float
    centers: tuple[Point, ...] = ()

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if not 0 < self.contrast < 1:
            raise ValueError(f"contrast must lie in (0, 1), got {self.contrast}")
        pts = tuple((float(x), float(y)) for x, y in self.centers)
        if len(set(pts)) != len(pts):
            raise ValueError("duplicate ball centers")
        object.__setattr__(self, "centers", pts)

    def __len__(self) -> int:
        return len(self.centers)

    def add(self, new: Iterable[Point]) -> "BallCover":
        """Return a cover with ``new`` appended; duplicates raise ``ValueError``."""
        pts = list(self.centers)
        seen = set(pts)
        for x, y in new:
            p = (float(x), float(y))
            if p in seen:
                raise ValueError(f"center {p} already in cover")
            seen.add(p)
            pts.append(p)
        return BallCover(self.radius, self.contrast, tuple(pts))

    def contains(self, x: float, y: float) -> bool:
        """True if ``(x, y)`` lies in the open union of balls."""
        if not self.centers:
            return False
        c = np.asarray(self.centers)
        return bool(np.any((c[:, 0] - x) ** 2 + (c[:, 1] - y) ** 2 < self.radius**2))

    def check_domain(self, grid: ImageGrid) -> None:
        for x, y in self.centers:
            if not grid.contains(x, y):
                raise ValueError(f"center ({x}, {y}) outside the domain")


def covered_mask(cover: BallCover, grid: ImageGrid) -> np.ndarray:
    """Boolean cell mask: cell center inside the union of balls."""
    mask = np.zeros(grid.cell_shape, dtype=bool)
    h, r = grid.h, cover.radius
    r2 = r * r
    for cx, cy in cover.centers:
        # cells whose center can be within r of (cx, cy)
        i0 = max(int(np.floor((cx - r) / h - 0.5)), 0)
        i1 = min(int(np.ceil((cx + r) / h - 0.5)), grid.nx - 1)
        j0 = max(int(np.floor((cy - r) / h - 0.5)), 0)
        j1 = min(int(np.ceil((cy + r) / h - 0.5)), grid.ny - 1)
        if i1 < i0 or j1 < j0:
            continue
        xs = (np.arange(i0, i1 + 1) + 0.5) * h - cx
        ys = (np.arange(j0, j1 + 1) + 0.5) * h - cy
        d2 = ys[:, None] ** 2 + xs[None, :] ** 2
        mask[j0 : j1 + 1, i0 : i1 + 1] |= d2 < r2
    return mask


def indicator_field(cover: BallCover, grid: ImageGrid) -> CellField:
    cover.check_domain(grid)
    mask = covered_mask(cover, grid)
    return CellField(grid, np.where(mask, cover.contrast, 1.0))


def ball_count(cover: BallCover) -> int:
    """Number of balls in the maintained list.

    This is an upper bound for the minimal number of balls representing the
    same indicator; the driver only ever asks about covers it built itself.
    """
    return len(cover.centers)


def length_estimate(cover: BallCover) -> float:
    """Edge-length surrogate ``2 * eps * (number of balls)``."""
    return 2.0 * cover.radius * ball_count(cover)


def write_cover_csv(cover: BallCover, path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# epsilon={cover.radius!r} kappa={cover.contrast!r}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y"])
        for x, y in cover.centers:
            w.writerow([repr(x), repr(y)])


def read_cover_csv(path: str | os.PathLike) -> BallCover:
    eps = kappa = None
    rows: list[Point] = []
    header_seen = False
    with open(path, newline="") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for item in line[1:].split():
                    key, _, val = item.partition("=")
                    if key == "epsilon":
                        eps = float(val)
                    elif key == "kappa":
                        kappa = float(val)
                continue
            if not header_seen:
                if line.replace(" ", "") != "x,y":
                    raise ValueError(f"expected header 'x,y', got {line!r}")
                header_seen = True
                continue
            x, y = line.split(",")
            rows.append((float(x), float(y)))
    if eps is None or kappa is None:
        raise ValueError("missing '# epsilon=<v> kappa=<v>' comment line")
    return BallCover(eps, kappa, tuple(rows))
