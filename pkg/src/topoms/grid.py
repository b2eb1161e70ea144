"""Image domain, nodal/cell field containers and minimal PGM I/O.

Pixels are identified with grid nodes, so an image of ``W x H`` pixels
yields ``nx = W - 1`` by ``ny = H - 1`` square cells.  The domain is
scaled so that its longer side has unit length.

Arrays are stored in image layout: nodal arrays have shape
``(ny + 1, nx + 1)`` and are indexed ``[j, i]`` with ``x = i * h`` and
``y = j * h`` (``j`` grows downwards, like image rows).  Cell arrays have
shape ``(ny, nx)``; cell ``[j, i]`` has its center at
``((i + 1/2) h, (j + 1/2) h)``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Literal

import numpy as np


class PGMError(ValueError):
    """Malformed or unsupported PGM input."""


class DomainError(ValueError):
    """Point lies outside the image domain."""


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ImageGrid:
    """Rectangular domain ``[0, nx*h] x [0, ny*h]`` carrying the datum ``f``."""

    f: np.ndarray

    def __post_init__(self):
        f = _frozen(self.f)
        if f.ndim != 2:
            raise ValueError("f must be a 2-D nodal array")
        ny, nx = f.shape[0] - 1, f.shape[1] - 1
        if nx < 2 or ny < 2:
            raise ValueError(f"grid needs at least 2x2 cells, got {nx}x{ny}")
        if not np.all(np.isfinite(f)) or f.min() < 0.0 or f.max() > 1.0:
            raise ValueError("f values must lie in [0, 1]")
        object.__setattr__(self, "f", f)

    @property
    def nx(self) -> int:
        return self.f.shape[1] - 1

    @property
    def ny(self) -> int:
        return self.f.shape[0] - 1

    @property
    def h(self) -> float:
        return 1.0 / max(self.nx, self.ny)

    @property
    def width(self) -> float:
        return self.nx * self.h

    @property
    def height(self) -> float:
        return self.ny * self.h

    @property
    def n_nodes(self) -> int:
        return (self.nx + 1) * (self.ny + 1)

    @property
    def node_shape(self) -> tuple[int, int]:
        return (self.ny + 1, self.nx + 1)

    @property
    def cell_shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    def node_coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(X, Y)`` nodal coordinate arrays."""
        x = np.arange(self.nx + 1) * self.h
        y = np.arange(self.ny + 1) * self.h
        return np.meshgrid(x, y)

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(X, Y)`` cell-center coordinate arrays."""
        x = (np.arange(self.nx) + 0.5) * self.h
        y = (np.arange(self.ny) + 0.5) * self.h
        return np.meshgrid(x, y)

    def contains(self, x: float, y: float) -> bool:
        return 0.0 <= x <= self.width and 0.0 <= y <= self.height

    @classmethod
    def from_function(cls, func, nx: int, ny: int | None = None) -> "ImageGrid":
        """Sample ``func(X, Y)`` at the nodes of an ``nx x ny`` cell grid."""
        ny = nx if ny is None else ny
        h = 1.0 / max(nx, ny)
        X, Y = np.meshgrid(np.arange(nx + 1) * h, np.arange(ny + 1) * h)
        return cls(np.broadcast_to(func(X, Y), X.shape))


@dataclass(frozen=True, eq=False)
class NodalField:
    grid: ImageGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = _frozen(self.values)
        if v.shape != self.grid.node_shape:
            raise ValueError(f"nodal field shape {v.shape} != {self.grid.node_shape}")
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, grid: ImageGrid, c: float) -> "NodalField":
        return cls(grid, np.full(grid.node_shape, float(c)))


@dataclass(frozen=True, eq=False)
class CellField:
    grid: ImageGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = _frozen(self.values)
        if v.shape != self.grid.cell_shape:
            raise ValueError(f"cell field shape {v.shape} != {self.grid.cell_shape}")
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, grid: ImageGrid, c: float) -> "CellField":
        return cls(grid, np.full(grid.cell_shape, float(c)))


def cell_average(values: np.ndarray) -> np.ndarray:
    """Bilinear interpolant at cell centers: mean of the four corner nodes."""
    return 0.25 * (values[:-1, :-1] + values[:-1, 1:] + values[1:, :-1] + values[1:, 1:])


def bilinear_eval(field: NodalField, x: float, y: float) -> float:
    grid = field.grid
    if not grid.contains(x, y):
        raise DomainError(f"point ({x}, {y}) outside [0, {grid.width}] x [0, {grid.height}]")
    s, t = x / grid.h, y / grid.h
    i = min(int(np.floor(s)), grid.nx - 1)
    j = min(int(np.floor(t)), grid.ny - 1)
    a, b = s - i, t - j
    u = field.values
    return float(
        (1 - a) * (1 - b) * u[j, i]
        + a * (1 - b) * u[j, i + 1]
        + (1 - a) * b * u[j + 1, i]
        + a * b * u[j + 1, i + 1]
    )


# --- PGM -------------------------------------------------------------------

def _tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """Read ``count`` whitespace-separated header tokens, skipping comments.

    Returns the tokens and the offset of the single whitespace byte that
    terminates the last one.
    """
    toks: list[bytes] = []
    pos, n = 0, len(data)
    while len(toks) < count:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos >= n:
            raise PGMError(f"truncated header after tokens {[t.decode('latin-1') for t in toks]}")
        if data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        toks.append(data[start:pos])
    return toks, pos


def _int_token(tok: bytes, what: str) -> int:
    try:
        val = int(tok.decode("ascii"))
    except (UnicodeDecodeError, ValueError):
        raise PGMError(f"bad {what} token {tok!r}") from None
    if val <= 0:
        raise PGMError(f"bad {what} token {tok!r}: must be positive")
    return val


def read_pgm_array(path: str | os.PathLike) -> np.ndarray:
    """Read an 8-bit P2/P5 PGM into a ``(height, width)`` uint8 array."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 2:
        raise PGMError("empty file")
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise PGMError(f"unsupported magic number {magic!r}; expected P2 or P5")
    toks, pos = _tokens(data, 4)
    if toks[0] != magic:
        raise PGMError(f"bad magic token {toks[0]!r}")
    width = _int_token(toks[1], "width")
    height = _int_token(toks[2], "height")
    maxval = _int_token(toks[3], "maxval")
    if maxval != 255:
        raise PGMError(f"unsupported maxval {maxval}; only 8-bit (255) images are accepted")

    npix = width * height
    if magic == b"P5":
        body = data[pos + 1 : pos + 1 + npix]
        if len(body) != npix:
            raise PGMError(f"expected {npix} raster bytes, found {len(body)}")
        pixels = np.frombuffer(body, dtype=np.uint8)
    else:
        raw = data[pos:].split()
        if len(raw) < npix:
            raise PGMError(f"expected {npix} raster values, found {len(raw)}")
        vals = []
        for tok in raw[:npix]:
            try:
                v = int(tok)
            except ValueError:
                raise PGMError(f"bad raster token {tok!r}") from None
            if not 0 <= v <= 255:
                raise PGMError(f"raster value {v} out of range [0, 255]")
            vals.append(v)
        pixels = np.array(vals, dtype=np.uint8)
    return pixels.reshape(height, width).copy()


def write_pgm_array(pixels: np.ndarray, path: str | os.PathLike) -> None:
    pixels = np.asarray(pixels, dtype=np.uint8)
    height, width = pixels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(pixels).tobytes())


def load_pgm(path: str | os.PathLike) -> ImageGrid:
    pixels = read_pgm_array(path)
    height, width = pixels.shape
    if width < 3 or height < 3:
        raise ValueError(f"image {width}x{height} gives fewer than 2x2 cells")
    return ImageGrid(pixels.astype(float) / 255.0)


def to_pixels(values: np.ndarray, mode: Literal["clamp", "rescale"] = "clamp") -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if mode == "clamp":
        scaled = 255.0 * np.clip(values, 0.0, 1.0)
    elif mode == "rescale":
        lo, hi = float(values.min()), float(values.max())
        if hi == lo:
            return np.full(values.shape, 128, dtype=np.uint8)
        scaled = 255.0 * (values - lo) / (hi - lo)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    # round half up
    return np.clip(np.floor(scaled + 0.5), 0, 255).astype(np.uint8)


def save_pgm(field: NodalField | CellField, path: str | os.PathLike,
             mode: Literal["clamp", "rescale"] = "clamp") -> None:
    write_pgm_array(to_pixels(field.values, mode), path)
