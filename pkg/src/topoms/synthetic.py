"""Analytic test images rendered at grid nodes."""

from __future__ import annotations

import numpy as np

from .grid import ImageGrid


def constant_image(n: int, c: float = 0.5) -> ImageGrid:
    return ImageGrid(np.full((n + 1, n + 1), float(c)))


def step_image(n: int, x0: float = 0.5) -> ImageGrid:
    """0 left of the vertical line ``x = x0``, 1 on and right of it."""
    return ImageGrid.from_function(lambda X, Y: (X >= x0).astype(float), n)


def gaussian_bump(n: int, center=(0.35, 0.45), sigma: float = 0.12,
                  base: float = 0.5, amplitude: float = 0.4) -> ImageGrid:
    cx, cy = center
    return ImageGrid.from_function(
        lambda X, Y: base + amplitude * np.exp(-((X - cx) ** 2 + (Y - cy) ** 2) / (2.0 * sigma**2)), n
    )


def linear_ramp(n: int) -> ImageGrid:
    """``f(x, y) = x``: unit gradient everywhere."""
    return ImageGrid.from_function(lambda X, Y: X, n)
