#!/usr/bin/env python3


"""

The BEV raster every agent's feature map lives on

The grid is centered on its owning agent. Row index i runs along +y,
column index j along +x (x is the agent's forward direction). Cell (i, j)
has its center at

    x = (j + 0.5 - W/2) * resolution
    y = (i + 0.5 - H/2) * resolution

"""


from dataclasses import dataclass

import numpy as np

from lib_autodiff.errors import ConfigurationError


@dataclass(frozen=True)
class BevGrid:
    height: int
    width: int
    resolution: float

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ConfigurationError(f"Grid must have at least one cell, got {self.height}x{self.width}")
        if not self.resolution > 0.0:
            raise ConfigurationError(f"Grid resolution must be positive, got {self.resolution}")

    @property
    def extent_x(self):
        return self.width * self.resolution

    @property
    def extent_y(self):
        return self.height * self.resolution

    @property
    def half_diagonal(self):
        return 0.5 * float(np.hypot(self.extent_x, self.extent_y))

    @property
    def index_center(self):
        """
        (row, col) index coordinates of the agent position
        """
        return (self.height / 2.0 - 0.5, self.width / 2.0 - 0.5)

    def cell_centers(self):
        """
        Returns:
            (xs, ys): two [H, W] arrays of cell center coordinates in meters
        """
        cols = (np.arange(self.width) + 0.5 - self.width / 2.0) * self.resolution
        rows = (np.arange(self.height) + 0.5 - self.height / 2.0) * self.resolution
        xs, ys = np.meshgrid(cols, rows)
        return xs, ys

    def contains(self, x, y):
        """
        True where metric points fall inside the grid extent
        """
        x = np.asarray(x)
        y = np.asarray(y)
        return (np.abs(x) < self.extent_x / 2.0) & (np.abs(y) < self.extent_y / 2.0)

    def cell_of(self, x, y):
        """
        Row and column index of the cell containing metric points

        Points outside the grid get indices outside [0, H) x [0, W)
        """
        cols = np.floor(np.asarray(x) / self.resolution + self.width / 2.0).astype(int)
        rows = np.floor(np.asarray(y) / self.resolution + self.height / 2.0).astype(int)
        return rows, cols
