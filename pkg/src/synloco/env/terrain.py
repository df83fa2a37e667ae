"""Procedural tile terrain: a sequence of pitched tiles joined without gaps.

Each tile is a 1 m long, 4 m wide slab (width is out of plane and carried for
completeness); tile pitch is drawn uniformly from the configured slope range.
For the planar simulation the terrain reduces to a piecewise-linear ground
polyline y(x), flat before the first tile and after the last.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TILE_WIDTH_M = 4.0
TILE_LENGTH_M = 1.0
TILE_HEIGHT_M = 0.1
FLAT_APRON_M = 50.0      # flat run-in/run-out beyond the tiled region


@dataclass(frozen=True)
class Tile:
    pitch_deg: float
    width: float = TILE_WIDTH_M
    length: float = TILE_LENGTH_M
    height: float = TILE_HEIGHT_M


@dataclass
class TerrainSpec:
    tiles: list
    seed: int | None = None
    start_x: float = 0.0

    def __post_init__(self):
        for tile in self.tiles:
            if not -90.0 < tile.pitch_deg < 90.0:
                raise ValueError(f"tile pitch {tile.pitch_deg} deg is not physical")

    @property
    def n_tiles(self):
        return len(self.tiles)

    def pitches_deg(self) -> np.ndarray:
        return np.array([t.pitch_deg for t in self.tiles])

    def polyline(self) -> tuple:
        """Ground surface nodes (xs, ys) including the flat aprons.

        Consecutive tiles share their boundary node, so the surface is
        continuous by construction.
        """
        xs = [self.start_x - FLAT_APRON_M, self.start_x]
        ys = [0.0, 0.0]
        for tile in self.tiles:
            xs.append(xs[-1] + tile.length)
            ys.append(ys[-1] + tile.length * math.tan(math.radians(tile.pitch_deg)))
        xs.append(xs[-1] + FLAT_APRON_M)
        ys.append(ys[-1])
        return np.asarray(xs), np.asarray(ys)

    def height_at(self, x: float) -> float:
        xs, ys = self.polyline()
        return float(np.interp(x, xs, ys))

    def tile_index_at(self, x: float) -> int:
        """Index of the tile under x; clamped to the tiled region."""
        offset = (x - self.start_x) / TILE_LENGTH_M
        return int(np.clip(math.floor(offset), 0, max(self.n_tiles - 1, 0)))


def generate_terrain(seed: int, n_tiles: int,
                     slope_range_deg=(-6.0, 6.0)) -> TerrainSpec:
    """Random terrain with tile pitches uniform over the slope range."""
    if n_tiles < 1:
        raise ValueError(f"n_tiles must be >= 1, got {n_tiles}")
    lo, hi = slope_range_deg
    if not (-90.0 < lo <= hi < 90.0):
        raise ValueError(f"slope range {slope_range_deg} is not physical")
    rng = np.random.default_rng(seed)
    pitches = rng.uniform(lo, hi, n_tiles)
    return TerrainSpec([Tile(float(p)) for p in pitches], seed=seed)


def flat_terrain(n_tiles: int = 40) -> TerrainSpec:
    return TerrainSpec([Tile(0.0) for _ in range(n_tiles)], seed=None)


def constant_slope_terrain(pitch_deg: float, n_tiles: int = 40) -> TerrainSpec:
    return TerrainSpec([Tile(float(pitch_deg)) for _ in range(n_tiles)], seed=None)
