"""Planar muscle-driven biped environment: terrain, physics, model, episodes."""

from .biped import ModelConfig, PlanarBiped, load_model
from .environment import BipedEnv, EnvState, prepare_basis
from .terrain import (
    TerrainSpec,
    Tile,
    constant_slope_terrain,
    flat_terrain,
    generate_terrain,
)

__all__ = [
    "BipedEnv",
    "EnvState",
    "ModelConfig",
    "PlanarBiped",
    "TerrainSpec",
    "Tile",
    "constant_slope_terrain",
    "flat_terrain",
    "generate_terrain",
    "load_model",
    "prepare_basis",
]
