"""Ego-centric bird's-eye-view observation masks."""

from .masks import (
    DEFAULT_LAYOUT,
    Layout,
    MaskStack,
    dump_raster,
    export_pgm,
    gaussian_patch,
    load_raster,
    read_raster,
    render_context,
    render_future,
    render_past,
    save_raster,
    stack,
)
from .raster import RasterSpec, world_to_pixel

__all__ = [
    "DEFAULT_LAYOUT",
    "Layout",
    "MaskStack",
    "RasterSpec",
    "dump_raster",
    "export_pgm",
    "gaussian_patch",
    "load_raster",
    "read_raster",
    "render_context",
    "render_future",
    "render_past",
    "save_raster",
    "stack",
    "world_to_pixel",
]
