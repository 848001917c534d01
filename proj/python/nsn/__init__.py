"""Normal similarity networks: training, generation, styling and inpainting."""

from ._nsn import (
    FormatError,
    GenConfig,
    Network,
    ShapeError,
    arith,
    forward,
    generate,
    inpaint,
    interpolate,
    load_idx,
    parse_filter_expression,
    sample_layer,
    style,
    tile_grid,
    train,
    weight_vector,
    write_image,
)

__all__ = [
    "FormatError",
    "GenConfig",
    "Network",
    "ShapeError",
    "arith",
    "forward",
    "generate",
    "inpaint",
    "interpolate",
    "load_idx",
    "parse_filter_expression",
    "sample_layer",
    "style",
    "tile_grid",
    "train",
    "weight_vector",
    "write_image",
]
