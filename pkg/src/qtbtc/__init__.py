"""Block truncation coding with quadtree interblock clustering, and
quadtree coding of block motion fields."""

from .imageio import GrayImage, read_pgm, write_pgm, partition, assemble
from .container import Mode, parse_container, write_container
from .codec import encode_image, decode_image
from .metrics import mse, mae, snr

__all__ = [
    "GrayImage",
    "read_pgm",
    "write_pgm",
    "partition",
    "assemble",
    "Mode",
    "parse_container",
    "write_container",
    "encode_image",
    "decode_image",
    "mse",
    "mae",
    "snr",
]
