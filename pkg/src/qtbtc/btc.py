"""Basic block truncation coding over 4x4 tiles.

Each tile is coded as a 16-bit bit plane plus two grey levels chosen so the
reconstruction keeps the tile's mean and second moment. Bit 15 of the plane
is pel (0, 0); bits run row-major toward bit 0 at pel (3, 3).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .imageio import GrayImage, assemble, blocks_of, pad_to_multiple, BlockGrid

N = 16
BLOCK = 4
PAD_MULTIPLE = 32
BITS_PER_BLOCK = 32

# plane bit weight for each of the 16 pels, row-major
_WEIGHTS = (1 << np.arange(N - 1, -1, -1)).astype(np.int64)


@dataclass(frozen=True)
class BlockStats:
    mean: Fraction
    second_moment: Fraction
    sigma: float
    q: int
    n: int = N
    plane: int = 0


@dataclass(frozen=True)
class BtcBlock:
    plane: int
    a: int
    b: int


def round_half_up(x):
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5)


def popcount16(planes) -> np.ndarray:
    p = np.asarray(planes, dtype=np.int64)
    return ((p[..., None] >> np.arange(N)) & 1).sum(axis=-1)


def pack_planes(bits: np.ndarray) -> np.ndarray:
    """(..., 16) 0/1 array -> (...) planes."""
    return (bits.astype(np.int64) * _WEIGHTS).sum(axis=-1)


def unpack_planes(planes) -> np.ndarray:
    """(...) planes -> (..., 16) 0/1 array."""
    p = np.asarray(planes, dtype=np.int64)
    return (p[..., None] >> np.arange(N - 1, -1, -1)) & 1


def two_levels(mean, sigma, q, n=N):
    """Moment-preserving (a, b) before rounding; nan where q is 0 or n."""
    mean = np.asarray(mean, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        b = mean - sigma * np.sqrt(q / (n - q))
        a = mean + sigma * np.sqrt((n - q) / q)
    degenerate = (q == 0) | (q == n)
    return np.where(degenerate, np.nan, a), np.where(degenerate, np.nan, b)


def quantize_levels(mean, a, b, q, n=N):
    """Round half-up and clamp; q in {0, n} falls back to the rounded mean."""
    q = np.asarray(q)
    flat = np.clip(round_half_up(mean), 0, 255)
    degenerate = (q == 0) | (q == n)
    a_r = np.where(degenerate, flat, np.clip(round_half_up(np.nan_to_num(a)), 0, 255))
    b_r = np.where(degenerate, flat, np.clip(round_half_up(np.nan_to_num(b)), 0, 255))
    return a_r.astype(np.int64), b_r.astype(np.int64)


def stats_arrays(blocks: np.ndarray):
    """Vectorized statistics over (M, 16) integer tiles.

    Returns (sum, sum of squares, mean, sigma, plane, q). The plane test
    ``16 * x > sum`` is exact, so a pel equal to the mean codes as 0.
    """
    x = np.asarray(blocks, dtype=np.int64).reshape(-1, N)
    s = x.sum(axis=1)
    s2 = (x * x).sum(axis=1)
    mean = s / N
    sigma = np.sqrt(N * s2 - s * s) / N
    bits = (N * x) > s[:, None]
    plane = pack_planes(bits)
    q = bits.sum(axis=1)
    return s, s2, mean, sigma, plane, q


def encode_arrays(blocks: np.ndarray):
    """(M, 16) tiles -> (plane, a, b) integer arrays."""
    _, _, mean, sigma, plane, q = stats_arrays(blocks)
    a, b = two_levels(mean, sigma, q)
    a, b = quantize_levels(mean, a, b, q)
    return plane, a, b


def decode_arrays(plane, a, b) -> np.ndarray:
    """(plane, a, b) arrays of shape (M,) -> (M, 16) pels."""
    bits = unpack_planes(plane)
    out = np.where(bits == 1, np.asarray(a)[..., None], np.asarray(b)[..., None])
    return out.astype(np.uint8)


def _tile(block) -> np.ndarray:
    x = np.asarray(block)
    if x.size != N:
        raise ValueError(f"expected a 4x4 tile, got {x.shape}")
    if x.min() < 0 or x.max() > 255:
        raise ValueError("pels must lie in [0, 255]")
    return x.reshape(1, N)


def block_stats(block) -> BlockStats:
    x = _tile(block)
    s, s2, _, sigma, plane, q = stats_arrays(x)
    return BlockStats(
        mean=Fraction(int(s[0]), N),
        second_moment=Fraction(int(s2[0]), N),
        sigma=float(sigma[0]),
        q=int(q[0]),
        plane=int(plane[0]),
    )


def encode_block(block) -> BtcBlock:
    plane, a, b = encode_arrays(_tile(block))
    return BtcBlock(int(plane[0]), int(a[0]), int(b[0]))


def decode_block(coded: BtcBlock) -> np.ndarray:
    return decode_arrays(np.array([coded.plane]), np.array([coded.a]), np.array([coded.b]))[0].reshape(
        BLOCK, BLOCK
    )


def image_tiles(img: GrayImage) -> tuple[np.ndarray, tuple[int, int]]:
    """Padded raster as (M, 16) tiles in raster order, plus (blocks_down, blocks_across)."""
    raster = pad_to_multiple(img, PAD_MULTIPLE)
    tiles = blocks_of(raster, BLOCK)
    grid_shape = tiles.shape[:2]
    return tiles.reshape(-1, N), grid_shape


def tiles_to_image(tiles: np.ndarray, grid_shape, width: int, height: int) -> GrayImage:
    down, across = grid_shape
    grid = BlockGrid(BLOCK, across, down, width, height, tiles.reshape(down, across, BLOCK, BLOCK))
    return assemble(grid)


def grid_shape_for(width: int, height: int) -> tuple[int, int]:
    down = -(-height // PAD_MULTIPLE) * PAD_MULTIPLE // BLOCK
    across = -(-width // PAD_MULTIPLE) * PAD_MULTIPLE // BLOCK
    return down, across


def btc_encode_image(img: GrayImage) -> list[BtcBlock]:
    tiles, _ = image_tiles(img)
    plane, a, b = encode_arrays(tiles)
    return [BtcBlock(int(p), int(x), int(y)) for p, x, y in zip(plane, a, b)]


def btc_decode_image(blocks, width: int, height: int) -> GrayImage:
    shape = grid_shape_for(width, height)
    if len(blocks) != shape[0] * shape[1]:
        raise ValueError(
            f"{len(blocks)} blocks do not match a {width}x{height} image "
            f"({shape[0] * shape[1]} expected)"
        )
    plane = np.array([blk.plane for blk in blocks], dtype=np.int64)
    a = np.array([blk.a for blk in blocks], dtype=np.int64)
    b = np.array([blk.b for blk in blocks], dtype=np.int64)
    return tiles_to_image(decode_arrays(plane, a, b), shape, width, height)
