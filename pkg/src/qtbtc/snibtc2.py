"""SNIBTC2: 14 bits per 4x4 tile.

A tile keeps 4 of its 16 plane bits, at pels (0,0), (0,2), (2,0), (2,2),
and a 10-bit joint code: 6 bits index the mean, 4 bits index sigma. The
decoder replicates each kept bit over its 2x2 quadrant, so the number of
ones is known before the two grey levels are rebuilt from mean and sigma.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import btc
from .imageio import GrayImage

PLANE4_BITS = 4
CODE_BITS = 10
BITS_PER_BLOCK = PLANE4_BITS + CODE_BITS
SIGMA_MAX = 127.5

MEAN_LEVELS = np.floor(np.arange(64) * 255 / 63 + 0.5).astype(np.int64)
SIGMA_LEVELS = np.floor(127.5 * (np.arange(16) / 15) ** 2 + 0.5).astype(np.int64)

# plane bit index (15 = pel (0,0)) of each kept pel, in plane4 order MSB first
_KEPT = np.array([15 - (r * 4 + c) for r, c in ((0, 0), (0, 2), (2, 0), (2, 2))])
# plane4 bit (3 = MSB) feeding each of the 16 pels under replication
_SOURCE = np.array([3 - ((r // 2) * 2 + c // 2) for r in range(4) for c in range(4)])


@dataclass(frozen=True)
class Snibtc2Block:
    plane4: int
    code: int


def _nearest(levels: np.ndarray, x) -> np.ndarray:
    # argmin returns the first minimum, so ties go to the lower index
    x = np.asarray(x, dtype=np.float64)
    return np.abs(x[..., None] - levels).argmin(axis=-1)


def quantize_joint_arrays(mean, sigma) -> np.ndarray:
    mean = np.asarray(mean, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    if np.any((mean < 0) | (mean > 255)):
        raise ValueError("mean must lie in [0, 255]")
    if np.any((sigma < 0) | (sigma > SIGMA_MAX)):
        raise ValueError(f"sigma must lie in [0, {SIGMA_MAX}]")
    return (_nearest(MEAN_LEVELS, mean) << 4) | _nearest(SIGMA_LEVELS, sigma)


def dequantize_joint_arrays(code):
    code = np.asarray(code, dtype=np.int64)
    return MEAN_LEVELS[code >> 4], SIGMA_LEVELS[code & 15]


def quantize_joint(mean: float, sigma: float) -> int:
    return int(quantize_joint_arrays(mean, sigma))


def dequantize_joint(code: int) -> tuple[int, int]:
    if not 0 <= code < 1 << CODE_BITS:
        raise ValueError(f"joint code {code} out of range")
    m, s = dequantize_joint_arrays(code)
    return int(m), int(s)


def decimate_arrays(plane) -> np.ndarray:
    bits = (np.asarray(plane, dtype=np.int64)[..., None] >> _KEPT) & 1
    return (bits << np.arange(3, -1, -1)).sum(axis=-1)


def interpolate_arrays(plane4) -> np.ndarray:
    bits = (np.asarray(plane4, dtype=np.int64)[..., None] >> _SOURCE) & 1
    return btc.pack_planes(bits)


def decimate_plane(plane: int) -> int:
    return int(decimate_arrays(plane))


def interpolate_plane(plane4: int) -> int:
    return int(interpolate_arrays(plane4))


def encode_arrays(tiles: np.ndarray):
    """(M, 16) tiles -> (plane4, code) arrays."""
    _, _, mean, sigma, plane, _ = btc.stats_arrays(tiles)
    return decimate_arrays(plane), quantize_joint_arrays(mean, sigma)


def decode_arrays(plane4, code) -> np.ndarray:
    """(plane4, code) arrays -> (M, 16) pels."""
    plane = interpolate_arrays(plane4)
    q = 4 * btc.popcount16(plane4)
    mean, sigma = dequantize_joint_arrays(code)
    a, b = btc.two_levels(mean, sigma, q)
    a, b = btc.quantize_levels(mean, a, b, q)
    return btc.decode_arrays(plane, a, b)


def sn2_encode_block(block) -> Snibtc2Block:
    p4, code = encode_arrays(btc._tile(block))
    return Snibtc2Block(int(p4[0]), int(code[0]))


def sn2_decode_block(coded: Snibtc2Block) -> np.ndarray:
    return decode_arrays(np.array([coded.plane4]), np.array([coded.code]))[0].reshape(4, 4)


def sn2_encode_image(img: GrayImage) -> list[Snibtc2Block]:
    tiles, _ = btc.image_tiles(img)
    p4, code = encode_arrays(tiles)
    return [Snibtc2Block(int(p), int(c)) for p, c in zip(p4, code)]


def sn2_decode_image(blocks, width: int, height: int) -> GrayImage:
    shape = btc.grid_shape_for(width, height)
    if len(blocks) != shape[0] * shape[1]:
        raise ValueError(f"{len(blocks)} blocks do not match a {width}x{height} image")
    p4 = np.array([blk.plane4 for blk in blocks], dtype=np.int64)
    code = np.array([blk.code for blk in blocks], dtype=np.int64)
    return btc.tiles_to_image(decode_arrays(p4, code), shape, width, height)
