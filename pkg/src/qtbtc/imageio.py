"""8-bit grayscale images: binary PGM I/O and block grids with edge padding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BLOCK_SIZES = (4, 8, 16)


class PGMError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Row-major 8-bit raster. ``pixels`` has shape (height, width), dtype uint8."""

    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.shape != (self.height, self.width):
            raise ValueError(
                f"pixel array shape {px.shape} does not match {self.height}x{self.width}"
            )
        if px.dtype != np.uint8:
            if px.size and (px.min() < 0 or px.max() > 255):
                raise ValueError("pixel values must lie in [0, 255]")
            px = px.astype(np.uint8)
        px = np.ascontiguousarray(px)
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @classmethod
    def from_array(cls, arr) -> "GrayImage":
        arr = np.asarray(arr)
        if arr.ndim != 2:
            raise ValueError("expected a 2-D array")
        return cls(arr.shape[1], arr.shape[0], arr)

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and np.array_equal(self.pixels, other.pixels)
        )

    __hash__ = None


_WS = b" \t\n\r\v\f"


def _header_fields(data: bytes, count: int) -> tuple[list[int], int]:
    """Read ``count`` decimal header fields after the magic, skipping comments."""
    pos = 2
    fields = []
    while len(fields) < count:
        if pos >= len(data):
            raise PGMError("truncated PGM header")
        ch = data[pos : pos + 1]
        if ch in _WS:
            pos += 1
        elif ch == b"#":
            nl = data.find(b"\n", pos)
            if nl < 0:
                raise PGMError("truncated PGM header")
            pos = nl + 1
        else:
            end = pos
            while end < len(data) and data[end : end + 1].isdigit():
                end += 1
            if end == pos:
                raise PGMError(f"malformed PGM header at byte {pos}")
            fields.append(int(data[pos:end]))
            pos = end
    return fields, pos


def read_pgm(data: bytes) -> GrayImage:
    """Parse a binary (P5) PGM with maxval 255. Header comments are allowed."""
    if data[:2] != b"P5":
        raise PGMError("not a binary PGM (missing P5 magic)")
    (width, height, maxval), pos = _header_fields(data, 3)
    # exactly one whitespace byte separates maxval from the raster
    if pos >= len(data) or data[pos : pos + 1] not in _WS:
        raise PGMError("truncated PGM header")
    pos += 1
    if maxval != 255:
        raise PGMError(f"unsupported maxval {maxval} (only 255)")
    if width <= 0 or height <= 0:
        raise PGMError("PGM dimensions must be positive")
    n = width * height
    if len(data) - pos < n:
        raise PGMError(f"truncated pixel data: need {n} bytes, have {len(data) - pos}")
    px = np.frombuffer(data, dtype=np.uint8, count=n, offset=pos).reshape(height, width)
    return GrayImage(width, height, px.copy())


def write_pgm(img: GrayImage) -> bytes:
    header = b"P5\n%d %d\n255\n" % (img.width, img.height)
    return header + img.pixels.tobytes()


def load_pgm(path) -> GrayImage:
    with open(path, "rb") as fh:
        return read_pgm(fh.read())


def save_pgm(path, img: GrayImage) -> None:
    with open(path, "wb") as fh:
        fh.write(write_pgm(img))


def pad_to_multiple(img: GrayImage, multiple: int) -> np.ndarray:
    """Edge-replicated raster whose sides are multiples of ``multiple``."""
    h = -(-img.height // multiple) * multiple
    w = -(-img.width // multiple) * multiple
    return np.pad(img.pixels, ((0, h - img.height), (0, w - img.width)), mode="edge")


@dataclass(frozen=True, eq=False)
class BlockGrid:
    """Tiles of a padded raster.

    ``blocks`` has shape (blocks_down, blocks_across, block_size, block_size);
    flattening the first two axes gives raster order.
    """

    block_size: int
    blocks_across: int
    blocks_down: int
    true_width: int
    true_height: int
    blocks: np.ndarray

    def __post_init__(self):
        bs = self.block_size
        expected = (self.blocks_down, self.blocks_across, bs, bs)
        if self.blocks.shape != expected:
            raise ValueError(f"blocks shape {self.blocks.shape} != {expected}")
        if self.blocks_across * bs < self.true_width or self.blocks_down * bs < self.true_height:
            raise ValueError("grid does not cover the true raster")

    def raster(self) -> np.ndarray:
        """The padded raster these tiles cover."""
        bs = self.block_size
        return self.blocks.transpose(0, 2, 1, 3).reshape(
            self.blocks_down * bs, self.blocks_across * bs
        )


def blocks_of(raster: np.ndarray, block_size: int) -> np.ndarray:
    h, w = raster.shape
    bs = block_size
    return raster.reshape(h // bs, bs, w // bs, bs).transpose(0, 2, 1, 3)


def partition(img: GrayImage, block_size: int, pad_multiple: int | None = None) -> BlockGrid:
    """Split ``img`` into square tiles in raster order.

    The raster is first edge-padded to a multiple of ``pad_multiple``
    (defaults to ``block_size``); BTC pipelines pass 32, motion pipelines 64.
    """
    if block_size not in BLOCK_SIZES:
        raise ValueError(f"block size must be one of {BLOCK_SIZES}, got {block_size}")
    multiple = block_size if pad_multiple is None else pad_multiple
    if multiple % block_size:
        raise ValueError("pad multiple must be a multiple of the block size")
    raster = pad_to_multiple(img, multiple)
    tiles = np.ascontiguousarray(blocks_of(raster, block_size))
    return BlockGrid(
        block_size,
        tiles.shape[1],
        tiles.shape[0],
        img.width,
        img.height,
        tiles,
    )


def assemble(grid: BlockGrid) -> GrayImage:
    raster = grid.raster()[: grid.true_height, : grid.true_width]
    return GrayImage(grid.true_width, grid.true_height, raster)
