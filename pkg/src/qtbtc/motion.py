"""Block motion fields and their quadtree coding.

Frames are edge-padded to multiples of 64 pels and each 64x64 region is
one tree root, so 16x16 blocks give 3-level trees and 8x8 blocks 4-level
trees. Vector merging is lossless: a region merges only when all its
vectors are identical. Prediction convention: ``pred(x, y) = ref(x + dx, y + dy)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import quadtree as qt
from .container import BitReader, BitWriter, Container, Header, Mode, Section
from .imageio import GrayImage, pad_to_multiple

ROOT_SIZE = 64
MOTION_BLOCK_SIZES = (8, 16)
MAX_RANGE = 15
DEFAULT_RANGE = 7

INTER = 0
INTRA = 1


@dataclass(frozen=True, eq=False)
class MotionField:
    """``vectors`` has shape (rows, cols, 2) holding (dx, dy) per block in raster order."""

    block_size: int
    search_range: int
    width: int
    height: int
    vectors: np.ndarray

    def __post_init__(self):
        check_geometry(self.block_size, self.search_range)
        v = np.asarray(self.vectors, dtype=np.int64)
        expected = grid_shape(self.width, self.height, self.block_size) + (2,)
        if v.shape != expected:
            raise ValueError(f"vector grid {v.shape} does not match {expected}")
        if v.size and np.abs(v).max() > self.search_range:
            raise ValueError(f"vector component exceeds search range {self.search_range}")
        object.__setattr__(self, "vectors", v)

    @property
    def levels(self) -> int:
        return levels_for(self.block_size)

    def __eq__(self, other):
        if not isinstance(other, MotionField):
            return NotImplemented
        return (
            (self.block_size, self.search_range, self.width, self.height)
            == (other.block_size, other.search_range, other.width, other.height)
            and np.array_equal(self.vectors, other.vectors)
        )

    __hash__ = None


def check_geometry(block_size: int, search_range: int) -> None:
    if block_size not in MOTION_BLOCK_SIZES:
        raise ValueError(f"motion block size must be one of {MOTION_BLOCK_SIZES}, got {block_size}")
    if not 0 <= search_range <= MAX_RANGE:
        raise ValueError(f"search range must lie in [0, {MAX_RANGE}], got {search_range}")


def levels_for(block_size: int) -> int:
    return int(math.log2(ROOT_SIZE // block_size)) + 1


def grid_shape(width: int, height: int, block_size: int) -> tuple[int, int]:
    pad = lambda n: -(-n // ROOT_SIZE) * ROOT_SIZE
    return pad(height) // block_size, pad(width) // block_size


def component_bits(search_range: int) -> int:
    return math.ceil(math.log2(2 * search_range + 1))


def _padded(img: GrayImage) -> np.ndarray:
    return pad_to_multiple(img, ROOT_SIZE).astype(np.int64)


def _block_sums(diff: np.ndarray, bs: int) -> np.ndarray:
    h, w = diff.shape
    return diff.reshape(h // bs, bs, w // bs, bs).sum(axis=(1, 3))


def sad(a, b) -> int:
    return int(np.abs(np.asarray(a, dtype=np.int64) - np.asarray(b, dtype=np.int64)).sum())


def _candidates(search_range: int):
    """Candidate offsets in tie-break priority: L1 norm, then row-major order."""
    r = search_range
    raster = [(dx, dy) for dy in range(-r, r + 1) for dx in range(-r, r + 1)]
    return sorted(raster, key=lambda v: abs(v[0]) + abs(v[1]))  # stable sort keeps raster order


def full_search(ref: GrayImage, cur: GrayImage, block_size: int = 16, search_range: int = DEFAULT_RANGE) -> MotionField:
    """Exhaustive SAD block matching; out-of-frame candidates are skipped."""
    check_geometry(block_size, search_range)
    if (ref.width, ref.height) != (cur.width, cur.height):
        raise ValueError("reference and current frames differ in size")
    R, C = _padded(ref), _padded(cur)
    h, w = R.shape
    bs = block_size
    rows, cols = h // bs, w // bs
    y0 = (np.arange(rows) * bs)[:, None]
    x0 = (np.arange(cols) * bs)[None, :]
    big = np.pad(R, search_range)
    best = np.full((rows, cols), np.iinfo(np.int64).max)
    vec = np.zeros((rows, cols, 2), dtype=np.int64)
    for dx, dy in _candidates(search_range):
        shifted = big[search_range + dy : search_range + dy + h, search_range + dx : search_range + dx + w]
        cost = _block_sums(np.abs(C - shifted), bs)
        valid = (y0 + dy >= 0) & (y0 + dy + bs <= h) & (x0 + dx >= 0) & (x0 + dx + bs <= w)
        better = valid & (cost < best)
        best = np.where(better, cost, best)
        vec[better] = (dx, dy)
    return MotionField(block_size, search_range, cur.width, cur.height, vec)


def block_sads(ref: GrayImage, cur: GrayImage, field: MotionField) -> np.ndarray:
    pred = _predict(_padded(ref), field, None)
    return _block_sums(np.abs(_padded(cur) - pred), field.block_size)


def decide_modes(cur: GrayImage, ref: GrayImage, field: MotionField, threshold: float) -> np.ndarray:
    """Per-block INTER/INTRA: intra when the mean absolute prediction error exceeds ``threshold``."""
    per_pel = block_sads(ref, cur, field) / field.block_size**2
    return np.where(per_pel > threshold, INTRA, INTER).astype(np.int64)


def _predict(R: np.ndarray, field: MotionField, modes) -> np.ndarray:
    bs = field.block_size
    out = np.empty_like(R)
    rows, cols = field.vectors.shape[:2]
    for i in range(rows):
        for j in range(cols):
            y, x = i * bs, j * bs
            if modes is not None and modes[i, j] == INTRA:
                out[y : y + bs, x : x + bs] = 128
                continue
            dx, dy = field.vectors[i, j]
            out[y : y + bs, x : x + bs] = R[y + dy : y + dy + bs, x + dx : x + dx + bs]
    return out


def motion_compensate(ref: GrayImage, field: MotionField, modes=None) -> GrayImage:
    """Prediction of the current frame; intra blocks become flat 128."""
    pred = _predict(_padded(ref), field, None if modes is None else np.asarray(modes))
    return GrayImage(field.width, field.height, pred[: field.height, : field.width])


# -- payload codecs -----------------------------------------------------------


def _write_vector(w: BitWriter, dx: int, dy: int, search_range: int) -> None:
    nb = component_bits(search_range)
    for d in (dx, dy):
        if abs(d) > search_range:
            raise ValueError(f"component {d} outside search range {search_range}")
        w.append_bits(d + search_range, nb)


def _read_vector(r: BitReader, search_range: int) -> tuple[int, int]:
    nb = component_bits(search_range)
    dx = r.read_bits(nb) - search_range
    dy = r.read_bits(nb) - search_range
    if abs(dx) > search_range or abs(dy) > search_range:
        raise ValueError("decoded vector component outside search range")
    return dx, dy


def _roots(field_like_shape, levels: int) -> tuple[int, int]:
    side = 1 << (levels - 1)
    return field_like_shape[0] // side, field_like_shape[1] // side


def encode_field_raw(field: MotionField, w: BitWriter | None = None) -> BitWriter:
    w = BitWriter() if w is None else w
    for dx, dy in field.vectors.reshape(-1, 2).tolist():
        _write_vector(w, dx, dy, field.search_range)
    return w


def decode_field_raw(r: BitReader, block_size: int, search_range: int, width: int, height: int) -> MotionField:
    rows, cols = grid_shape(width, height, block_size)
    vec = [_read_vector(r, search_range) for _ in range(rows * cols)]
    return MotionField(block_size, search_range, width, height, np.array(vec, dtype=np.int64).reshape(rows, cols, 2))


def field_forest(field: MotionField) -> qt.Forest:
    return qt.build_forest(field.vectors, field.levels, qt.first_reduce, qt.equal_distance, 0, field.block_size)


def encode_field_qt(field: MotionField, w: BitWriter | None = None) -> BitWriter:
    rng = field.search_range
    return qt.serialize_forest(field_forest(field), lambda w, v, lvl: _write_vector(w, *v, rng), w)


def decode_field_qt(r: BitReader, block_size: int, search_range: int, width: int, height: int) -> MotionField:
    check_geometry(block_size, search_range)
    levels = levels_for(block_size)
    down, across = _roots(grid_shape(width, height, block_size), levels)
    forest = qt.deserialize_forest(r, lambda r, lvl: _read_vector(r, search_range), levels, down, across, block_size)
    return MotionField(block_size, search_range, width, height, qt.expand_forest(forest))


def mode_leaves(field: MotionField, modes) -> np.ndarray:
    """(rows, cols, 3) payloads (mode, dx, dy); intra blocks carry (0, 0)."""
    modes = np.asarray(modes, dtype=np.int64)
    if modes.shape != field.vectors.shape[:2]:
        raise ValueError("mode map and motion field geometries differ")
    vec = np.where((modes == INTRA)[..., None], 0, field.vectors)
    return np.concatenate([modes[..., None], vec], axis=-1)


def mode_forest(field: MotionField, modes) -> qt.Forest:
    return qt.build_forest(mode_leaves(field, modes), field.levels, qt.first_reduce, qt.equal_distance, 0, field.block_size)


def encode_modes_qt(field: MotionField, modes, w: BitWriter | None = None) -> BitWriter:
    """Joint block shape and inter/intra tree: each terminal carries a mode bit,
    inter terminals then one vector."""
    rng = field.search_range

    def write(w, payload, level):
        mode, dx, dy = payload
        w.append_bit(mode)
        if mode == INTER:
            _write_vector(w, dx, dy, rng)

    return qt.serialize_forest(mode_forest(field, modes), write, w)


def decode_modes_qt(r: BitReader, block_size: int, search_range: int, width: int, height: int):
    """-> (MotionField with intra blocks at (0, 0), mode map)."""
    check_geometry(block_size, search_range)
    levels = levels_for(block_size)

    def read(r, level):
        if r.read_bit() == INTRA:
            return (INTRA, 0, 0)
        return (INTER, *_read_vector(r, search_range))

    down, across = _roots(grid_shape(width, height, block_size), levels)
    grid = qt.expand_forest(qt.deserialize_forest(r, read, levels, down, across, block_size))
    field = MotionField(block_size, search_range, width, height, grid[..., 1:])
    return field, grid[..., 0]


def _pair_distance(regions: np.ndarray, reps: np.ndarray) -> np.ndarray:
    # a region above the last level merges only if every vector agrees in both frames
    temporal = (regions[..., :2] != regions[..., 2:]).any(axis=-1)
    return (qt.equal_distance(regions, reps).astype(bool) | temporal).astype(np.int64)


def pair_forest(prev: MotionField, cur: MotionField) -> qt.Forest:
    if (prev.block_size, prev.search_range, prev.vectors.shape) != (cur.block_size, cur.search_range, cur.vectors.shape):
        raise ValueError("motion fields differ in geometry")
    leaves = np.concatenate([prev.vectors, cur.vectors], axis=-1)
    return qt.build_forest(leaves, cur.levels, qt.first_reduce, _pair_distance, 0, cur.block_size)


def encode_pair_3d(prev: MotionField, cur: MotionField, w: BitWriter | None = None) -> BitWriter:
    """Spatial tree spanning two consecutive fields.

    Above the last level a terminal holds one vector shared by both frames.
    Last-level nodes start with a flag: 1 = one vector for both frames,
    0 = the earlier frame's vector, then the later frame's.
    """
    rng = cur.search_range
    last = cur.levels - 1

    def write(w, payload, level):
        pdx, pdy, cdx, cdy = payload
        same = (pdx, pdy) == (cdx, cdy)
        if level < last:
            _write_vector(w, pdx, pdy, rng)
            return
        w.append_bit(1 if same else 0)
        _write_vector(w, pdx, pdy, rng)
        if not same:
            _write_vector(w, cdx, cdy, rng)

    return qt.serialize_forest(pair_forest(prev, cur), write, w)


def decode_pair_3d(r: BitReader, block_size: int, search_range: int, width: int, height: int):
    check_geometry(block_size, search_range)
    levels = levels_for(block_size)

    def read(r, level):
        if level < levels - 1 or r.read_bit():
            v = _read_vector(r, search_range)
            return v + v
        return _read_vector(r, search_range) + _read_vector(r, search_range)

    down, across = _roots(grid_shape(width, height, block_size), levels)
    grid = qt.expand_forest(qt.deserialize_forest(r, read, levels, down, across, block_size))
    make = lambda v: MotionField(block_size, search_range, width, height, v)
    return make(grid[..., :2]), make(grid[..., 2:])


# -- containers ---------------------------------------------------------------


def to_container(mode, field: MotionField, modes=None, prev: MotionField | None = None, threshold: float = 0.0) -> Container:
    mode = Mode(mode)
    kw = dict(block_size=field.block_size, search_range=field.search_range)
    if mode == Mode.MVF_RAW:
        w = encode_field_raw(field)
    elif mode == Mode.MVF_QT:
        w = encode_field_qt(field)
    elif mode == Mode.MVF_MODE_QT:
        if modes is None:
            raise ValueError("mode-tree coding needs a mode map")
        q8 = int(math.floor(threshold * 256 + 0.5))
        if not 0 <= q8 <= 0xFFFF:
            raise ValueError(f"threshold {threshold} does not fit the 16-bit field")
        kw["threshold_q8"] = q8
        w = encode_modes_qt(field, modes)
    elif mode == Mode.MVF_3D_QT:
        if prev is None:
            raise ValueError("3D coding needs the previous field")
        w = encode_pair_3d(prev, field)
    else:
        raise ValueError(f"{mode.name} is not a motion mode")
    return Container(Header(mode, field.width, field.height, **kw), (Section.from_writer(w),))


def from_container(c: Container) -> dict:
    """Decoded content: always ``field``; ``modes`` for mode trees, ``prev`` for 3D."""
    h = c.header
    args = (h.block_size, h.search_range, h.width, h.height)
    r = c.sections[0].reader()
    out = {}
    if h.mode == Mode.MVF_RAW:
        out["field"] = decode_field_raw(r, *args)
    elif h.mode == Mode.MVF_QT:
        out["field"] = decode_field_qt(r, *args)
    elif h.mode == Mode.MVF_MODE_QT:
        out["field"], out["modes"] = decode_modes_qt(r, *args)
    elif h.mode == Mode.MVF_3D_QT:
        out["prev"], out["field"] = decode_pair_3d(r, *args)
    else:
        raise ValueError(f"{Mode(h.mode).name} is not a motion mode")
    if r.remaining:
        raise ValueError(f"{r.remaining} unread bits in motion section")
    return out


def dump_field(field: MotionField, modes=None) -> str:
    lines = ["row col dx dy" + (" mode" if modes is not None else "")]
    rows, cols = field.vectors.shape[:2]
    for i in range(rows):
        for j in range(cols):
            dx, dy = field.vectors[i, j]
            line = f"{i} {j} {dx} {dy}"
            if modes is not None:
                line += " intra" if modes[i, j] == INTRA else " inter"
            lines.append(line)
    return "\n".join(lines) + "\n"
