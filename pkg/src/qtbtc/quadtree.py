"""Fixed-depth region quadtrees that cluster per-block payloads.

A tree of ``levels`` L covers a 2^(L-1) x 2^(L-1) grid of leaf payloads.
A node is terminal when every leaf payload in its region lies within
``threshold`` of the region's representative (``reduce`` over those
leaves); a terminal's representative is replicated over its whole region on
expansion. Level L-1 nodes are always terminal, so serialization spends no
structure bit on them.

``reduce`` and ``distance`` work on numpy arrays with leading batch axes:
``reduce(regions)`` maps (..., m, P) leaf payloads to (..., P)
representatives, and ``distance(regions, reps)`` maps (..., m, P) and
(..., 1, P) to (..., m) distances. Leaves inside a region are in raster
order, so index 0 is the top-left leaf.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .container import BitReader, BitWriter

MAX_LEVELS = 4


@dataclass(frozen=True)
class Terminal:
    payload: object
    level: int


@dataclass(frozen=True)
class Split:
    children: tuple  # TL, TR, BL, BR
    level: int


@dataclass(frozen=True)
class QuadTree:
    levels: int
    root: Terminal | Split

    @property
    def side(self) -> int:
        return 1 << (self.levels - 1)


@dataclass(frozen=True)
class Forest:
    trees: tuple
    levels: int
    roots_down: int
    roots_across: int
    leaf_block_size: int = 1

    @property
    def root_region_size(self) -> int:
        return self.leaf_block_size << (self.levels - 1)


# -- payload criteria ---------------------------------------------------------


def grey_reduce_arrays(regions: np.ndarray) -> np.ndarray:
    """Rounded half-up mean over the leaf axis, in exact integer arithmetic."""
    m = regions.shape[-2]
    s = regions.astype(np.int64).sum(axis=-2)
    return (2 * s + m) // (2 * m)


def grey_distance_arrays(regions: np.ndarray, reps: np.ndarray) -> np.ndarray:
    return np.abs(regions.astype(np.int64) - reps).max(axis=-1)


def plane_reduce_arrays(regions: np.ndarray, width: int = 16) -> np.ndarray:
    """Per-bit majority; an exact tie takes the top-left leaf's bit."""
    m = regions.shape[-2]
    shifts = np.arange(width - 1, -1, -1)
    bits = (regions[..., 0].astype(np.int64)[..., None] >> shifts) & 1  # (..., m, width)
    ones = bits.sum(axis=-2)
    majority = np.where(2 * ones == m, bits[..., 0, :], (2 * ones > m).astype(np.int64))
    return (majority << shifts).sum(axis=-1)[..., None]


def popcount(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    return ((x[..., None] >> np.arange(32)) & 1).sum(axis=-1)


def plane_distance_arrays(regions: np.ndarray, reps: np.ndarray) -> np.ndarray:
    return popcount(regions[..., 0].astype(np.int64) ^ reps[..., 0].astype(np.int64))


def first_reduce(regions: np.ndarray) -> np.ndarray:
    return regions[..., 0, :]


def equal_distance(regions: np.ndarray, reps: np.ndarray) -> np.ndarray:
    """0 where a leaf equals the representative in every component, else 1."""
    return (regions != reps).any(axis=-1).astype(np.int64)


def grey_reduce(values) -> int:
    v = np.asarray(values, dtype=np.int64).reshape(-1, 1)
    return int(grey_reduce_arrays(v)[0])


def grey_distance(x: int, y: int) -> int:
    return abs(int(x) - int(y))


def plane_reduce(planes, width: int = 16) -> int:
    p = np.asarray(planes, dtype=np.int64).reshape(-1, 1)
    return int(plane_reduce_arrays(p, width)[0])


def plane_distance(p: int, q: int) -> int:
    return bin(int(p) ^ int(q)).count("1")


# -- building -----------------------------------------------------------------


def _as_grid(leaves) -> tuple[np.ndarray, bool]:
    """(rows, cols[, P]) -> (rows, cols, P) int64 plus a scalar-payload flag."""
    g = np.asarray(leaves, dtype=np.int64)
    if g.ndim == 2:
        return g[..., None], True
    if g.ndim == 3:
        return g, False
    raise ValueError(f"leaf grid must be 2-D or 3-D, got shape {g.shape}")


def _payload(v: np.ndarray, scalar: bool):
    return int(v[0]) if scalar else tuple(int(x) for x in v)


def merge_tables(grid: np.ndarray, levels: int, reduce: Callable, distance: Callable, threshold):
    """Per level: (representatives, mergeable) over every region of the grid.

    ``grid`` is (rows, cols, P) with sides divisible by 2^(levels-1).
    """
    rows, cols, p = grid.shape
    tables = []
    for level in range(levels - 1):
        k = 1 << (levels - 1 - level)
        regions = (
            grid.reshape(rows // k, k, cols // k, k, p)
            .transpose(0, 2, 1, 3, 4)
            .reshape(rows // k, cols // k, k * k, p)
        )
        reps = np.asarray(reduce(regions)).reshape(rows // k, cols // k, p)
        d = np.asarray(distance(regions, reps[:, :, None, :]))
        tables.append((reps, d.max(axis=-1) <= threshold))
    tables.append((grid, np.ones(grid.shape[:2], dtype=bool)))
    return tables


def _node(tables, level: int, r: int, c: int, scalar: bool):
    reps, ok = tables[level]
    if ok[r, c]:
        return Terminal(_payload(reps[r, c], scalar), level)
    r2, c2 = 2 * r, 2 * c
    return Split(
        (
            _node(tables, level + 1, r2, c2, scalar),
            _node(tables, level + 1, r2, c2 + 1, scalar),
            _node(tables, level + 1, r2 + 1, c2, scalar),
            _node(tables, level + 1, r2 + 1, c2 + 1, scalar),
        ),
        level,
    )


def _check_levels(levels: int) -> None:
    if not 1 <= levels <= MAX_LEVELS:
        raise ValueError(f"levels must lie in [1, {MAX_LEVELS}], got {levels}")


def build_forest(
    leaves,
    levels: int,
    reduce: Callable,
    distance: Callable,
    threshold,
    leaf_block_size: int = 1,
) -> Forest:
    """Cluster a whole leaf grid into raster-ordered root trees."""
    _check_levels(levels)
    grid, scalar = _as_grid(leaves)
    side = 1 << (levels - 1)
    if grid.shape[0] % side or grid.shape[1] % side or grid.shape[0] == 0 or grid.shape[1] == 0:
        raise ValueError(f"leaf grid {grid.shape[:2]} is not tiled by {side}x{side} roots")
    tables = merge_tables(grid, levels, reduce, distance, threshold)
    down, across = grid.shape[0] // side, grid.shape[1] // side
    trees = tuple(
        QuadTree(levels, _node(tables, 0, r, c, scalar)) for r in range(down) for c in range(across)
    )
    return Forest(trees, levels, down, across, leaf_block_size)


def build_tree(leaves, reduce: Callable, distance: Callable, threshold, levels: int | None = None) -> QuadTree:
    grid, _ = _as_grid(leaves)
    side = grid.shape[0]
    if grid.shape[1] != side or side & (side - 1) or side == 0:
        raise ValueError(f"leaf grid must be a power-of-two square, got {grid.shape[:2]}")
    inferred = side.bit_length()
    if levels is not None and levels != inferred:
        raise ValueError(f"a {side}x{side} grid implies {inferred} levels, not {levels}")
    return build_forest(leaves, inferred, reduce, distance, threshold).trees[0]


# -- traversal ----------------------------------------------------------------


def iter_nodes(node):
    yield node
    if isinstance(node, Split):
        for child in node.children:
            yield from iter_nodes(child)


def _fill(node, out: list, r: int, c: int, size: int) -> None:
    if isinstance(node, Terminal):
        for i in range(r, r + size):
            for j in range(c, c + size):
                out[i][j] = node.payload
        return
    h = size // 2
    for child, (dr, dc) in zip(node.children, ((0, 0), (0, h), (h, 0), (h, h))):
        _fill(child, out, r + dr, c + dc, h)


def expand_tree(tree: QuadTree) -> list:
    """Leaf payload grid (list of rows); each terminal payload is replicated."""
    side = tree.side
    out = [[None] * side for _ in range(side)]
    _fill(tree.root, out, 0, 0, side)
    return out


def expand_forest(forest: Forest) -> np.ndarray:
    """(rows, cols) or (rows, cols, P) int64 leaf grid."""
    side = 1 << (forest.levels - 1)
    rows = []
    for rr in range(forest.roots_down):
        band = [expand_tree(forest.trees[rr * forest.roots_across + cc]) for cc in range(forest.roots_across)]
        for i in range(side):
            rows.append([v for tile in band for v in tile[i]])
    return np.array(rows, dtype=np.int64)


def level_histogram(forest: Forest) -> tuple[list[int], list[int]]:
    """Terminal counts per level and the leaf blocks they cover."""
    L = forest.levels
    counts = [0] * L
    for tree in forest.trees:
        for node in iter_nodes(tree.root):
            if isinstance(node, Terminal):
                counts[node.level] += 1
    coverage = [n * 4 ** (L - 1 - lvl) for lvl, n in enumerate(counts)]
    return counts, coverage


# -- serialization ------------------------------------------------------------


PayloadWriter = Callable[[BitWriter, object, int], None]
PayloadReader = Callable[[BitReader, int], object]


def fixed_writer(nbits: int) -> PayloadWriter:
    def write(w: BitWriter, payload, level: int) -> None:
        w.append_bits(int(payload), nbits)

    return write


def fixed_reader(nbits: int) -> PayloadReader:
    def read(r: BitReader, level: int):
        return r.read_bits(nbits)

    return read


def _write_node(node, w: BitWriter, write_payload: PayloadWriter, levels: int) -> None:
    if node.level < levels - 1:
        w.append_bit(1 if isinstance(node, Split) else 0)
    if isinstance(node, Terminal):
        write_payload(w, node.payload, node.level)
    else:
        for child in node.children:
            _write_node(child, w, write_payload, levels)


def serialize_tree(tree: QuadTree, write_payload: PayloadWriter, w: BitWriter | None = None) -> BitWriter:
    """Depth-first preorder; 1 = split, 0 = terminal; payload right after a terminal."""
    w = BitWriter() if w is None else w
    _write_node(tree.root, w, write_payload, tree.levels)
    return w


def _read_node(r: BitReader, read_payload: PayloadReader, level: int, levels: int):
    if level < levels - 1 and r.read_bit():
        return Split(tuple(_read_node(r, read_payload, level + 1, levels) for _ in range(4)), level)
    return Terminal(read_payload(r, level), level)


def deserialize_tree(r: BitReader, read_payload: PayloadReader, levels: int) -> QuadTree:
    _check_levels(levels)
    return QuadTree(levels, _read_node(r, read_payload, 0, levels))


def serialize_forest(forest: Forest, write_payload: PayloadWriter, w: BitWriter | None = None) -> BitWriter:
    w = BitWriter() if w is None else w
    for tree in forest.trees:
        serialize_tree(tree, write_payload, w)
    return w


def deserialize_forest(
    r: BitReader,
    read_payload: PayloadReader,
    levels: int,
    roots_down: int,
    roots_across: int,
    leaf_block_size: int = 1,
) -> Forest:
    trees = tuple(deserialize_tree(r, read_payload, levels) for _ in range(roots_down * roots_across))
    return Forest(trees, levels, roots_down, roots_across, leaf_block_size)


def tree_bits(tree: QuadTree, payload_bits: Callable[[object, int], int]) -> int:
    """Serialized length of ``tree`` without materializing the bits."""
    total = 0
    for node in iter_nodes(tree.root):
        if node.level < tree.levels - 1:
            total += 1
        if isinstance(node, Terminal):
            total += payload_bits(node.payload, node.level)
    return total


def forest_bits(forest: Forest, payload_bits: Callable[[object, int], int]) -> int:
    return sum(tree_bits(t, payload_bits) for t in forest.trees)
