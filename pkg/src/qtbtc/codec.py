"""Still-image pipelines: BTC and SNIBTC2, each plain or quadtree clustered.

Clustered modes build independent forests over the 4x4 block grid (bit
plane, a, b for BTC; decimated plane and joint code for SNIBTC2). Roots
cover 8x8 blocks, i.e. 32x32 pels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import btc, quadtree as qt, snibtc2 as sn2
from .container import Container, Header, Mode, Section, BitWriter
from .imageio import GrayImage

LEVELS = 4
ROOT_BLOCKS = 1 << (LEVELS - 1)

IMAGE_MODES = (Mode.BTC, Mode.BTC_QT, Mode.SN2, Mode.SN2_QT)


def code_reduce_arrays(regions: np.ndarray) -> np.ndarray:
    """Representative joint code: requantized average of the dequantized mean and sigma."""
    means, sigmas = sn2.dequantize_joint_arrays(regions[..., 0])
    m = means.shape[-1]
    mean = (2 * means.sum(axis=-1) + m) // (2 * m)
    sigma = sigmas.mean(axis=-1)
    return sn2.quantize_joint_arrays(mean, sigma)[..., None]


def code_distance_arrays(regions: np.ndarray, reps: np.ndarray) -> np.ndarray:
    """Larger of the mean gap and the sigma gap, both on dequantized values."""
    m1, s1 = sn2.dequantize_joint_arrays(regions[..., 0])
    m2, s2 = sn2.dequantize_joint_arrays(reps[..., 0])
    return np.maximum(np.abs(m1 - m2), np.abs(s1 - s2))


@dataclass
class BlockPayloads:
    """Decoded per-block fields on the padded block grid, shape (down, across)."""

    mode: Mode
    fields: dict

    def __getitem__(self, name):
        return self.fields[name]


def _forest_specs(mode: Mode):
    """(field name, payload bits, reduce, distance, threshold key) per section."""
    if mode == Mode.BTC_QT:
        return [
            ("plane", 16, qt.plane_reduce_arrays, qt.plane_distance_arrays, "mbd"),
            ("a", 8, qt.grey_reduce_arrays, qt.grey_distance_arrays, "mad"),
            ("b", 8, qt.grey_reduce_arrays, qt.grey_distance_arrays, "mad"),
        ]
    return [
        (
            "plane4",
            4,
            lambda r: qt.plane_reduce_arrays(r, width=4),
            qt.plane_distance_arrays,
            "mbd",
        ),
        ("code", 10, code_reduce_arrays, code_distance_arrays, "mad"),
    ]


def _raw_fields(img: GrayImage, mode: Mode):
    tiles, shape = btc.image_tiles(img)
    if mode in (Mode.BTC, Mode.BTC_QT):
        plane, a, b = btc.encode_arrays(tiles)
        fields = {"plane": plane, "a": a, "b": b}
    else:
        plane4, code = sn2.encode_arrays(tiles)
        fields = {"plane4": plane4, "code": code}
    return {k: v.reshape(shape) for k, v in fields.items()}, shape


def build_forests(fields: dict, mode: Mode, mad: int, mbd: int) -> dict:
    thresholds = {"mad": mad, "mbd": mbd}
    return {
        name: qt.build_forest(fields[name], LEVELS, reduce, distance, thresholds[key], btc.BLOCK)
        for name, _, reduce, distance, key in _forest_specs(mode)
    }


def encode_image(img: GrayImage, mode=Mode.BTC, mad: int = 0, mbd: int = 0) -> Container:
    mode = Mode(mode)
    if mode not in IMAGE_MODES:
        raise ValueError(f"{mode.name} is not a still-image mode")
    if not 0 <= mad <= 255:
        raise ValueError(f"MAD must lie in [0, 255], got {mad}")
    if not 0 <= mbd <= 16:
        raise ValueError(f"MBD must lie in [0, 16], got {mbd}")
    fields, _ = _raw_fields(img, mode)
    if mode in (Mode.BTC, Mode.SN2):
        w = BitWriter()
        widths = [("plane", 16), ("a", 8), ("b", 8)] if mode == Mode.BTC else [("plane4", 4), ("code", 10)]
        flat = [fields[name].ravel().tolist() for name, _ in widths]
        for values in zip(*flat):
            for v, (_, nbits) in zip(values, widths):
                w.append_bits(v, nbits)
        sections = (Section.from_writer(w),)
        header = Header(mode, img.width, img.height)
    else:
        forests = build_forests(fields, mode, mad, mbd)
        sections = tuple(
            Section.from_writer(qt.serialize_forest(forests[name], qt.fixed_writer(nbits)))
            for name, nbits, *_ in _forest_specs(mode)
        )
        header = Header(mode, img.width, img.height, mad=mad, mbd=mbd)
    return Container(header, sections)


def decode_payloads(c: Container) -> BlockPayloads:
    h = c.header
    mode = Mode(h.mode)
    shape = btc.grid_shape_for(h.width, h.height)
    count = shape[0] * shape[1]
    if mode in (Mode.BTC, Mode.SN2):
        widths = [("plane", 16), ("a", 8), ("b", 8)] if mode == Mode.BTC else [("plane4", 4), ("code", 10)]
        r = c.sections[0].reader()
        per_block = sum(n for _, n in widths)
        if r.remaining != count * per_block:
            raise ValueError(f"section holds {r.remaining} bits, expected {count * per_block}")
        values = {name: np.empty(count, dtype=np.int64) for name, _ in widths}
        for i in range(count):
            for name, nbits in widths:
                values[name][i] = r.read_bits(nbits)
        fields = {k: v.reshape(shape) for k, v in values.items()}
    elif mode in (Mode.BTC_QT, Mode.SN2_QT):
        fields = {}
        for section, (name, nbits, *_) in zip(c.sections, _forest_specs(mode)):
            r = section.reader()
            forest = qt.deserialize_forest(
                r, qt.fixed_reader(nbits), LEVELS, shape[0] // ROOT_BLOCKS, shape[1] // ROOT_BLOCKS, btc.BLOCK
            )
            if r.remaining:
                raise ValueError(f"{r.remaining} unread bits in the {name} section")
            fields[name] = qt.expand_forest(forest)
    else:
        raise ValueError(f"{mode.name} is not a still-image mode")
    return BlockPayloads(mode, fields)


def render(payloads: BlockPayloads, width: int, height: int) -> GrayImage:
    f = payloads.fields
    shape = btc.grid_shape_for(width, height)
    if payloads.mode in (Mode.BTC, Mode.BTC_QT):
        tiles = btc.decode_arrays(f["plane"].ravel(), f["a"].ravel(), f["b"].ravel())
    else:
        tiles = sn2.decode_arrays(f["plane4"].ravel(), f["code"].ravel())
    return btc.tiles_to_image(tiles, shape, width, height)


def decode_image(c: Container) -> GrayImage:
    return render(decode_payloads(c), c.header.width, c.header.height)


def forests_of(c: Container) -> dict:
    """Rebuild the forests of a clustered container, keyed by field name."""
    h = c.header
    shape = btc.grid_shape_for(h.width, h.height)
    out = {}
    for section, (name, nbits, *_) in zip(c.sections, _forest_specs(Mode(h.mode))):
        out[name] = qt.deserialize_forest(
            section.reader(), qt.fixed_reader(nbits), LEVELS, shape[0] // ROOT_BLOCKS, shape[1] // ROOT_BLOCKS, btc.BLOCK
        )
    return out
