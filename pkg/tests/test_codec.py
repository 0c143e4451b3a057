from pathlib import Path

import numpy as np
import pytest

from oracles import btc_block_oracle
from qtbtc import btc, codec, quadtree as qt
from qtbtc.container import Mode, parse_container, write_container
from qtbtc.imageio import GrayImage, read_pgm, write_pgm

DATA = Path(__file__).parent / "data"
GOLDEN = {"btc": (Mode.BTC, 0, 0), "btcq": (Mode.BTC_QT, 5, 6), "sn2": (Mode.SN2, 0, 0), "sn2q": (Mode.SN2_QT, 5, 1)}


@pytest.fixture(scope="module")
def source():
    return read_pgm((DATA / "golden_source.pgm").read_bytes())


@pytest.mark.parametrize("name", GOLDEN)
def test_golden_encode_is_byte_exact(source, name):
    mode, mad, mbd = GOLDEN[name]
    c = codec.encode_image(source, mode, mad, mbd)
    assert write_container(c.header, c.sections) == (DATA / f"golden_{name}.qtr").read_bytes()


@pytest.mark.parametrize("name", GOLDEN)
def test_golden_decode_is_byte_exact(name):
    c = parse_container((DATA / f"golden_{name}.qtr").read_bytes())
    assert write_pgm(codec.decode_image(c)) == (DATA / f"golden_{name}.pgm").read_bytes()


def test_golden_btc_against_first_principles(source):
    decoded = read_pgm((DATA / "golden_btc.pgm").read_bytes())
    tiles, shape = btc.image_tiles(source)
    out = np.zeros_like(tiles)
    for i, t in enumerate(tiles.tolist()):
        plane, a, b = btc_block_oracle(t)
        out[i] = [a if (plane >> (15 - k)) & 1 else b for k in range(16)]
    expected = btc.tiles_to_image(out.astype(np.uint8), shape, source.width, source.height)
    assert decoded == expected


def test_golden_sizes(source):
    # 70x44 pads to 96x64: 24 x 16 = 384 blocks
    assert len((DATA / "golden_btc.qtr").read_bytes()) == 10 + 4 + 384 * 4
    assert len((DATA / "golden_sn2.qtr").read_bytes()) == 10 + 4 + 384 * 14 // 8


@pytest.mark.parametrize("mode", codec.IMAGE_MODES)
def test_round_trip_through_bytes(camera, mode):
    c = codec.encode_image(camera, mode, 3, 2)
    again = parse_container(write_container(c.header, c.sections))
    assert codec.decode_image(again) == codec.decode_image(c)


def test_flat_image_collapses():
    flat = GrayImage.from_array(np.full((512, 512), 77, np.uint8))
    c = codec.encode_image(flat, Mode.BTC_QT, 0, 0)
    assert [s.bits for s in c.sections] == [256 * 17, 256 * 9, 256 * 9]
    assert codec.decode_image(c) == flat


def test_lossless_thresholds_match_plain(camera):
    plain = codec.decode_image(codec.encode_image(camera, Mode.BTC))
    clustered = codec.decode_image(codec.encode_image(camera, Mode.BTC_QT, 0, 0))
    assert write_pgm(plain) == write_pgm(clustered)
    plain = codec.decode_image(codec.encode_image(camera, Mode.SN2))
    clustered = codec.decode_image(codec.encode_image(camera, Mode.SN2_QT, 0, 0))
    assert plain == clustered


def test_clustered_payload_error_bounds(camera):
    ref = codec.decode_payloads(codec.encode_image(camera, Mode.SN2))
    for mad, mbd in [(0, 0), (6, 1), (20, 3)]:
        got = codec.decode_payloads(codec.encode_image(camera, Mode.SN2_QT, mad, mbd))
        m0, s0 = codec.sn2.dequantize_joint_arrays(ref["code"])
        m1, s1 = codec.sn2.dequantize_joint_arrays(got["code"])
        assert np.abs(m0 - m1).max() <= mad and np.abs(s0 - s1).max() <= mad
        assert qt.popcount(ref["plane4"] ^ got["plane4"]).max() <= mbd


def test_code_criterion_examples():
    a = np.array([[(32 << 4) | 3], [(32 << 4) | 3], [(33 << 4) | 3], [(32 << 4) | 4]])[None]
    rep = codec.code_reduce_arrays(a)
    # means 130,130,134,130 -> 131 -> level 130; sigmas 5,5,5,9 -> 6 -> level 5
    assert rep[0, 0] == (32 << 4) | 3
    d = codec.code_distance_arrays(a, rep[:, None, :])
    assert d.tolist() == [[0, 0, 4, 4]]


def test_histogram_from_container(camera):
    forests = codec.forests_of(codec.encode_image(camera, Mode.BTC_QT, 5, 6))
    assert set(forests) == {"plane", "a", "b"}
    for f in forests.values():
        assert sum(qt.level_histogram(f)[1]) == 128 * 128


def test_rejects_bad_params(camera):
    with pytest.raises(ValueError):
        codec.encode_image(camera, Mode.BTC_QT, 256, 0)
    with pytest.raises(ValueError):
        codec.encode_image(camera, Mode.BTC_QT, 0, 17)
    with pytest.raises(ValueError):
        codec.encode_image(camera, Mode.MVF_QT)


def test_tampered_section_detected(source):
    c = parse_container((DATA / "golden_btcq.qtr").read_bytes())
    short = c.sections[0].__class__(c.sections[0].bits - 5, c.sections[0].payload[: (c.sections[0].bits - 5 + 7) // 8])
    bad = c.__class__(c.header, (short,) + c.sections[1:])
    with pytest.raises(EOFError):
        codec.decode_image(bad)
