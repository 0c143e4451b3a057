import pytest
from hypothesis import given, settings, strategies as st

from qtbtc.container import (
    BitReader,
    BitReadError,
    BitWriter,
    Container,
    ContainerError,
    Header,
    Mode,
    Section,
    parse_container,
    write_container,
)


def test_append_pads_msb_first():
    w = BitWriter()
    w.append_bits(0b101, 3)
    w.append_bits(0b1, 1)
    assert w.getvalue() == bytes([0b1011_0000])
    assert w.bits == 4


def test_read_past_end():
    r = BitReader(b"\xff", 5)
    r.read_bits(4)
    with pytest.raises(BitReadError):
        r.read_bits(2)


def test_value_must_fit():
    with pytest.raises(ValueError):
        BitWriter().append_bits(4, 2)
    with pytest.raises(ValueError):
        BitWriter().append_bits(0, 33)


fields = st.lists(
    st.integers(0, 32).flatmap(lambda n: st.tuples(st.integers(0, (1 << n) - 1), st.just(n))),
    max_size=80,
)


@settings(max_examples=200, deadline=None)
@given(fields)
def test_bit_round_trip(items):
    w = BitWriter()
    for v, n in items:
        w.append_bits(v, n)
    assert w.bits == sum(n for _, n in items)
    assert len(w.getvalue()) == (w.bits + 7) // 8
    r = BitReader(w.getvalue(), w.bits)
    assert [r.read_bits(n) for _, n in items] == [v for v, _ in items]
    assert r.remaining == 0


def _section(nbits, fill=0xA5):
    w = BitWriter()
    for i in range(nbits):
        w.append_bit((fill >> (i % 8)) & 1)
    return Section.from_writer(w)


def test_mode0_size():
    h = Header(Mode.BTC, 512, 512)
    data = write_container(h, [_section(16384 * 32)])
    assert len(data) == 10 + 4 + 65536
    assert data[:10] == b"QTR1\x01\x00\x02\x00\x02\x00"


def test_header_params_layout():
    data = write_container(Header(Mode.BTC_QT, 3, 4, mad=5, mbd=6), [_section(1)] * 3)
    assert data[:12] == b"QTR1\x01\x01\x00\x03\x00\x04\x05\x06"
    data = write_container(Header(Mode.MVF_MODE_QT, 256, 256, block_size=16, search_range=7, threshold_q8=2048), [_section(9)])
    assert data[10:14] == b"\x10\x07\x08\x00"
    assert data[14:18] == b"\x00\x00\x00\x09"


headers = st.one_of(
    st.builds(Header, st.sampled_from([Mode.BTC, Mode.SN2]), st.integers(1, 65535), st.integers(1, 65535)),
    st.builds(
        Header,
        st.sampled_from([Mode.BTC_QT, Mode.SN2_QT]),
        st.integers(1, 65535),
        st.integers(1, 65535),
        mad=st.integers(0, 255),
        mbd=st.integers(0, 16),
    ),
    st.builds(
        Header,
        st.sampled_from([Mode.MVF_RAW, Mode.MVF_QT, Mode.MVF_3D_QT]),
        st.integers(1, 65535),
        st.integers(1, 65535),
        block_size=st.sampled_from([8, 16]),
        search_range=st.integers(0, 15),
    ),
    st.builds(
        Header,
        st.just(Mode.MVF_MODE_QT),
        st.integers(1, 65535),
        st.integers(1, 65535),
        block_size=st.sampled_from([8, 16]),
        search_range=st.integers(0, 15),
        threshold_q8=st.integers(0, 65535),
    ),
)


@settings(max_examples=150, deadline=None)
@given(headers, st.data())
def test_container_round_trip(header, data):
    from qtbtc.container import SECTION_COUNT

    sections = tuple(
        _section(data.draw(st.integers(0, 200)), data.draw(st.integers(0, 255))) for _ in range(SECTION_COUNT[header.mode])
    )
    blob = write_container(header, sections)
    assert parse_container(blob) == Container(header, sections)


@pytest.mark.parametrize(
    "blob, msg",
    [
        (b"XXXX\x01\x00\x00\x01\x00\x01" + b"\x00" * 4, "magic"),
        (b"QTR1\x02\x00\x00\x01\x00\x01" + b"\x00" * 4, "version"),
        (b"QTR1\x01\x07\x00\x01\x00\x01" + b"\x00" * 4, "mode"),
        (b"QTR1\x01\x00\x00\x01\x00\x01\x00\x00\x00\x20\x00", "truncated"),
        (b"QTR1\x01\x00\x00\x01", "truncated"),
        (b"QTR1\x01\x00\x00\x01\x00\x01\x00\x00\x00\x00\x00", "trailing"),
    ],
)
def test_parse_errors(blob, msg):
    with pytest.raises(ContainerError, match=msg):
        parse_container(blob)


def test_section_count_enforced():
    with pytest.raises(ContainerError):
        write_container(Header(Mode.BTC_QT, 8, 8), [_section(3)])


def test_payload_bits_excludes_overhead():
    c = Container(Header(Mode.BTC_QT, 8, 8), (_section(3), _section(10), _section(0)))
    assert c.payload_bits == 13
