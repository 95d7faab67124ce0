import itertools

import pytest
from hypothesis import given, strategies as st

from flitnoc.core_model import (
    Address,
    Flit,
    NetworkParams,
    PortId,
    decode_flit,
    encode_flit,
    flit_to_int,
    flit_width,
    int_to_flit,
    make_packet,
)
from flitnoc.errors import CoordinateOverflow, LengthMismatch, PacketTooLarge


def bits_of(text):
    return tuple(int(b) for b in text)


def oracle_bits(ctrl, origin, dest, data, p, d):
    """Assemble the wire image field by field with string formatting."""
    fields = [
        format(int(ctrl), "01b"),
        format(origin[0], f"0{p}b"), format(origin[1], f"0{p}b"), format(origin[2], "03b"),
        format(dest[0], f"0{p}b"), format(dest[1], f"0{p}b"), format(dest[2], "03b"),
        format(data, f"0{d}b"),
    ]
    return bits_of("".join(fields))


@pytest.mark.parametrize("p,d,width", [(1, 32, 43), (4, 256, 279), (2, 16, 31)])
def test_flit_width(p, d, width):
    assert flit_width(NetworkParams(p=p, d=d)) == width


@given(st.integers(1, 8), st.integers(1, 512))
def test_width_law(p, d):
    assert flit_width(NetworkParams(p=p, d=d)) == 1 + 2 * (2 * p + 3) + d


def test_zero_flit_encodes_to_zero_vector():
    params = NetworkParams(p=1, d=32)
    bits = encode_flit(Flit(False, Address(0, 0, 0), Address(0, 0, 0), 0), params)
    assert bits == (0,) * 43


def test_control_bit_is_msb():
    params = NetworkParams(p=1, d=32)
    bits = encode_flit(Flit(True, Address(0, 0, 0), Address(0, 0, 0), 0), params)
    assert bits == (1,) + (0,) * 42


def test_field_layout_against_hand_assembly():
    params = NetworkParams(p=1, d=16)
    flit = Flit(True, Address(1, 1, 7), Address(0, 1, 2), 0xAB)
    # C=1 | 1 1 111 | 0 1 010 | 0x00AB
    expected = bits_of("1" + "11111" + "01010" + "0000000010101011")
    assert encode_flit(flit, params) == expected
    assert expected == oracle_bits(True, (1, 1, 7), (0, 1, 2), 0xAB, 1, 16)
    assert decode_flit(expected, params) == flit


def test_decode_zero_vector():
    params = NetworkParams(p=1, d=32)
    assert decode_flit((0,) * 43, params) == Flit(False, Address(0, 0, 0), Address(0, 0, 0), 0)


def test_decode_wrong_length():
    with pytest.raises(LengthMismatch):
        decode_flit((0,) * 42, NetworkParams(p=1, d=32))


def test_encode_rejects_coordinates_that_do_not_fit():
    with pytest.raises(CoordinateOverflow):
        encode_flit(Flit(False, Address(2, 0, 0), Address(0, 0, 0), 0), NetworkParams(p=1))
    with pytest.raises(CoordinateOverflow):
        encode_flit(Flit(False, Address(0, 0, 0), Address(0, 0, 0), 1 << 8), NetworkParams(p=1, d=8))
    with pytest.raises(CoordinateOverflow):
        Address(0, 0, 8)


@pytest.mark.parametrize("d", range(1, 9))
def test_exhaustive_roundtrip(d):
    """Every word of the width decodes to a flit that encodes back to it.

    Words and flits are in one-to-one correspondence, so this also covers
    encode->decode for every possible flit.
    """
    params = NetworkParams(p=1, d=d)
    for word in range(1 << flit_width(params)):
        assert flit_to_int(int_to_flit(word, params), params) == word


@pytest.mark.parametrize("d", range(1, 4))
def test_exhaustive_bit_vectors(d):
    params = NetworkParams(p=1, d=d)
    coords = [Address(x, y, h) for x in (0, 1) for y in (0, 1) for h in range(8)]
    for ctrl, o, t in itertools.product((False, True), coords, coords):
        for data in range(1 << d):
            flit = Flit(ctrl, o, t, data)
            bits = encode_flit(flit, params)
            assert bits == oracle_bits(ctrl, (o.x, o.y, o.h), (t.x, t.y, t.h), data, 1, d)
            assert decode_flit(bits, params) == flit


@given(st.integers(0, (1 << 43) - 1))
def test_random_vectors_decode_encode(word):
    params = NetworkParams(p=1, d=32)
    bits = tuple((word >> (42 - i)) & 1 for i in range(43))
    assert encode_flit(decode_flit(bits, params), params) == bits
    assert int_to_flit(word, params) == decode_flit(bits, params)


@given(
    st.integers(1, 4),
    st.integers(1, 64),
    st.data(),
)
def test_roundtrip_any_size(p, d, data):
    params = NetworkParams(p=p, d=d)
    coord = st.integers(0, (1 << p) - 1)
    addr = st.builds(Address, coord, coord, st.integers(0, 7))
    flit = Flit(data.draw(st.booleans()), data.draw(addr), data.draw(addr), data.draw(st.integers(0, (1 << d) - 1)))
    assert decode_flit(encode_flit(flit, params), params) == flit
    assert encode_flit(flit, params) == oracle_bits(
        flit.ctrl, (flit.origin.x, flit.origin.y, flit.origin.h),
        (flit.dest.x, flit.dest.y, flit.dest.h), flit.data, p, d,
    )


def test_make_packet_minimal():
    params = NetworkParams(p=1)
    pkt = make_packet(Address(0, 0, 1), Address(1, 1, 5), [], params)
    assert len(pkt) == 2
    assert pkt.header.ctrl and pkt.tail.ctrl
    assert pkt.flits == (pkt.header, pkt.tail)


def test_make_packet_hundred_flits():
    params = NetworkParams(p=1, max_packet_flits=100)
    pkt = make_packet(Address(0, 0, 1), Address(1, 1, 5), range(98), params)
    assert len(pkt) == 100
    assert [f.ctrl for f in pkt.flits] == [True] + [False] * 98 + [True]
    assert [f.data for f in pkt.payload] == list(range(98))
    assert all(f.origin == Address(0, 0, 1) and f.dest == Address(1, 1, 5) for f in pkt.flits)


def test_make_packet_too_large():
    params = NetworkParams(p=1, max_packet_flits=10)
    make_packet(Address(0, 0, 1), Address(1, 1, 5), range(8), params)
    with pytest.raises(PacketTooLarge):
        make_packet(Address(0, 0, 1), Address(1, 1, 5), range(9), params)


def test_make_packet_rejects_wide_words():
    with pytest.raises(ValueError):
        make_packet(Address(0, 0, 1), Address(1, 1, 5), [256], NetworkParams(p=1, d=8))


@pytest.mark.parametrize(
    "kwargs",
    [dict(ports_per_router=4), dict(ports_per_router=9), dict(p=0), dict(d=0), dict(buffer_flits=0),
     dict(grant_burst={PortId.NE: 1}), dict(grant_burst={"NN": -1}), dict(t_r=0)],
)
def test_params_validation(kwargs):
    with pytest.raises(ValueError):
        NetworkParams(**kwargs)


def test_params_defaults():
    params = NetworkParams(ports_per_router=6, buffer_flits=4, grant_burst={"EE": 2})
    assert params.mesh_side == 2
    assert params.default_burst == 5
    assert params.burst_for(PortId.EE) == 2
    assert params.burst_for(PortId.NN) == 5
    assert params.max_packet_flits == 512


def test_address_parse_and_str():
    a = Address.parse("1,0,NE")
    assert a == Address(1, 0, 1) == Address.parse("1:0:1")
    assert str(a) == "1:0:NE"
    assert Address.parse(str(a)) == a
    with pytest.raises(ValueError):
        Address.parse("1,2")


def test_port_parse():
    assert PortId.parse("sw") is PortId.SW
    assert PortId.parse("3") is PortId.SE
    assert PortId.parse(6) is PortId.WW
