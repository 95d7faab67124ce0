"""Static network configuration, addressing and the flit wire format.

A flit is laid out most-significant bit first as::

    C | X_ORI Y_ORI H_ORI | X_DST Y_DST H_DST | DATA
    1 |  p     p     3    |  p     p     3    |  d

which gives ``1 + 2(2p + 3) + d`` bits in total.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .errors import CoordinateOverflow, LengthMismatch, PacketTooLarge

H_BITS = 3


class PortId(enum.IntEnum):
    """Router ports, named with cardinal points."""

    NN = 0
    NE = 1
    EE = 2
    SE = 3
    SS = 4
    SW = 5
    WW = 6
    NW = 7

    @classmethod
    def parse(cls, text: str | int) -> "PortId":
        if isinstance(text, int):
            return cls(text)
        text = text.strip()
        if text.isdigit():
            return cls(int(text))
        return cls[text.upper()]


LINK_PORTS = (PortId.NN, PortId.EE, PortId.SS, PortId.WW)
DIAGONAL_PORTS = (PortId.NE, PortId.SE, PortId.SW, PortId.NW)

OPPOSITE = {
    PortId.NN: PortId.SS,
    PortId.SS: PortId.NN,
    PortId.EE: PortId.WW,
    PortId.WW: PortId.EE,
}

# unit step taken when leaving a router through a link port
STEP = {
    PortId.NN: (0, 1),
    PortId.SS: (0, -1),
    PortId.EE: (1, 0),
    PortId.WW: (-1, 0),
}


@dataclass(frozen=True)
class NetworkParams:
    """Design-time configuration shared by every router and NI.

    ``grant_burst`` maps an inter-router port to the arbiter counter reload
    value; ports absent from the mapping get ``default_burst``, which
    itself defaults to ``ports_per_router - 1``. With
    ``flow_bursts`` the engine instead sizes each arbiter's counter for a
    link input to the number of configured flows merged behind it.
    """

    p: int = 1
    d: int = 32
    ports_per_router: int = 8
    buffer_flits: int = 4
    max_packet_flits: Optional[int] = None
    t_r: int = 2
    grant_burst: Mapping[PortId, int] = field(default_factory=dict)
    default_burst: Optional[int] = None
    flow_bursts: bool = False

    def __post_init__(self):
        if self.p < 1:
            raise ValueError(f"p must be >= 1, got {self.p}")
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        if not 5 <= self.ports_per_router <= 8:
            raise ValueError(f"ports_per_router must be in [5, 8], got {self.ports_per_router}")
        if self.buffer_flits < 1:
            raise ValueError(f"buffer_flits must be >= 1, got {self.buffer_flits}")
        if self.max_packet_flits is None:
            object.__setattr__(self, "max_packet_flits", 2 * self.buffer_flits * 64)
        if self.max_packet_flits < 1:
            raise ValueError(f"max_packet_flits must be >= 1, got {self.max_packet_flits}")
        if self.t_r < 1:
            raise ValueError(f"t_r must be >= 1, got {self.t_r}")
        if self.default_burst is None:
            object.__setattr__(self, "default_burst", self.ports_per_router - 1)
        if self.default_burst < 0:
            raise ValueError("default_burst must be >= 0")
        burst = {}
        for port, value in dict(self.grant_burst).items():
            port = PortId.parse(port)
            if port not in LINK_PORTS:
                raise ValueError(f"grant_burst only applies to NN/SS/EE/WW, got {port.name}")
            if value < 0:
                raise ValueError(f"grant_burst[{port.name}] must be >= 0")
            burst[port] = int(value)
        object.__setattr__(self, "grant_burst", burst)

    @property
    def mesh_side(self) -> int:
        return 1 << self.p

    @property
    def address_width(self) -> int:
        return 2 * self.p + H_BITS

    def burst_for(self, port: PortId) -> int:
        return self.grant_burst.get(port, self.default_burst)


@dataclass(frozen=True, order=True)
class Address:
    """Router coordinates plus the local port ``h`` on that router."""

    x: int
    y: int
    h: int = 0

    def __post_init__(self):
        if self.x < 0 or self.y < 0:
            raise CoordinateOverflow(f"negative coordinate in {self}")
        if not 0 <= self.h < 8:
            raise CoordinateOverflow(f"h must fit in {H_BITS} bits, got {self.h}")

    @property
    def router(self) -> tuple[int, int]:
        return (self.x, self.y)

    def check_fits(self, p: int) -> None:
        if self.x >= 1 << p or self.y >= 1 << p:
            raise CoordinateOverflow(f"{self} does not fit in p={p} coordinate bits")

    def __str__(self) -> str:
        return f"{self.x}:{self.y}:{PortId(self.h).name}"

    @classmethod
    def parse(cls, text: str) -> "Address":
        """Parse ``x,y,h`` or ``x:y:h``; ``h`` may be a port name."""
        parts = [s.strip() for s in text.replace(":", ",").split(",")]
        if len(parts) != 3:
            raise ValueError(f"address needs three fields x,y,h: {text!r}")
        return cls(int(parts[0]), int(parts[1]), int(PortId.parse(parts[2])))


@dataclass(frozen=True)
class Flit:
    """One network word.

    ``tag`` is simulator bookkeeping (packet id, flit index); it is not part
    of the wire format and is ignored by equality and by the codec.
    """

    ctrl: bool
    origin: Address
    dest: Address
    data: int = 0
    tag: object = field(default=None, compare=False, repr=False)

    def render(self, d: int = 32) -> str:
        o, t = self.origin, self.dest
        digits = max(1, -(-d // 4))
        return f"{int(self.ctrl)}|{o.x},{o.y},{o.h}|{t.x},{t.y},{t.h}|{self.data:0{digits}x}"


@dataclass(frozen=True)
class Packet:
    header: Flit
    payload: tuple[Flit, ...]
    tail: Flit

    @property
    def flits(self) -> tuple[Flit, ...]:
        return (self.header, *self.payload, self.tail)

    def __len__(self) -> int:
        return len(self.payload) + 2


def flit_width(params: NetworkParams) -> int:
    return 1 + 2 * (2 * params.p + H_BITS) + params.d


def flit_to_int(flit: Flit, params: NetworkParams) -> int:
    p, d = params.p, params.d
    o, t = flit.origin, flit.dest
    o.check_fits(p)
    t.check_fits(p)
    if not 0 <= flit.data < 1 << d:
        raise CoordinateOverflow(f"data {flit.data:#x} does not fit in d={d} bits")
    a = 2 * p + H_BITS
    origin = (((o.x << p) | o.y) << H_BITS) | o.h
    dest = (((t.x << p) | t.y) << H_BITS) | t.h
    return (((((int(flit.ctrl) << a) | origin) << a) | dest) << d) | flit.data


def int_to_flit(word: int, params: NetworkParams) -> Flit:
    p, d = params.p, params.d
    a = 2 * p + H_BITS
    cm, hm = (1 << p) - 1, (1 << H_BITS) - 1
    data = word & ((1 << d) - 1)
    word >>= d
    dest = word & ((1 << a) - 1)
    origin = (word >> a) & ((1 << a) - 1)
    ctrl = (word >> (2 * a)) & 1

    def addr(v):
        return Address((v >> (p + H_BITS)) & cm, (v >> H_BITS) & cm, v & hm)

    return Flit(bool(ctrl), addr(origin), addr(dest), data)


def encode_flit(flit: Flit, params: NetworkParams) -> tuple[int, ...]:
    """Return the flit as a tuple of bits, most significant first."""
    width = flit_width(params)
    word = flit_to_int(flit, params)
    return tuple((word >> (width - 1 - i)) & 1 for i in range(width))


def decode_flit(bits: Sequence[int], params: NetworkParams) -> Flit:
    width = flit_width(params)
    if len(bits) != width:
        raise LengthMismatch(f"expected {width} bits, got {len(bits)}")
    word = 0
    for b in bits:
        if b not in (0, 1):
            raise ValueError(f"not a bit: {b!r}")
        word = (word << 1) | b
    return int_to_flit(word, params)


def make_packet(
    origin: Address,
    dest: Address,
    payload_words: Iterable[int],
    params: NetworkParams,
    header_data: int = 0,
    tail_data: int = 0,
) -> Packet:
    words = list(payload_words)
    if len(words) + 2 > params.max_packet_flits:
        raise PacketTooLarge(
            f"{len(words) + 2} flits exceeds max_packet_flits={params.max_packet_flits}"
        )
    origin.check_fits(params.p)
    dest.check_fits(params.p)
    limit = 1 << params.d
    for w in (header_data, tail_data, *words):
        if not 0 <= w < limit:
            raise ValueError(f"word {w:#x} does not fit in d={params.d} bits")
    header = Flit(True, origin, dest, header_data)
    tail = Flit(True, origin, dest, tail_data)
    payload = tuple(Flit(False, origin, dest, w) for w in words)
    return Packet(header, payload, tail)
