"""Injection workloads: periodic (CBR), Bernoulli and on/off (VBR) flows."""

from __future__ import annotations

import random
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Union

from .core_model import Address, PortId
from .router import xy_path

CLASSES = ("realtime", "multimedia")


@dataclass(frozen=True)
class Periodic:
    period: int
    offset: int = 0

    def __post_init__(self):
        if self.period < 1 or self.offset < 0:
            raise ValueError(f"bad periodic schedule {self}")

    def __str__(self):
        return f"periodic {self.period} {self.offset}"


@dataclass(frozen=True)
class Bernoulli:
    probability: float

    def __post_init__(self):
        if not 0 <= self.probability <= 1:
            raise ValueError(f"injection probability must be in [0, 1], got {self.probability}")

    def __str__(self):
        return f"bernoulli {self.probability!r}"


@dataclass(frozen=True)
class OnOff:
    burst: int
    gap: int

    def __post_init__(self):
        if self.burst < 1 or self.gap < 0:
            raise ValueError(f"bad on/off schedule {self}")

    def __str__(self):
        return f"onoff {self.burst} {self.gap}"


Schedule = Union[Periodic, Bernoulli, OnOff]


def parse_schedule(text: str) -> Schedule:
    kind, *args = text.split()
    if kind == "periodic" and len(args) in (1, 2):
        return Periodic(*(int(a) for a in args))
    if kind == "bernoulli" and len(args) == 1:
        return Bernoulli(float(args[0]))
    if kind == "onoff" and len(args) == 2:
        return OnOff(int(args[0]), int(args[1]))
    raise ValueError(f"unknown schedule {text!r}")


@dataclass(frozen=True)
class FlowSpec:
    """A traffic flow; ``packet_count=None`` means unbounded."""

    flow_id: str
    origin: Address
    dest: Address
    packet_flits: int
    schedule: Schedule
    packet_count: Optional[int] = None
    traffic_class: str = "multimedia"

    def __post_init__(self):
        if self.origin == self.dest:
            raise ValueError(f"flow {self.flow_id}: origin equals destination")
        if self.packet_flits < 2:
            raise ValueError(f"flow {self.flow_id}: packet_flits must be >= 2")
        if self.packet_count is not None and self.packet_count < 0:
            raise ValueError(f"flow {self.flow_id}: negative packet_count")
        if self.traffic_class not in CLASSES:
            raise ValueError(f"flow {self.flow_id}: class must be one of {CLASSES}")

    @property
    def bounded(self) -> bool:
        return self.packet_count is not None


def flow_rng(seed: int, flow_id: str) -> random.Random:
    """Independent deterministic stream per flow, derived from one seed."""
    return random.Random(f"{seed}/{flow_id}")


def next_injection(flow: FlowSpec, cycle: int, rng: random.Random, idle: bool = True) -> bool:
    """Whether ``flow`` starts a packet at ``cycle``.

    ``idle`` says the flow's previous packet has fully entered the NI output
    FIFO; Bernoulli and on/off sources only start packets when idle, periodic
    sources start on schedule and queue behind the previous packet.
    """
    s = flow.schedule
    if isinstance(s, Periodic):
        return cycle >= s.offset and (cycle - s.offset) % s.period == 0
    if not idle:
        return False
    if isinstance(s, Bernoulli):
        if s.probability == 0:
            return False
        return rng.random() < s.probability
    if isinstance(s, OnOff):
        return cycle % (s.burst + s.gap) < s.burst
    raise TypeError(f"unknown schedule {s!r}")


def flit_rate(flow: FlowSpec):
    """Long-run flits per cycle a flow offers, ignoring backpressure."""
    s, f = flow.schedule, flow.packet_flits
    if isinstance(s, Periodic):
        return Fraction(f, s.period)
    if isinstance(s, Bernoulli):
        if s.probability == 0:
            return Fraction(0)
        # f cycles writing the packet, then a geometric wait for the next start
        return f / (f - 1 + 1 / s.probability)
    if isinstance(s, OnOff):
        return Fraction(s.burst, s.burst + s.gap)
    raise TypeError(f"unknown schedule {s!r}")


def flow_channels(flow: FlowSpec) -> list[tuple]:
    """Channels on the flow's XY path: the injection link, then every router output."""
    o = flow.origin
    inject = ("inj", (o.x, o.y), PortId(o.h))
    return [inject] + [("out", xy, port) for xy, port in xy_path(flow.origin, flow.dest)]


def channel_loads(flows: Iterable[FlowSpec], b=1) -> dict:
    if b <= 0:
        raise ValueError("channel capacity must be positive")
    loads = defaultdict(Fraction)
    for flow in flows:
        rate = flit_rate(flow)
        for ch in flow_channels(flow):
            loads[ch] += rate
    return {ch: load / b for ch, load in loads.items()}


def offered_load(flows: Iterable[FlowSpec], b=1):
    """Offered load of the most heavily loaded channel (0 with no flows)."""
    loads = channel_loads(flows, b)
    return max(loads.values(), default=Fraction(0))
