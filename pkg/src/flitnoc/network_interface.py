"""Network interface: core/router adapters around two bounded FIFOs.

The output FIFO carries core->network flits, the input FIFO
network->core flits. Their empty/full flags are the only end-to-end flow
control; nothing is ever dropped.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Optional

from .core_model import Address, Flit
from .errors import FifoEmpty, FifoFull, InvalidTiming


class Framing(enum.Enum):
    HEADER = "header"
    PAYLOAD = "payload"
    TAIL = "tail"


def buffer_size(t_wr_rd, t_net) -> int:
    """FIFO depth needed so a core writing/reading every ``t_wr_rd`` cycles
    never starves a network whose fastest delivery takes ``t_net`` cycles."""
    if t_wr_rd < 1 or t_net < 1:
        raise InvalidTiming(f"timings must be >= 1 cycle, got t_wr_rd={t_wr_rd}, t_net={t_net}")
    return max(1, math.ceil(Fraction(t_wr_rd) / Fraction(t_net)))


def uses_registers(size: int) -> bool:
    """A depth of one is built from plain registers rather than a FIFO."""
    return size == 1


class Delivery(NamedTuple):
    data: int
    origin: Address
    framing: Framing
    flit: Flit


@dataclass
class NicSignals:
    """Router-side result of one NI cycle."""

    wr: Optional[Flit] = None
    rd: bool = False


@dataclass
class NetworkInterface:
    address: Address
    depth: int
    input_fifo: deque = field(default_factory=deque)
    output_fifo: deque = field(default_factory=deque)
    # per-origin "inside a packet" state used to tell headers from tails
    _open: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("NI FIFO depth must be >= 1")

    @property
    def output_full(self) -> bool:
        return len(self.output_fifo) >= self.depth

    @property
    def output_empty(self) -> bool:
        return not self.output_fifo

    @property
    def input_full(self) -> bool:
        return len(self.input_fifo) >= self.depth

    @property
    def input_empty(self) -> bool:
        return not self.input_fifo

    def can_accept(self, core_reading: bool = False) -> bool:
        """Whether the input FIFO takes a flit this cycle."""
        return len(self.input_fifo) - int(core_reading) < self.depth

    def core_send(self, word: int, dest: Address, framing: Framing, tag=None) -> Flit:
        """Core adapter: stamp control bit and addresses, enqueue the flit."""
        if self.output_full:
            raise FifoFull(f"output FIFO of NI {self.address} is full")
        flit = Flit(framing is not Framing.PAYLOAD, self.address, dest, word, tag)
        self.output_fifo.append(flit)
        return flit

    def push_flit(self, flit: Flit) -> None:
        if self.output_full:
            raise FifoFull(f"output FIFO of NI {self.address} is full")
        self.output_fifo.append(flit)

    def core_receive(self) -> Delivery:
        """Router adapter: dequeue one flit, dropping the destination fields."""
        if not self.input_fifo:
            raise FifoEmpty(f"input FIFO of NI {self.address} is empty")
        flit = self.input_fifo.popleft()
        if flit.ctrl:
            inside = self._open.get(flit.origin, False)
            framing = Framing.TAIL if inside else Framing.HEADER
            self._open[flit.origin] = not inside
        else:
            framing = Framing.PAYLOAD
        return Delivery(flit.data, flit.origin, framing, flit)

    def occupancy(self) -> tuple[int, int]:
        return len(self.input_fifo), len(self.output_fifo)


def nic_cycle(
    nic: NetworkInterface,
    router_wait: bool,
    router_offer: Optional[Flit],
) -> NicSignals:
    """Move at most one flit each way across the NI/router boundary.

    ``router_wait`` is the router input WAIT as seen this cycle and
    ``router_offer`` the flit held in the router output register (ND).
    RD is withheld while the input FIFO is full.
    """
    signals = NicSignals()
    if nic.output_fifo and not router_wait:
        signals.wr = nic.output_fifo.popleft()
    if router_offer is not None and not nic.input_full:
        nic.input_fifo.append(router_offer)
        signals.rd = True
    return signals

