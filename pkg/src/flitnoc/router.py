"""Single-router model: XY routing, rotating-priority arbiters, allocator,
crossbar and the two-phase clock transition.

Timing: a flit written into an input register during cycle ``t`` requests
its output during ``t + 1`` and, if granted, sits in the output register
with ND asserted at the start of ``t + 2``. Registers are flow-through: an
input register whose flit is granted this cycle may be rewritten in the same
cycle, and an output register being read (RD) may be refilled by the
crossbar in the same cycle, so one flit per cycle streams through.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Optional

from .core_model import LINK_PORTS, STEP, Address, Flit, NetworkParams, PortId
from .errors import DuplicateInput, HandshakeViolation, InvalidLocalPort

# reset priority order, highest first
RESET_ORDER = (
    PortId.NN, PortId.SS, PortId.EE, PortId.WW,
    PortId.NE, PortId.NW, PortId.SE, PortId.SW,
)

TraceHook = Callable[[str], None]


def route_request(
    router_xy: tuple[int, int],
    dest: Address,
    local_ports: Optional[Iterable[int]] = None,
) -> PortId:
    """XY routing: correct X fully, then Y, then pick the local port H_DST."""
    x, y = router_xy
    if dest.x != x:
        return PortId.EE if dest.x > x else PortId.WW
    if dest.y != y:
        return PortId.NN if dest.y > y else PortId.SS
    if local_ports is not None and dest.h not in set(local_ports):
        raise InvalidLocalPort(f"port {dest.h} is not a local port of router {router_xy}")
    return PortId(dest.h)


# --------------------------------------------------------------------------
# arbiter


@dataclass(frozen=True)
class ArbiterState:
    priorities: tuple[PortId, ...]
    counters: Mapping[PortId, int]
    initial: Mapping[PortId, int]
    granted: Optional[PortId] = None

    @classmethod
    def reset(cls, ports: Iterable[PortId], burst: Mapping[PortId, int] = None) -> "ArbiterState":
        """``burst`` holds counter initial values for inter-router input ports."""
        ports = set(ports)
        burst = dict(burst or {})
        order = tuple(p for p in RESET_ORDER if p in ports)
        initial = {p: v for p, v in burst.items() if p in ports}
        return cls(order, dict(initial), initial)

    def rank(self, port: PortId) -> int:
        return self.priorities.index(port)


def arbiter_pick(state: ArbiterState, requests: Iterable[PortId]) -> Optional[PortId]:
    requests = set(requests)
    for port in state.priorities:
        if port in requests:
            return port
    return None


def arbiter_step(
    state: ArbiterState, requests: Iterable[PortId], output_busy: bool
) -> tuple[ArbiterState, Optional[PortId]]:
    """One arbitration opportunity for an output.

    The highest-priority requester wins. An inter-router port with burst
    credit left keeps its rank and spends one credit; otherwise the winner
    reloads its counter and drops to the lowest rank.
    """
    requests = set(requests)
    unknown = requests.difference(state.priorities)
    if unknown:
        raise ValueError(f"requests from inactive ports: {sorted(p.name for p in unknown)}")
    if output_busy or not requests:
        return state, None
    winner = arbiter_pick(state, requests)
    counters = state.counters
    remaining = counters.get(winner)
    if remaining is not None and remaining > 0:
        counters = {**counters, winner: remaining - 1}
        return replace(state, counters=counters, granted=winner), winner
    if remaining is not None:
        counters = {**counters, winner: state.initial[winner]}
    order = tuple(p for p in state.priorities if p != winner) + (winner,)
    return replace(state, priorities=order, counters=counters, granted=winner), winner


# --------------------------------------------------------------------------
# allocator and crossbar


def allocator_apply(grants: Mapping[PortId, PortId]) -> dict[PortId, PortId]:
    """Turn output->input grants into an input->output crossbar matching."""
    matching: dict[PortId, PortId] = {}
    for out, inp in grants.items():
        if inp in matching:
            raise DuplicateInput(
                f"input {PortId(inp).name} granted by both {matching[inp].name} and {PortId(out).name}"
            )
        matching[inp] = out
    return matching


def crossbar_transfer(
    matching: Mapping[PortId, PortId], inputs: Mapping[PortId, Optional[Flit]]
) -> dict[PortId, Flit]:
    """Combinational switch; returns output->flit for every connected pair."""
    outputs: dict[PortId, Flit] = {}
    for inp, out in matching.items():
        flit = inputs.get(inp)
        if flit is not None:
            outputs[out] = flit
    return outputs


# --------------------------------------------------------------------------
# router state and clock


@dataclass
class InputPortState:
    reg: Optional[Flit] = None
    wait: bool = False
    pending_request: Optional[PortId] = None


@dataclass
class OutputPortState:
    reg: Optional[Flit] = None
    nd: bool = False


@dataclass(frozen=True)
class PortSignals:
    """What arrives at a port during one cycle: a written flit and/or RD."""

    wr: Optional[Flit] = None
    rd: bool = False


@dataclass(frozen=True)
class PortOutput:
    """Port state visible to neighbours after the cycle."""

    dout: Optional[Flit] = None
    nd: bool = False
    wait: bool = False


@dataclass
class RouterState:
    coords: tuple[int, int]
    ports: tuple[PortId, ...]
    local_ports: frozenset
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    arbiters: dict = field(default_factory=dict)
    crossbar: dict = field(default_factory=dict)
    d: int = 32

    @classmethod
    def reset(
        cls,
        coords: tuple[int, int],
        link_ports: Iterable[PortId],
        local_ports: Iterable[PortId],
        params: NetworkParams,
        burst_overrides: Optional[Mapping[PortId, Mapping[PortId, int]]] = None,
    ) -> "RouterState":
        """``burst_overrides[out][inp]`` replaces the counter of input ``inp``
        in the arbiter of output ``out``."""
        links = set(link_ports)
        locals_ = frozenset(PortId(p) for p in local_ports)
        if links & locals_:
            raise ValueError(f"ports used both as link and local at {coords}")
        ports = tuple(sorted(links | locals_))
        burst = {p: params.burst_for(p) for p in links if p in LINK_PORTS}
        return cls(
            coords=coords,
            ports=ports,
            local_ports=locals_,
            inputs={p: InputPortState() for p in ports},
            outputs={p: OutputPortState() for p in ports},
            arbiters={
                p: ArbiterState.reset(ports, {**burst, **dict((burst_overrides or {}).get(p, {}))})
                for p in ports
            },
            d=params.d,
        )

    def copy(self) -> "RouterState":
        return replace(
            self,
            inputs={p: replace(s) for p, s in self.inputs.items()},
            outputs={p: replace(s) for p, s in self.outputs.items()},
            arbiters=dict(self.arbiters),
            crossbar=dict(self.crossbar),
        )

    def route(self, flit: Flit) -> PortId:
        return route_request(self.coords, flit.dest, self.local_ports)

    def requesters(self, out: PortId) -> list[PortId]:
        return [p for p, s in self.inputs.items() if s.reg is not None and s.pending_request == out]

    def grant_for(self, out: PortId, output_free: bool) -> Optional[PortId]:
        """Which input the arbiter of ``out`` would grant this cycle."""
        if not output_free:
            return None
        return arbiter_pick(self.arbiters[out], self.requesters(out))

    def occupancy(self) -> int:
        return sum(s.reg is not None for s in self.inputs.values()) + sum(
            s.reg is not None for s in self.outputs.values()
        )

    def is_idle(self) -> bool:
        return self.occupancy() == 0

    def check_invariants(self) -> None:
        for p, s in self.inputs.items():
            assert s.wait == (s.reg is not None), f"WAIT inconsistent on input {p.name}"
        for p, s in self.outputs.items():
            assert s.nd == (s.reg is not None), f"ND inconsistent on output {p.name}"
        outs = list(self.crossbar.values())
        assert len(outs) == len(set(outs)), "crossbar output driven twice"
        for arb in self.arbiters.values():
            assert sorted(arb.priorities) == sorted(self.ports), "priorities not a permutation"
            for p, c in arb.counters.items():
                assert 0 <= c <= arb.initial[p], f"counter out of range on {p.name}"


def advance(
    state: RouterState,
    incoming: Mapping[PortId, PortSignals],
    cycle: Optional[int] = None,
    trace: Optional[TraceHook] = None,
) -> dict[PortId, PortOutput]:
    """Run one clock on ``state`` in place and return per-port outputs."""
    rd = {p for p, s in incoming.items() if s.rd}
    wr = {p: s.wr for p, s in incoming.items() if s.wr is not None}
    where = f"{state.coords[0]}.{state.coords[1]}"

    def emit(port, event, flit=None):
        if trace is not None:
            text = flit.render(state.d) if flit is not None else "-"
            trace(f"{cycle} {where} {PortId(port).name} {event} {text}")

    for o in rd:
        if o not in state.outputs or state.outputs[o].reg is None:
            raise HandshakeViolation(f"RD on empty output {PortId(o).name} at router {where}")

    # rising edge: arbitration against pre-cycle registers
    pending: dict[PortId, set] = {}
    for p, s in state.inputs.items():
        if s.reg is not None:
            pending.setdefault(s.pending_request, set()).add(p)
    grants = {}
    new_arbiters = {}
    for out, reqs in pending.items():
        busy = state.outputs[out].reg is not None and out not in rd
        arb, g = arbiter_step(state.arbiters[out], reqs, busy)
        new_arbiters[out] = arb
        if g is not None:
            grants[out] = g
    matching = allocator_apply(grants)

    for p, flit in wr.items():
        if p not in state.inputs:
            raise HandshakeViolation(f"write to unused port {PortId(p).name} at router {where}")
        if state.inputs[p].reg is not None and p not in matching:
            raise HandshakeViolation(f"write to {PortId(p).name} while WAIT asserted at router {where}")

    out_flits = {}
    for o in rd:
        out_flits[o] = state.outputs[o].reg
        state.outputs[o] = OutputPortState()
        emit(o, "rd", out_flits[o])
    moved = crossbar_transfer(matching, {p: state.inputs[p].reg for p in matching})
    for inp, out in matching.items():
        emit(out, "grant", state.inputs[inp].reg)
    for out, flit in moved.items():
        state.outputs[out] = OutputPortState(flit, True)
        emit(out, "forward", flit)
    for inp in matching:
        state.inputs[inp] = InputPortState()
    for p, flit in wr.items():
        state.inputs[p] = InputPortState(flit, True, state.route(flit))
        emit(p, "latch", flit)
        emit(p, "wait_set", flit)
    for inp in matching:
        if inp not in wr:
            emit(inp, "wait_clear")

    # falling edge: arbiters commit their priority/counter updates
    state.arbiters.update(new_arbiters)
    state.crossbar = matching

    return {
        p: PortOutput(
            dout=out_flits.get(p),
            nd=state.outputs[p].nd,
            wait=state.inputs[p].wait,
        )
        for p in state.ports
    }


def router_cycle(
    state: RouterState,
    incoming: Mapping[PortId, PortSignals],
    cycle: Optional[int] = None,
    trace: Optional[TraceHook] = None,
) -> tuple[RouterState, dict[PortId, PortOutput]]:
    """Pure form of :func:`advance`; ``state`` is left untouched."""
    new = state.copy()
    out = advance(new, incoming, cycle, trace)
    return new, out


def xy_path(origin: Address, dest: Address) -> list[tuple[tuple[int, int], PortId]]:
    """Every (router, output port) a flit from ``origin`` to ``dest`` uses."""
    hops = []
    x, y = origin.x, origin.y
    while True:
        port = route_request((x, y), dest)
        hops.append(((x, y), port))
        if (x, y) == (dest.x, dest.y):
            return hops
        dx, dy = STEP[port]
        x, y = x + dx, y + dy
