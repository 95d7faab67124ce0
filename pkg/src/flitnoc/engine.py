"""2-D mesh assembly, the global two-phase clock and latency bookkeeping.

Each cycle is evaluated read-all-then-commit: every transfer decision is a
function of the state at the start of the cycle (plus the combinational
ready chain it implies), and only then are routers, NIs and sources
updated. Router evaluation order therefore cannot matter.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Optional

from .analysis import derive_wcl_params, packet_wcl
from .core_model import (
    DIAGONAL_PORTS,
    LINK_PORTS,
    OPPOSITE,
    STEP,
    Address,
    Flit,
    NetworkParams,
    PortId,
    make_packet,
)
from .errors import DeadlockSuspected, HandshakeViolation, PacketTooLarge, TopologyError
from .network_interface import NetworkInterface, nic_cycle
from .router import PortSignals, RouterState, advance, xy_path
from .traffic import FlowSpec, flow_rng, next_injection

log = logging.getLogger(__name__)

Coord = tuple[int, int]


@dataclass(frozen=True)
class TopologySpec:
    """Router grid, inter-router links and the local ports hosting cores.

    ``links=None`` means every mesh-adjacent pair of routers is connected.
    """

    width: int
    height: int
    local_ports: Mapping[Coord, tuple[PortId, ...]]
    links: Optional[frozenset] = None

    @classmethod
    def mesh(
        cls,
        width: int,
        height: int,
        local_ports: Iterable[PortId] = DIAGONAL_PORTS,
        edge_cores: bool = False,
    ) -> "TopologySpec":
        """Full mesh with the same local ports on every router.

        ``edge_cores`` also attaches a core to each cardinal port left free
        on the mesh boundary.
        """
        locals_ = tuple(PortId.parse(p) for p in local_ports)
        mapping = {}
        for x in range(width):
            for y in range(height):
                ports = list(locals_)
                if edge_cores:
                    used = _mesh_links((x, y), width, height)
                    ports += [p for p in LINK_PORTS if p not in used and p not in ports]
                mapping[(x, y)] = tuple(ports)
        return cls(width, height, mapping)

    @classmethod
    def default(cls, params: NetworkParams) -> "TopologySpec":
        """Square 2^p mesh; each router gets ports_per_router - 4 diagonal cores."""
        n = params.mesh_side
        return cls.mesh(n, n, DIAGONAL_PORTS[: params.ports_per_router - 4])

    def routers(self) -> list[Coord]:
        return [(x, y) for x in range(self.width) for y in range(self.height)]

    def link_ports(self, xy: Coord) -> tuple[PortId, ...]:
        if self.links is None:
            return _mesh_links(xy, self.width, self.height)
        return tuple(sorted(p for (c, p) in self.links if c == xy))

    def addresses(self) -> list[Address]:
        return [Address(x, y, int(h)) for (x, y) in self.routers() for h in self.local_ports.get((x, y), ())]

    def validate(self, params: NetworkParams) -> None:
        side = params.mesh_side
        if not (1 <= self.width <= side and 1 <= self.height <= side):
            raise TopologyError(f"{self.width}x{self.height} mesh does not fit p={params.p}")
        grid = set(self.routers())
        for xy in self.local_ports:
            if xy not in grid:
                raise TopologyError(f"local ports declared for missing router {xy}")
        if self.links is not None:
            for xy, port in self.links:
                if xy not in grid:
                    raise TopologyError(f"link on missing router {xy}")
                if port not in LINK_PORTS:
                    raise TopologyError(f"{port.name} at {xy} cannot be an inter-router link")
                n = _neighbour(xy, port)
                if n not in grid:
                    raise TopologyError(f"dangling port {port.name} at {xy}")
                if (n, OPPOSITE[port]) not in self.links:
                    raise TopologyError(f"asymmetric link {port.name} at {xy}")
            for xy in grid:
                if set(self.link_ports(xy)) != set(_mesh_links(xy, self.width, self.height)):
                    raise TopologyError(f"router {xy} lacks mesh links needed by XY routing")
        for xy in grid:
            locals_ = list(self.local_ports.get(xy, ()))
            if len(locals_) != len(set(locals_)):
                raise TopologyError(f"duplicate NI on router {xy}")
            clash = set(locals_) & set(self.link_ports(xy))
            if clash:
                names = ",".join(p.name for p in sorted(clash))
                raise TopologyError(f"port(s) {names} at {xy} used by both a link and an NI")
            used = len(locals_) + len(self.link_ports(xy))
            if used > params.ports_per_router:
                raise TopologyError(
                    f"router {xy} uses {used} ports, more than ports_per_router={params.ports_per_router}"
                )


def _mesh_links(xy: Coord, width: int, height: int) -> tuple[PortId, ...]:
    x, y = xy
    out = []
    for port in LINK_PORTS:
        nx, ny = _neighbour(xy, port)
        if 0 <= nx < width and 0 <= ny < height:
            out.append(port)
    return tuple(sorted(out))


def _neighbour(xy: Coord, port: PortId) -> Coord:
    dx, dy = STEP[port]
    return (xy[0] + dx, xy[1] + dy)


@dataclass(frozen=True)
class LatencyRecord:
    packet_id: int
    flow_id: str
    src: Address
    dst: Address
    hops: int
    flits: int
    inject_cycle: int
    network_entry_cycle: int
    header_arrival_cycle: int
    tail_arrival_cycle: int

    @property
    def latency_cycles(self) -> int:
        return self.tail_arrival_cycle - self.inject_cycle

    @property
    def header_latency(self) -> int:
        return self.header_arrival_cycle - self.inject_cycle


@dataclass
class _Track:
    packet_id: int
    flow_id: str
    seq: int
    src: Address
    dst: Address
    hops: int
    flits: int
    inject: Optional[int] = None
    entry: Optional[int] = None
    header_arr: Optional[int] = None
    tail_arr: Optional[int] = None
    delivered: int = 0


@dataclass
class _Source:
    """Core-side packet backlog of one NI."""

    pending: deque = field(default_factory=deque)  # deque of (track, deque[Flit])


@dataclass(frozen=True)
class SimResult:
    records: tuple[LatencyRecord, ...]
    utilization: Mapping[str, int]
    total_cycles: int
    seed: int
    config: str
    undelivered: tuple[int, ...] = ()
    reorderings: int = 0
    occupancy: tuple = ()

    def latency_csv(self) -> str:
        lines = ["packet_id,flow_id,src,dst,hops,inject,net_entry,header_arr,tail_arr,latency"]
        for r in self.records:
            lines.append(
                f"{r.packet_id},{r.flow_id},{r.src},{r.dst},{r.hops},{r.inject_cycle},"
                f"{r.network_entry_cycle},{r.header_arrival_cycle},{r.tail_arrival_cycle},"
                f"{r.latency_cycles}"
            )
        return "\n".join(lines) + "\n"

    def utilization_csv(self) -> str:
        lines = ["channel,cycles_busy,total_cycles,utilization"]
        for ch in sorted(self.utilization):
            busy = self.utilization[ch]
            frac = busy / self.total_cycles if self.total_cycles else 0.0
            lines.append(f"{ch},{busy},{self.total_cycles},{frac:.6f}")
        return "\n".join(lines) + "\n"

    def occupancy_csv(self) -> str:
        lines = ["cycle,nic_id,fifo,occupancy"]
        lines += [f"{c},{nic},{fifo},{occ}" for c, nic, fifo, occ in self.occupancy]
        return "\n".join(lines) + "\n"


def flow_bursts(flows: Iterable[FlowSpec]) -> dict[Coord, dict[PortId, dict[PortId, int]]]:
    """Arbiter counters sized to the flows merged behind each link input.

    A link input carrying ``m`` flows towards an output gets ``m - 1`` extra
    consecutive grants there, so every flow, not every port, gets one flit
    per round.
    """
    count: dict = {}
    for f in flows:
        inp = None
        for xy, out in xy_path(f.origin, f.dest):
            if inp is not None:
                key = (xy, out, inp)
                count[key] = count.get(key, 0) + 1
            inp = OPPOSITE.get(out)
    bursts: dict = {}
    for (xy, out, inp), n in sorted(count.items()):
        bursts.setdefault(xy, {}).setdefault(out, {})[inp] = n - 1
    return bursts


def channel_name(xy: Coord, port: PortId, inject: bool = False) -> str:
    prefix = "ni" if inject else "r"
    return f"{prefix}{xy[0]}.{xy[1]}.{PortId(port).name}"


class Simulation:
    """Mutable simulation instance; see :func:`build_network`."""

    def __init__(
        self,
        params: NetworkParams,
        topo: TopologySpec,
        flows: Iterable[FlowSpec] = (),
        seed: int = 0,
        t_wr_rd: int = 1,
        trace: Optional[Callable[[str], None]] = None,
        record_occupancy: bool = False,
        deadlock_window: Optional[int] = None,
    ):
        topo.validate(params)
        self.params = params
        self.topo = topo
        self.seed = seed
        if t_wr_rd < 1:
            raise ValueError("t_wr_rd must be >= 1")
        self.t_wr_rd = t_wr_rd
        self.trace = trace
        self.record_occupancy = record_occupancy
        self.cycle = 0

        self.flows = tuple(flows)
        overrides = flow_bursts(self.flows) if params.flow_bursts else {}
        self.routers: dict[Coord, RouterState] = {
            xy: RouterState.reset(
                xy, topo.link_ports(xy), topo.local_ports.get(xy, ()), params, overrides.get(xy)
            )
            for xy in topo.routers()
        }
        self.nis: dict[Address, NetworkInterface] = {
            a: NetworkInterface(a, params.buffer_flits) for a in topo.addresses()
        }
        self.sources: dict[Address, _Source] = {a: _Source() for a in self.nis}

        ids = [f.flow_id for f in self.flows]
        if len(ids) != len(set(ids)):
            raise ValueError("duplicate flow ids")
        for f in self.flows:
            for end in (f.origin, f.dest):
                if end not in self.nis:
                    raise TopologyError(f"flow {f.flow_id}: no NI at {end}")
            if f.packet_flits > params.max_packet_flits:
                raise PacketTooLarge(
                    f"flow {f.flow_id}: {f.packet_flits} flits > max_packet_flits={params.max_packet_flits}"
                )
        self._rng = {f.flow_id: flow_rng(seed, f.flow_id) for f in self.flows}
        self._remaining = {f.flow_id: f.packet_count for f in self.flows}
        self._writing = {f.flow_id: 0 for f in self.flows}
        self._seq = {f.flow_id: 0 for f in self.flows}
        self._hops = {f.flow_id: len(xy_path(f.origin, f.dest)) for f in self.flows}
        self._next_packet_id = 0
        self.tracks: dict[int, _Track] = {}
        self._expected: dict[str, tuple[int, int]] = {}
        self.reorderings = 0
        self.utilization: dict[str, int] = {}
        self.flits_written = 0
        self.flits_delivered = 0
        self.occupancy_log: list = []
        self._idle_cycles = 0

        if deadlock_window is None:
            bound = max(
                (packet_wcl(derive_wcl_params(f, self.flows, params.buffer_flits)) for f in self.flows),
                default=0,
            )
            deadlock_window = max(100, 10 * bound)
        self.deadlock_window = deadlock_window

    # ------------------------------------------------------------------
    # bookkeeping helpers

    def in_flight(self) -> int:
        """Flits written by cores and not yet read by a destination core."""
        return self.flits_written - self.flits_delivered

    def resident(self) -> int:
        """Flits physically held in NI FIFOs and router registers."""
        n = sum(r.occupancy() for r in self.routers.values())
        n += sum(len(ni.input_fifo) + len(ni.output_fifo) for ni in self.nis.values())
        return n

    def all_delivered(self) -> bool:
        if any(r is None or r > 0 for r in self._remaining.values()):
            return False
        return all(t.tail_arr is not None for t in self.tracks.values())

    def _new_packet(self, flow: FlowSpec) -> None:
        pid = self._next_packet_id
        self._next_packet_id += 1
        seq = self._seq[flow.flow_id]
        self._seq[flow.flow_id] = seq + 1
        mask = (1 << self.params.d) - 1
        f = flow.packet_flits
        words = [(pid * 1009 + i) & mask for i in range(f - 2)]
        pkt = make_packet(flow.origin, flow.dest, words, self.params, header_data=pid & mask)
        flits = deque(replace(fl, tag=(pid, flow.flow_id, seq, i)) for i, fl in enumerate(pkt.flits))
        track = _Track(pid, flow.flow_id, seq, flow.origin, flow.dest, self._hops[flow.flow_id], f)
        self.tracks[pid] = track
        self.sources[flow.origin].pending.append((track, flits))
        self._writing[flow.flow_id] += 1
        if self._remaining[flow.flow_id] is not None:
            self._remaining[flow.flow_id] -= 1

    def _busy(self, name: str) -> None:
        self.utilization[name] = self.utilization.get(name, 0) + 1

    # ------------------------------------------------------------------
    # one clock cycle

    def step(self) -> "Simulation":
        c = self.cycle

        for flow in self.flows:
            left = self._remaining[flow.flow_id]
            if left is not None and left <= 0:
                continue
            idle = self._writing[flow.flow_id] == 0
            if next_injection(flow, c, self._rng[flow.flow_id], idle):
                self._new_packet(flow)

        # -- decisions, all against start-of-cycle state --------------------
        reading = (c % self.t_wr_rd) == 0
        core_read = {a for a, ni in self.nis.items() if reading and ni.input_fifo}
        routers = self.routers
        rd_memo: dict = {}
        grant_memo: dict = {}

        def rd(xy, o):
            key = (xy, o)
            if key in rd_memo:
                return rd_memo[key]
            rd_memo[key] = False  # guard against a cyclic ready chain
            r = routers[xy]
            if r.outputs[o].reg is None:
                ok = False
            elif o in r.local_ports:
                addr = Address(xy[0], xy[1], int(o))
                ok = self.nis[addr].can_accept(addr in core_read)
            else:
                ok = accepts(_neighbour(xy, o), OPPOSITE[o])
            rd_memo[key] = ok
            return ok

        def grant(xy, o):
            key = (xy, o)
            if key in grant_memo:
                return grant_memo[key]
            grant_memo[key] = None
            r = routers[xy]
            g = None
            if r.requesters(o):
                free = r.outputs[o].reg is None or rd(xy, o)
                g = r.grant_for(o, free)
            grant_memo[key] = g
            return g

        def accepts(xy, p):
            s = routers[xy].inputs[p]
            if s.reg is None:
                return True
            return grant(xy, s.pending_request) == p

        incoming: dict[Coord, dict] = {}
        deliveries: list = []  # (addr, flit) router -> NI input FIFO
        moved = False

        for xy, r in routers.items():
            for o, out in r.outputs.items():
                if out.reg is None or not rd(xy, o):
                    continue
                moved = True
                sig = incoming.setdefault(xy, {})
                sig[o] = PortSignals(wr=sig[o].wr if o in sig else None, rd=True)
                if o in r.local_ports:
                    deliveries.append(Address(xy[0], xy[1], int(o)))
                    self._busy(channel_name(xy, o))
                else:
                    n, p = _neighbour(xy, o), OPPOSITE[o]
                    nsig = incoming.setdefault(n, {})
                    nsig[p] = PortSignals(wr=out.reg, rd=nsig[p].rd if p in nsig else False)
                    self._busy(channel_name(xy, o))

        injections: dict[Address, bool] = {}
        for addr, ni in self.nis.items():
            if ni.output_fifo:
                xy, h = addr.router, PortId(addr.h)
                ok = accepts(xy, h)
                injections[addr] = ok
                if ok:
                    moved = True
                    sig = incoming.setdefault(xy, {})
                    sig[h] = PortSignals(wr=ni.output_fifo[0], rd=sig[h].rd if h in sig else False)
                    self._busy(channel_name(xy, h, inject=True))

        # -- commit ---------------------------------------------------------
        delivered_set = set(deliveries)
        for addr in sorted(core_read):
            self._deliver(self.nis[addr].core_receive().flit, c)
            moved = True
        for addr, ni in self.nis.items():
            xy, h = addr.router, PortId(addr.h)
            out = routers[xy].outputs[h]
            sig = nic_cycle(ni, not injections.get(addr, False), out.reg)
            if sig.rd != (addr in delivered_set):
                raise HandshakeViolation(f"NI {addr} RD disagrees with the cycle plan")
            if sig.wr is not None:
                track = self.tracks[sig.wr.tag[0]]
                if sig.wr.tag[3] == 0:
                    track.entry = c

        for xy, r in routers.items():
            sig = incoming.get(xy)
            if sig is None and r.is_idle():
                continue
            advance(r, sig or {}, c, self.trace)
            if r.crossbar:
                moved = True

        for addr, src in self.sources.items():
            if not src.pending or not reading:
                continue
            ni = self.nis[addr]
            if ni.output_full:
                continue
            track, flits = src.pending[0]
            flit = flits.popleft()
            ni.push_flit(flit)
            self.flits_written += 1
            if flit.tag[3] == 0:
                track.inject = c
            if not flits:
                src.pending.popleft()
                self._writing[track.flow_id] -= 1

        if self.record_occupancy:
            for addr, ni in self.nis.items():
                occ = ni.occupancy()
                last = ni.__dict__.get("_last_occ")
                if occ != last:
                    self.occupancy_log.append((c, str(addr), "input", occ[0]))
                    self.occupancy_log.append((c, str(addr), "output", occ[1]))
                    ni.__dict__["_last_occ"] = occ

        self.cycle += 1
        if moved or self.in_flight() == 0:
            self._idle_cycles = 0
        else:
            self._idle_cycles += 1
            if self._idle_cycles >= self.deadlock_window:
                raise DeadlockSuspected(
                    f"no flit moved for {self._idle_cycles} cycles with {self.in_flight()} in flight"
                )
        return self

    def _deliver(self, flit: Flit, c: int) -> None:
        pid, flow_id, seq, idx = flit.tag
        track = self.tracks[pid]
        if self._expected.get(flow_id, (0, 0)) != (seq, idx):
            self.reorderings += 1
        self._expected[flow_id] = (seq + 1, 0) if idx == track.flits - 1 else (seq, idx + 1)
        track.delivered += 1
        self.flits_delivered += 1
        if idx == 0:
            track.header_arr = c
        if idx == track.flits - 1:
            track.tail_arr = c

    # ------------------------------------------------------------------

    def records(self) -> tuple[LatencyRecord, ...]:
        out = []
        for t in sorted(self.tracks.values(), key=lambda t: t.packet_id):
            if t.tail_arr is None:
                continue
            out.append(
                LatencyRecord(
                    t.packet_id, t.flow_id, t.src, t.dst, t.hops, t.flits,
                    t.inject, t.entry, t.header_arr, t.tail_arr,
                )
            )
        return tuple(out)

    def result(self) -> SimResult:
        undelivered = tuple(sorted(t.packet_id for t in self.tracks.values() if t.tail_arr is None))
        return SimResult(
            records=self.records(),
            utilization=dict(self.utilization),
            total_cycles=self.cycle,
            seed=self.seed,
            config=repr((self.params, self.topo, self.flows)),
            undelivered=undelivered,
            reorderings=self.reorderings,
            occupancy=tuple(self.occupancy_log),
        )


def build_network(
    params: NetworkParams,
    topo: Optional[TopologySpec] = None,
    flows: Iterable[FlowSpec] = (),
    **kwargs,
) -> Simulation:
    """Reset every router and NI and bind the flows to their endpoints."""
    return Simulation(params, topo or TopologySpec.default(params), flows, **kwargs)


def step(sim: Simulation) -> Simulation:
    return sim.step()


def run(
    sim: Simulation,
    max_cycles: Optional[int] = None,
    until_delivered: bool = True,
) -> SimResult:
    """Clock ``sim`` until every packet is delivered and/or ``max_cycles``."""
    if max_cycles is None:
        if not until_delivered or any(not f.bounded for f in sim.flows):
            raise ValueError("unbounded run: give max_cycles or use only bounded flows")
    while True:
        if max_cycles is not None and sim.cycle >= max_cycles:
            break
        if until_delivered and sim.all_delivered():
            break
        sim.step()
    res = sim.result()
    if res.undelivered:
        log.info("%d packets undelivered after %d cycles", len(res.undelivered), res.total_cycles)
    return res
