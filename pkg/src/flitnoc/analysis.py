"""Closed-form latency models and worst-case-latency validation.

Integer and Fraction inputs stay exact; floats propagate as floats.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Mapping, Optional, Sequence

from .errors import Saturated
from .router import xy_path


def _div(a, b):
    if isinstance(a, Rational) and isinstance(b, Rational):
        q = Fraction(a) / Fraction(b)
        return q.numerator if q.denominator == 1 else q
    return a / b


@dataclass(frozen=True)
class PathModel:
    """``hops`` routers at ``t_r`` cycles each; ``flits`` over bandwidth ``b``."""

    hops: int
    t_r: float
    b: float
    flits: float

    def __post_init__(self):
        if self.hops < 0 or self.t_r <= 0 or self.b <= 0 or self.flits < 0:
            raise ValueError(f"invalid path model {self}")

    @property
    def header_time(self):
        return self.hops * self.t_r


def latency_base(m: PathModel):
    """Contention-free latency: header traversal plus serialization."""
    return m.header_time + _div(m.flits, m.b)


def latency_be(m: PathModel, b_occupied):
    """Best-effort wormhole latency with ``b_occupied`` bandwidth taken by others."""
    if b_occupied < 0:
        raise ValueError("occupied bandwidth must be >= 0")
    if b_occupied >= m.b:
        raise Saturated(f"no bandwidth left: b={m.b}, occupied={b_occupied}")
    return m.header_time + _div(m.flits, abs(m.b - b_occupied))


def latency_interleave(m: PathModel, n: int):
    """Flit-interleaving latency with ``n`` flows sharing the path."""
    if n < 1:
        raise ValueError("need at least one flow")
    return m.header_time + n * _div(m.flits, m.b)


@dataclass(frozen=True)
class CurvePoint:
    load: object
    be_latency: Optional[object]
    interleave_latency: object

    @property
    def saturated(self) -> bool:
        return self.be_latency is None


def load_range(start, stop, step) -> list[Fraction]:
    """Inclusive ``start:stop:step`` grid computed exactly from decimal text."""
    start, stop, step = (Fraction(Decimal(str(v))) for v in (start, stop, step))
    if step <= 0:
        raise ValueError("load step must be positive")
    n = int((stop - start) / step)
    return [start + i * step for i in range(n + 1)]


def sweep_offered_load(m: PathModel, n: int, loads: Iterable) -> list[CurvePoint]:
    """Best-effort vs interleave latency across offered load ``b_occupied / b``."""
    interleave = latency_interleave(m, n)
    curve = []
    for load in loads:
        if load < 0:
            raise ValueError(f"negative offered load {load}")
        try:
            be = latency_be(m, load * m.b)
        except Saturated:
            be = None
        curve.append(CurvePoint(load, be, interleave))
    return curve


def curve_csv(curve: Sequence[CurvePoint]) -> str:
    lines = ["offered_load,be_latency,interleave_latency,saturated"]
    for pt in curve:
        be = "" if pt.be_latency is None else fmt_num(pt.be_latency)
        lines.append(
            f"{fmt_num(pt.load)},{be},{fmt_num(pt.interleave_latency)},{int(pt.saturated)}"
        )
    return "\n".join(lines) + "\n"


def fmt_num(v) -> str:
    if isinstance(v, Rational) and Fraction(v).denominator == 1:
        return str(int(v))
    return f"{float(v):.6f}".rstrip("0").rstrip(".")


# --------------------------------------------------------------------------
# worst-case latency


@dataclass(frozen=True)
class WclParams:
    """Per-hop competitor counts, competing packets, packet length, NI depth."""

    n_i: tuple[int, ...]
    k: int
    f: int
    buffer: int

    def __post_init__(self):
        object.__setattr__(self, "n_i", tuple(self.n_i))
        if any(n < 1 for n in self.n_i):
            raise ValueError("every N_i must be >= 1")
        if self.k < 0 or self.f < 1 or self.buffer < 1:
            raise ValueError(f"invalid WCL parameters {self}")


def header_wcl(n_i: Sequence[int], t_r: int = 2) -> int:
    if any(n < 1 for n in n_i):
        raise ValueError("every N_i must be >= 1")
    return sum(t_r * n for n in n_i)


def payload_wcl(k: int, f: int) -> int:
    if k < 0 or f < 1:
        raise ValueError("need k >= 0 and f >= 1")
    return 2 * k * (f - 1)


def packet_wcl(w: WclParams) -> int:
    return header_wcl(w.n_i) + payload_wcl(w.k, w.f) + 2 * w.buffer


def wcl_breakdown(w: WclParams) -> dict[str, int]:
    parts = {
        "header": header_wcl(w.n_i),
        "payload": payload_wcl(w.k, w.f),
        "buffer": 2 * w.buffer,
    }
    parts["total"] = sum(parts.values())
    return parts


def derive_wcl_params(flow, flows, buffer: int) -> WclParams:
    """Bound parameters for ``flow`` inside a static flow set.

    N_i counts every flow (the analysed one included) whose XY path leaves
    router i through the same output channel; k counts flows from other
    origins that target the same destination.
    """
    use: dict = {}
    for other in flows:
        for hop in xy_path(other.origin, other.dest):
            use[hop] = use.get(hop, 0) + 1
    n_i = tuple(use[hop] for hop in xy_path(flow.origin, flow.dest))
    k = sum(1 for o in flows if o.dest == flow.dest and o.origin != flow.origin)
    return WclParams(n_i, k, flow.packet_flits, buffer)


@dataclass(frozen=True)
class WclRow:
    packet_id: int
    flow_id: str
    measured: int
    bound: int

    @property
    def slack(self) -> int:
        return self.bound - self.measured

    @property
    def violated(self) -> bool:
        return self.slack < 0


@dataclass(frozen=True)
class WclReport:
    rows: tuple[WclRow, ...]

    @property
    def violations(self) -> list[WclRow]:
        return [r for r in self.rows if r.violated]

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_csv(self) -> str:
        lines = ["packet_id,measured,bound,slack,violated"]
        for r in self.rows:
            lines.append(f"{r.packet_id},{r.measured},{r.bound},{r.slack},{int(r.violated)}")
        return "\n".join(lines) + "\n"


def validate_bound(records, wcl: Mapping[str, WclParams]) -> WclReport:
    """Compare each delivered packet's latency with its flow's bound."""
    rows = []
    for rec in records:
        bound = packet_wcl(wcl[rec.flow_id])
        rows.append(WclRow(rec.packet_id, rec.flow_id, rec.latency_cycles, bound))
    return WclReport(tuple(rows))


# --------------------------------------------------------------------------
# interleave vs wormhole on one channel


@dataclass(frozen=True)
class ScheduleComparison:
    """Completion slot (1-based) of each packet, indexed like the input lengths."""

    order: tuple[int, ...]
    wormhole: tuple[int, ...]
    interleave: tuple[int, ...]


def schedule_compare(lengths: Sequence[int], order: Optional[Sequence[int]] = None) -> ScheduleComparison:
    """Slot-by-slot schedule of packets sharing one channel from time zero.

    ``order`` lists packet indices from highest to lowest priority.
    """
    lengths = list(lengths)
    if any(n < 1 for n in lengths):
        raise ValueError("packet lengths must be >= 1")
    order = tuple(range(len(lengths))) if order is None else tuple(order)
    if sorted(order) != list(range(len(lengths))):
        raise ValueError("order must be a permutation of packet indices")

    wormhole = [0] * len(lengths)
    t = 0
    for i in order:
        t += lengths[i]
        wormhole[i] = t

    interleave = [0] * len(lengths)
    left = {i: lengths[i] for i in order}
    slot = 0
    while left:
        for i in order:
            if i not in left:
                continue
            slot += 1
            left[i] -= 1
            if left[i] == 0:
                interleave[i] = slot
                del left[i]
    return ScheduleComparison(order, tuple(wormhole), tuple(interleave))


# --------------------------------------------------------------------------
# transactions


@dataclass(frozen=True)
class TransactionModel:
    t_wait_req: int = 0
    t_req: int = 0
    t_wait_reply: int = 0
    t_reply: int = 0
    t_core: int = 0

    def __post_init__(self):
        if min(self.t_wait_req, self.t_req, self.t_wait_reply, self.t_reply, self.t_core) < 0:
            raise ValueError("transaction delays must be non-negative")


def noc_latency(t: TransactionModel):
    return t.t_wait_req + t.t_req + t.t_wait_reply + t.t_reply


def transaction_latency(t: TransactionModel):
    return noc_latency(t) + t.t_core
