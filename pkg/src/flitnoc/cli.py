"""Batch front-end: scenario files, simulation, analytic sweeps and WCL checks.

Scenario files are plain sectioned ``key = value`` text::

    # anything after '#' is a comment
    [network]
    p = 1
    buffer_flits = 4
    grant_burst = NN:3, EE:3

    [topology]
    width = 2
    height = 2
    local_ports = NE, SE, SW, NW
    router 1,1 = NE, SW          # per-router override

    [flow video]
    origin = 0,0,NE
    dest = 1,1,SW
    packet_flits = 8
    schedule = periodic 40 0     # or: bernoulli 0.1 / onoff 16 48
    packet_count = 10
    class = realtime

    [run]
    seed = 7
    max_cycles = 20000
    output_dir = out

Exit status: 0 ok, 1 bound violation / deadlock, 2 bad input.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence

from .analysis import (
    PathModel,
    WclParams,
    curve_csv,
    derive_wcl_params,
    fmt_num,
    load_range,
    packet_wcl,
    sweep_offered_load,
    validate_bound,
    wcl_breakdown,
)
from .core_model import DIAGONAL_PORTS, Address, NetworkParams, PortId
from .engine import Simulation, TopologySpec
from .errors import DeadlockSuspected, NocError, ParseError, ValidationError
from .traffic import CLASSES, FlowSpec, parse_schedule

EXIT_OK, EXIT_VIOLATION, EXIT_INPUT = 0, 1, 2


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    max_cycles: Optional[int] = None
    until_delivered: bool = True
    t_wr_rd: int = 1
    output_dir: str = "."


@dataclass(frozen=True)
class Scenario:
    network: NetworkParams
    topology: TopologySpec
    flows: tuple[FlowSpec, ...] = ()
    run: RunConfig = field(default_factory=RunConfig)


# --------------------------------------------------------------------------
# parsing

_NETWORK_KEYS = (
    "p", "d", "ports_per_router", "buffer_flits", "max_packet_flits",
    "t_r", "default_burst", "grant_burst", "flow_bursts",
)
_TOPOLOGY_KEYS = ("width", "height", "local_ports", "edge_cores", "router")
_FLOW_KEYS = ("origin", "dest", "packet_flits", "schedule", "packet_count", "class")
_RUN_KEYS = {f.name for f in fields(RunConfig)}


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _ports(text: str) -> tuple[PortId, ...]:
    text = text.strip()
    if text in ("", "-", "none"):
        return ()
    try:
        return tuple(PortId.parse(t) for t in text.split(","))
    except (KeyError, ValueError):
        raise ValueError(f"bad port list {text!r}") from None


def _coord(text: str) -> tuple[int, int]:
    parts = [s.strip() for s in text.split(",")]
    if len(parts) != 2:
        raise ValueError(f"router coordinates need x,y: {text!r}")
    return int(parts[0]), int(parts[1])


def _burst_map(text: str) -> dict[PortId, int]:
    out = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        port, _, value = item.partition(":")
        if not value:
            raise ValueError(f"grant_burst entries look like NN:3, got {item!r}")
        out[PortId.parse(port)] = int(value)
    return out


def _split(text: str):
    """Yield ``(section, name, {key: (line, value)}, header_line)`` blocks and syntax errors."""
    sections, errors = [], []
    current = None
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                errors.append((n, f"unterminated section header {line!r}"))
                current = None
                continue
            kind, _, name = line[1:-1].strip().partition(" ")
            current = (kind, name.strip(), {}, n)
            sections.append(current)
            continue
        if current is None:
            errors.append((n, "key outside of any section"))
            continue
        key, eq, value = line.partition("=")
        key = " ".join(key.split())
        if not eq or not key:
            errors.append((n, f"expected 'key = value', got {line!r}"))
            continue
        if key in current[2]:
            errors.append((n, f"duplicate key {key!r}"))
            continue
        current[2][key] = (n, value.strip())
    return sections, errors


def parse_scenario(text: str) -> Scenario:
    """Parse and fully validate a scenario; every problem is reported at once."""
    sections, syntax = _split(text)
    seen = {}
    for kind, name, _, n in sections:
        if kind not in ("network", "topology", "flow", "run"):
            syntax.append((n, f"unknown section [{kind}]"))
        elif kind == "flow" and not name:
            syntax.append((n, "flow sections need an id: [flow <id>]"))
        elif (kind, name) in seen:
            syntax.append((n, f"duplicate section [{kind} {name}]".replace(" ]", "]")))
        seen[(kind, name)] = n
    if syntax:
        raise ParseError(sorted(syntax))

    errors: list = []
    by_kind = {}
    for kind, name, body, n in sections:
        by_kind.setdefault(kind, []).append((name, body, n))

    def take(body, allowed, where):
        for key, (n, _) in body.items():
            base = key.split()[0] if key.startswith("router ") and where == "topology" else key
            if base not in allowed:
                errors.append((n, f"unknown key {key!r} in [{where}]"))

    # [network]
    net_kwargs, net_line = {}, 0
    for _, body, n in by_kind.get("network", []):
        net_line = n
        take(body, set(_NETWORK_KEYS), "network")
        for key, (ln, value) in body.items():
            if key not in _NETWORK_KEYS:
                continue
            try:
                if key == "grant_burst":
                    net_kwargs[key] = _burst_map(value)
                elif key == "flow_bursts":
                    net_kwargs[key] = _bool(value)
                else:
                    net_kwargs[key] = int(value)
            except (ValueError, KeyError) as exc:
                errors.append((ln, f"{key}: {exc}"))
    try:
        params = NetworkParams(**net_kwargs)
    except ValueError as exc:
        errors.append((net_line, f"[network] {exc}"))
        params = None

    # [topology]
    topo = None
    topo_sections = by_kind.get("topology", [])
    if params is not None:
        side = params.mesh_side
        width = height = side
        local = DIAGONAL_PORTS[: params.ports_per_router - 4]
        edge = False
        overrides = {}
        topo_line = 0
        for _, body, n in topo_sections:
            topo_line = n
            take(body, set(_TOPOLOGY_KEYS), "topology")
            for key, (ln, value) in body.items():
                try:
                    if key == "width":
                        width = int(value)
                    elif key == "height":
                        height = int(value)
                    elif key == "local_ports":
                        local = _ports(value)
                    elif key == "edge_cores":
                        edge = _bool(value)
                    elif key.startswith("router "):
                        overrides[_coord(key[len("router "):])] = (ln, _ports(value))
                except ValueError as exc:
                    errors.append((ln, f"{key}: {exc}"))
        try:
            base = TopologySpec.mesh(width, height, local, edge)
            mapping = dict(base.local_ports)
            for xy, (ln, ports) in overrides.items():
                if xy not in mapping:
                    errors.append((ln, f"router {xy} is outside the {width}x{height} mesh"))
                    continue
                mapping[xy] = ports
            topo = TopologySpec(width, height, mapping)
            topo.validate(params)
        except ValueError as exc:
            errors.append((topo_line, f"[topology] {exc}"))
            topo = None

    # [flow <id>]
    flows = []
    addresses = set(topo.addresses()) if topo is not None else None
    for name, body, n in by_kind.get("flow", []):
        take(body, set(_FLOW_KEYS), f"flow {name}")
        kw = {"flow_id": name}
        ok = True
        for key in ("origin", "dest", "packet_flits", "schedule"):
            if key not in body:
                errors.append((n, f"flow {name}: missing {key!r}"))
                ok = False
        for key, (ln, value) in body.items():
            try:
                if key in ("origin", "dest"):
                    addr = Address.parse(value)
                    if addresses is not None and addr not in addresses:
                        raise ValueError(f"no NI at {addr} in this topology")
                    kw[key] = addr
                elif key == "packet_flits":
                    kw[key] = int(value)
                    if params is not None and kw[key] > params.max_packet_flits:
                        raise ValueError(f"{value} exceeds max_packet_flits={params.max_packet_flits}")
                elif key == "schedule":
                    kw[key] = parse_schedule(value)
                elif key == "packet_count":
                    kw[key] = None if value in ("inf", "unbounded") else int(value)
                elif key == "class":
                    if value not in CLASSES:
                        raise ValueError(f"class must be one of {CLASSES}")
                    kw["traffic_class"] = value
            except (ValueError, KeyError) as exc:
                errors.append((ln, f"flow {name}: {key}: {exc}"))
                ok = False
        if ok:
            try:
                flows.append(FlowSpec(**kw))
            except ValueError as exc:
                errors.append((n, str(exc)))

    # [run]
    run_kwargs = {}
    for _, body, n in by_kind.get("run", []):
        take(body, _RUN_KEYS, "run")
        for key, (ln, value) in body.items():
            try:
                if key in ("seed", "t_wr_rd"):
                    run_kwargs[key] = int(value)
                elif key == "max_cycles":
                    run_kwargs[key] = None if value in ("", "none") else int(value)
                elif key == "until_delivered":
                    run_kwargs[key] = _bool(value)
                elif key == "output_dir":
                    run_kwargs[key] = value
            except ValueError as exc:
                errors.append((ln, f"{key}: {exc}"))
    run_cfg = RunConfig(**run_kwargs)
    if run_cfg.t_wr_rd < 1:
        errors.append((0, "[run] t_wr_rd must be >= 1"))
    if run_cfg.max_cycles is not None and run_cfg.max_cycles < 0:
        errors.append((0, "[run] max_cycles must be >= 0"))
    if run_cfg.max_cycles is None and any(not f.bounded for f in flows):
        errors.append((0, "[run] unbounded flows need max_cycles"))
    if run_cfg.max_cycles is None and not run_cfg.until_delivered:
        errors.append((0, "[run] until_delivered = false needs max_cycles"))

    if errors:
        raise ValidationError(sorted(errors, key=lambda e: e[0]))
    return Scenario(params, topo, tuple(flows), run_cfg)


def format_scenario(sc: Scenario) -> str:
    """Serialize so that ``parse_scenario(format_scenario(sc)) == sc``."""
    p = sc.network
    lines = ["[network]"]
    for key in ("p", "d", "ports_per_router", "buffer_flits", "max_packet_flits", "t_r", "default_burst"):
        lines.append(f"{key} = {getattr(p, key)}")
    if p.grant_burst:
        lines.append("grant_burst = " + ", ".join(f"{k.name}:{v}" for k, v in sorted(p.grant_burst.items())))
    lines.append(f"flow_bursts = {str(p.flow_bursts).lower()}")

    t = sc.topology
    lines += ["", "[topology]", f"width = {t.width}", f"height = {t.height}"]
    for xy in t.routers():
        ports = t.local_ports.get(xy, ())
        lines.append(f"router {xy[0]},{xy[1]} = " + (", ".join(PortId(q).name for q in ports) or "none"))

    for f in sc.flows:
        lines += [
            "",
            f"[flow {f.flow_id}]",
            f"origin = {f.origin}",
            f"dest = {f.dest}",
            f"packet_flits = {f.packet_flits}",
            f"schedule = {f.schedule}",
            f"packet_count = {'unbounded' if f.packet_count is None else f.packet_count}",
            f"class = {f.traffic_class}",
        ]

    r = sc.run
    lines += [
        "",
        "[run]",
        f"seed = {r.seed}",
        f"max_cycles = {'none' if r.max_cycles is None else r.max_cycles}",
        f"until_delivered = {str(r.until_delivered).lower()}",
        f"t_wr_rd = {r.t_wr_rd}",
        f"output_dir = {r.output_dir}",
    ]
    return "\n".join(lines) + "\n"


def load_scenario(path) -> Scenario:
    return parse_scenario(Path(path).read_text(encoding="utf-8"))


# --------------------------------------------------------------------------
# commands


def write_atomic(path, text: str) -> None:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _simulate(sc: Scenario):
    sim = Simulation(sc.network, sc.topology, sc.flows, seed=sc.run.seed, t_wr_rd=sc.run.t_wr_rd)
    max_cycles = sc.run.max_cycles
    while True:
        if max_cycles is not None and sim.cycle >= max_cycles:
            break
        if sc.run.until_delivered and sim.all_delivered():
            break
        sim.step()
    return sim, sim.result()


def cmd_simulate(sc: Scenario, out_dir=None, out=None) -> int:
    out = out or sys.stdout
    out_dir = Path(out_dir or sc.run.output_dir)
    try:
        sim, res = _simulate(sc)
    except DeadlockSuspected as exc:
        print(f"deadlock suspected: {exc}", file=out)
        return EXIT_VIOLATION
    write_atomic(out_dir / "latency.csv", res.latency_csv())
    write_atomic(out_dir / "utilization.csv", res.utilization_csv())
    lat = [r.latency_cycles for r in res.records]
    print(f"cycles: {res.total_cycles}", file=out)
    print(f"packets delivered: {len(lat)} (undelivered {len(res.undelivered)})", file=out)
    if lat:
        print(f"latency: mean {fmt_num(sum(lat) / len(lat))} max {max(lat)}", file=out)
    print(f"reorderings: {res.reorderings}", file=out)
    print(f"wrote {out_dir / 'latency.csv'} and {out_dir / 'utilization.csv'}", file=out)
    return EXIT_OK


def cmd_validate(sc: Scenario, out_dir=None, out=None) -> int:
    out = out or sys.stdout
    """Simulate and compare every packet with its flow's worst-case bound.

    A packet still undelivered when the run stops counts as a violation if
    it has already been in the network longer than its bound.
    """
    out_dir = Path(out_dir or sc.run.output_dir)
    wcl = {f.flow_id: derive_wcl_params(f, sc.flows, sc.network.buffer_flits) for f in sc.flows}
    try:
        sim, res = _simulate(sc)
    except DeadlockSuspected as exc:
        print(f"deadlock suspected: {exc}", file=out)
        return EXIT_VIOLATION
    report = validate_bound(res.records, wcl)
    write_atomic(out_dir / "wcl_report.csv", report.to_csv())
    late = [
        pid
        for pid in res.undelivered
        if sim.tracks[pid].inject is not None
        and res.total_cycles - sim.tracks[pid].inject > packet_wcl(wcl[sim.tracks[pid].flow_id])
    ]
    for fid, w in wcl.items():
        parts = wcl_breakdown(w)
        print(
            f"flow {fid}: N_i={list(w.n_i)} k={w.k} f={w.f} B={w.buffer} "
            f"bound {parts['header']}+{parts['payload']}+{parts['buffer']}={parts['total']}",
            file=out,
        )
    if report.rows:
        print(f"min slack: {min(r.slack for r in report.rows)}", file=out)
    print(f"packets checked: {len(report.rows)}, violations: {len(report.violations)}", file=out)
    if late:
        print(f"undelivered past their bound: {len(late)}", file=out)
    print(f"wrote {out_dir / 'wcl_report.csv'}", file=out)
    return EXIT_OK if report.ok and not late else EXIT_VIOLATION


def cmd_analyze(
    hops: int, t_r, flits, bandwidth, competitors: int, loads: Sequence, output=None, out=None
) -> int:
    out = out or sys.stdout
    model = PathModel(hops, t_r, bandwidth, flits)
    curve = sweep_offered_load(model, competitors, loads)
    text = curve_csv(curve)
    if output:
        write_atomic(output, text)
        print(f"wrote {output}", file=out)
    else:
        out.write(text)
    sat = [pt.load for pt in curve if pt.saturated]
    cross = next((pt.load for pt in curve if pt.saturated or pt.be_latency > pt.interleave_latency), None)
    print(f"interleave latency: {fmt_num(curve[0].interleave_latency) if curve else '-'}", file=out)
    if curve and not curve[0].saturated:
        print(f"best-effort latency at load {fmt_num(curve[0].load)}: {fmt_num(curve[0].be_latency)}", file=out)
    if cross is not None:
        print(f"best-effort exceeds interleave from load {fmt_num(cross)}", file=out)
    if sat:
        print(f"saturated points: {len(sat)}", file=out)
    return EXIT_OK


def cmd_wcl(w: WclParams, output=None, out=None) -> int:
    out = out or sys.stdout
    parts = wcl_breakdown(w)
    text = "header,payload,buffer,total\n" + ",".join(str(parts[k]) for k in ("header", "payload", "buffer", "total")) + "\n"
    if output:
        write_atomic(output, text)
    print(text, end="", file=out)
    print(f"WCL = {parts['header']} + {parts['payload']} + {parts['buffer']} = {parts['total']} cycles", file=out)
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _loads(text: str):
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("loads look like start:stop:step")
    try:
        return load_range(*parts)
    except (ValueError, ArithmeticError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _number(text: str):
    from fractions import Fraction

    try:
        v = Fraction(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    return v.numerator if v.denominator == 1 else v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="flitnoc", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a scenario; write latency and utilization CSVs")
    s.add_argument("scenario")
    s.add_argument("--out-dir", help="override [run] output_dir")

    v = sub.add_parser("validate", help="simulate and check every packet against its WCL bound")
    v.add_argument("scenario")
    v.add_argument("--out-dir", help="override [run] output_dir")

    a = sub.add_parser("analyze", help="best-effort vs interleave latency over offered load")
    a.add_argument("--hops", type=int, required=True)
    a.add_argument("--tr", type=_number, required=True, help="router delay in cycles")
    a.add_argument("--flit-count", type=_number, required=True)
    a.add_argument("--bandwidth", type=_number, default=1)
    a.add_argument("--competitors", type=int, required=True, help="flows sharing the path (N)")
    a.add_argument("--loads", type=_loads, default=load_range(0, "0.99", "0.01"))
    a.add_argument("-o", "--output", help="CSV path (default: standard output)")

    w = sub.add_parser("wcl", help="worst-case latency bound and its terms")
    w.add_argument("--ni", type=_int_list, required=True, help="N_i per hop, e.g. 3,2")
    w.add_argument("--k", type=int, required=True)
    w.add_argument("--f", type=int, required=True)
    w.add_argument("--buffer", type=int, required=True)
    w.add_argument("-o", "--output")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        if args.command == "wcl":
            return cmd_wcl(WclParams(args.ni, args.k, args.f, args.buffer), args.output)
        if args.command == "analyze":
            return cmd_analyze(
                args.hops, args.tr, args.flit_count, args.bandwidth, args.competitors, args.loads, args.output
            )
        sc = load_scenario(args.scenario)
        if args.command == "simulate":
            return cmd_simulate(sc, args.out_dir)
        return cmd_validate(sc, args.out_dir)
    except (ParseError, ValidationError) as exc:
        print(f"{args.command}: invalid scenario", file=sys.stderr)
        for n, msg in exc.errors:
            print(f"  line {n}: {msg}" if n else f"  {msg}", file=sys.stderr)
        return EXIT_INPUT
    except (OSError, ValueError, NocError) as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
