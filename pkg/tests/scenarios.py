"""Random scenario generators shared by the engine and acceptance tests."""

import random

from flitnoc import NetworkParams, TopologySpec
from flitnoc.analysis import derive_wcl_params, packet_wcl
from flitnoc.traffic import Bernoulli, FlowSpec, OnOff, Periodic


def realtime_scenario(seed, mesh_p=None, max_flows=15):
    """Same-destination real-time flows inside the bound's assumptions.

    Every flow targets one sink, packets fit in the NI buffer (f <= B) and
    each flow's period is at least its own worst-case bound, so a flow never
    has two of its packets competing with each other.
    """
    r = random.Random(seed)
    p = mesh_p if mesh_p is not None else (1 if seed % 2 else 2)
    ports = r.randint(5, 8)
    buf = r.randint(2, 16)
    params = NetworkParams(p=p, ports_per_router=ports, buffer_flits=buf, max_packet_flits=buf)
    topo = TopologySpec.default(params)
    addrs = topo.addresses()
    dest = r.choice(addrs)
    srcs = r.sample([a for a in addrs if a != dest], r.randint(1, min(max_flows, len(addrs) - 1)))
    proto = [FlowSpec(f"f{i}", s, dest, r.randint(2, buf), Periodic(1), 1) for i, s in enumerate(srcs)]
    flows = []
    for fl in proto:
        bound = packet_wcl(derive_wcl_params(fl, proto, buf))
        period = r.randint(bound, 2 * bound)
        flows.append(
            FlowSpec(
                fl.flow_id, fl.origin, fl.dest, fl.packet_flits,
                Periodic(period, r.randint(0, period)), r.randint(1, 4), "realtime",
            )
        )
    return params, topo, flows


def stress_scenario(seed, mesh_p=None):
    """Heavy mixed traffic with arbitrary destinations; no latency promise."""
    r = random.Random(seed)
    p = mesh_p if mesh_p is not None else (1 if seed % 2 else 2)
    ports = r.randint(5, 8)
    buf = r.randint(1, 8)
    params = NetworkParams(
        p=p,
        ports_per_router=ports,
        buffer_flits=buf,
        max_packet_flits=32,
        default_burst=r.choice([0, 1, ports - 1]),
        flow_bursts=r.random() < 0.3,
    )
    if ports == 8 and r.random() < 0.3:
        topo = TopologySpec.mesh(1 << p, 1 << p, edge_cores=True)
    else:
        topo = TopologySpec.default(params)
    addrs = topo.addresses()
    flows = []
    for i in range(r.randint(1, min(20, len(addrs)))):
        o, d = r.sample(addrs, 2)
        kind = r.random()
        if kind < 0.4:
            sched = Bernoulli(r.choice([0.05, 0.3, 0.9, 1.0]))
        elif kind < 0.7:
            sched = Periodic(r.randint(1, 60), r.randint(0, 20))
        else:
            sched = OnOff(r.randint(1, 40), r.randint(0, 40))
        flows.append(FlowSpec(f"s{i}", o, d, r.randint(2, 32), sched, r.randint(1, 4)))
    return params, topo, flows
