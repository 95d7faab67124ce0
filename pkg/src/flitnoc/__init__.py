"""Cycle-accurate simulator and latency toolkit for a connectionless,
flit-interleaving 2-D mesh network-on-chip."""

from .core_model import Address, Flit, NetworkParams, Packet, PortId
from .engine import SimResult, Simulation, TopologySpec, build_network, run

__all__ = [
    "Address",
    "Flit",
    "NetworkParams",
    "Packet",
    "PortId",
    "SimResult",
    "Simulation",
    "TopologySpec",
    "build_network",
    "run",
]
