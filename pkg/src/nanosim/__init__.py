"""nanosim: deterministic simulator of nanoPU-style hosts and a trimming
datacenter fabric, built to reproduce the latency, scheduling, core
selection, incast and application microbenchmarks at desk scale."""

from .engine import Engine, RngStream, SimError, ns, us

__all__ = ["Engine", "RngStream", "SimError", "ns", "us"]
__version__ = "0.1.0"
