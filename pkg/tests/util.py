"""Shared test helpers: tiny topologies and fault injection."""

from nanosim.core import Core
from nanosim.engine import RngStream
from nanosim.fabric import Link, PacketKind, trim_of
from nanosim.host import Host, make_loadgen_host
from nanosim.nic import JbsqSelector


class FaultInjector:
    """Device spliced into a link that trims or drops DATA frames.

    mode "trim" converts the frame to a TRIM (the NDP switch behavior);
    mode "drop" discards it silently (the no-trimming baseline). Control
    frames always pass through.
    """

    def __init__(self, engine, rng: RngStream, prob: float, mode: str = "trim"):
        self.engine = engine
        self.rng = rng
        self.prob = prob
        self.mode = mode
        self.dst = None
        self.injected = 0

    def receive(self, pkt):
        if pkt.kind is PacketKind.DATA and self.rng.chance(self.prob):
            self.injected += 1
            if self.mode == "trim":
                self.engine.at(self.engine.now, self.dst.receive, trim_of(pkt))
            return
        self.engine.at(self.engine.now, self.dst.receive, pkt)


def rpc_pair(engine, app, service_rng=None, server_nic=None, link_ns=43.0,
             sink=None, transport_cfg=None, gen_transport_cfg=None,
             selector=None, ports=(0,), priorities=None):
    """Loadgen host wired to a single-core (or per-port multi-thread)
    server; returns (gen_host, server, core)."""
    from nanosim.engine import ns
    selector = selector or JbsqSelector(n=2)
    server = Host(engine, 0, "srv", nic_cfg=server_nic,
                  transport_cfg=transport_cfg, selector=selector)
    gen = make_loadgen_host(engine, 1000, sink or (lambda m: None),
                            transport_cfg=gen_transport_cfg)
    gen.uplink = Link(engine, server, prop_ps=ns(link_ns), name="gen->srv")
    server.uplink = Link(engine, gen, prop_ps=ns(link_ns), name="srv->gen")
    core = Core(engine, server, 0)
    server.cores.append(core)
    priorities = priorities or [0] * len(ports)
    for port, prio in zip(ports, priorities):
        core.bind_thread(port, prio, app,
                         service_rng or RngStream(1, port))
    return gen, server, core
