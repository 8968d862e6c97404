"""NIC model: fixed-latency pipelines, global RX queues, core selection.

The pipeline is a pure latency element: every packet takes the configured
ingress (MAC/serial + pipeline) latency from wire to the transport, and
the configured egress latency from the transport to the wire, independent
of load below line rate. With the reference constants the internal
loopback (no MAC) is exactly 13ns and the wire-to-wire loopback 65ns.

Core selection implements JBSQ(n) with the two-table scheme (port -> bound
core bitmap, port -> per-core outstanding counts) and RSS (static
port -> core map, no balancing).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .engine import SimError, ns


@dataclass
class NicConfig:
    ingress_ns: float = 7.0     # wire-side pipeline into the transport
    egress_ns: float = 6.0      # transport out to the wire
    mac_serial_ns: float = 52.0  # MAC + serial I/O, both directions combined

    @property
    def rx_stage_ps(self) -> int:
        return ns(self.ingress_ns) + ns(self.mac_serial_ns) // 2

    @property
    def tx_stage_ps(self) -> int:
        return ns(self.egress_ns) + ns(self.mac_serial_ns) // 2

    @property
    def loopback_ps(self) -> int:
        """Internal loopback latency (no MAC): ingress + egress."""
        return ns(self.ingress_ns) + ns(self.egress_ns)


ZERO_NIC = NicConfig(ingress_ns=0.0, egress_ns=0.0, mac_serial_ns=0.0)


def nic_packet_rate(frame_bytes: int, line_rate_bps: int = 200_000_000_000) -> float:
    """Sustainable packets/s for back-to-back frames of the given size."""
    if frame_bytes < 64:
        raise SimError("frame below 64B minimum")
    return line_rate_bps / (frame_bytes * 8)


class JbsqSelector:
    """Join-Bounded-Shortest-Queue dispatch, bounded depth n per core."""

    def __init__(self, n: int = 2):
        if n < 1:
            raise SimError("JBSQ bound must be >= 1")
        self.n = n
        self.bind_table: dict[int, list[int]] = {}
        self.counts: dict[int, dict[int, int]] = {}
        self.queues: dict[int, deque] = {}
        self.dispatch = None  # set by the host: fn(core_id, port, msg)
        self.unbound_drops = 0
        self.dispatch_counts: dict[int, int] = {}
        self.max_count_seen = 0

    def bind(self, port: int, core_id: int):
        cores = self.bind_table.setdefault(port, [])
        if core_id in cores:
            raise SimError(f"core {core_id} already bound to port {port}")
        cores.append(core_id)
        cores.sort()
        self.counts.setdefault(port, {})[core_id] = 0
        self.queues.setdefault(port, deque())
        self.dispatch_counts.setdefault(core_id, 0)

    def select(self, port: int) -> int | None:
        """Bound core with minimal outstanding count < n; ties to lowest id."""
        counts = self.counts.get(port)
        if not counts:
            return None
        best, best_count = None, self.n
        for core_id in self.bind_table[port]:
            c = counts[core_id]
            if c < best_count:
                best, best_count = core_id, c
        return best

    def on_message(self, msg):
        port = msg.dst_port
        if port not in self.bind_table:
            self.unbound_drops += 1
            return
        self.queues[port].append(msg)
        self._pump(port)

    def on_done(self, core_id: int, port: int):
        counts = self.counts[port]
        if counts[core_id] <= 0:
            raise SimError("JBSQ count decremented below zero")
        counts[core_id] -= 1
        self._pump(port)

    def _pump(self, port: int):
        q = self.queues[port]
        while q:
            core_id = self.select(port)
            if core_id is None:
                return
            msg = q.popleft()
            c = self.counts[port][core_id] + 1
            self.counts[port][core_id] = c
            self.max_count_seen = max(self.max_count_seen, c)
            self.dispatch_counts[core_id] += 1
            self.dispatch(core_id, port, msg)


class RssSelector:
    """Static port-to-core steering; one queue per core, no balancing."""

    def __init__(self):
        self.port_map: dict[int, int] = {}
        self.dispatch = None
        self.unbound_drops = 0
        self.dispatch_counts: dict[int, int] = {}

    def bind(self, port: int, core_id: int):
        if port in self.port_map:
            raise SimError(f"port {port} already mapped to core {self.port_map[port]}")
        self.port_map[port] = core_id
        self.dispatch_counts.setdefault(core_id, 0)

    def on_message(self, msg):
        core_id = self.port_map.get(msg.dst_port)
        if core_id is None:
            self.unbound_drops += 1
            return
        self.dispatch_counts[core_id] += 1
        self.dispatch(core_id, msg.dst_port, msg)

    def on_done(self, core_id: int, port: int):
        pass
