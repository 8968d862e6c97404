"""Links and switches.

Wire model: a sender serializes a frame onto its link (FIFO, never
reordering); the frame is delivered to the next device once the last byte
has arrived, i.e. at start + serialization + propagation. The trimming
switch is store-and-forward with one output queue per port: an arriving
DATA frame that does not fit is either trimmed to a header-only TRIM
control frame (trimming enabled) or silently dropped. Control frames
(ACK/NACK/PULL/TRIM) always fit and are dequeued strictly before DATA.

The zero-latency switch used by the chain-replication topology is the
opposite idealization: infinite capacity, cut-through, adding only the
configured per-attachment propagation (the frame is re-serialized nowhere,
so a path through it costs the sum of link propagations plus a single
serialization).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .engine import Engine, SimError, serialization_ps

HEADER_BYTES = 64  # fixed per-packet header+framing overhead: 8B payload -> 72B frame
MIN_FRAME_BYTES = 64
DEFAULT_RATE_BPS = 200_000_000_000


class PacketKind(Enum):
    DATA = "DATA"
    ACK = "ACK"
    NACK = "NACK"
    PULL = "PULL"
    TRIM = "TRIM"


@dataclass(slots=True)
class Packet:
    kind: PacketKind
    src: int
    src_port: int
    dst: int
    dst_port: int
    msg_seq: int
    pkt_index: int
    payload_bytes: int
    msg_len: int          # total message length in bytes (incl. 8B app header)
    total_pkts: int
    payload: bytes | None = None
    meta: dict | None = None
    send_ts: int = 0
    enq_ts: int = 0

    def __post_init__(self):
        if self.kind is PacketKind.DATA and self.payload_bytes <= 0:
            raise SimError("DATA packet with empty payload")

    @property
    def wire_bytes(self) -> int:
        if self.kind is PacketKind.DATA:
            return self.payload_bytes + HEADER_BYTES
        return HEADER_BYTES  # control frames are header-only

    @property
    def msg_id(self) -> tuple:
        return (self.src, self.src_port, self.dst, self.dst_port, self.msg_seq)

    @property
    def control(self) -> bool:
        return self.kind is not PacketKind.DATA


def trim_of(pkt: Packet) -> Packet:
    """Header-only TRIM carrying the same message coordinates."""
    return Packet(
        kind=PacketKind.TRIM,
        src=pkt.src, src_port=pkt.src_port,
        dst=pkt.dst, dst_port=pkt.dst_port,
        msg_seq=pkt.msg_seq, pkt_index=pkt.pkt_index,
        payload_bytes=0, msg_len=pkt.msg_len, total_pkts=pkt.total_pkts,
        send_ts=pkt.send_ts,
    )


class Link:
    """Unidirectional serializing link; frames never reorder."""

    def __init__(self, engine: Engine, dst, rate_bps: int = DEFAULT_RATE_BPS,
                 prop_ps: int = 0, name: str = ""):
        self.engine = engine
        self.dst = dst
        self.rate_bps = rate_bps
        self.prop_ps = prop_ps
        self.name = name
        self._free_at = 0

    @property
    def free_at(self) -> int:
        return self._free_at

    def ser_ps(self, pkt: Packet) -> int:
        wire = pkt.wire_bytes
        if wire < MIN_FRAME_BYTES:
            raise SimError(f"frame below {MIN_FRAME_BYTES}B minimum: {wire}B")
        return serialization_ps(wire, self.rate_bps)

    def transmit(self, pkt: Packet) -> int:
        """Queue the frame behind in-flight traffic; returns first-bit time."""
        start = max(self.engine.now, self._free_at)
        ser = self.ser_ps(pkt)
        self._free_at = start + ser
        self.engine.at(start + ser + self.prop_ps, self.dst.receive, pkt)
        return start


class QueueAction(Enum):
    ENQ = "ENQ"
    DEQ = "DEQ"
    TRIM = "TRIM"
    DROP = "DROP"


@dataclass(slots=True)
class QueueTraceEvent:
    t: int
    occupancy_bytes: int
    occupancy_pkts: int
    action: QueueAction


@dataclass
class SwitchPort:
    """Output-queued egress: bounded DATA FIFO plus unbounded control FIFO."""

    link: Link
    capacity_pkts: int | None = None
    capacity_bytes: int | None = None
    trimming: bool = True
    data_q: list = field(default_factory=list)
    control_q: list = field(default_factory=list)
    occupancy_bytes: int = 0
    busy: bool = False
    trace: list = field(default_factory=list)
    counts: dict = field(default_factory=lambda: {a: 0 for a in QueueAction})
    last_data_final_byte: int = 0

    def fits(self, pkt: Packet) -> bool:
        if self.capacity_pkts is not None and len(self.data_q) + 1 > self.capacity_pkts:
            return False
        if self.capacity_bytes is not None and self.occupancy_bytes + pkt.wire_bytes > self.capacity_bytes:
            return False
        return True

    def _record(self, t: int, action: QueueAction):
        self.counts[action] += 1
        self.trace.append(QueueTraceEvent(t, self.occupancy_bytes, len(self.data_q), action))


class TrimmingSwitch:
    """Single-stage output-queued switch with NDP packet trimming."""

    def __init__(self, engine: Engine, name: str = "sw"):
        self.engine = engine
        self.name = name
        self.ports: dict[int, SwitchPort] = {}

    def attach(self, host_id: int, link: Link, capacity_pkts=None,
               capacity_bytes=None, trimming=True) -> SwitchPort:
        if host_id in self.ports:
            raise SimError(f"duplicate switch attachment for host {host_id}")
        port = SwitchPort(link=link, capacity_pkts=capacity_pkts,
                          capacity_bytes=capacity_bytes, trimming=trimming)
        self.ports[host_id] = port
        return port

    def receive(self, pkt: Packet):
        port = self.ports.get(pkt.dst)
        if port is None:
            raise SimError(f"switch has no port toward host {pkt.dst}")
        now = self.engine.now
        pkt.enq_ts = now
        if pkt.control:
            port.control_q.append(pkt)
            port._record(now, QueueAction.ENQ)
        elif port.fits(pkt):
            port.data_q.append(pkt)
            port.occupancy_bytes += pkt.wire_bytes
            port._record(now, QueueAction.ENQ)
        elif port.trimming:
            port.control_q.append(trim_of(pkt))
            port._record(now, QueueAction.TRIM)
        else:
            port._record(now, QueueAction.DROP)
            return
        if not port.busy:
            port.busy = True
            # Same-instant kick runs after every already-scheduled arrival at
            # this time, so a simultaneous burst sees the full queue.
            self.engine.at(now, self._drain, port)

    def _drain(self, port: SwitchPort):
        if port.control_q:
            pkt = port.control_q.pop(0)
        elif port.data_q:
            pkt = port.data_q.pop(0)
            port.occupancy_bytes -= pkt.wire_bytes
        else:
            port.busy = False
            return
        now = self.engine.now
        port._record(now, QueueAction.DEQ)
        ser = port.link.ser_ps(pkt)
        if not pkt.control:
            port.last_data_final_byte = now + ser
        port.link.transmit(pkt)
        self.engine.at(now + ser, self._drain, port)


class ZeroLatencySwitch:
    """Infinite-capacity cut-through interconnect (chain-replication fabric)."""

    def __init__(self, engine: Engine, name: str = "zsw"):
        self.engine = engine
        self.name = name
        self._down: dict[int, tuple] = {}  # host_id -> (device, prop_ps)

    def attach(self, host_id: int, device, down_prop_ps: int = 0):
        if device is self:
            raise SimError("zero-latency switch cannot route to itself")
        self._down[host_id] = (device, down_prop_ps)

    def receive(self, pkt: Packet):
        entry = self._down.get(pkt.dst)
        if entry is None:
            raise SimError(f"no route to host {pkt.dst}")
        device, prop = entry
        self.engine.at(self.engine.now + prop, device.receive, pkt)


def write_queue_trace_csv(path, trace):
    """Queue trace CSV: t_ns, occupancy_bytes, occupancy_pkts, action."""
    from .engine import fmt_ns
    with open(path, "w", newline="") as f:
        f.write("t_ns,occupancy_bytes,occupancy_pkts,action\n")
        for ev in trace:
            f.write(f"{fmt_ns(ev.t)},{ev.occupancy_bytes},{ev.occupancy_pkts},{ev.action.value}\n")
