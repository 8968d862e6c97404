"""Hardware-terminated reliable message transport.

Two modes share the packetization/reassembly machinery:

* NDP: receivers respond to DATA with ACK and to TRIM with NACK plus a
  paced PULL; a sender retransmits a packet only when the matching PULL
  credit arrives. PULL departures are spaced at least one full-size frame
  serialization apart so retransmissions hit the bottleneck at line rate.
* Timeout baseline ("NDP disabled"): receivers still ACK, but lost packets
  are recovered by a retransmission timer that resends every unacked
  packet and re-arms.

Message buffers come from per-host pools of fixed size classes; allocation
picks the smallest available class that fits the whole message, and an
arriving first packet that cannot get a buffer is dropped at the ingress
of the reassembly module.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import Enum

from .engine import Engine, SimError, serialization_ps
from .fabric import DEFAULT_RATE_BPS, Packet, PacketKind

APP_HEADER_BYTES = 8
MAX_MSG_LEN = 0xFFFF  # app header carries a 16-bit length
DEFAULT_MTU_PAYLOAD = 1024
DEFAULT_SIZE_CLASSES = ((128, 256), (1024, 256), (8192, 256))


class TransportMode(Enum):
    NDP = "ndp"
    TIMEOUT = "timeout"


@dataclass(slots=True)
class Message:
    """Application-level RPC unit; `data` excludes the 8B app header."""

    src: int
    src_port: int
    dst: int
    dst_port: int
    data: bytes = b""
    meta: dict | None = None
    send_ts: int = 0
    deliver_ts: int = 0
    msg_seq: int = -1

    @property
    def length(self) -> int:
        return APP_HEADER_BYTES + len(self.data)

    def header_bytes(self) -> bytes:
        """64-bit app header word: length plus peer address/port."""
        return struct.pack("<HHHH", self.length, self.src & 0xFFFF,
                           self.src_port & 0xFFFF, self.dst_port & 0xFFFF)


def reply_to(msg: Message, data: bytes = b"", meta: dict | None = None) -> Message:
    return Message(src=msg.dst, src_port=msg.dst_port, dst=msg.src,
                   dst_port=msg.src_port, data=data,
                   meta=meta if meta is not None else msg.meta)


class BufferHandle:
    __slots__ = ("class_index", "buf_bytes")

    def __init__(self, class_index, buf_bytes):
        self.class_index = class_index
        self.buf_bytes = buf_bytes


class MsgBufferPool:
    """Fixed size-class buffer pool with per-class free lists."""

    def __init__(self, size_classes=DEFAULT_SIZE_CLASSES):
        classes = sorted(size_classes)
        if not classes:
            raise SimError("buffer pool needs at least one size class")
        self.class_bytes = [c[0] for c in classes]
        self.capacity = [c[1] for c in classes]
        self.free = list(self.capacity)
        self.failed_allocs = 0

    def alloc(self, msg_len: int) -> BufferHandle | None:
        if msg_len <= 0:
            raise SimError("allocation for empty message")
        for i, size in enumerate(self.class_bytes):
            if size >= msg_len and self.free[i] > 0:
                self.free[i] -= 1
                return BufferHandle(i, size)
        self.failed_allocs += 1
        return None

    def release(self, handle: BufferHandle):
        i = handle.class_index
        self.free[i] += 1
        if self.free[i] > self.capacity[i]:
            raise SimError("buffer double-free")

    def all_free(self) -> bool:
        return self.free == self.capacity


class PullPacer:
    """Spaces PULL departures at least one full-frame serialization apart."""

    def __init__(self, engine: Engine, interval_ps: int, emit):
        self.engine = engine
        self.interval_ps = interval_ps
        self._emit = emit
        self._next_slot = 0
        self.departures: list[int] = []

    def submit(self, pkt: Packet) -> int:
        departure = max(self.engine.now, self._next_slot)
        self._next_slot = departure + self.interval_ps
        self.departures.append(departure)
        self.engine.at(departure, self._emit, pkt)
        return departure


@dataclass
class TransportConfig:
    mode: TransportMode = TransportMode.NDP
    mtu_payload: int = DEFAULT_MTU_PAYLOAD
    rto_ps: int = 12_000_000          # calibrated; see incast preset notes
    max_retries: int = 16
    initial_window_pkts: int = 64     # ~one 3us RTT of 1088B frames at 200Gb/s
    tx_classes: tuple = DEFAULT_SIZE_CLASSES
    rx_classes: tuple = DEFAULT_SIZE_CLASSES
    pull_interval_ps: int | None = None  # default: one MTU frame at link rate


@dataclass(slots=True)
class _TxState:
    msg: Message
    total_pkts: int
    acked: int = 0           # bitmap
    buffer: BufferHandle | None = None
    retries: int = 0
    rto_handle: object = None
    bytes_img: bytes = b""


@dataclass(slots=True)
class _RxState:
    total_pkts: int
    msg_len: int
    received: int = 0        # bitmap
    buffer: BufferHandle | None = None
    data: bytearray = field(default_factory=bytearray)
    first_pkt_ts: int = 0
    meta: dict | None = None
    src_send_ts: int = 0


class Transport:
    """Per-host transport state machine, driven from the NIC pipeline."""

    def __init__(self, engine: Engine, host, cfg: TransportConfig):
        self.engine = engine
        self.host = host
        self.cfg = cfg
        self.tx_pool = MsgBufferPool(cfg.tx_classes)
        self.rx_pool = MsgBufferPool(cfg.rx_classes)
        self._tx: dict[tuple, _TxState] = {}
        self._rx: dict[tuple, _RxState] = {}
        self._delivered: set[tuple] = set()
        self._seq: dict[tuple, int] = {}
        interval = cfg.pull_interval_ps
        if interval is None:
            interval = serialization_ps(cfg.mtu_payload + 64, DEFAULT_RATE_BPS)
        self.pacer = PullPacer(engine, interval, self._emit_control)
        self.metrics = {
            "tx_rejected": 0,
            "rx_ingress_drops": 0,
            "msg_failures": 0,
            "retransmissions": 0,
            "messages_delivered": 0,
        }

    # -- sending ----------------------------------------------------------

    def send_message(self, msg: Message) -> bool:
        """Packetize and transmit; False signals back-pressure (no buffer)."""
        length = msg.length
        if length > MAX_MSG_LEN:
            raise SimError(f"message length {length} exceeds 16-bit app header")
        buf = self.tx_pool.alloc(length)
        if buf is None:
            self.metrics["tx_rejected"] += 1
            return False
        flow = (msg.dst, msg.dst_port)
        seq = self._seq.get(flow, 0)
        if seq > 0xFFFF:
            raise SimError("msg_seq wrapped 16 bits; beyond desk scale")
        self._seq[flow] = seq + 1
        msg.msg_seq = seq
        msg.send_ts = self.engine.now

        img = msg.header_bytes() + msg.data
        mtu = self.cfg.mtu_payload
        total = -(-length // mtu)
        if total > self.cfg.initial_window_pkts:
            raise SimError("message exceeds first transmission window")
        state = _TxState(msg=msg, total_pkts=total, buffer=buf, bytes_img=img)
        msg_id = (self.host.host_id, msg.src_port, msg.dst, msg.dst_port, seq)
        self._tx[msg_id] = state
        for idx in range(total):
            self._emit_data(state, msg_id, idx)
        if self.cfg.mode is TransportMode.TIMEOUT:
            state.rto_handle = self.engine.after(self.cfg.rto_ps, self._rto_fire, msg_id)
        return True

    def _make_data(self, state: _TxState, msg_id: tuple, idx: int) -> Packet:
        mtu = self.cfg.mtu_payload
        chunk = state.bytes_img[idx * mtu:(idx + 1) * mtu]
        src, src_port, dst, dst_port, seq = msg_id
        return Packet(
            kind=PacketKind.DATA, src=src, src_port=src_port, dst=dst,
            dst_port=dst_port, msg_seq=seq, pkt_index=idx,
            payload_bytes=len(chunk), msg_len=state.msg.length,
            total_pkts=state.total_pkts, payload=chunk,
            meta=state.msg.meta, send_ts=self.engine.now,
        )

    def _emit_data(self, state: _TxState, msg_id: tuple, idx: int):
        self.host.egress(self._make_data(state, msg_id, idx))

    def _control(self, kind: PacketKind, ref: Packet) -> Packet:
        """Control packet toward the sender of `ref`."""
        return Packet(
            kind=kind, src=ref.dst, src_port=ref.dst_port, dst=ref.src,
            dst_port=ref.src_port, msg_seq=ref.msg_seq, pkt_index=ref.pkt_index,
            payload_bytes=0, msg_len=ref.msg_len, total_pkts=ref.total_pkts,
            send_ts=self.engine.now,
        )

    def _emit_control(self, pkt: Packet):
        self.host.egress(pkt)

    # -- receiving --------------------------------------------------------

    def on_packet(self, pkt: Packet):
        kind = pkt.kind
        if kind is PacketKind.DATA:
            self._on_data(pkt)
        elif kind is PacketKind.ACK:
            self._on_ack(pkt)
        elif kind is PacketKind.TRIM:
            self._on_trim(pkt)
        elif kind is PacketKind.NACK:
            pass  # retransmission happens on the matching PULL credit
        elif kind is PacketKind.PULL:
            self._on_pull(pkt)

    def _on_data(self, pkt: Packet):
        msg_id = pkt.msg_id
        if msg_id in self._delivered:
            self._emit_control(self._control(PacketKind.ACK, pkt))  # re-ACK, no redelivery
            return
        state = self._rx.get(msg_id)
        if state is None:
            buf = self.rx_pool.alloc(pkt.msg_len)
            if buf is None:
                self.metrics["rx_ingress_drops"] += 1
                return  # dropped at the ingress of the reassembly module
            state = _RxState(total_pkts=pkt.total_pkts, msg_len=pkt.msg_len,
                             buffer=buf, data=bytearray(pkt.msg_len),
                             first_pkt_ts=self.engine.now, meta=pkt.meta,
                             src_send_ts=pkt.send_ts)
            self._rx[msg_id] = state
        bit = 1 << pkt.pkt_index
        duplicate = bool(state.received & bit)
        if not duplicate:
            state.received |= bit
            base = pkt.pkt_index * self.cfg.mtu_payload
            state.data[base:base + pkt.payload_bytes] = pkt.payload or b"\0" * pkt.payload_bytes
        if not duplicate and state.received == (1 << state.total_pkts) - 1:
            # deliver before ACKing so a same-instant app response reaches
            # the egress arbiter together with the ACK (data wins the wire)
            self._deliver(msg_id, pkt, state)
        self._emit_control(self._control(PacketKind.ACK, pkt))

    def _deliver(self, msg_id: tuple, pkt: Packet, state: _RxState):
        self.rx_pool.release(state.buffer)
        del self._rx[msg_id]
        self._delivered.add(msg_id)
        self.metrics["messages_delivered"] += 1
        msg = Message(src=pkt.src, src_port=pkt.src_port, dst=pkt.dst,
                      dst_port=pkt.dst_port,
                      data=bytes(state.data[APP_HEADER_BYTES:state.msg_len]),
                      meta=state.meta, send_ts=state.src_send_ts,
                      deliver_ts=self.engine.now, msg_seq=pkt.msg_seq)
        self.host.on_message(msg)

    def _on_trim(self, pkt: Packet):
        self._emit_control(self._control(PacketKind.NACK, pkt))
        self.pacer.submit(self._control(PacketKind.PULL, pkt))

    def _on_ack(self, pkt: Packet):
        msg_id = (pkt.dst, pkt.dst_port, pkt.src, pkt.src_port, pkt.msg_seq)
        state = self._tx.get(msg_id)
        if state is None:
            return
        state.acked |= 1 << pkt.pkt_index
        if state.acked == (1 << state.total_pkts) - 1:
            self._retire_tx(msg_id, state)

    def _retire_tx(self, msg_id: tuple, state: _TxState):
        self.tx_pool.release(state.buffer)
        if state.rto_handle is not None:
            state.rto_handle.cancel()
        del self._tx[msg_id]

    def _on_pull(self, pkt: Packet):
        msg_id = (pkt.dst, pkt.dst_port, pkt.src, pkt.src_port, pkt.msg_seq)
        state = self._tx.get(msg_id)
        if state is None:
            return  # stale credit for an already-acked message
        if not state.acked & (1 << pkt.pkt_index):
            self.metrics["retransmissions"] += 1
            self._emit_data(state, msg_id, pkt.pkt_index)

    # -- timeout baseline --------------------------------------------------

    def _rto_fire(self, msg_id: tuple):
        state = self._tx.get(msg_id)
        if state is None:
            return
        state.retries += 1
        if state.retries > self.cfg.max_retries:
            self.metrics["msg_failures"] += 1
            self._retire_tx(msg_id, state)
            return
        for idx in range(state.total_pkts):
            if not state.acked & (1 << idx):
                self.metrics["retransmissions"] += 1
                self._emit_data(state, msg_id, idx)
        state.rto_handle = self.engine.after(self.cfg.rto_ps, self._rto_fire, msg_id)

    # -- checks ------------------------------------------------------------

    def pools_conserved(self) -> bool:
        return self.tx_pool.all_free() and self.rx_pool.all_free()
