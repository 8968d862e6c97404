"""Host assembly: NIC pipeline + transport + cores behind one wire port."""

from __future__ import annotations

from .engine import Engine
from .fabric import Packet
from .nic import NicConfig, ZERO_NIC
from .transport import Message, Transport, TransportConfig


class Host:
    """A simulated end host. Packets arrive via receive(); reassembled
    messages go to the core selector, or to `message_sink` for hosts that
    model a bare traffic source/sink (load generators)."""

    def __init__(self, engine: Engine, host_id: int, name: str = "",
                 nic_cfg: NicConfig | None = None,
                 transport_cfg: TransportConfig | None = None,
                 selector=None, message_sink=None):
        self.engine = engine
        self.host_id = host_id
        self.name = name or f"h{host_id}"
        self.nic_cfg = nic_cfg or NicConfig()
        self.transport = Transport(engine, self, transport_cfg or TransportConfig())
        self.selector = selector
        self.message_sink = message_sink
        self.cores: list = []
        self.uplink = None            # set by the topology builder
        self.record_wire = False
        self.wire_rx: list[tuple] = []   # (t_delivered, pkt)
        self.wire_tx: list[tuple] = []   # (t_first_bit, pkt)
        self._egress_q: list[Packet] = []
        self._egress_handle = None
        if selector is not None:
            selector.dispatch = self._dispatch

    # wire side ------------------------------------------------------------

    def receive(self, pkt: Packet):
        if self.record_wire:
            self.wire_rx.append((self.engine.now, pkt))
        self.engine.after(self.nic_cfg.rx_stage_ps, self.transport.on_packet, pkt)

    def egress(self, pkt: Packet):
        self.engine.after(self.nic_cfg.tx_stage_ps, self._egress_ready, pkt)

    def _egress_ready(self, pkt: Packet):
        self._egress_q.append(pkt)
        self._kick_egress()

    def _kick_egress(self):
        if self._egress_handle is not None or not self._egress_q:
            return
        t = max(self.engine.now, self.uplink.free_at)
        self._egress_handle = self.engine.at(t, self._egress_drain)

    def _egress_drain(self):
        # DATA ahead of same-instant control frames: responses are the
        # latency path, ACK/NACK bookkeeping is not.
        self._egress_handle = None
        if not self._egress_q:
            return
        i = next((j for j, p in enumerate(self._egress_q) if not p.control), 0)
        pkt = self._egress_q.pop(i)
        start = self.uplink.transmit(pkt)
        if self.record_wire:
            self.wire_tx.append((start, pkt))
        self._kick_egress()

    # message side -----------------------------------------------------------

    def on_message(self, msg: Message):
        if self.message_sink is not None:
            self.message_sink(msg)
        elif self.selector is not None:
            self.selector.on_message(msg)
        else:
            raise RuntimeError(f"{self.name}: message delivered but no consumer bound")

    def _dispatch(self, core_id: int, port: int, msg: Message):
        # 0ns transfer from global to local queue (on-chip link); the event
        # keeps dispatch ordering FIFO at the same instant.
        self.engine.at(self.engine.now, self.cores[core_id].enqueue_message, port, msg)

    def send(self, msg: Message) -> bool:
        return self.transport.send_message(msg)


def make_loadgen_host(engine: Engine, host_id: int, sink, name: str = "gen",
                      transport_cfg: TransportConfig | None = None) -> Host:
    """Bare traffic source: zero NIC latency, responses go to `sink`."""
    return Host(engine, host_id, name=name, nic_cfg=ZERO_NIC,
                transport_cfg=transport_cfg, message_sink=sink)
