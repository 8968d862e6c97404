import random

import pytest

from nanosim.engine import Engine, RngStream, SimError, ns, us
from nanosim.fabric import Link, Packet, PacketKind, trim_of
from nanosim.host import Host, make_loadgen_host
from nanosim.nic import ZERO_NIC
from nanosim.transport import (APP_HEADER_BYTES, Message, MsgBufferPool,
                               PullPacer, TransportConfig, TransportMode)

from util import FaultInjector


def make_pair(engine, tcfg=None, gen_tcfg=None, link_ns=43, sink=None):
    delivered = []
    server = Host(engine, 0, "srv", nic_cfg=ZERO_NIC, transport_cfg=tcfg,
                  message_sink=sink or delivered.append)
    gen = make_loadgen_host(engine, 1, lambda m: None, transport_cfg=gen_tcfg)
    gen.uplink = Link(engine, server, prop_ps=ns(link_ns))
    server.uplink = Link(engine, gen, prop_ps=ns(link_ns))
    return gen, server, delivered


# -- packetization ------------------------------------------------------------

def sent_data_packets(engine, msg_data, mtu=1024):
    captured = []

    class Capture:
        def receive(self, pkt):
            captured.append(pkt)

    host = Host(engine, 0, "h", nic_cfg=ZERO_NIC,
                transport_cfg=TransportConfig(mtu_payload=mtu),
                message_sink=lambda m: None)
    host.uplink = Link(engine, Capture(), prop_ps=0)
    host.send(Message(src=0, src_port=1, dst=9, dst_port=2, data=msg_data))
    engine.run_until(us(1))
    return [p for p in captured if p.kind is PacketKind.DATA]


def test_packetize_1024B_message_single_frame():
    pkts = sent_data_packets(Engine(), bytes(1024 - APP_HEADER_BYTES))
    assert len(pkts) == 1
    assert pkts[0].wire_bytes == 1088


def test_packetize_8B_message():
    pkts = sent_data_packets(Engine(), b"")
    assert len(pkts) == 1
    assert pkts[0].wire_bytes == 72


def test_packetize_2500B_message_three_frames():
    pkts = sent_data_packets(Engine(), bytes(2500 - APP_HEADER_BYTES))
    assert [p.payload_bytes for p in pkts] == [1024, 1024, 452]
    assert [p.pkt_index for p in pkts] == [0, 1, 2]


# -- reassembly ----------------------------------------------------------------

def test_out_of_order_reassembly_byte_exact():
    rnd = random.Random(11)
    engine = Engine()
    delivered = []
    server = Host(engine, 0, "srv", nic_cfg=ZERO_NIC,
                  message_sink=delivered.append)
    server.uplink = Link(engine, make_loadgen_host(engine, 1, lambda m: None),
                         prop_ps=0)
    data = bytes(rnd.randrange(256) for _ in range(3 * 1024 - APP_HEADER_BYTES))
    msg = Message(src=1, src_port=2, dst=0, dst_port=0, data=data)
    img = msg.header_bytes() + msg.data
    for idx in (2, 0, 1):
        chunk = img[idx * 1024:(idx + 1) * 1024]
        pkt = Packet(kind=PacketKind.DATA, src=1, src_port=2, dst=0, dst_port=0,
                     msg_seq=0, pkt_index=idx, payload_bytes=len(chunk),
                     msg_len=msg.length, total_pkts=3, payload=chunk)
        engine.at(engine.now, server.transport.on_packet, pkt)
        engine.run_until(us(1))
        if idx != 1:
            assert delivered == []
    assert len(delivered) == 1
    assert delivered[0].data == data


def test_duplicate_data_reacks_without_redelivery():
    engine = Engine()
    acks = []

    class AckCapture:
        def receive(self, pkt):
            if pkt.kind is PacketKind.ACK:
                acks.append(pkt)

    delivered = []
    server = Host(engine, 0, "srv", nic_cfg=ZERO_NIC,
                  message_sink=delivered.append)
    server.uplink = Link(engine, AckCapture(), prop_ps=0)
    pkt = Packet(kind=PacketKind.DATA, src=1, src_port=2, dst=0, dst_port=0,
                 msg_seq=0, pkt_index=0, payload_bytes=8, msg_len=8,
                 total_pkts=1, payload=bytes(8))
    for _ in range(3):
        engine.at(engine.now, server.transport.on_packet, pkt)
        engine.run_until(engine.now + us(1))
    assert len(delivered) == 1
    assert len(acks) == 3


def test_trim_triggers_nack_now_and_paced_pull():
    engine = Engine()
    out = []

    class Capture:
        def receive(self, pkt):
            out.append((engine.now, pkt.kind))

    server = Host(engine, 0, "srv", nic_cfg=ZERO_NIC, message_sink=lambda m: None)
    server.uplink = Link(engine, Capture(), prop_ps=0)
    base = Packet(kind=PacketKind.DATA, src=7, src_port=1, dst=0, dst_port=0,
                  msg_seq=7, pkt_index=0, payload_bytes=1024, msg_len=1024,
                  total_pkts=1, payload=bytes(1024))
    engine.at(0, server.transport.on_packet, trim_of(base))
    engine.run_until(us(1))
    kinds = [k for _, k in out]
    assert PacketKind.NACK in kinds and PacketKind.PULL in kinds
    assert len(server.transport.pacer.departures) == 1


def test_pull_pacer_arithmetic_progression():
    engine = Engine()
    sent = []
    pacer = PullPacer(engine, 43_520, sent.append)
    pulls = [Packet(kind=PacketKind.PULL, src=0, src_port=0, dst=1, dst_port=1,
                    msg_seq=i, pkt_index=0, payload_bytes=0, msg_len=8,
                    total_pkts=1) for i in range(6)]
    for p in pulls:
        pacer.submit(p)
    engine.run_until(us(1))
    assert pacer.departures == [0, 43_520, 87_040, 130_560, 174_080, 217_600]


def test_pull_pacer_idle_departs_immediately():
    engine = Engine()
    pacer = PullPacer(engine, 43_520, lambda p: None)
    engine.at(ns(500), lambda: pacer.submit(
        Packet(kind=PacketKind.PULL, src=0, src_port=0, dst=1, dst_port=1,
               msg_seq=0, pkt_index=0, payload_bytes=0, msg_len=8, total_pkts=1)))
    engine.run_until(us(1))
    assert pacer.departures == [ns(500)]


# -- buffer pool ---------------------------------------------------------------

def test_alloc_smallest_adequate_class():
    pool = MsgBufferPool(((128, 2), (512, 2), (2048, 2)))
    h = pool.alloc(300)
    assert h.buf_bytes == 512


def test_alloc_boundary_exact_fit():
    pool = MsgBufferPool(((128, 2), (512, 2), (2048, 2)))
    assert pool.alloc(512).buf_bytes == 512


def test_alloc_never_falls_back_to_smaller_class():
    pool = MsgBufferPool(((128, 2), (512, 1), (2048, 1)))
    assert pool.alloc(300).buf_bytes == 512    # exhaust 512
    assert pool.alloc(300).buf_bytes == 2048   # spills UP to 2048
    assert pool.alloc(300) is None             # 128B class never considered
    assert pool.failed_allocs == 1


def test_pool_release_and_double_free_guard():
    pool = MsgBufferPool(((128, 1),))
    h = pool.alloc(64)
    pool.release(h)
    assert pool.all_free()
    with pytest.raises(SimError):
        pool.release(h)


def test_send_backpressure_when_tx_pool_exhausted():
    engine = Engine()
    tcfg = TransportConfig(tx_classes=((1024, 1),))
    gen, server, delivered = make_pair(engine, gen_tcfg=tcfg)
    ok1 = gen.send(Message(src=1, src_port=1, dst=0, dst_port=0, data=bytes(500)))
    ok2 = gen.send(Message(src=1, src_port=1, dst=0, dst_port=0, data=bytes(500)))
    assert ok1 and not ok2
    assert gen.transport.metrics["tx_rejected"] == 1
    engine.run_until(us(10))
    # after the first message is ACKed its buffer frees again
    assert gen.transport.tx_pool.all_free()


def test_rx_ingress_drop_when_no_reassembly_buffer():
    engine = Engine()
    tcfg = TransportConfig(rx_classes=((8192, 0),))
    server = Host(engine, 0, "srv", nic_cfg=ZERO_NIC, transport_cfg=tcfg,
                  message_sink=lambda m: None)
    server.uplink = Link(engine, make_loadgen_host(engine, 1, lambda m: None),
                         prop_ps=0)
    pkt = Packet(kind=PacketKind.DATA, src=1, src_port=2, dst=0, dst_port=0,
                 msg_seq=0, pkt_index=0, payload_bytes=1024, msg_len=1024,
                 total_pkts=1, payload=bytes(1024))
    engine.at(0, server.transport.on_packet, pkt)
    engine.run_until(us(1))
    assert server.transport.metrics["rx_ingress_drops"] == 1
    assert server.transport.metrics["messages_delivered"] == 0


# -- timeout baseline -----------------------------------------------------------

def test_rto_rearms_after_consecutive_losses():
    engine = Engine()
    rto = us(9)
    tcfg = TransportConfig(mode=TransportMode.TIMEOUT, rto_ps=rto)
    delivered = []
    server = Host(engine, 0, "srv", nic_cfg=ZERO_NIC,
                  message_sink=delivered.append)
    dropper = FaultInjector(engine, RngStream(1, 1), prob=1.0, mode="drop")
    gen = make_loadgen_host(engine, 1, lambda m: None, transport_cfg=tcfg)
    gen.uplink = Link(engine, dropper, prop_ps=ns(43))
    dropper.dst = server
    server.uplink = Link(engine, gen, prop_ps=ns(43))

    engine.at(0, gen.send, Message(src=1, src_port=1, dst=0, dst_port=0))
    engine.run_until(us(8))
    assert dropper.injected == 1          # original send lost
    engine.run_until(us(17))
    assert dropper.injected == 2          # first retransmit at ~9us, lost
    dropper.prob = 0.0                    # second retransmit at ~18us survives
    engine.run_until(us(30))
    assert len(delivered) == 1
    assert gen.transport.metrics["retransmissions"] == 2


def test_rto_no_drops_no_retransmissions():
    engine = Engine()
    tcfg = TransportConfig(mode=TransportMode.TIMEOUT, rto_ps=us(9))
    gen, server, delivered = make_pair(engine, gen_tcfg=tcfg)
    engine.at(0, gen.send, Message(src=1, src_port=1, dst=0, dst_port=0,
                                   data=bytes(992)))
    engine.run_until(us(50))
    assert len(delivered) == 1
    assert gen.transport.metrics["retransmissions"] == 0
    assert gen.transport.pools_conserved()


def test_retry_cap_records_failure():
    engine = Engine()
    tcfg = TransportConfig(mode=TransportMode.TIMEOUT, rto_ps=us(1),
                           max_retries=3)
    server = Host(engine, 0, "srv", nic_cfg=ZERO_NIC, message_sink=lambda m: None)
    dropper = FaultInjector(engine, RngStream(1, 1), prob=1.0, mode="drop")
    gen = make_loadgen_host(engine, 1, lambda m: None, transport_cfg=tcfg)
    gen.uplink = Link(engine, dropper, prop_ps=0)
    dropper.dst = server
    server.uplink = Link(engine, gen, prop_ps=0)
    engine.at(0, gen.send, Message(src=1, src_port=1, dst=0, dst_port=0))
    engine.run_until(us(100))
    assert gen.transport.metrics["msg_failures"] == 1
    assert gen.transport.pools_conserved()  # buffer reclaimed on failure


# -- randomized exactly-once property -------------------------------------------

def _random_messages_roundtrip(seed: int, mode: str):
    engine = Engine()
    rng = RngStream(seed, 777)
    trims = FaultInjector(engine, RngStream(seed, 778),
                          prob=0.1 + 0.6 * rng.random(), mode=mode)
    tmode = TransportMode.NDP if mode == "trim" else TransportMode.TIMEOUT
    tcfg = TransportConfig(mode=tmode, rto_ps=us(5))
    delivered = []
    server = Host(engine, 0, "srv", transport_cfg=tcfg,
                  message_sink=delivered.append)
    gen = make_loadgen_host(engine, 1, lambda m: None, transport_cfg=tcfg)
    gen.uplink = Link(engine, trims, prop_ps=ns(43))
    trims.dst = server
    server.uplink = Link(engine, gen, prop_ps=ns(43))

    sent = []
    n_msgs = 1 + rng.randrange(3)
    t = 0
    for i in range(n_msgs):
        pkts = 1 + rng.randrange(4)
        length = pkts * 1024 if rng.chance(0.5) else (pkts - 1) * 1024 + 8 + rng.randrange(1000)
        length = max(APP_HEADER_BYTES, min(length, 4 * 1024))
        data = bytes(rng.randrange(256) for _ in range(length - APP_HEADER_BYTES))
        sent.append(data)
        engine.at(t, gen.send, Message(src=1, src_port=1, dst=0, dst_port=0,
                                       data=data))
        t += rng.randrange(us(2))
    engine.run_until(us(3000))
    return sent, delivered, gen, server


@pytest.mark.parametrize("mode", ["trim", "drop"])
def test_randomized_loss_exactly_once_and_byte_exact(mode):
    for seed in range(40):
        sent, delivered, gen, server = _random_messages_roundtrip(seed, mode)
        assert len(delivered) == len(sent), f"seed {seed}"
        assert sorted(m.data for m in delivered) == sorted(sent), f"seed {seed}"
        assert gen.transport.pools_conserved(), f"seed {seed}"
        assert server.transport.pools_conserved(), f"seed {seed}"
        deps = server.transport.pacer.departures
        assert all(b - a >= server.transport.pacer.interval_ps
                   for a, b in zip(deps, deps[1:])), f"seed {seed}"
