import struct

import pytest

from nanosim.apps import (BimodalApp, ChainReplicaApp, KvApp, KvStats,
                          LoopbackApp, incremented_words, kv_value)
from nanosim.config import preset_config, apply_overrides
from nanosim.engine import Engine, RngStream, SimError, ns, us
from nanosim.scenarios import (chain_read_analytic_ps, chain_write_analytic_ps,
                               run_chain_single, run_loopback)
from nanosim.transport import Message


def words(*vals):
    return struct.pack(f"<{len(vals)}Q", *vals)


# -- loopback ------------------------------------------------------------------

def test_loopback_increments_each_word():
    app = LoopbackApp()
    msg = Message(src=1, src_port=2, dst=0, dst_port=0, data=words(1, 2))
    replies = app.on_complete(msg, None, 0)
    assert len(replies) == 1
    r = replies[0]
    assert (r.dst, r.dst_port) == (1, 2)
    assert r.data == words(2, 3)


def test_loopback_header_only_message():
    app = LoopbackApp()
    msg = Message(src=1, src_port=2, dst=0, dst_port=0, data=b"")
    assert app.on_complete(msg, None, 0)[0].data == b""


def test_loopback_eight_words_elementwise():
    vals = list(range(8))
    out = incremented_words(words(*vals))
    assert out == words(*[v + 1 for v in vals])


def test_loopback_rejects_partial_words():
    with pytest.raises(SimError):
        incremented_words(b"\x01\x02\x03")


def test_loopback_word_wraps_at_64_bits():
    assert incremented_words(words(2**64 - 1)) == words(0)


def test_loopback_preset_exact_latencies():
    res = run_loopback(preset_config("loopback_latency"))
    assert res.extra["wire_w2w_ps"] == 65_000
    assert res.extra["internal_w2w_ps"] == 13_000


# -- bimodal -------------------------------------------------------------------

def test_bimodal_long_fraction_within_015_pp():
    app = BimodalApp(ns(500), us(5), 0.005)
    rng = RngStream(42, 9)
    n = 20_000
    longs = sum(app.service_ps(Message(src=0, src_port=0, dst=0, dst_port=0), rng)
                == us(5) for _ in range(n))
    assert abs(longs / n - 0.005) <= 0.0015


def test_bimodal_fixed_seed_identical_classification():
    def run():
        app = BimodalApp(ns(500), us(5), 0.005)
        rng = RngStream(7, 3)
        m = Message(src=0, src_port=0, dst=0, dst_port=0)
        return [app.service_ps(m, rng) for _ in range(1000)]
    assert run() == run()


def test_bimodal_generator_classification_wins():
    app = BimodalApp(ns(500), us(5), 0.005)
    m = Message(src=0, src_port=0, dst=0, dst_port=0, meta={"svc_ps": us(5)})
    assert app.service_ps(m, RngStream(1, 1)) == us(5)


# -- key-value store -------------------------------------------------------------

def test_kv_read_returns_value_of_configured_length():
    stats = KvStats()
    app = KvApp(0, 4, stats, ns(414), ns(414), value_bytes=512, static=False)
    msg = Message(src=9, src_port=7, dst=0, dst_port=0,
                  meta={"op": "R", "key": 123})
    reply = app.on_complete(msg, _FakeHost(0), 0)[0]
    assert len(reply.data) == 512
    assert reply.data == kv_value(123, 512)


class _FakeHost:
    def __init__(self, host_id):
        self.host_id = host_id


def test_kv_static_wrong_core_counted():
    stats = KvStats()
    app = KvApp(1, 4, stats, ns(414), ns(414), static=True)
    msg = Message(src=9, src_port=7, dst=0, dst_port=1,
                  meta={"op": "W", "key": 8})  # owner is core 0
    app.on_complete(msg, _FakeHost(0), 0)
    assert stats.wrong_core == 1


def test_kv_uniform_keys_balance_within_three_percent():
    rng = RngStream(5, 5)
    n = 20_000
    counts = [0, 0, 0, 0]
    for _ in range(n):
        counts[rng.randrange(40_000) % 4] += 1
    for c in counts:
        assert abs(c - n / 4) <= 0.03 * (n / 4)


# -- chain replication ------------------------------------------------------------

def test_chain_forwarding_order_and_tail_ack():
    chain = [1, 2, 3]
    meta = {"op": "W", "key": 1, "client": 99, "client_port": 7}
    m = Message(src=99, src_port=7, dst=1, dst_port=0, data=bytes(72), meta=meta)
    head = ChainReplicaApp(0, chain, 0, ns(194), ns(194))
    out = head.on_complete(m, _FakeHost(1), 0)[0]
    assert (out.dst, out.dst_port) == (2, 0)
    mid = ChainReplicaApp(1, chain, 0, ns(194), ns(194))
    out = mid.on_complete(out, _FakeHost(2), 0)[0]
    assert out.dst == 3
    tail = ChainReplicaApp(2, chain, 0, ns(194), ns(194))
    ack = tail.on_complete(out, _FakeHost(3), 0)[0]
    assert (ack.dst, ack.dst_port) == (99, 7)


def test_chain_read_only_at_tail():
    chain = [1, 2, 3]
    head = ChainReplicaApp(0, chain, 0, ns(194), ns(194))
    m = Message(src=99, src_port=7, dst=1, dst_port=0,
                meta={"op": "R", "key": 1, "client": 99, "client_port": 7})
    with pytest.raises(SimError):
        head.service_ps(m, None)


def test_chain_degenerate_sum_zero_service_zero_nic():
    # zero service + zero NIC latency collapses to client compute plus
    # 4 x (43ns + serialization)
    cfg = dict(preset_config("chain_replication"))
    cfg["write_service_ns"] = 0.0
    from nanosim import scenarios
    from nanosim.nic import ZERO_NIC

    measured = _chain_single_with_nic(cfg, "W", zero_nic=True)
    expected = chain_write_analytic_ps(cfg, nic=ZERO_NIC)
    assert measured == expected
    # and the analytic form is literally 130ns + sum of the four hops
    from nanosim.engine import serialization_ps
    from nanosim.fabric import DEFAULT_RATE_BPS
    from nanosim.transport import APP_HEADER_BYTES
    req = APP_HEADER_BYTES + 8 + cfg["value_bytes"] + 64
    ack = APP_HEADER_BYTES + 64
    hops = 3 * (ns(43) + serialization_ps(req, DEFAULT_RATE_BPS))
    hops += ns(43) + serialization_ps(ack, DEFAULT_RATE_BPS)
    assert expected == ns(130) + hops


def _chain_single_with_nic(cfg, op, zero_nic=False):
    from nanosim import scenarios
    from nanosim.engine import Engine
    from nanosim.fabric import Link, DEFAULT_RATE_BPS
    from nanosim.host import make_loadgen_host
    from nanosim.nic import ZERO_NIC as Z

    engine = Engine()
    zls, chain_hosts, _ = scenarios._build_chain(engine, cfg,
                                                 nic_cfg=Z if zero_nic else None)
    done = {}
    gen = make_loadgen_host(engine, 1000, lambda m: done.setdefault("t", engine.now))
    gen.uplink = Link(engine, zls, DEFAULT_RATE_BPS, ns(cfg["link_ns"]))
    zls.attach(1000, gen, down_prop_ps=0)
    key = 7
    data = key.to_bytes(8, "little")
    if op == "W":
        data += kv_value(key, cfg["value_bytes"])
    dst = chain_hosts[-1] if op == "R" else chain_hosts[0]
    msg = Message(src=1000, src_port=7, dst=dst, dst_port=0, data=data,
                  meta={"op": op, "key": key, "client": 1000, "client_port": 7,
                        "req": 0})
    engine.at(ns(cfg["client_compute_ns"]), gen.send, msg)
    engine.run_until(us(100))
    return done["t"]


def test_chain_write_and_read_match_analytic_exactly():
    cfg = preset_config("chain_replication")
    assert run_chain_single(cfg, "W") == chain_write_analytic_ps(cfg)
    assert run_chain_single(cfg, "R") == chain_read_analytic_ps(cfg)


# -- calibrated MICA latency -------------------------------------------------------

def test_mica_low_load_p99_matches_calibration():
    from nanosim.scenarios import run_mica_kv
    from nanosim.workload import percentile
    cfg = apply_overrides(preset_config("mica_kv"),
                          ['loads=[0.05]', 'policies=["jbsq"]',
                           'num_requests=5000'])
    res = run_mica_kv(cfg)
    (rs, stats, sel) = res.extra[("jbsq", 0.05)]
    p99 = percentile(rs.latencies_ps(), 99)
    assert abs(p99 - 592_000) <= 0.1 * 592_000
    assert stats.wrong_core == 0
