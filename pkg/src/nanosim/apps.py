"""Built-in application models.

An app supplies the on-core service time for each message and the
response messages emitted at completion. Service times are either fixed,
drawn from a discrete mixture, or derived from a word-cost model
(cycles per 8B word plus fixed per-message cycles at 3.2 GHz).
"""

from __future__ import annotations

import struct

from .engine import SimError, cycles_to_ps
from .transport import Message, reply_to

WORD = 8


def incremented_words(data: bytes) -> bytes:
    if len(data) % WORD:
        raise SimError("loopback message length must be a multiple of 8B")
    words = struct.unpack(f"<{len(data) // WORD}Q", data)
    bumped = [(w + 1) & 0xFFFFFFFFFFFFFFFF for w in words]
    return struct.pack(f"<{len(bumped)}Q", *bumped)


class LoopbackApp:
    """Echo with increment: returns the message to its sender with every
    payload word incremented. Service time zero: the reference latency
    numbers fold the trivial app into the pipeline constants."""

    def service_ps(self, msg, rng):
        return 0

    def on_complete(self, msg, host, now):
        return [reply_to(msg, incremented_words(msg.data))]


class FixedApp:
    """Fixed service time, fixed-size reply (empty data = header-only)."""

    def __init__(self, service_ps: int, reply_data: bytes = b"", reply: bool = True):
        if service_ps < 0:
            raise SimError("service time must be >= 0")
        self._service = service_ps
        self._reply_data = reply_data
        self._reply = reply

    def service_ps(self, msg, rng):
        return self._service

    def on_complete(self, msg, host, now):
        return [reply_to(msg, self._reply_data)] if self._reply else []


class BimodalApp:
    """Mixture service: short with probability 1-p_long, long otherwise.

    If the request carries a pre-classified service (meta["svc_ps"]), that
    wins, so one generator-side classification drives every policy under
    comparison identically.
    """

    def __init__(self, short_ps: int, long_ps: int, p_long: float):
        self.short_ps = short_ps
        self.long_ps = long_ps
        self.p_long = p_long

    def service_ps(self, msg, rng):
        if msg.meta and "svc_ps" in msg.meta:
            return msg.meta["svc_ps"]
        return self.long_ps if rng.chance(self.p_long) else self.short_ps

    def on_complete(self, msg, host, now):
        return [reply_to(msg)]


class WordCostApp:
    """Throughput app: cycles = words * cycles_per_word + cycles_per_msg."""

    def __init__(self, cycles_per_word: int, cycles_per_msg: int,
                 reply: bool = False, reply_data: bytes = b""):
        self.cycles_per_word = cycles_per_word
        self.cycles_per_msg = cycles_per_msg
        self._reply = reply
        self._reply_data = reply_data

    def cycles_for(self, msg_len: int) -> int:
        words = -(-msg_len // WORD)
        return words * self.cycles_per_word + self.cycles_per_msg

    def service_ps(self, msg, rng):
        return cycles_to_ps(self.cycles_for(msg.length))

    def on_complete(self, msg, host, now):
        return [reply_to(msg, self._reply_data)] if self._reply else []


# Calibrated word costs for the single-core throughput benchmark: the
# unrolled fixed-length loop spends nearly every cycle on a network word;
# the variable-length loop pays ~2 extra cycles per word for branch and
# increment bookkeeping.
FIXED_LEN_RX = dict(cycles_per_word=1, cycles_per_msg=6)
FIXED_LEN_TX = dict(cycles_per_word=1, cycles_per_msg=3)
VAR_LEN_RX = dict(cycles_per_word=3, cycles_per_msg=6)
VAR_LEN_TX = dict(cycles_per_word=3, cycles_per_msg=3)


def kv_value(key: int, value_bytes: int) -> bytes:
    """Deterministic pre-seeded store content for a key."""
    block = (key & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little")
    reps = -(-value_bytes // 8)
    return (block * reps)[:value_bytes]


class KvStats:
    def __init__(self):
        self.reads = 0
        self.writes = 0
        self.wrong_core = 0


class KvApp:
    """MICA-style key-value server thread for one core.

    Requests carry meta: op ("R"/"W") and key. In static mode each key has
    an owner core (key mod num_cores) and arrivals at any other core count
    as correctness violations; JBSQ mode ignores ownership (matching how
    the balanced-selection comparison is run even though it would be
    application-incorrect).
    """

    def __init__(self, core_id: int, num_cores: int, stats: KvStats,
                 read_ps: int, write_ps: int, value_bytes: int = 512,
                 static: bool = False):
        self.core_id = core_id
        self.num_cores = num_cores
        self.stats = stats
        self.read_ps = read_ps
        self.write_ps = write_ps
        self.value_bytes = value_bytes
        self.static = static

    def service_ps(self, msg, rng):
        return self.read_ps if msg.meta["op"] == "R" else self.write_ps

    def on_complete(self, msg, host, now):
        key = msg.meta["key"]
        if self.static and key % self.num_cores != self.core_id:
            self.stats.wrong_core += 1
        if msg.meta["op"] == "R":
            self.stats.reads += 1
            return [reply_to(msg, kv_value(key, self.value_bytes))]
        self.stats.writes += 1
        return [reply_to(msg)]


class ChainReplicaApp:
    """Chain-replication replica on top of the KV store.

    WRITE requests visit replicas in chain order; each applies the write
    and forwards, and the tail acknowledges the client directly. READs go
    straight to the tail.
    """

    def __init__(self, position: int, chain: list[int], chain_port: int,
                 write_ps: int, read_ps: int, value_bytes: int = 64):
        self.position = position
        self.chain = chain
        self.chain_port = chain_port
        self.write_ps = write_ps
        self.read_ps = read_ps
        self.value_bytes = value_bytes

    @property
    def is_tail(self) -> bool:
        return self.position == len(self.chain) - 1

    def service_ps(self, msg, rng):
        if msg.meta["op"] == "R":
            if not self.is_tail:
                raise SimError("READ routed to a non-tail replica")
            return self.read_ps
        return self.write_ps

    def on_complete(self, msg, host, now):
        meta = msg.meta
        if meta["op"] == "R":
            return [Message(src=host.host_id, src_port=self.chain_port,
                            dst=meta["client"], dst_port=meta["client_port"],
                            data=kv_value(meta["key"], self.value_bytes), meta=meta)]
        if self.is_tail:
            return [Message(src=host.host_id, src_port=self.chain_port,
                            dst=meta["client"], dst_port=meta["client_port"],
                            meta=meta)]
        nxt = self.chain[self.position + 1]
        return [Message(src=host.host_id, src_port=self.chain_port,
                        dst=nxt, dst_port=self.chain_port,
                        data=msg.data, meta=meta)]
