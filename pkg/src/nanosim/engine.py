"""Deterministic event-driven simulation kernel.

Time is an integer count of simulated picoseconds. All timing constants are
converted to integer picoseconds up front so that event ordering and CSV
output are exact and reproducible: there is no floating-point accumulation
anywhere on the simulated timeline.

Events are totally ordered by (fire time, insertion sequence), so events
scheduled for the same instant are delivered FIFO in schedule order.
"""

from __future__ import annotations

import heapq
import math

# One CPU cycle at the 3.2 GHz target clock is 312.5 ps. Cycle counts are
# converted via ps = cycles * 625 / 2, rounded half-up for odd counts.
PS_PER_NS = 1_000
PS_PER_US = 1_000_000
CPU_GHZ = 3.2

_U64 = (1 << 64) - 1
_SM64_GAMMA = 0x9E3779B97F4A7C15


class SimError(Exception):
    """Fatal configuration or invariant error; the simulation aborts."""


def ns(value: float) -> int:
    """Nanoseconds (int or float) to integer picoseconds."""
    return round(value * PS_PER_NS)


def us(value: float) -> int:
    return round(value * PS_PER_US)


def fmt_ns(ps: int) -> str:
    """Exact decimal rendering of a picosecond timestamp in ns (3 decimals)."""
    if ps < 0:
        return "-" + fmt_ns(-ps)
    return f"{ps // 1000}.{ps % 1000:03d}"


def cycles_to_ps(cycles: int) -> int:
    """3.2 GHz cycles to ps; exact for even counts, half-up for odd."""
    return (cycles * 625 + 1) // 2


def serialization_ps(wire_bytes: int, rate_bps: int) -> int:
    """Time to serialize a frame onto a link, rounded up to whole ps."""
    bits = wire_bytes * 8
    return -(-bits * 1_000_000_000_000 // rate_bps)


class EventHandle:
    """Permits cancellation of a scheduled event."""

    __slots__ = ("fire_at", "seq", "fn", "args", "cancelled")

    def __init__(self, fire_at, seq, fn, args):
        self.fire_at = fire_at
        self.seq = seq
        self.fn = fn
        self.args = args
        self.cancelled = False

    def cancel(self):
        self.cancelled = True


class Engine:
    """Single-threaded deterministic event loop with a picosecond clock."""

    def __init__(self):
        self.now = 0
        self._heap = []
        self._seq = 0
        self.events_processed = 0

    def at(self, fire_at: int, fn, *args) -> EventHandle:
        if fire_at < self.now:
            raise SimError(
                f"event scheduled in the past: fire_at={fire_at} < now={self.now} ({fn})"
            )
        handle = EventHandle(fire_at, self._seq, fn, args)
        self._seq += 1
        heapq.heappush(self._heap, (fire_at, handle.seq, handle))
        return handle

    def after(self, delay: int, fn, *args) -> EventHandle:
        return self.at(self.now + delay, fn, *args)

    def cancel(self, handle: EventHandle):
        handle.cancel()

    def run_until(self, limit: int) -> int:
        """Process all events with fire_at <= limit.

        Returns the final clock, i.e. the fire time of the last processed
        event (the clock does not jump to `limit` when the queue drains).
        """
        heap = self._heap
        while heap and heap[0][0] <= limit:
            fire_at, _, handle = heapq.heappop(heap)
            if handle.cancelled:
                continue
            self.now = fire_at
            self.events_processed += 1
            handle.fn(*handle.args)
        return self.now

    def run(self) -> int:
        return self.run_until((1 << 63) - 1)

    def pending(self) -> int:
        return sum(1 for _, _, h in self._heap if not h.cancelled)


def _sm64_mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _U64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _U64
    return z ^ (z >> 31)


def fnv1a64(name: str) -> int:
    """Stable string hash used to derive per-component RNG stream ids."""
    h = 0xCBF29CE484222325
    for b in name.encode():
        h = ((h ^ b) * 0x100000001B3) & _U64
    return h


class RngStream:
    """Counter-based 64-bit PRNG (splitmix64) with independent streams.

    The output for state s is splitmix64(s): advance by the golden gamma,
    then mix. The reference sequence for seed 0, stream derived as state 0,
    starts 0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F
    (the published splitmix64 test vector). Distinct (seed, stream_id)
    pairs give independent sequences, so adding a component never perturbs
    another component's draws. The raw u64 stream is pure integer math and
    identical on every platform; float transforms use IEEE-754 doubles.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = seed & _U64
        self.stream_id = stream_id & _U64
        self._state = (self.seed + _SM64_GAMMA * self.stream_id) & _U64

    def u64(self) -> int:
        self._state = (self._state + _SM64_GAMMA) & _U64
        return _sm64_mix(self._state)

    def random(self) -> float:
        """Uniform in [0, 1) with 53 bits."""
        return (self.u64() >> 11) * 2.0**-53

    def randrange(self, n: int) -> int:
        """Uniform integer in [0, n) via rejection sampling (unbiased)."""
        if n <= 0:
            raise ValueError("randrange bound must be positive")
        limit = _U64 - (_U64 + 1) % n
        while True:
            x = self.u64()
            if x <= limit:
                return x % n

    def exp_ps(self, rate_rps: float) -> int:
        """Exponential inter-arrival gap in ps for a Poisson process.

        Always returns >= 1 ps so arrivals strictly advance.
        """
        if rate_rps <= 0:
            raise ValueError("rate must be positive")
        u = ((self.u64() >> 11) + 1) * 2.0**-53  # in (0, 1]
        return max(1, round(-math.log(u) / rate_rps * 1e12))

    def chance(self, p: float) -> bool:
        return self.random() < p


def derive_seed(master_seed: int, index: int) -> int:
    """Per-run seed for sweep point `index`, reproducible in isolation."""
    return _sm64_mix((master_seed + _SM64_GAMMA * (index + 1)) & _U64)
