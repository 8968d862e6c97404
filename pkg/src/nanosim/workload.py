"""Open-loop load generation, latency samples, percentiles, CSV export.

The generator is open loop: every send instant is derived from the RNG
stream alone before the run starts, so arrivals never depend on
completions. Latency is measured application-to-application: from the
instant the request is handed to the generator's transport to the instant
the response message is delivered back to the generator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .engine import Engine, RngStream, SimError, fmt_ns
from .transport import Message


@dataclass(slots=True)
class LatencySample:
    request_id: int
    priority: int
    send_ps: int
    complete_ps: int

    @property
    def latency_ps(self) -> int:
        return self.complete_ps - self.send_ps


@dataclass
class SampleSet:
    samples: list = field(default_factory=list)
    pending: dict = field(default_factory=dict)  # req -> (send_ps, priority)
    rejected: int = 0
    num_requests: int = 0
    warmup_discard: int = 0

    def add(self, sample: LatencySample):
        if sample.complete_ps < sample.send_ps:
            raise SimError("completion precedes send")
        self.samples.append(sample)

    @property
    def completed(self) -> int:
        return len(self.samples)

    @property
    def incomplete(self) -> int:
        return self.num_requests - self.completed

    def incomplete_for(self, priority: int) -> int:
        """Unfinished requests of one priority; counts only requests that
        entered the system (unfired arrivals have no priority yet)."""
        return sum(1 for _, prio in self.pending.values() if prio == priority)

    def latencies_ps(self, priority: int | None = None) -> list[int]:
        picked = [s for s in self.samples
                  if (priority is None or s.priority == priority)
                  and s.request_id >= self.warmup_discard]
        return sorted(s.latency_ps for s in picked)


def percentile(sorted_values, p: float):
    """Nearest-rank percentile: value at index ceil(p/100 * n), 1-based."""
    if not sorted_values:
        raise SimError("percentile of empty sample set")
    if not 0 < p <= 100:
        raise SimError(f"percentile {p} outside (0, 100]")
    n = len(sorted_values)
    rank = min(n, max(1, math.ceil(p * n / 100)))
    return sorted_values[rank - 1]


class LoadGen:
    """Open-loop Poisson request source bound to a loadgen host.

    `build_request(i, rng)` returns the Message for request i; its meta
    must carry "req": i (for correlation) and may carry "prio".
    """

    def __init__(self, engine: Engine, rng: RngStream, rate_rps: float,
                 num_requests: int, build_request, start_ps: int = 0,
                 warmup_discard: int = 0, pre_send_ps: int = 0):
        if rate_rps <= 0:
            raise SimError("offered rate must be positive")
        if num_requests <= 0:
            raise SimError("num_requests must be positive")
        self.engine = engine
        self.rng = rng
        self.rate_rps = rate_rps
        self.num_requests = num_requests
        self.build_request = build_request
        self.pre_send_ps = pre_send_ps  # client compute before the wire
        self.host = None  # bound via attach()
        self.results = SampleSet(num_requests=num_requests,
                                 warmup_discard=warmup_discard)
        self._pending = self.results.pending
        self._send_times = []
        t = start_ps
        for _ in range(num_requests):
            t += rng.exp_ps(rate_rps)
            self._send_times.append(t)

    def attach(self, host):
        self.host = host
        host.message_sink = self.on_response
        return self

    def start(self):
        for i, t in enumerate(self._send_times):
            self.engine.at(t, self._fire, i)

    def _fire(self, i: int):
        msg = self.build_request(i, self.rng)
        meta = msg.meta or {}
        meta["req"] = i
        msg.meta = meta
        self._pending[i] = (self.engine.now, meta.get("prio", 0))
        if self.pre_send_ps:
            self.engine.after(self.pre_send_ps, self._dispatch, i, msg)
        else:
            self._dispatch(i, msg)

    def _dispatch(self, i: int, msg: Message):
        if not self.host.send(msg):
            self._pending.pop(i)
            self.results.rejected += 1

    def on_response(self, msg: Message):
        i = msg.meta["req"]
        entry = self._pending.pop(i, None)
        if entry is None:
            return  # duplicate response; transport guarantees at most one
        send_ps, prio = entry
        self.results.add(LatencySample(i, prio, send_ps, self.engine.now))


class ClosedLoopClient:
    """Keeps exactly one request outstanding; used by the latency-bound
    property checks (each app holds at most one message at a time)."""

    def __init__(self, engine: Engine, client_index: int, build_request,
                 num_requests: int, think_ps: int = 0, start_ps: int = 0):
        self.engine = engine
        self.client_index = client_index
        self.build_request = build_request
        self.num_requests = num_requests
        self.think_ps = think_ps
        self.host = None
        self.samples: list[LatencySample] = []
        self._sent = 0
        self._send_ps = 0
        self._start_ps = start_ps

    def start(self):
        self.engine.at(self._start_ps, self._fire)

    def _fire(self):
        i = self._sent
        msg = self.build_request(i, None)
        meta = msg.meta or {}
        meta["req"] = i
        meta["cl"] = self.client_index
        msg.meta = meta
        self._send_ps = self.engine.now
        self._sent += 1
        if not self.host.send(msg):
            raise SimError("closed-loop send rejected; size the TX pool up")

    def on_response(self, msg: Message):
        i = msg.meta["req"]
        self.samples.append(LatencySample(i, msg.meta.get("prio", 0),
                                          self._send_ps, self.engine.now))
        if self._sent < self.num_requests:
            self.engine.after(max(1, self.think_ps), self._fire)


def attach_closed_loop(host, clients: list[ClosedLoopClient]):
    """Share one loadgen host among closed-loop clients (routed by meta)."""
    by_index = {c.client_index: c for c in clients}
    for c in clients:
        c.host = host
    host.message_sink = lambda msg: by_index[msg.meta["cl"]].on_response(msg)


# -- CSV export --------------------------------------------------------------

SAMPLES_HEADER = "experiment,seed,offered_rps,request_id,priority,send_ns,complete_ns,latency_ns"
SUMMARY_HEADER = "experiment,offered_rps,normalized_load,p50_ns,p99_ns,completed,incomplete"


def fmt_rate(rate: float) -> str:
    return f"{rate:.6g}"


def samples_csv_rows(experiment: str, seed: int, offered_rps: float,
                     results: SampleSet):
    for s in sorted(results.samples, key=lambda s: s.request_id):
        yield (f"{experiment},{seed},{fmt_rate(offered_rps)},{s.request_id},"
               f"{s.priority},{fmt_ns(s.send_ps)},{fmt_ns(s.complete_ps)},"
               f"{fmt_ns(s.latency_ps)}")


def summary_row(experiment: str, offered_rps: float, normalized_load: float,
                results: SampleSet, priority: int | None = None) -> str:
    lat = results.latencies_ps(priority)
    p50 = fmt_ns(percentile(lat, 50)) if lat else ""
    p99 = fmt_ns(percentile(lat, 99)) if lat else ""
    if priority is None:
        completed, incomplete = results.completed, results.incomplete
    else:
        completed = len(lat)
        incomplete = results.incomplete_for(priority)
    return (f"{experiment},{fmt_rate(offered_rps)},{normalized_load:.6f},"
            f"{p50},{p99},{completed},{incomplete}")


def write_lines(path, header: str, lines):
    with open(path, "w", newline="") as f:
        f.write(header + "\n")
        for line in lines:
            f.write(line + "\n")
