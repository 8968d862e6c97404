"""Core model with local queues and the hardware thread scheduler.

Scheduling rules (HW_INTERRUPT mode):

* A thread is eligible ("active") when it has a queued message or a
  preempted message in flight. The scheduler fires an interrupt whenever
  the running thread is no longer the highest-priority eligible thread:
  strictly higher effective priority preempts a message in service; if the
  running thread is between messages, any eligible thread wins. Within a
  priority level the thread whose head-of-queue message arrived first runs
  next (FIFO by message arrival), and a message already in service is
  never displaced by an equal-priority thread.
* A context switch costs 160 cycles (50ns); the core does no work during
  the switch and the winner is chosen when the switch completes.
* Priority-0 threads with bounded message-processing time are downgraded
  to priority 1 the moment a message exceeds the bound. By default the
  downgrade is sticky (the paper's trajectory: one overrun and the thread
  is permanently below conforming threads); `mpt_sticky=False` restores
  the base priority at the thread's next message start.

TIMER mode disables the arrival-driven interrupt: scheduling decisions are
applied only at timer boundaries (every 5us by default). Between
boundaries the running thread keeps draining its own queue, and a thread
whose own message arrives while it is spinning idle starts immediately
(it is polling; no interrupt is needed).

Preemption preserves remaining service time exactly; the sum of a
message's run intervals always equals its sampled service time.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from enum import Enum

from .engine import Engine, SimError, cycles_to_ps, us
from .transport import Message

CTX_SWITCH_CYCLES = 160  # 50ns at 3.2 GHz


class SchedMode(Enum):
    HW_INTERRUPT = "hw"
    TIMER = "timer"


class ThreadState(Enum):
    IDLE = "idle"
    ACTIVE = "active"
    RUNNING = "running"


@dataclass
class SchedulerConfig:
    mode: SchedMode = SchedMode.HW_INTERRUPT
    timer_period_ps: int = us(5)
    ctx_switch_ps: int = cycles_to_ps(CTX_SWITCH_CYCLES)
    mpt_enabled: bool = False
    mpt_bound_ps: int = us(1)
    mpt_sticky: bool = True
    idle_timeout_ps: int = us(5)
    max_threads_per_core: int = 4


class Tcb:
    """Per-thread scheduler state."""

    def __init__(self, thread_id: str, port: int, priority: int, app, rng, index: int):
        if not 0 <= priority <= 3:
            raise SimError(f"priority {priority} outside 0..3")
        self.thread_id = thread_id
        self.port = port
        self.base_priority = priority
        self.effective_priority = priority
        self.app = app
        self.rng = rng
        self.index = index
        self.queue: deque = deque()      # (msg, arrival_ps)
        self.in_flight: Message | None = None
        self.in_flight_arrival = 0
        self.remaining_ps = 0
        self.service_ps = 0
        self.accounted_ps = 0
        self.msg_start_ts = 0
        # metrics
        self.processed = 0
        self.preemptions = 0
        self.downgrades = 0
        self.busy_ps = 0

    @property
    def has_work(self) -> bool:
        return self.in_flight is not None or bool(self.queue)

    @property
    def fifo_ts(self) -> int:
        if self.in_flight is not None:
            return self.in_flight_arrival
        return self.queue[0][1]

    def sort_key(self):
        return (self.effective_priority, self.fifo_ts, self.index)

    def state(self, core) -> ThreadState:
        if core.current is self and not core._switching:
            return ThreadState.RUNNING
        return ThreadState.ACTIVE if self.has_work else ThreadState.IDLE


class Core:
    def __init__(self, engine: Engine, host, core_id: int,
                 cfg: SchedulerConfig | None = None):
        self.engine = engine
        self.host = host
        self.core_id = core_id
        self.cfg = cfg or SchedulerConfig()
        self.threads: list[Tcb] = []
        self.by_port: dict[int, Tcb] = {}
        self.current: Tcb | None = None
        self._switching = False
        self._run_start = 0
        self._completion = None
        self._mpt = None
        self._idle_rotate = None
        self.ctx_switches = 0
        if self.cfg.mode is SchedMode.TIMER:
            engine.at(engine.now + self.cfg.timer_period_ps, self._timer_tick)

    # -- thread lifecycle ---------------------------------------------------

    def bind_thread(self, port: int, priority: int, app, rng) -> Tcb:
        if len(self.threads) >= self.cfg.max_threads_per_core:
            raise SimError(f"core {self.core_id}: thread table full")
        if port in self.by_port:
            raise SimError(f"core {self.core_id}: port {port} already bound")
        tcb = Tcb(f"{self.host.name}/c{self.core_id}/t{len(self.threads)}",
                  port, priority, app, rng, len(self.threads))
        self.threads.append(tcb)
        self.by_port[port] = tcb
        if self.host.selector is not None:
            self.host.selector.bind(port, self.core_id)
        if self.current is None:
            self.current = tcb  # boot thread, installed without a switch
        return tcb

    # -- message flow ---------------------------------------------------------

    def enqueue_message(self, port: int, msg: Message):
        tcb = self.by_port[port]
        tcb.queue.append((msg, self.engine.now))
        self._cancel_idle_rotation()
        if self.cfg.mode is SchedMode.HW_INTERRUPT:
            self._resched()
        elif (not self._switching and tcb is self.current
              and self.current.in_flight is None):
            self._start_next(tcb)  # polling thread sees its own arrival

    def _start_next(self, tcb: Tcb):
        msg, arrival = tcb.queue.popleft()
        if not self.cfg.mpt_sticky:
            tcb.effective_priority = tcb.base_priority
        tcb.in_flight = msg
        tcb.in_flight_arrival = arrival
        tcb.service_ps = tcb.app.service_ps(msg, tcb.rng)
        tcb.remaining_ps = tcb.service_ps
        tcb.accounted_ps = 0
        tcb.msg_start_ts = self.engine.now
        if self.cfg.mpt_enabled and tcb.effective_priority == 0:
            self._mpt = self.engine.after(self.cfg.mpt_bound_ps, self._mpt_fire, tcb)
        self._begin_run(tcb)

    def _begin_run(self, tcb: Tcb):
        self._run_start = self.engine.now
        if tcb.remaining_ps == 0:
            # instantaneous apps (loopback) complete inline so their response
            # reaches the egress arbiter at the same event instant; recursion
            # depth is bounded by the local queue length
            self._complete(tcb)
        else:
            self._completion = self.engine.after(tcb.remaining_ps,
                                                 self._complete, tcb)

    def _complete(self, tcb: Tcb):
        now = self.engine.now
        ran = now - self._run_start
        tcb.accounted_ps += ran
        tcb.busy_ps += ran
        if tcb.accounted_ps != tcb.service_ps:
            raise SimError("service-time conservation violated")
        if self._mpt is not None:
            self._mpt.cancel()
            self._mpt = None
        msg = tcb.in_flight
        tcb.in_flight = None
        tcb.processed += 1
        self._completion = None
        for resp in tcb.app.on_complete(msg, self.host, now):
            self.host.send(resp)
        if self.host.selector is not None:
            self.host.selector.on_done(self.core_id, tcb.port)
        if self.cfg.mode is SchedMode.HW_INTERRUPT:
            self._resched()
        elif tcb.queue:
            self._start_next(tcb)

    # -- HW-interrupt scheduling ------------------------------------------------

    def _best(self) -> Tcb | None:
        best = None
        for t in self.threads:
            if t.has_work and (best is None or t.sort_key() < best.sort_key()):
                best = t
        return best

    def _resched(self):
        if self._switching:
            return  # winner chosen when the switch completes
        cur = self.current
        cand = self._best()
        if cand is None:
            self._arm_idle_rotation()
            return
        if cand is cur:
            if cur.in_flight is None:
                self._start_next(cur)
            return
        if cur is None:
            self.current = cand
            self._start_next(cand)
            return
        if cur.in_flight is not None:
            # a message in service yields only to strictly higher priority
            if cand.effective_priority < cur.effective_priority:
                self._begin_switch()
        else:
            self._begin_switch()

    def _begin_switch(self):
        cur = self.current
        if cur is not None and cur.in_flight is not None:
            ran = self.engine.now - self._run_start
            cur.remaining_ps -= ran
            cur.accounted_ps += ran
            cur.busy_ps += ran
            cur.preemptions += 1
            self._completion.cancel()
            self._completion = None
        self._switching = True
        self.ctx_switches += 1
        self.engine.after(self.cfg.ctx_switch_ps, self._switch_done)

    def _switch_done(self):
        self._switching = False
        cand = self._best()
        if cand is None:
            self._arm_idle_rotation()
            return
        self.current = cand
        if cand.in_flight is not None:
            self._begin_run(cand)   # resume with remaining time preserved
        else:
            self._start_next(cand)

    def _mpt_fire(self, tcb: Tcb):
        self._mpt = None
        if tcb.in_flight is None or tcb.effective_priority != 0:
            return
        tcb.effective_priority = 1
        tcb.downgrades += 1
        if self.cfg.mode is SchedMode.HW_INTERRUPT:
            self._resched()

    # -- TIMER-mode scheduling --------------------------------------------------

    def _timer_tick(self):
        self.engine.after(self.cfg.timer_period_ps, self._timer_tick)
        if self._switching:
            return
        cur = self.current
        cand = self._best()
        if cand is None or cand is cur:
            if cand is cur and cur.in_flight is None and cur.queue:
                self._start_next(cur)
            return
        if cur is not None and cur.in_flight is not None:
            if cand.effective_priority >= cur.effective_priority:
                return
        self._begin_switch()

    # -- idle rotation ------------------------------------------------------------

    def _arm_idle_rotation(self):
        if self.cfg.mode is not SchedMode.HW_INTERRUPT or len(self.threads) < 2:
            return
        if self._idle_rotate is None:
            self._idle_rotate = self.engine.after(self.cfg.idle_timeout_ps,
                                                  self._rotate_idle)

    def _cancel_idle_rotation(self):
        if self._idle_rotate is not None:
            self._idle_rotate.cancel()
            self._idle_rotate = None

    def _rotate_idle(self):
        # All threads idle past the timeout: rotate so each makes progress.
        self._idle_rotate = None
        if self._best() is not None or self.current is None:
            return
        nxt = self.threads[(self.current.index + 1) % len(self.threads)]
        self.current = nxt
        self.ctx_switches += 1
        self._arm_idle_rotation()

    # -- reporting ----------------------------------------------------------------

    def thread_metrics(self):
        for t in self.threads:
            yield {
                "thread": t.thread_id, "port": t.port,
                "processed": t.processed, "preemptions": t.preemptions,
                "downgrades": t.downgrades, "busy_ns": t.busy_ps // 1000,
            }
