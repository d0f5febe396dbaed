"""Unified CSMA/CA medium access with three disciplines.

DCF     802.11-like: binary exponential backoff, RTS/CTS + ACK, NAV deferral.
Z154    802.15.4-like: unslotted CSMA/CA, no ACK, bounded CCA rounds, one shot.
BAN156  802.15.6-like: prioritized CSMA/CA with immediate ACK and 3 retries.

All MAC behavior is event-driven through the engine; per-node state machines
share nothing but the medium.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .radio import airtime, control_airtime

BROADCAST = -1

# drop/failure outcomes surfaced to routing
RETRY_EXHAUSTED = "retry-exhausted"
CCA_BUSY_ABORT = "cca-busy-abort"


@dataclass(frozen=True)
class MacTiming:
    slot: float
    sifs: float
    difs: float
    cca: float


@dataclass(frozen=True)
class MacDiscipline:
    kind: str  # DCF | Z154 | BAN156
    cw_min: int
    cw_max: int
    backoff_exponent: int  # Z154 only
    retransmit_limit: int
    max_cca_rounds: int
    ack: bool
    rts_cts: bool
    timing: MacTiming


DISCIPLINES = {
    "DCF": MacDiscipline(
        kind="DCF",
        cw_min=31,
        cw_max=1023,
        backoff_exponent=0,
        retransmit_limit=6,
        max_cca_rounds=0,  # defers as long as the channel stays busy
        ack=True,
        rts_cts=True,
        timing=MacTiming(slot=20e-6, sifs=10e-6, difs=50e-6, cca=0.0),
    ),
    "Z154": MacDiscipline(
        kind="Z154",
        cw_min=0,
        cw_max=0,
        backoff_exponent=3,  # macMinBE = macMaxBE = 3
        retransmit_limit=0,
        max_cca_rounds=5,
        ack=False,
        rts_cts=False,
        timing=MacTiming(slot=320e-6, sifs=192e-6, difs=0.0, cca=128e-6),
    ),
    "BAN156": MacDiscipline(
        kind="BAN156",
        cw_min=8,  # user priority 2 bounds
        cw_max=32,
        backoff_exponent=0,
        retransmit_limit=3,
        max_cca_rounds=5,
        ack=True,
        rts_cts=False,
        timing=MacTiming(slot=145e-6, sifs=75e-6, difs=0.0, cca=145e-6),
    ),
}


def contention_window(discipline: MacDiscipline, attempt: int) -> int:
    """Upper bound of the backoff window for the given 1-based attempt."""
    if attempt < 1:
        raise ValueError("attempt is 1-based")
    if discipline.kind == "DCF":
        return min((discipline.cw_min + 1) << (attempt - 1), discipline.cw_max + 1) - 1
    if discipline.kind == "Z154":
        return (1 << discipline.backoff_exponent) - 1
    if discipline.kind == "BAN156":
        # CW doubles on every second failure, capped at CWmax
        return min(discipline.cw_min << ((attempt - 1) // 2), discipline.cw_max)
    raise ValueError(f"unknown discipline {discipline.kind}")


def draw_backoff(discipline: MacDiscipline, attempt: int, rng) -> int:
    """Backoff slots for the given attempt; bounds differ per discipline."""
    cw = contention_window(discipline, attempt)
    if discipline.kind == "BAN156":
        return rng.randint(1, cw)
    return rng.randrange(cw + 1)


class Frame:
    """One frame on the air. `net` is the opaque network-layer message."""

    __slots__ = ("src", "dst", "kind", "duration", "net", "tag", "nav_s", "regs", "packet")

    def __init__(self, src, dst, kind, duration, net=None, tag=None, nav_s=0.0, packet=None):
        self.src = src
        self.dst = dst
        self.kind = kind  # data | rts | cts | ack
        self.duration = duration
        self.net = net
        self.tag = tag
        self.nav_s = nav_s
        self.regs = ()
        self.packet = packet


class _Entry:
    __slots__ = ("net", "dst", "app_bytes", "hdr_bytes", "packet", "priority", "seq", "attempt", "rounds")

    def __init__(self, net, dst, app_bytes, hdr_bytes, packet, priority, seq):
        self.net = net
        self.dst = dst
        self.app_bytes = app_bytes
        self.hdr_bytes = hdr_bytes
        self.packet = packet
        self.priority = priority
        self.seq = seq
        self.attempt = 1
        self.rounds = 0


class CsmaMac:
    """Per-node MAC state machine bound to one medium and one energy ledger."""

    def __init__(
        self,
        node: int,
        profile,
        discipline: MacDiscipline,
        engine,
        medium,
        energy,
        rng,
        queue_cap: int = 50,
    ):
        self.node = node
        self.profile = profile
        self.disc = discipline
        self.engine = engine
        self.medium = medium
        self.energy = energy
        self.rng = rng
        self.queue_cap = queue_cap
        self.queue: list[_Entry] = []
        self.current: _Entry | None = None
        self.nav_until = 0.0
        self._seq = 0
        self._await = None  # ("cts"|"ack", tag)
        self._timer = None
        self._last_rx_seq = {}
        self._ctl_air = control_airtime(profile)
        self._tgt = f"n{node}"
        # routing hooks, bound after construction
        self.on_receive = lambda net, src: None
        self.on_send_done = lambda entry, ok, reason: None
        medium.macs[node] = self

    # --- energy hooks used by the medium -----------------------------------

    def energy_rx(self, seconds: float):
        if seconds > 0:
            self.energy.add_rx(self.node, seconds)

    # --- submission ---------------------------------------------------------

    def send(self, net, dst, app_bytes, hdr_bytes=0, packet=None, priority=2) -> bool:
        """Queue a frame; False means the drop-tail queue was full."""
        if len(self.queue) >= self.queue_cap:
            return False
        entry = _Entry(net, dst, app_bytes, hdr_bytes, packet, priority, self._seq)
        self._seq += 1
        # higher priority first, FIFO within a priority class
        if entry.priority != 2 and any(e.priority != entry.priority for e in self.queue):
            self.queue.append(entry)
            self.queue.sort(key=lambda e: (-e.priority, e.seq))
        else:
            self.queue.append(entry)
        if self.current is None:
            self._service_next()
        return True

    def pending(self) -> int:
        return len(self.queue) + (1 if self.current is not None else 0)

    # --- service loop -------------------------------------------------------

    def _service_next(self, _=None):
        if self.current is not None or not self.queue:
            return
        self.current = self.queue.pop(0)
        self.current.attempt = 1
        self.current.rounds = 0
        if self.disc.kind == "DCF":
            self._dcf_sense()
        elif self.disc.kind == "Z154":
            self._z_backoff()
        else:
            self._ban_backoff()

    def _entry_done(self, ok: bool, reason=None):
        entry = self.current
        self.current = None
        self._await = None
        self._cancel_timer()
        self.on_send_done(entry, ok, reason)
        if self.queue and self.current is None:
            self.engine.schedule(
                self.disc.timing.slot, self._service_next, target=self._tgt, kind="mac-next"
            )

    def _cancel_timer(self):
        if self._timer is not None:
            self._timer.cancel()
            self._timer = None

    def _busy(self) -> bool:
        if self.medium.cca_busy(self.node):
            return True
        return self.disc.kind == "DCF" and self.engine.now < self.nav_until

    def _data_duration(self, entry) -> float:
        return airtime(entry.app_bytes, self.profile, entry.hdr_bytes)

    def _transmit(self, frame):
        # clamp at the horizon so TX+RX+IDLE always sums to the run length
        remaining = self.engine.horizon - self.engine.now
        self.energy.add_tx(self.node, min(frame.duration, max(0.0, remaining)))
        self.medium.transmit(frame)

    # --- DCF ----------------------------------------------------------------

    def _dcf_sense(self, _=None):
        self.engine.schedule(
            self.disc.timing.difs, self._dcf_sense_end, target=self._tgt, kind="difs"
        )

    def _dcf_sense_end(self, _):
        if self.current is None:
            return
        if self._busy():
            self._dcf_defer()
            return
        entry = self.current
        tag = (self.node, entry.seq)
        t = self.disc.timing
        if entry.dst != BROADCAST and self.disc.rts_cts:
            data_dur = self._data_duration(entry)
            nav = 3 * t.sifs + 2 * self._ctl_air + data_dur
            frame = Frame(self.node, entry.dst, "rts", self._ctl_air, tag=tag, nav_s=nav)
            self._transmit(frame)
        else:
            self._dcf_send_data(None)

    def _dcf_defer(self):
        slots = draw_backoff(self.disc, self.current.attempt, self.rng)
        self.engine.schedule(
            slots * self.disc.timing.slot, self._dcf_sense, target=self._tgt, kind="backoff"
        )

    def _dcf_send_data(self, _):
        entry = self.current
        if entry is None:
            return
        t = self.disc.timing
        tag = (self.node, entry.seq)
        data_dur = self._data_duration(entry)
        unicast = entry.dst != BROADCAST
        nav = t.sifs + self._ctl_air if unicast else 0.0
        frame = Frame(self.node, entry.dst, "data", data_dur, net=entry.net, tag=tag, nav_s=nav,
                      packet=entry.packet)
        self._transmit(frame)

    def _attempt_failed(self):
        entry = self.current
        self._await = None
        self._cancel_timer()
        entry.attempt += 1
        entry.rounds = 0
        if entry.attempt > self.disc.retransmit_limit + 1:
            reason = RETRY_EXHAUSTED if self.disc.ack else CCA_BUSY_ABORT
            self._entry_done(False, reason)
            return
        if self.disc.kind == "DCF":
            self._dcf_defer()
        else:
            self._ban_backoff()

    # --- Z154 ---------------------------------------------------------------

    def _z_backoff(self, _=None):
        slots = draw_backoff(self.disc, 1, self.rng)
        self.engine.schedule(
            slots * self.disc.timing.slot, self._z_cca, target=self._tgt, kind="backoff"
        )

    def _z_cca(self, _):
        self.engine.schedule(self.disc.timing.cca, self._z_cca_end, target=self._tgt, kind="cca")

    def _z_cca_end(self, _):
        entry = self.current
        if entry is None:
            return
        if self._busy():
            entry.rounds += 1
            if entry.rounds >= self.disc.max_cca_rounds:
                self._entry_done(False, CCA_BUSY_ABORT)
            else:
                self._z_backoff()
            return
        tag = (self.node, entry.seq)
        frame = Frame(self.node, entry.dst, "data", self._data_duration(entry), net=entry.net, tag=tag,
                      packet=entry.packet)
        self._transmit(frame)

    # --- BAN156 -------------------------------------------------------------

    def _ban_backoff(self, _=None):
        slots = draw_backoff(self.disc, self.current.attempt, self.rng)
        self.engine.schedule(
            slots * self.disc.timing.slot, self._ban_cca, target=self._tgt, kind="backoff"
        )

    def _ban_cca(self, _):
        self.engine.schedule(self.disc.timing.cca, self._ban_cca_end, target=self._tgt, kind="cca")

    def _ban_cca_end(self, _):
        entry = self.current
        if entry is None:
            return
        if self._busy():
            entry.rounds += 1
            if entry.rounds >= self.disc.max_cca_rounds:
                entry.rounds = 0
                entry.attempt += 1
                if entry.attempt > self.disc.retransmit_limit + 1:
                    self._entry_done(False, CCA_BUSY_ABORT)
                else:
                    self._ban_backoff()
            else:
                self._ban_backoff()
            return
        tag = (self.node, entry.seq)
        frame = Frame(self.node, entry.dst, "data", self._data_duration(entry), net=entry.net, tag=tag,
                      packet=entry.packet)
        self._transmit(frame)

    # --- sender-side completions ---------------------------------------------

    def on_tx_complete(self, frame):
        t = self.disc.timing
        if frame.kind == "rts":
            timeout = t.sifs + self._ctl_air + 2 * t.slot
            self._await = ("cts", frame.tag)
            self._timer = self.engine.schedule(
                timeout, self._ctl_timeout, target=self._tgt, kind="cts-timeout"
            )
        elif frame.kind == "data" and self.current is not None and frame.tag == (self.node, self.current.seq):
            if frame.dst == BROADCAST or not self.disc.ack:
                self._entry_done(True)
            else:
                timeout = t.sifs + self._ctl_air + 2 * t.slot
                self._await = ("ack", frame.tag)
                self._timer = self.engine.schedule(
                    timeout, self._ctl_timeout, target=self._tgt, kind="ack-timeout"
                )
        # cts/ack completions need no follow-up

    def _ctl_timeout(self, _):
        self._timer = None
        if self.current is not None:
            self._attempt_failed()

    # --- receiver side --------------------------------------------------------

    def on_frame_rx(self, frame):
        now = self.engine.now
        t = self.disc.timing
        if frame.kind == "rts":
            if frame.dst == self.node:
                nav = frame.nav_s - t.sifs - self._ctl_air
                cts = Frame(self.node, frame.src, "cts", self._ctl_air, tag=frame.tag, nav_s=nav)
                self.engine.schedule(t.sifs, self._send_ctl, cts, target=self._tgt, kind="cts")
            else:
                self.nav_until = max(self.nav_until, now + frame.nav_s)
        elif frame.kind == "cts":
            if frame.dst == self.node and self._await == ("cts", frame.tag):
                self._await = None
                self._cancel_timer()
                self.engine.schedule(t.sifs, self._dcf_send_data, target=self._tgt, kind="data")
            elif frame.dst != self.node:
                self.nav_until = max(self.nav_until, now + frame.nav_s)
        elif frame.kind == "ack":
            if frame.dst == self.node and self._await == ("ack", frame.tag):
                self._await = None
                self._cancel_timer()
                self._entry_done(True)
        elif frame.kind == "data":
            if frame.dst == self.node:
                if self.disc.ack:
                    ack = Frame(self.node, frame.src, "ack", self._ctl_air, tag=frame.tag)
                    self.engine.schedule(t.sifs, self._send_ctl, ack, target=self._tgt, kind="ack")
                    if self._last_rx_seq.get(frame.src) == frame.tag:
                        return  # retransmission of an already delivered frame
                    self._last_rx_seq[frame.src] = frame.tag
                self.on_receive(frame.net, frame.src)
            elif frame.dst == BROADCAST:
                self.on_receive(frame.net, frame.src)
            elif self.disc.kind == "DCF" and frame.nav_s > 0:
                self.nav_until = max(self.nav_until, now + frame.nav_s)

    def _send_ctl(self, frame):
        # a node cannot transmit two frames at once; losing the reply forces a retry
        if self.medium.radios[self.node].tx_until > self.engine.now:
            return
        self._transmit(frame)
