"""Deterministic discrete-event scheduler with per-entity random streams."""

from __future__ import annotations

import hashlib
import heapq
import random

import numpy as np


class SchedulingError(Exception):
    """Raised when an event is scheduled in the past (a logic bug, not recoverable)."""


class Event:
    """A scheduled callback with a (fire_time, sequence) dispatch order."""

    __slots__ = ("fire_time", "sequence", "target", "kind", "payload", "callback", "cancelled")

    def __init__(self, fire_time, sequence, target, kind, payload, callback):
        self.fire_time = fire_time
        self.sequence = sequence
        self.target = target
        self.kind = kind
        self.payload = payload
        self.callback = callback
        self.cancelled = False

    def cancel(self):
        self.cancelled = True


class Engine:
    """Event queue plus virtual clock.

    Virtual time is a float in seconds. Events firing at the same instant
    dispatch in scheduling order (monotone sequence counter). A single run
    is strictly single-threaded; nothing here is shared between runs.
    """

    def __init__(self, horizon: float = 100.0, log_sink=None):
        self.now = 0.0
        self.horizon = horizon
        self._heap: list[tuple[float, int, Event]] = []
        self._seq = 0
        self.dispatched = 0
        # optional event log: one line per dispatch, "time<TAB>entity<TAB>kind"
        self.log_sink = log_sink

    def schedule(self, delay: float, callback, payload=None, target="", kind="") -> Event:
        """Queue `callback(payload)` to fire `delay` seconds from now."""
        if delay < 0:
            raise SchedulingError(f"event scheduled {-delay:.9f}s in the past (kind={kind!r})")
        ev = Event(self.now + delay, self._seq, target, kind, payload, callback)
        self._seq += 1
        heapq.heappush(self._heap, (ev.fire_time, ev.sequence, ev))
        return ev

    def schedule_at(self, fire_time: float, callback, payload=None, target="", kind="") -> Event:
        return self.schedule(fire_time - self.now, callback, payload, target, kind)

    def run_until(self, t_end: float) -> int:
        """Dispatch every event with fire_time <= t_end; leaves now == t_end."""
        if t_end < self.now:
            raise SchedulingError(f"run_until({t_end}) precedes current time {self.now}")
        heap = self._heap
        count = 0
        log = self.log_sink
        while heap and heap[0][0] <= t_end:
            _, _, ev = heapq.heappop(heap)
            if ev.cancelled:
                continue
            self.now = ev.fire_time
            if log is not None:
                log.write(f"{ev.fire_time:.9f}\t{ev.target}\t{ev.kind}\n")
            ev.callback(ev.payload)
            count += 1
        self.now = t_end
        self.dispatched += count
        return count

    def run(self) -> int:
        return self.run_until(self.horizon)


def _purpose_id(purpose: str) -> int:
    # stable across platforms and processes (unlike hash())
    return int.from_bytes(hashlib.blake2s(purpose.encode()).digest()[:4], "little")


class RngManager:
    """Counter-based splitting of one master seed into independent streams.

    A stream is addressed by (iteration, entity, purpose). Streams are
    unaffected by which other streams exist or how much they are consumed,
    so adding a node never perturbs another node's draws.
    """

    def __init__(self, master_seed: int):
        self.master_seed = int(master_seed)
        self._streams: dict[tuple, random.Random] = {}

    def _seed_for(self, iteration: int, entity: int, purpose: str) -> int:
        ss = np.random.SeedSequence(
            entropy=self.master_seed,
            spawn_key=(iteration & 0xFFFFFFFF, entity & 0xFFFFFFFF, _purpose_id(purpose)),
        )
        return int(ss.generate_state(2, np.uint64)[0]) << 64 | int(ss.generate_state(2, np.uint64)[1])

    def stream(self, iteration: int, entity: int, purpose: str) -> random.Random:
        """Dedicated `random.Random` for one (iteration, entity, purpose) triple."""
        key = (iteration, entity, purpose)
        gen = self._streams.get(key)
        if gen is None:
            gen = random.Random(self._seed_for(iteration, entity, purpose))
            self._streams[key] = gen
        return gen

    def np_stream(self, iteration: int, entity: int, purpose: str) -> np.random.Generator:
        """numpy Generator sharing the same addressing scheme (for array draws)."""
        ss = np.random.SeedSequence(
            entropy=self.master_seed,
            spawn_key=(iteration & 0xFFFFFFFF, entity & 0xFFFFFFFF, _purpose_id(purpose)),
        )
        return np.random.Generator(np.random.PCG64(ss))
