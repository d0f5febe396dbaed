"""Shared wireless medium: who hears what, collisions, capture, busy sensing.

One Medium instance is owned by one simulation run. Reception is modeled as
threshold-plus-capture: a radio locks onto the first frame it can hear above
sensitivity and loses it when overlapping power comes within the capture
margin; frames below sensitivity neither deliver nor interfere.
"""

from __future__ import annotations

import math

from .geometry import count_polygon_crossings, dist


class RadioState:
    __slots__ = (
        "in_air",
        "power_mw",
        "locked",
        "locked_mw",
        "corrupted",
        "lock_start",
        "tx_until",
    )

    def __init__(self):
        self.in_air = {}
        self.power_mw = 0.0
        self.locked = None
        self.locked_mw = 0.0
        self.corrupted = False
        self.lock_start = 0.0
        self.tx_until = -1.0


class Medium:
    def __init__(
        self,
        engine,
        profile,
        prop,
        sampler,
        n_nodes,
        obstacles=(),
        grid_dt: float = 0.5,
        link_cache_dt: float = 0.2,
    ):
        self.engine = engine
        self.profile = profile
        self.prop = prop
        self.sampler = sampler
        self.n_nodes = n_nodes
        self.obstacles = list(obstacles)
        self.obstacle_bboxes = [self._bbox(p) for p in self.obstacles]
        self.radios = [RadioState() for _ in range(n_nodes)]
        self.macs = [None] * n_nodes  # bound by each node's MAC

        self.sensitivity_dbm = profile.sensitivity_dbm
        self.cca_mw = 10.0 ** (profile.sensitivity_dbm / 10.0)
        self.capture_lin = 10.0 ** (prop.capture_db / 10.0)

        # spatial grid for listener candidate lookup; cell edge covers the
        # farthest receivable distance plus slack for movement between rebins
        self.detect_range = prop.max_range(profile.tx_power_dbm, profile.sensitivity_dbm)
        self.cell = self.detect_range + 4.0
        self.grid_dt = grid_dt
        self.link_cache_dt = link_cache_dt
        self._cells: dict[tuple[int, int], list[int]] = {}
        self._node_cell = [(-1, -1)] * n_nodes
        self._link_cache: dict[int, float] = {}
        # with no-ACK disciplines the sender cannot observe air losses; the
        # experiment wires this to record them as mac-failure drops
        self.on_unicast_lost = None
        self._rebin()

    @staticmethod
    def _bbox(poly):
        xs = [p[0] for p in poly]
        ys = [p[1] for p in poly]
        return min(xs), min(ys), max(xs), max(ys)

    def start(self):
        self.engine.schedule(self.grid_dt, self._maintain, target="medium", kind="grid")

    def _maintain(self, _):
        self._rebin()
        self._link_cache.clear()
        self.engine.schedule(self.grid_dt, self._maintain, target="medium", kind="grid")

    def _rebin(self):
        cells = {}
        t = self.engine.now
        pos = self.sampler.position
        c = self.cell
        node_cell = self._node_cell
        for i in range(self.n_nodes):
            x, y = pos(i, t)
            key = (int(x // c), int(y // c))
            node_cell[i] = key
            lst = cells.get(key)
            if lst is None:
                cells[key] = [i]
            else:
                lst.append(i)
        self._cells = cells

    def rx_power_dbm(self, a: int, b: int) -> float:
        """Received power from a to b right now (cached on a short time bucket)."""
        if a > b:
            a, b = b, a
        key = a * self.n_nodes + b
        cached = self._link_cache.get(key)
        if cached is not None:
            return cached
        t = self.engine.now
        pa = self.sampler.position(a, t)
        pb = self.sampler.position(b, t)
        d = dist(pa, pb)
        if d <= 1e-9:
            d = 1e-9
        crossings = 0
        if self.obstacles:
            crossings = count_polygon_crossings(pa, pb, self.obstacles, self.obstacle_bboxes)
        val = self.profile.tx_power_dbm - self.prop.path_loss(d, crossings)
        self._link_cache[key] = val
        return val

    def candidates(self, node: int):
        cx, cy = self._node_cell[node]
        cells = self._cells
        out = []
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                lst = cells.get((cx + dx, cy + dy))
                if lst:
                    out.extend(lst)
        return out

    def cca_busy(self, node: int) -> bool:
        r = self.radios[node]
        return r.tx_until > self.engine.now or r.power_mw >= self.cca_mw

    def transmit(self, frame):
        """Put a frame on the air; reception is resolved at the frame's end."""
        now = self.engine.now
        sender = frame.src
        end = now + frame.duration
        radio = self.radios[sender]
        radio.tx_until = end
        if radio.locked is not None:
            # half duplex: transmitting kills any reception in progress
            self._unlock(sender, radio, now)
        regs = []
        sens = self.sensitivity_dbm
        cap = self.capture_lin
        for lst in self._iter_candidate_lists(sender):
            for node in lst:
                if node == sender:
                    continue
                rx_dbm = self.rx_power_dbm(sender, node)
                if rx_dbm < sens:
                    continue
                rx_mw = 10.0 ** (rx_dbm / 10.0)
                r = self.radios[node]
                r.in_air[frame] = rx_mw
                r.power_mw += rx_mw
                regs.append(node)
                if r.tx_until > now:
                    continue  # busy transmitting, cannot hear
                if r.locked is None:
                    if rx_mw >= cap * (r.power_mw - rx_mw):
                        r.locked = frame
                        r.locked_mw = rx_mw
                        r.corrupted = False
                        r.lock_start = now
                else:
                    interf = r.power_mw - r.locked_mw
                    if r.locked_mw < cap * interf:
                        r.corrupted = True
                        if rx_mw >= cap * (r.power_mw - rx_mw):
                            # stronger late frame captures the receiver
                            self._unlock(node, r, now)
                            r.locked = frame
                            r.locked_mw = rx_mw
                            r.corrupted = False
                            r.lock_start = now
        frame.regs = regs
        self.engine.schedule(frame.duration, self._tx_end, frame, target=sender, kind="tx-end")

    def _iter_candidate_lists(self, node):
        cx, cy = self._node_cell[node]
        cells = self._cells
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                lst = cells.get((cx + dx, cy + dy))
                if lst:
                    yield lst

    def _unlock(self, node, radio, now):
        mac = self.macs[node]
        if mac is not None:
            mac.energy_rx(now - radio.lock_start)
        radio.locked = None
        radio.locked_mw = 0.0

    def _tx_end(self, frame):
        now = self.engine.now
        sender_mac = self.macs[frame.src]
        radios = self.radios
        delivered_to = []
        for node in frame.regs:
            r = radios[node]
            rx_mw = r.in_air.pop(frame, 0.0)
            r.power_mw -= rx_mw
            if not r.in_air:
                r.power_mw = 0.0  # cancel float drift when the air clears
            if r.locked is frame:
                ok = not r.corrupted
                self._unlock(node, r, now)
                if ok:
                    delivered_to.append(node)
        if sender_mac is not None:
            sender_mac.on_tx_complete(frame)
        for node in delivered_to:
            mac = self.macs[node]
            if mac is not None:
                mac.on_frame_rx(frame)
        if (
            self.on_unicast_lost is not None
            and frame.packet is not None
            and frame.dst >= 0
            and frame.dst not in delivered_to
        ):
            self.on_unicast_lost(frame)

    def finalize(self):
        """Close out reception-in-progress energy at the end of a run."""
        now = self.engine.now
        for node, r in enumerate(self.radios):
            if r.locked is not None:
                self._unlock(node, r, now)
