"""Geographic routing: beaconed neighbor positions, greedy + perimeter forwarding.

Perimeter mode walks faces of the Gabriel-graph planarization with the
right-hand rule and falls back to greedy as soon as the packet gets closer to
the destination than where greedy failed. The sink's position is known to all
nodes a priori (converge-cast traffic pattern).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .base import BROADCAST, NO_ROUTE, Protocol

GREEDY = "greedy"
PERI = "perimeter"

_EPS = 1e-12


def _d2(a, b):
    dx = a[0] - b[0]
    dy = a[1] - b[1]
    return dx * dx + dy * dy


def greedy_next_hop(self_pos, table, dest_pos):
    """Neighbor strictly closest to dest, or None at a local maximum.

    `table` maps neighbor id -> position. Ties resolve to the lower id.
    """
    best = None
    best_d = _d2(self_pos, dest_pos)
    for nid in sorted(table):
        d = _d2(table[nid], dest_pos)
        if d < best_d - _EPS:
            best, best_d = nid, d
    return best


def gabriel_neighbors(self_pos, table):
    """Subset of the table kept by the Gabriel-graph planarization rule.

    Edge (self, v) survives only when no witness w sits strictly inside the
    circle whose diameter is the edge.
    """
    kept = {}
    for v, vpos in table.items():
        cx = 0.5 * (self_pos[0] + vpos[0])
        cy = 0.5 * (self_pos[1] + vpos[1])
        r2 = _d2(self_pos, vpos) * 0.25
        ok = True
        for w, wpos in table.items():
            if w == v:
                continue
            if _d2(wpos, (cx, cy)) < r2 - _EPS:
                ok = False
                break
        if ok:
            kept[v] = vpos
    return kept


def _first_ccw(origin, ref_point, nbrs):
    """Neighbor id whose edge comes first counterclockwise from origin->ref."""
    base = math.atan2(ref_point[1] - origin[1], ref_point[0] - origin[0])
    best = None
    best_delta = None
    for nid in sorted(nbrs):
        pos = nbrs[nid]
        ang = math.atan2(pos[1] - origin[1], pos[0] - origin[0])
        delta = (ang - base) % (2.0 * math.pi)
        if delta < 1e-9:
            delta = 2.0 * math.pi  # the reference direction itself is the last resort
        if best_delta is None or delta < best_delta:
            best, best_delta = nid, delta
    return best


def _cross_point(a, b, c, d):
    """Intersection of segment (a, b) with segment (c, d), excluding a itself."""
    rx, ry = b[0] - a[0], b[1] - a[1]
    sx, sy = d[0] - c[0], d[1] - c[1]
    denom = rx * sy - ry * sx
    if abs(denom) < _EPS:
        return None
    t = ((c[0] - a[0]) * sy - (c[1] - a[1]) * sx) / denom
    u = ((c[0] - a[0]) * ry - (c[1] - a[1]) * rx) / denom
    if 1e-9 < t <= 1.0 and -_EPS <= u <= 1.0 + _EPS:
        return (a[0] + t * rx, a[1] + t * ry)
    return None


class GeoHeader:
    """Per-packet forwarding state carried between hops."""

    __slots__ = ("mode", "dest_pos", "lp", "lf", "e0", "prev_pos")

    def __init__(self, dest_pos):
        self.mode = GREEDY
        self.dest_pos = dest_pos
        self.lp = None  # where greedy failed and perimeter mode began
        self.lf = None  # point where the current face was entered
        self.e0 = None  # first edge of the current face
        self.prev_pos = None  # position of the previous hop (incoming edge)


def perimeter_next_hop(self_id, self_pos, planar, hdr: GeoHeader):
    """Right-hand-rule step over the planarized neighbor set.

    Returns the chosen neighbor id and mutates the header (face changes,
    first-edge bookkeeping), or None when the face tour closed without
    progress and the packet must be dropped.
    """
    if not planar:
        return None
    ref = hdr.prev_pos if hdr.prev_pos is not None else hdr.dest_pos
    nxt = _first_ccw(self_pos, ref, planar)
    face_changed = hdr.prev_pos is None  # just entered perimeter mode
    lf_d2 = _d2(hdr.lf, hdr.dest_pos)
    for _ in range(len(planar) + 1):
        pt = _cross_point(self_pos, planar[nxt], hdr.lp, hdr.dest_pos)
        if pt is not None and _d2(pt, hdr.dest_pos) < lf_d2 - _EPS:
            hdr.lf = pt
            lf_d2 = _d2(pt, hdr.dest_pos)
            face_changed = True
            ref = planar[nxt]
            nxt = _first_ccw(self_pos, ref, planar)
            continue
        break
    edge = (self_id, nxt)
    if face_changed:
        hdr.e0 = edge
    elif hdr.e0 == edge:
        return None  # full face tour without progress: unreachable around the void
    return nxt


def route_step(self_id, self_pos, table, hdr: GeoHeader):
    """One forwarding decision: (next_hop | None). Mutates the header."""
    if hdr.mode == PERI and _d2(self_pos, hdr.dest_pos) < _d2(hdr.lp, hdr.dest_pos) - _EPS:
        hdr.mode = GREEDY  # closer than where greedy failed: resume greedy early
    if hdr.mode == GREEDY:
        nxt = greedy_next_hop(self_pos, table, hdr.dest_pos)
        if nxt is not None:
            hdr.prev_pos = self_pos
            return nxt
        if not table:
            return None
        hdr.mode = PERI
        hdr.lp = self_pos
        hdr.lf = self_pos
        hdr.e0 = None
        hdr.prev_pos = None
    planar = gabriel_neighbors(self_pos, table)
    nxt = perimeter_next_hop(self_id, self_pos, planar, hdr)
    if nxt is None:
        return None
    hdr.prev_pos = self_pos
    return nxt


class BeaconMsg:
    __slots__ = ("node", "pos")

    def __init__(self, node, pos):
        self.node = node
        self.pos = pos


class DataMsg:
    __slots__ = ("packet", "hdr")

    def __init__(self, packet, hdr):
        self.packet = packet
        self.hdr = hdr


@dataclass
class GpsrParams:
    beacon_interval: float = 1.0
    expiry_intervals: float = 3.0
    position_noise_m: float = 0.0
    data_header: int = 24
    beacon_bytes: int = 8


class GpsrProtocol(Protocol):
    def __init__(self, api, params: GpsrParams):
        super().__init__(api, params)
        self.data_header_bytes = params.data_header
        self.table = {}  # nbr -> (pos, expiry)

    def start(self):
        self.api.schedule_timer(self.api.rng("gpsr").uniform(0, self.params.beacon_interval), "beacon")

    def on_timer(self, tag):
        if tag == "beacon":
            pos = self.api.position_of_self()
            noise = self.params.position_noise_m
            if noise > 0:
                rng = self.api.rng("gpsr-noise")
                pos = (pos[0] + rng.gauss(0, noise), pos[1] + rng.gauss(0, noise))
            self.send_control(BeaconMsg(self.api.node_id, pos), BROADCAST, self.params.beacon_bytes)
            self.api.schedule_timer(self.params.beacon_interval, "beacon")

    def _fresh_table(self):
        now = self.api.now()
        return {n: pos for n, (pos, until) in self.table.items() if until > now}

    def on_app_send(self, packet):
        if self.arrived(packet):
            return
        hdr = GeoHeader(self.api.sink_position)
        self._route(packet, hdr)

    def on_mac_receive(self, msg, from_node):
        if isinstance(msg, BeaconMsg):
            until = self.api.now() + self.params.expiry_intervals * self.params.beacon_interval
            self.table[msg.node] = (msg.pos, until)
        elif isinstance(msg, DataMsg):
            if self.arrived(msg.packet):
                return
            self._route(msg.packet, msg.hdr)

    def _route(self, packet, hdr):
        me = self.api.node_id
        nxt = route_step(me, self.api.position_of_self(), self._fresh_table(), hdr)
        if nxt is None:
            self.api.drop(packet, NO_ROUTE)
            return
        self.send_data(DataMsg(packet, hdr), packet, nxt)

    def on_mac_send_failed(self, msg, to):
        if isinstance(msg, DataMsg):
            self.table.pop(to, None)
            self._route(msg.packet, msg.hdr)
