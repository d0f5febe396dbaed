"""Reactive routing: RREQ flood with path accumulation, RREP on the reverse path."""

from __future__ import annotations

from dataclasses import dataclass

from .base import BROADCAST, MAC_FAILURE, NO_ROUTE, TTL_EXPIRED, Protocol


class RreqMsg:
    __slots__ = ("origin", "dest", "rreq_id", "oseq", "ttl", "path", "min_energy")

    def __init__(self, origin, dest, rreq_id, oseq, ttl, path, min_energy):
        self.origin = origin
        self.dest = dest
        self.rreq_id = rreq_id
        self.oseq = oseq
        self.ttl = ttl
        self.path = path  # accumulated node tuple starting at origin
        self.min_energy = min_energy


class RrepMsg:
    __slots__ = ("origin", "dest", "dseq", "path", "min_energy")

    def __init__(self, origin, dest, dseq, path, min_energy):
        self.origin = origin
        self.dest = dest
        self.dseq = dseq
        self.path = path  # full path origin..dest recorded by the winning RREQ
        self.min_energy = min_energy


class DataMsg:
    __slots__ = ("packet",)

    def __init__(self, packet):
        self.packet = packet


class RouteEntry:
    __slots__ = ("next_hop", "hops", "dseq", "min_energy", "until")

    def __init__(self, next_hop, hops, dseq, min_energy, until):
        self.next_hop = next_hop
        self.hops = hops
        self.dseq = dseq
        self.min_energy = min_energy
        self.until = until


@dataclass
class AodvParams:
    rreq_ttl: int = 32
    route_lifetime: float = 5.0
    reverse_lifetime: float = 2.0
    dedup_window: float = 3.0
    buffer_s: float = 2.0
    buffer_cap: int = 50
    rreq_retries: int = 3
    retry_interval: float = 0.6
    energy_tiebreak: bool = True
    data_header: int = 8
    msg_base: int = 12
    per_hop: int = 4


def route_is_better(new_dseq, new_hops, new_energy, old: RouteEntry, energy_tiebreak=True):
    """Freshness first, then fewer hops, then larger path-min energy."""
    if new_dseq != old.dseq:
        return new_dseq > old.dseq
    if new_hops != old.hops:
        return new_hops < old.hops
    if energy_tiebreak:
        return new_energy > old.min_energy
    return False


class AodvProtocol(Protocol):
    def __init__(self, api, params: AodvParams):
        super().__init__(api, params)
        self.data_header_bytes = params.data_header
        self.seq = 0
        self.rreq_id = 0
        self.seen = {}  # (origin, rreq_id) -> expiry
        self.reverse = {}  # origin -> (next_hop, expiry)
        self.routes = {}  # dest -> RouteEntry
        self.buffer = []  # (packet, enqueue_time), destination is always the sink
        self.tries = 0
        self.discovering = False

    def start(self):
        self.api.schedule_timer(0.5, "sweep")

    # --- data path -------------------------------------------------------------

    def on_app_send(self, packet):
        self._handle_data(packet)

    def _valid_route(self, dest):
        entry = self.routes.get(dest)
        if entry is None or entry.until <= self.api.now():
            return None
        return entry

    def _handle_data(self, packet):
        if self.arrived(packet):
            return
        entry = self._valid_route(packet.destination)
        if entry is not None:
            entry.until = self.api.now() + self.params.route_lifetime  # refresh on use
            self.send_data(DataMsg(packet), packet, entry.next_hop)
            return
        self._buffer_packet(packet)
        if not self.discovering:
            self.tries = 0
            self._originate_rreq(packet.destination)

    def _buffer_packet(self, packet):
        if len(self.buffer) >= self.params.buffer_cap:
            oldest, _ = self.buffer.pop(0)
            self.api.drop(oldest, NO_ROUTE)
        self.buffer.append((packet, self.api.now()))

    def _originate_rreq(self, dest):
        self.rreq_id += 1
        self.seq += 1
        self.tries += 1
        self.discovering = True
        me = self.api.node_id
        msg = RreqMsg(me, dest, self.rreq_id, self.seq, self.params.rreq_ttl, (me,), self.api.energy_fraction())
        self.send_control(msg, BROADCAST, self.params.msg_base + self.params.per_hop)
        self.api.schedule_timer(self.params.retry_interval, ("retry", dest))

    def on_timer(self, tag):
        if tag == "sweep":
            self._sweep_buffer()
            self.api.schedule_timer(0.5, "sweep")
        elif isinstance(tag, tuple) and tag[0] == "retry":
            dest = tag[1]
            if self._valid_route(dest) is not None or not self.buffer:
                self.discovering = False
                return
            if self.tries <= self.params.rreq_retries:
                self._originate_rreq(dest)
            else:
                self.discovering = False

    def _sweep_buffer(self):
        now = self.api.now()
        kept = []
        for packet, t in self.buffer:
            if now - t > self.params.buffer_s:
                self.api.drop(packet, NO_ROUTE)
            else:
                kept.append((packet, t))
        self.buffer = kept

    # --- control path ------------------------------------------------------------

    def on_mac_receive(self, msg, from_node):
        if isinstance(msg, RreqMsg):
            self._process_rreq(msg, from_node)
        elif isinstance(msg, RrepMsg):
            self._process_rrep(msg, from_node)
        elif isinstance(msg, DataMsg):
            self._handle_data(msg.packet)

    def _process_rreq(self, rreq, from_node):
        me = self.api.node_id
        now = self.api.now()
        if rreq.origin == me or me in rreq.path:
            return
        key = (rreq.origin, rreq.rreq_id)
        if self.seen.get(key, 0.0) > now:
            return  # duplicate within the freshness window
        self.seen[key] = now + self.params.dedup_window
        if len(self.seen) > 16384:
            self.seen = {k: v for k, v in self.seen.items() if v > now}
        self.reverse[rreq.origin] = (from_node, now + self.params.reverse_lifetime)
        min_e = min(rreq.min_energy, self.api.energy_fraction())
        path = rreq.path + (me,)
        if me == rreq.dest:
            self.seq += 1
            rrep = RrepMsg(rreq.origin, me, self.seq, path, min_e)
            self.send_control(rrep, from_node, self.params.msg_base + self.params.per_hop * len(path))
            return
        if rreq.ttl <= 1:
            return  # request dies here
        fwd = RreqMsg(rreq.origin, rreq.dest, rreq.rreq_id, rreq.oseq, rreq.ttl - 1, path, min_e)
        self.send_control(fwd, BROADCAST, self.params.msg_base + self.params.per_hop * len(path))

    def _process_rrep(self, rrep, from_node):
        me = self.api.node_id
        now = self.api.now()
        path = rrep.path
        try:
            idx = path.index(me)
        except ValueError:
            return
        hops = len(path) - 1 - idx
        entry = self.routes.get(rrep.dest)
        if entry is None or route_is_better(rrep.dseq, hops, rrep.min_energy, entry, self.params.energy_tiebreak):
            self.routes[rrep.dest] = RouteEntry(
                from_node, hops, rrep.dseq, rrep.min_energy, now + self.params.route_lifetime
            )
        if me == rrep.origin:
            self.discovering = False
            self._flush_buffer()
            return
        rev = self.reverse.get(rrep.origin)
        if rev is None or rev[1] <= now:
            return  # reverse state expired; origin will retry
        self.send_control(rrep, rev[0], self.params.msg_base + self.params.per_hop * len(path))

    def _flush_buffer(self):
        pending = self.buffer
        self.buffer = []
        for packet, t in pending:
            self._handle_data(packet)

    # --- failures ---------------------------------------------------------------

    def on_mac_send_failed(self, msg, to):
        if not isinstance(msg, DataMsg):
            return
        stale = [d for d, e in self.routes.items() if e.next_hop == to]
        for d in stale:
            del self.routes[d]
        packet = msg.packet
        if packet.ttl <= 0:
            self.api.drop(packet, TTL_EXPIRED)
            return
        self._buffer_packet(packet)
        if not self.discovering:
            self.tries = 0
            self._originate_rreq(packet.destination)
