"""Data-centric gradient routing: interest flood, exploratory data, reinforcement.

The sink owns one global interest covering all telemetry and refreshes it
periodically. Data travels duplicated along all gradients at a low exploratory
rate until a reinforced next hop is installed; reinforcement spreads from the
sink toward the sources along whichever neighbor first delivers fresh
exploratory data, so a single-copy converge-cast tree emerges.
"""

from __future__ import annotations

from dataclasses import dataclass

from .base import BROADCAST, MAC_FAILURE, NO_ROUTE, Protocol


class InterestMsg:
    __slots__ = ("interest_id", "refresh_seq", "sink", "rate")

    def __init__(self, interest_id, refresh_seq, sink, rate):
        self.interest_id = interest_id
        self.refresh_seq = refresh_seq
        self.sink = sink
        self.rate = rate


class ReinforceMsg:
    __slots__ = ("interest_id",)

    def __init__(self, interest_id):
        self.interest_id = interest_id


class DataMsg:
    __slots__ = ("packet", "exploratory")

    def __init__(self, packet, exploratory):
        self.packet = packet
        self.exploratory = exploratory


@dataclass
class DiffusionParams:
    exploratory_rate: float = 0.2  # packets/s while no gradient is reinforced
    refresh_interval: float = 10.0
    gradient_expiry: float = 30.0
    reinforce_min_gap: float = 5.0  # per-upstream reinforcement rate limit
    queue_cap: int = 50
    data_header: int = 8
    interest_bytes: int = 8
    reinforce_bytes: int = 8
    cache_cap: int = 8192
    rebroadcast_jitter: float = 0.05
    aggregate: bool = False  # piggyback queued packets into one frame


class DiffusionProtocol(Protocol):
    def __init__(self, api, params: DiffusionParams):
        super().__init__(api, params)
        self.data_header_bytes = params.data_header
        self.gradients = {}  # nbr -> expiry
        self.seen_refresh = -1
        self.reinforced_out = None
        self.dup_cache = {}
        self.last_reinforce = {}  # upstream nbr -> time of last reinforcement sent
        self.queue = []  # origin-side packets awaiting an exploratory/reinforced slot
        self.refresh_seq = 0
        self._drain_pending = False

    # --- lifecycle ---------------------------------------------------------------

    def start(self):
        if self.api.node_id == self.api.sink_id:
            self.api.schedule_timer(0.0, "refresh")

    def _emit_interest(self):
        msg = InterestMsg(0, self.refresh_seq, self.api.node_id, self.params.exploratory_rate)
        self.refresh_seq += 1
        self.send_control(msg, BROADCAST, self.params.interest_bytes)

    # --- interest propagation ------------------------------------------------------

    def _handle_interest(self, msg, from_node):
        now = self.api.now()
        self.gradients[from_node] = now + self.params.gradient_expiry
        if msg.refresh_seq <= self.seen_refresh:
            return  # duplicate: refresh expiry only
        self.seen_refresh = msg.refresh_seq
        jitter = self.api.rng("dd").uniform(0, self.params.rebroadcast_jitter)
        self.api.schedule_timer(jitter, ("rebroadcast", msg.refresh_seq))

    def _rebroadcast(self, refresh_seq):
        msg = InterestMsg(0, refresh_seq, self.api.sink_id, self.params.exploratory_rate)
        self.send_control(msg, BROADCAST, self.params.interest_bytes)

    # --- data ------------------------------------------------------------------------

    def on_app_send(self, packet):
        if self.arrived(packet):
            return
        if self.reinforced_out is not None and self._gradient_alive(self.reinforced_out):
            self._forward(packet)
            return
        if len(self.queue) >= self.params.queue_cap:
            self.api.drop(packet, NO_ROUTE)
            return
        self.queue.append(packet)
        self._schedule_drain()

    def _schedule_drain(self):
        if not self._drain_pending and self.queue:
            self._drain_pending = True
            self.api.schedule_timer(1.0 / self.params.exploratory_rate, "drain")

    def _drain_queue(self):
        if not self.queue:
            return
        if self.reinforced_out is not None and self._gradient_alive(self.reinforced_out):
            pending = self.queue
            self.queue = []
            for packet in pending:
                self._forward(packet)
            return
        batch = [self.queue.pop(0)]
        if self.params.aggregate:
            limit = self.api.payload_limit()
            total = batch[0].payload_len
            while self.queue and total + self.queue[0].payload_len <= limit:
                total += self.queue[0].payload_len
                batch.append(self.queue.pop(0))
        for packet in batch:
            self._forward(packet)
        self._schedule_drain()

    def _gradient_alive(self, nbr):
        return self.gradients.get(nbr, 0.0) > self.api.now()

    def _live_gradients(self):
        now = self.api.now()
        return [n for n, until in self.gradients.items() if until > now]

    def _forward(self, packet, exclude=None):
        """Single copy on the reinforced gradient; exploratory flood otherwise.

        The exploratory copy goes out as one broadcast: every listener holding
        a gradient for the interest picks it up, so the per-neighbor gradient
        fan-out costs a single transmission per relay.
        """
        if self.reinforced_out is not None and self._gradient_alive(self.reinforced_out):
            self.send_data(DataMsg(packet, False), packet, self.reinforced_out)
            return
        if not self._live_gradients():
            self.api.drop(packet, NO_ROUTE)
            return
        self.send_data(DataMsg(packet, True), packet, BROADCAST)

    def _handle_data(self, msg, from_node):
        packet = msg.packet
        if msg.exploratory:
            # one listener instance of a flooded copy: only nodes that know the
            # interest join the flood, and each joins at most once per packet
            if self.api.node_id != self.api.sink_id and not self._live_gradients():
                return
            if packet.key in self.dup_cache:
                return
            self._note_seen(packet.key)
            self.api.duplicate(packet, 1)  # this node now carries a live copy
        else:
            if packet.key in self.dup_cache:
                self.api.retire(packet)
                return
            self._note_seen(packet.key)
        me_reinforced = self.api.node_id == self.api.sink_id or (
            self.reinforced_out is not None and self._gradient_alive(self.reinforced_out)
        )
        if msg.exploratory and me_reinforced:
            self._reinforce(from_node)
        if self.arrived(packet):
            return
        self._forward(packet, exclude=from_node)

    def _note_seen(self, key):
        if len(self.dup_cache) > self.params.cache_cap:
            self.dup_cache.clear()
        self.dup_cache[key] = True

    def _reinforce(self, upstream):
        now = self.api.now()
        if now - self.last_reinforce.get(upstream, -1e9) < self.params.reinforce_min_gap:
            return
        self.last_reinforce[upstream] = now
        self.send_control(ReinforceMsg(0), upstream, self.params.reinforce_bytes)

    def _handle_reinforce(self, msg, from_node):
        now = self.api.now()
        self.gradients[from_node] = now + self.params.gradient_expiry
        self.reinforced_out = from_node
        if self.queue:
            pending = self.queue
            self.queue = []
            for packet in pending:
                self._forward(packet)

    # --- dispatch ------------------------------------------------------------------

    def on_mac_receive(self, msg, from_node):
        if isinstance(msg, DataMsg):
            self._handle_data(msg, from_node)
        elif isinstance(msg, InterestMsg):
            self._handle_interest(msg, from_node)
        elif isinstance(msg, ReinforceMsg):
            self._handle_reinforce(msg, from_node)

    def on_timer(self, tag):
        if isinstance(tag, tuple) and tag[0] == "rebroadcast":
            self._rebroadcast(tag[1])
            return
        if tag == "refresh":
            self._emit_interest()
            self.api.schedule_timer(self.params.refresh_interval, "refresh")
        elif tag == "drain":
            self._drain_pending = False
            self._drain_queue()

    def on_mac_send_ok(self, msg, dst):
        if isinstance(msg, DataMsg) and dst == BROADCAST:
            # the flooded instance now lives on at whoever picked it up
            self.api.retire(msg.packet)

    def on_mac_send_failed(self, msg, to):
        if isinstance(msg, DataMsg):
            self.gradients.pop(to, None)
            if to == self.reinforced_out:
                self.reinforced_out = None  # re-enter the exploratory phase
            packet = msg.packet
            if self._live_gradients():
                self._forward(packet, exclude=to)
            else:
                self.api.drop(packet, MAC_FAILURE)
