"""Proactive link-state routing: HELLO/TC signaling, MPR flooding, hop-count routes."""

from __future__ import annotations

from dataclasses import dataclass

from .base import BROADCAST, MAC_FAILURE, NO_ROUTE, Protocol

HEARD = "heard"
SYMMETRIC = "symmetric"


def select_mprs(one_hop, two_hop):
    """Greedy multipoint-relay cover.

    `one_hop` is the set of symmetric neighbors, `two_hop` maps each of them
    to the two-hop nodes it covers (self and one-hop members excluded by the
    caller). First takes neighbors uniquely covering some two-hop node, then
    repeatedly the neighbor covering most uncovered nodes, ties to lower id.
    """
    uncovered = set()
    for nbr in one_hop:
        uncovered |= two_hop.get(nbr, set())
    mprs = set()
    if not uncovered:
        return mprs
    # nodes reachable through exactly one neighbor force that neighbor in
    for target in sorted(uncovered):
        covers = [n for n in one_hop if target in two_hop.get(n, ())]
        if len(covers) == 1:
            mprs.add(covers[0])
    for m in mprs:
        uncovered -= two_hop.get(m, set())
    while uncovered:
        best = None
        best_gain = -1
        for nbr in sorted(one_hop):
            if nbr in mprs:
                continue
            gain = len(uncovered & two_hop.get(nbr, set()))
            if gain > best_gain:
                best, best_gain = nbr, gain
        if best is None or best_gain == 0:
            break  # remaining two-hop nodes are not coverable
        mprs.add(best)
        uncovered -= two_hop.get(best, set())
    return mprs


def recompute_routes(self_id, sym_neighbors, topology_edges):
    """Shortest hop-count routes over symmetric links plus advertised edges.

    Returns {destination: (next_hop, hop_count)}; unreachable destinations are
    absent. Equal-length ties resolve to the lower next-hop id.
    """
    adj = {}

    def add_edge(a, b):
        adj.setdefault(a, set()).add(b)
        adj.setdefault(b, set()).add(a)

    for nbr in sym_neighbors:
        add_edge(self_id, nbr)
    for a, b in topology_edges:
        add_edge(a, b)

    routes = {}
    settled = {self_id: -1}  # node -> first hop on its shortest path
    frontier = [self_id]
    hops = 0
    while frontier:
        hops += 1
        reached = {}  # node -> lowest first hop among shortest paths
        for node in frontier:
            first = settled[node]
            for nb in adj.get(node, ()):
                if nb in settled:
                    continue
                cand = nb if node == self_id else first
                if nb not in reached or cand < reached[nb]:
                    reached[nb] = cand
        for nb, first in reached.items():
            settled[nb] = first
            routes[nb] = (first, hops)
        frontier = sorted(reached)
    return routes


class HelloMsg:
    __slots__ = ("sender", "entries")

    def __init__(self, sender, entries):
        self.sender = sender
        self.entries = entries  # tuple of (nbr_id, status, selected_as_mpr)


class TcMsg:
    __slots__ = ("orig", "seq", "selectors")

    def __init__(self, orig, seq, selectors):
        self.orig = orig
        self.seq = seq
        self.selectors = selectors


class DataMsg:
    __slots__ = ("packet",)

    def __init__(self, packet):
        self.packet = packet


@dataclass
class OlsrParams:
    hello_interval: float = 2.0
    tc_interval: float = 5.0
    hold_mult: float = 3.0
    data_header: int = 4
    hello_base: int = 4
    tc_base: int = 8
    per_entry: int = 4


class OlsrProtocol(Protocol):
    """One instance per node; all state expires on RFC-style hold times."""

    def __init__(self, api, params: OlsrParams):
        super().__init__(api, params)
        self.data_header_bytes = params.data_header
        self.hold = params.hold_mult * params.hello_interval
        self.top_hold = params.hold_mult * params.tc_interval
        # nbr id -> [heard_until, sym_until, selects_me_until, two_hop_set, two_hop_until]
        self.nbr = {}
        self.mprs = set()
        self.topology = {}  # orig -> (seq, selectors, until)
        self.tc_seen = {}  # (orig, seq) -> True, bounded
        self.tc_seq = 0
        self.routes = {}
        self.dirty = True

    def start(self):
        rng = self.api.rng("olsr")
        self.api.schedule_timer(rng.uniform(0, self.params.hello_interval), "hello")
        self.api.schedule_timer(rng.uniform(0, self.params.tc_interval), "tc")

    # --- state upkeep --------------------------------------------------------

    def _sym_neighbors(self, now):
        return {n for n, st in self.nbr.items() if st[1] > now}

    def _selectors(self, now):
        return {n for n, st in self.nbr.items() if st[2] > now}

    def _two_hop(self, now, sym):
        me = self.api.node_id
        out = {}
        for n in sym:
            st = self.nbr[n]
            if st[4] > now:
                out[n] = {x for x in st[3] if x != me and x not in sym}
            else:
                out[n] = set()
        return out

    # --- timers ---------------------------------------------------------------

    def on_timer(self, tag):
        if tag == "hello":
            self._emit_hello()
            self.api.schedule_timer(self.params.hello_interval, "hello")
        elif tag == "tc":
            self._emit_tc()
            self.api.schedule_timer(self.params.tc_interval, "tc")

    def _emit_hello(self):
        now = self.api.now()
        sym = self._sym_neighbors(now)
        self.mprs = select_mprs(sym, self._two_hop(now, sym))
        entries = []
        for n, st in sorted(self.nbr.items()):
            if st[0] <= now and st[1] <= now:
                continue
            status = SYMMETRIC if st[1] > now else HEARD
            entries.append((n, status, n in self.mprs))
        msg = HelloMsg(self.api.node_id, tuple(entries))
        self.send_control(msg, BROADCAST, self.params.hello_base + self.params.per_entry * len(entries))

    def _emit_tc(self):
        now = self.api.now()
        selectors = self._selectors(now)
        if not selectors:
            return  # standard rule: nothing to advertise
        self.tc_seq += 1
        msg = TcMsg(self.api.node_id, self.tc_seq, tuple(sorted(selectors)))
        self.send_control(msg, BROADCAST, self.params.tc_base + self.params.per_entry * len(selectors))

    # --- receive ----------------------------------------------------------------

    def on_mac_receive(self, msg, from_node):
        if isinstance(msg, HelloMsg):
            self._handle_hello(msg, from_node)
        elif isinstance(msg, TcMsg):
            self._handle_tc(msg, from_node)
        elif isinstance(msg, DataMsg):
            self._handle_data(msg)

    def _handle_hello(self, msg, from_node):
        now = self.api.now()
        me = self.api.node_id
        st = self.nbr.get(from_node)
        if st is None:
            st = [0.0, 0.0, 0.0, set(), 0.0]
            self.nbr[from_node] = st
        st[0] = now + self.hold
        listed_sym = set()
        selected_me = False
        for nid, status, is_mpr in msg.entries:
            if status == SYMMETRIC:
                listed_sym.add(nid)
            if nid == me:
                # it hears us, so the link is symmetric from our side
                st[1] = now + self.hold
                if is_mpr:
                    selected_me = True
        st[2] = now + self.hold if selected_me else min(st[2], now)
        st[3] = listed_sym
        st[4] = now + self.hold
        self.dirty = True

    def _handle_tc(self, msg, from_node):
        if msg.orig == self.api.node_id:
            return
        now = self.api.now()
        key = (msg.orig, msg.seq)
        seen = key in self.tc_seen
        cur = self.topology.get(msg.orig)
        if cur is None or msg.seq >= cur[0]:
            self.topology[msg.orig] = (msg.seq, msg.selectors, now + self.top_hold)
            self.dirty = True
        if seen:
            return
        if len(self.tc_seen) > 8192:
            self.tc_seen.clear()
        self.tc_seen[key] = True
        # MPR-restricted flooding: only MPRs of the previous hop re-broadcast
        st = self.nbr.get(from_node)
        if st is not None and st[2] > now:
            self.send_control(
                TcMsg(msg.orig, msg.seq, msg.selectors),
                BROADCAST,
                self.params.tc_base + self.params.per_entry * len(msg.selectors),
            )

    # --- data -----------------------------------------------------------------

    def _route_for(self, dest):
        now = self.api.now()
        if self.dirty:
            sym = self._sym_neighbors(now)
            edges = []
            for orig, (seq, selectors, until) in self.topology.items():
                if until > now:
                    edges.extend((orig, s) for s in selectors)
            self.routes = recompute_routes(self.api.node_id, sym, edges)
            # route validity: next hop must be a current symmetric neighbor
            self.routes = {d: (nh, h) for d, (nh, h) in self.routes.items() if nh in sym}
            self.dirty = False
        return self.routes.get(dest)

    def on_app_send(self, packet):
        self._handle_data(DataMsg(packet))

    def _handle_data(self, msg):
        packet = msg.packet
        if self.arrived(packet):
            return
        route = self._route_for(packet.destination)
        if route is None:
            self.api.drop(packet, NO_ROUTE)
            return
        self.send_data(DataMsg(packet), packet, route[0])

    def on_mac_send_failed(self, msg, to):
        if isinstance(msg, DataMsg):
            st = self.nbr.get(to)
            if st is not None:
                now = self.api.now()
                st[0] = min(st[0], now)
                st[1] = min(st[1], now)
                self.dirty = True
            self.api.drop(msg.packet, MAC_FAILURE)
