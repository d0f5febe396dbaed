"""Protocol-neutral routing interface and shared packet bookkeeping.

Protocols interact with the world only through the api object handed to them:
mac_send / timers / positions / delivery+drop accounting. That keeps every
protocol runnable on the real stack and on lightweight test harnesses alike.
"""

from __future__ import annotations

from .. import mac as mac_mod

BROADCAST = mac_mod.BROADCAST

NO_ROUTE = "no-route"
TTL_EXPIRED = "ttl-expired"
QUEUE_OVERFLOW = "queue-overflow"
MAC_FAILURE = "mac-failure"

DROP_REASONS = (NO_ROUTE, TTL_EXPIRED, QUEUE_OVERFLOW, MAC_FAILURE)


class NetPacket:
    """One application packet with per-layer bookkeeping."""

    __slots__ = ("origin", "destination", "app_seq", "created_at", "payload_len", "hop_trace", "ttl")

    def __init__(self, origin, destination, app_seq, created_at, payload_len, ttl):
        self.origin = origin
        self.destination = destination
        self.app_seq = app_seq
        self.created_at = created_at
        self.payload_len = payload_len
        self.hop_trace = [origin]
        self.ttl = ttl

    @property
    def key(self):
        return (self.origin, self.app_seq)

    def __repr__(self):
        return f"NetPacket({self.origin}->{self.destination} #{self.app_seq} ttl={self.ttl})"


class Protocol:
    """Base class: subclasses implement the four hooks they need."""

    #: network-layer bytes added to every data frame (airtime accounting)
    data_header_bytes = 0

    def __init__(self, api, params):
        self.api = api
        self.params = params

    def start(self):
        pass

    def on_app_send(self, packet: NetPacket):
        raise NotImplementedError

    def on_mac_receive(self, msg, from_node: int):
        raise NotImplementedError

    def on_mac_send_failed(self, msg, to: int):
        pass

    def on_mac_send_ok(self, msg, dst: int):
        pass

    def on_timer(self, tag):
        pass

    # --- helpers shared by all protocols ------------------------------------

    def arrived(self, packet: NetPacket) -> bool:
        """Deliver if this node is the packet's destination."""
        if packet.destination == self.api.node_id:
            self.api.deliver(packet)
            return True
        return False

    def send_data(self, msg, packet: NetPacket, next_hop: int) -> bool:
        """Forward one packet copy; handles TTL and queue-overflow accounting."""
        if packet.ttl <= 0:
            self.api.drop(packet, TTL_EXPIRED)
            return False
        packet.ttl -= 1
        me = self.api.node_id
        if packet.origin != me and (not packet.hop_trace or packet.hop_trace[-1] != me):
            packet.hop_trace.append(me)
        if not self.api.mac_send(msg, next_hop, packet.payload_len, self.data_header_bytes, packet=packet):
            self.api.drop(packet, QUEUE_OVERFLOW)
            return False
        return True

    def send_control(self, msg, dst: int, nbytes: int) -> bool:
        return self.api.mac_send(msg, dst, 0, nbytes)
