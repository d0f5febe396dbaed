"""Routing protocols: protocol-neutral core plus four concrete strategies."""

from .aodv import AodvParams, AodvProtocol
from .base import BROADCAST, DROP_REASONS, NetPacket, Protocol
from .diffusion import DiffusionParams, DiffusionProtocol
from .gpsr import GpsrParams, GpsrProtocol
from .olsr import OlsrParams, OlsrProtocol

__all__ = [
    "AodvParams",
    "AodvProtocol",
    "BROADCAST",
    "DROP_REASONS",
    "DiffusionParams",
    "DiffusionProtocol",
    "GpsrParams",
    "GpsrProtocol",
    "NetPacket",
    "OlsrParams",
    "OlsrProtocol",
    "Protocol",
]
