"""Deterministic packet-level simulator for multi-hop routing in disaster areas.

Four routing strategies (proactive link-state, reactive, gradient-based,
geographic) run over three short-range radio profiles (802.11-, 802.15.4- and
802.15.6-like) under a sub-area-structured mobility model, reporting packet
reception rate, end-to-end delay and per-packet energy.
"""

from .config import Scenario, config_hash, default_scenario, load_config
from .engine import Engine, RngManager
from .experiment import RunResult, aggregate, classify, run_once, run_sweep, summarize
from .mobility import MobilityTrace, generate_trace, parse_trace, position_at, write_trace
from .radio import PROFILES, Propagation, airtime, energy_packet_mj

__version__ = "0.1.0"

__all__ = [
    "Engine",
    "MobilityTrace",
    "PROFILES",
    "Propagation",
    "RngManager",
    "RunResult",
    "Scenario",
    "aggregate",
    "airtime",
    "classify",
    "config_hash",
    "default_scenario",
    "energy_packet_mj",
    "generate_trace",
    "load_config",
    "parse_trace",
    "position_at",
    "run_once",
    "run_sweep",
    "summarize",
    "write_trace",
]
