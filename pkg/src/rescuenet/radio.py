"""Radio profiles, propagation, airtime and per-packet energy accounting."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace


@dataclass(frozen=True)
class TechProfile:
    """One wireless technology parameter set.

    Currents are in mA, sensitivity and tx_power in dBm, bit_rate in bit/s.
    Frame overheads are representative standard header sizes in bytes and
    are echoed into every result file.
    """

    name: str
    modulation: str
    sensitivity_dbm: float
    tx_power_dbm: float
    band_ghz: float
    bit_rate: float
    current_tx_ma: float
    current_rx_ma: float
    current_idle_ma: float
    mac_discipline: str  # key into mac.DISCIPLINES
    phy_overhead: int
    mac_overhead: int
    max_payload: int | None = None  # standard payload ceiling, None = unrestricted


WIFI = TechProfile(
    name="WIFI",
    modulation="BPSK",
    sensitivity_dbm=-92.0,
    tx_power_dbm=0.0,
    band_ghz=2.4,
    bit_rate=1_000_000.0,
    current_tx_ma=160.0,
    current_rx_ma=53.0,
    current_idle_ma=0.69,
    mac_discipline="DCF",
    phy_overhead=24,
    mac_overhead=28,
)

WSN = TechProfile(
    name="WSN",
    modulation="O-QPSK",
    sensitivity_dbm=-85.0,
    tx_power_dbm=0.0,
    band_ghz=2.4,
    bit_rate=250_000.0,
    current_tx_ma=17.4,
    current_rx_ma=19.7,
    current_idle_ma=0.9,
    mac_discipline="Z154",
    phy_overhead=6,
    mac_overhead=11,
)

WBAN = TechProfile(
    name="WBAN",
    modulation="DQPSK",
    sensitivity_dbm=-85.0,
    tx_power_dbm=0.0,
    band_ghz=2.4,
    bit_rate=971_400.0,
    current_tx_ma=17.4,
    current_rx_ma=19.7,
    current_idle_ma=0.9,
    mac_discipline="BAN156",
    phy_overhead=5,
    mac_overhead=9,
    max_payload=256,
)

PROFILES = {"WIFI": WIFI, "WSN": WSN, "WBAN": WBAN}


@dataclass(frozen=True)
class Propagation:
    """Log-distance path loss with a per-wall penalty."""

    pl0_db: float = 40.0  # loss at the 1 m reference distance
    exponent: float = 3.0
    wall_db: float = 5.0
    capture_db: float = 10.0

    def path_loss(self, distance_m: float, crossings: int = 0) -> float:
        if distance_m <= 0:
            raise ValueError("co-located radios unsupported (distance must be > 0)")
        return self.pl0_db + 10.0 * self.exponent * math.log10(distance_m) + self.wall_db * crossings

    def rx_power(self, tx_power_dbm: float, distance_m: float, crossings: int = 0) -> float:
        return tx_power_dbm - self.path_loss(distance_m, crossings)

    def max_range(self, tx_power_dbm: float, sensitivity_dbm: float) -> float:
        """Distance at which a wall-free link drops exactly to sensitivity."""
        budget = tx_power_dbm - sensitivity_dbm - self.pl0_db
        return 10.0 ** (budget / (10.0 * self.exponent))


@dataclass(frozen=True)
class LinkBudget:
    path_loss_db: float
    rx_power_dbm: float
    crossings: int


def link_budget(prop: Propagation, tx_power_dbm: float, distance_m: float, crossings: int) -> LinkBudget:
    pl = prop.path_loss(distance_m, crossings)
    return LinkBudget(path_loss_db=pl, rx_power_dbm=tx_power_dbm - pl, crossings=crossings)


def receivable(budget: LinkBudget, profile: TechProfile, interferers_dbm=(), capture_db: float = 10.0) -> bool:
    """Threshold-plus-capture reception decision.

    True iff the frame is at or above sensitivity and beats the combined
    interference power by the capture margin; otherwise overlapping frames
    destroy each other.
    """
    if budget.rx_power_dbm < profile.sensitivity_dbm:
        return False
    if not interferers_dbm:
        return True
    total_mw = sum(10.0 ** (p / 10.0) for p in interferers_dbm)
    return budget.rx_power_dbm - 10.0 * math.log10(total_mw) >= capture_db


def airtime(payload_bytes: int, profile: TechProfile, extra_header_bytes: int = 0) -> float:
    """Seconds on air for a frame carrying `payload_bytes` of application data.

    `extra_header_bytes` covers network-layer headers riding inside the MAC
    payload; the per-technology payload ceiling applies to application bytes.
    """
    if payload_bytes < 0:
        raise ValueError("negative payload")
    if profile.max_payload is not None and payload_bytes > profile.max_payload:
        raise ValueError(
            f"payload exceeds standard limit ({payload_bytes} > {profile.max_payload} bytes for {profile.name})"
        )
    total = payload_bytes + extra_header_bytes + profile.mac_overhead + profile.phy_overhead
    return 8.0 * total / profile.bit_rate


def control_airtime(profile: TechProfile) -> float:
    """Airtime of a header-only frame (ACK / RTS / CTS)."""
    return airtime(0, profile)


def energy_packet_mj(t_packet_s: float, current_ma: float, volts: float = 3.0) -> float:
    """Energy in mJ for one packet: duration x 3 V x current."""
    if t_packet_s < 0:
        raise ValueError("negative duration")
    return volts * (current_ma / 1000.0) * t_packet_s * 1000.0


class EnergyLedger:
    """Per-node cumulative TX/RX busy time; idle is the remainder of the run."""

    def __init__(self, n_nodes: int, profile: TechProfile, volts: float = 3.0):
        self.profile = profile
        self.volts = volts
        self.tx_s = [0.0] * n_nodes
        self.rx_s = [0.0] * n_nodes

    def add_tx(self, node: int, seconds: float):
        self.tx_s[node] += seconds

    def add_rx(self, node: int, seconds: float):
        self.rx_s[node] += seconds

    def node_energy_mj(self, node: int, horizon_s: float) -> float:
        tx = self.tx_s[node]
        rx = self.rx_s[node]
        idle = max(0.0, horizon_s - tx - rx)
        p = self.profile
        return (
            energy_packet_mj(tx, p.current_tx_ma, self.volts)
            + energy_packet_mj(rx, p.current_rx_ma, self.volts)
            + energy_packet_mj(idle, p.current_idle_ma, self.volts)
        )

    def total_energy_mj(self, horizon_s: float) -> float:
        return sum(self.node_energy_mj(i, horizon_s) for i in range(len(self.tx_s)))

    def consumed_fraction(self, node: int, horizon_s: float, nominal_mj: float) -> float:
        """Residual battery fraction against a nominal capacity."""
        if nominal_mj <= 0:
            return 1.0
        return max(0.0, 1.0 - self.node_energy_mj(node, horizon_s) / nominal_mj)


def profile_with(profile: TechProfile, **overrides) -> TechProfile:
    return replace(profile, **overrides)
