"""Scenario configuration: defaults, the flat-keyed config file format, hashing.

The config format is sectioned text (INI syntax): every model constant has a
default and can be overridden by key; unknown keys are rejected with the key
path and line number. Defining any [area:*], [group:*] or [obstacle:*] section
replaces the whole built-in set for that category.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field, replace

from . import mac as mac_mod
from . import radio as radio_mod
from .mobility import AREA_KINDS, NodeGroup, SubArea
from .routing.aodv import AodvParams
from .routing.diffusion import DiffusionParams
from .routing.gpsr import GpsrParams
from .routing.olsr import OlsrParams

PROTOCOL_NAMES = ("OLSRv2", "AODVv2", "DD", "GPSR")
TECH_NAMES = ("WIFI", "WSN", "WBAN")


class ConfigError(ValueError):
    pass


@dataclass
class ClassifyThresholds:
    prr_high: float = 0.8
    prr_medium: float = 0.5
    prr_worst: float = 0.02  # at or below this mean PRR a cell counts as dead


@dataclass
class Scenario:
    """Full experiment description; every model constant lives here."""

    horizon_s: float = 100.0
    master_seed: int = 1
    iterations: int = 10
    protocols: tuple = PROTOCOL_NAMES
    techs: tuple = TECH_NAMES
    payloads: tuple = (2, 16, 64, 128, 256)
    cbr_rate: float = 1.0
    ttl: int = 32
    queue_cap: int = 50
    nominal_battery_mj: float = 3_000_000.0

    width: float = 400.0
    height: float = 200.0
    sink: tuple = (200.0, 8.0)
    areas: dict = field(default_factory=dict)
    obstacles: dict = field(default_factory=dict)
    groups: list = field(default_factory=list)

    prop: radio_mod.Propagation = field(default_factory=radio_mod.Propagation)
    profiles: dict = field(default_factory=lambda: dict(radio_mod.PROFILES))
    disciplines: dict = field(default_factory=lambda: dict(mac_mod.DISCIPLINES))

    olsr: OlsrParams = field(default_factory=OlsrParams)
    aodv: AodvParams = field(default_factory=AodvParams)
    dd: DiffusionParams = field(default_factory=DiffusionParams)
    gpsr: GpsrParams = field(default_factory=GpsrParams)
    classify: ClassifyThresholds = field(default_factory=ClassifyThresholds)

    @property
    def node_count(self) -> int:
        return 1 + sum(g.count for g in self.groups)

    def obstacle_polygons(self):
        return [self.obstacles[k] for k in sorted(self.obstacles)]


def default_scenario() -> Scenario:
    """The shipped disaster layout: a mall with two incident sites.

    Two fire incident areas sit on opposite sides of the building's north
    wing; casualties treatment and the transport zone flank the main gate on
    the south side, where the command-center sink (node 0) is placed. Group
    sizes follow the 78/18/3 firefighter/medic/police split over 99 mobile
    nodes. All geometry is configurable.
    """
    sc = Scenario()
    sc.sink = (200.0, 30.0)
    sc.areas = {
        "incident-west": SubArea("incident-west", "incident-site", [(30, 85), (130, 85), (130, 190), (30, 190)]),
        "incident-east": SubArea("incident-east", "incident-site", [(270, 85), (370, 85), (370, 190), (270, 190)]),
        "treatment": SubArea("treatment", "casualties-treatment", [(70, 15), (185, 15), (185, 75), (70, 75)]),
        "transport": SubArea("transport", "transport-zone", [(215, 15), (330, 15), (330, 75), (215, 75)]),
        "gate": SubArea("gate", "command-center", [(180, 10), (220, 10), (220, 60), (180, 60)]),
    }
    # the shop block separates the two incident wings; kiosks sit beside the
    # walking corridors so the corridors stay radio-clear
    sc.obstacles = {
        "shop-block": [(160, 115), (240, 115), (240, 190), (160, 190)],
        "kiosk-west": [(40, 80), (80, 80), (80, 95), (40, 95)],
        "kiosk-east": [(300, 80), (340, 80), (340, 95), (300, 95)],
    }
    sc.groups = [
        NodeGroup("firefighters-west", 39, "incident-west", (0.5, 2.0), (0.0, 10.0), 0.25),
        NodeGroup("firefighters-east", 39, "incident-east", (0.5, 2.0), (0.0, 10.0), 0.25),
        NodeGroup("medics-treatment", 9, "treatment", (0.5, 2.0), (0.0, 10.0), 0.4),
        NodeGroup("medics-transport", 9, "transport", (0.5, 2.0), (0.0, 10.0), 0.0),
        NodeGroup("police", 3, "gate", (0.5, 2.0), (0.0, 10.0), 0.0),
    ]
    return sc


def demo_scenario(n_per_group: int = 6, horizon_s: float = 30.0, seed: int = 7) -> Scenario:
    """A small fast variant of the default layout for demos and tests."""
    sc = default_scenario()
    sc.horizon_s = horizon_s
    sc.master_seed = seed
    sc.iterations = 2
    counts = {"firefighters-west": n_per_group, "firefighters-east": n_per_group,
              "medics-treatment": n_per_group, "medics-transport": n_per_group, "police": 2}
    sc.groups = [
        NodeGroup(g.label, counts[g.label], g.home_area, g.speed_range, g.pause_range, g.transport_fraction)
        for g in sc.groups
    ]
    return sc


# --- file loading -------------------------------------------------------------


def _line_of(text: str, section: str, key: str) -> int:
    in_section = False
    for no, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if stripped.startswith("["):
            in_section = stripped == f"[{section}]"
        elif in_section and stripped.split("=")[0].strip() == key:
            return no
    return 0


class _Reader:
    def __init__(self, parser, raw_text):
        self.parser = parser
        self.raw = raw_text
        self.used = set()

    def fail(self, section, key, why):
        line = _line_of(self.raw, section, key)
        where = f" (line {line})" if line else ""
        raise ConfigError(f"{section}.{key}: {why}{where}")

    def get(self, section, key, conv, default=None):
        if not self.parser.has_option(section, key):
            return default
        self.used.add((section, key))
        raw = self.parser.get(section, key)
        try:
            return conv(raw)
        except (ValueError, TypeError) as exc:
            self.fail(section, key, f"bad value {raw!r}: {exc}")

    def check_unknown(self):
        for section in self.parser.sections():
            base = section.split(":")[0]
            if base not in ("scenario", "radio", "mac", "olsr", "aodv", "dd", "gpsr", "classify",
                            "area", "group", "obstacle"):
                raise ConfigError(f"unknown section [{section}]")
            for key in self.parser.options(section):
                if (section, key) not in self.used:
                    line = _line_of(self.raw, section, key)
                    where = f" (line {line})" if line else ""
                    raise ConfigError(f"unknown key {section}.{key}{where}")


def _bool(raw: str) -> bool:
    v = raw.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected a boolean")


def _num_list(raw: str):
    return tuple(float(x) for x in raw.replace(",", " ").split())


def _int_list(raw: str):
    return tuple(int(x) for x in raw.replace(",", " ").split())


def _str_list(raw: str):
    return tuple(x.strip() for x in raw.replace(",", " ").split())


def _points(raw: str):
    pts = []
    for pair in raw.split():
        x, y = pair.split(",")
        pts.append((float(x), float(y)))
    return pts


def _pair(raw: str):
    vals = _num_list(raw)
    if len(vals) != 2:
        raise ValueError("expected two numbers")
    return (vals[0], vals[1])


_CANON_PROTO = {p.lower(): p for p in PROTOCOL_NAMES}
_CANON_TECH = {t.lower(): t for t in TECH_NAMES}


def load_config(path=None, text=None) -> Scenario:
    """Parse and validate a config file into a Scenario with defaults filled."""
    if text is None:
        if path is None:
            return validate(default_scenario())
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"unparseable config: {exc}") from exc
    r = _Reader(parser, text)
    sc = default_scenario()

    s = "scenario"
    if parser.has_section(s):
        sc.horizon_s = r.get(s, "horizon_s", float, sc.horizon_s)
        sc.master_seed = r.get(s, "master_seed", int, sc.master_seed)
        sc.iterations = r.get(s, "iterations", int, sc.iterations)
        protocols = r.get(s, "protocols", _str_list, None)
        if protocols is not None:
            try:
                sc.protocols = tuple(_CANON_PROTO[p.lower()] for p in protocols)
            except KeyError as exc:
                r.fail(s, "protocols", f"unknown protocol {exc.args[0]!r}")
        techs = r.get(s, "techs", _str_list, None)
        if techs is not None:
            try:
                sc.techs = tuple(_CANON_TECH[t.lower()] for t in techs)
            except KeyError as exc:
                r.fail(s, "techs", f"unknown technology {exc.args[0]!r}")
        sc.payloads = r.get(s, "payloads", _int_list, sc.payloads)
        sc.cbr_rate = r.get(s, "cbr_rate", float, sc.cbr_rate)
        sc.ttl = r.get(s, "ttl", int, sc.ttl)
        sc.queue_cap = r.get(s, "queue_cap", int, sc.queue_cap)
        sc.nominal_battery_mj = r.get(s, "nominal_battery_mj", float, sc.nominal_battery_mj)
        sc.width = r.get(s, "width", float, sc.width)
        sc.height = r.get(s, "height", float, sc.height)
        sink = r.get(s, "sink", _pair, None)
        if sink is not None:
            sc.sink = sink

    s = "radio"
    if parser.has_section(s):
        prop_kw = {}
        for k in ("pl0_db", "exponent", "wall_db", "capture_db"):
            v = r.get(s, k, float, None)
            if v is not None:
                prop_kw[k] = v
        if prop_kw:
            sc.prop = replace(sc.prop, **prop_kw)
        for tech in ("wifi", "wsn", "wban"):
            name = tech.upper()
            overrides = {}
            for k, conv in (
                ("bit_rate", float),
                ("sensitivity_dbm", float),
                ("tx_power_dbm", float),
                ("current_tx_ma", float),
                ("current_rx_ma", float),
                ("current_idle_ma", float),
                ("phy_overhead", int),
                ("mac_overhead", int),
            ):
                v = r.get(s, f"{tech}_{k}", conv, None)
                if v is not None:
                    overrides[k] = v
            if overrides:
                sc.profiles[name] = replace(sc.profiles[name], **overrides)

    s = "mac"
    if parser.has_section(s):
        for disc_key, prefix in (("DCF", "dcf"), ("Z154", "z154"), ("BAN156", "ban")):
            disc = sc.disciplines[disc_key]
            timing_kw = {}
            for k in ("slot", "sifs", "difs", "cca"):
                v = r.get(s, f"{prefix}_{k}", float, None)
                if v is not None:
                    timing_kw[k] = v
            disc_kw = {}
            for k, conv in (
                ("cw_min", int),
                ("cw_max", int),
                ("backoff_exponent", int),
                ("retransmit_limit", int),
                ("max_cca_rounds", int),
                ("rts_cts", _bool),
            ):
                v = r.get(s, f"{prefix}_{k}", conv, None)
                if v is not None:
                    disc_kw[k] = v
            if timing_kw:
                disc_kw["timing"] = replace(disc.timing, **timing_kw)
            if disc_kw:
                sc.disciplines[disc_key] = replace(disc, **disc_kw)

    for s, obj, fields_ in (
        ("olsr", sc.olsr, (("hello_interval", float), ("tc_interval", float), ("hold_mult", float),
                           ("data_header", int))),
        ("aodv", sc.aodv, (("rreq_ttl", int), ("route_lifetime", float), ("reverse_lifetime", float),
                           ("dedup_window", float), ("buffer_s", float), ("buffer_cap", int),
                           ("rreq_retries", int), ("retry_interval", float), ("energy_tiebreak", _bool),
                           ("data_header", int))),
        ("dd", sc.dd, (("exploratory_rate", float), ("refresh_interval", float), ("gradient_expiry", float),
                       ("reinforce_min_gap", float), ("data_header", int), ("aggregate", _bool))),
        ("gpsr", sc.gpsr, (("beacon_interval", float), ("expiry_intervals", float),
                           ("position_noise_m", float), ("data_header", int), ("beacon_bytes", int))),
        ("classify", sc.classify, (("prr_high", float), ("prr_medium", float), ("prr_worst", float))),
    ):
        if parser.has_section(s):
            for key, conv in fields_:
                v = r.get(s, key, conv, None)
                if v is not None:
                    setattr(obj, key, v)

    area_sections = [x for x in parser.sections() if x.startswith("area:")]
    if area_sections:
        sc.areas = {}
        for section in area_sections:
            name = section.split(":", 1)[1]
            kind = r.get(section, "kind", str, None)
            polygon = r.get(section, "polygon", _points, None)
            if kind is None or polygon is None:
                raise ConfigError(f"[{section}] needs both 'kind' and 'polygon'")
            if kind not in AREA_KINDS:
                r.fail(section, "kind", f"must be one of {AREA_KINDS}")
            sc.areas[name] = SubArea(name, kind, polygon)

    obstacle_sections = [x for x in parser.sections() if x.startswith("obstacle:")]
    if obstacle_sections:
        sc.obstacles = {}
        for section in obstacle_sections:
            polygon = r.get(section, "polygon", _points, None)
            if polygon is None or len(polygon) < 3:
                raise ConfigError(f"[{section}] needs a polygon with >= 3 vertices")
            sc.obstacles[section.split(":", 1)[1]] = polygon

    group_sections = [x for x in parser.sections() if x.startswith("group:")]
    if group_sections:
        sc.groups = []
        for section in group_sections:
            label = section.split(":", 1)[1]
            count = r.get(section, "count", int, None)
            home = r.get(section, "home", str, None)
            if count is None or home is None:
                raise ConfigError(f"[{section}] needs both 'count' and 'home'")
            speed = r.get(section, "speed", _pair, (0.5, 2.0))
            pause = r.get(section, "pause", _pair, (0.0, 10.0))
            tf = r.get(section, "transport_fraction", float, 0.0)
            sc.groups.append(NodeGroup(label, count, home, speed, pause, tf))

    r.check_unknown()
    return validate(sc)


def validate(sc: Scenario) -> Scenario:
    if sc.horizon_s <= 0:
        raise ConfigError("scenario.horizon_s must be positive")
    if sc.iterations < 1:
        raise ConfigError("scenario.iterations must be >= 1")
    if not sc.groups:
        raise ConfigError("no node groups defined")
    if not sc.payloads:
        raise ConfigError("scenario.payloads must be non-empty")
    for g in sc.groups:
        if g.home_area not in sc.areas:
            raise ConfigError(f"group {g.label!r}: unknown home area {g.home_area!r}")
    for tech in sc.techs:
        limit = sc.profiles[tech].max_payload
        if limit is not None:
            bad = [p for p in sc.payloads if p > limit]
            if bad:
                raise ConfigError(
                    f"payload {bad[0]} exceeds the {tech} standard limit of {limit} bytes"
                )
    for p in sc.payloads:
        if p < 0:
            raise ConfigError("payloads must be non-negative")
    if sc.cbr_rate <= 0:
        raise ConfigError("scenario.cbr_rate must be positive")
    return sc


# --- canonical echo and hashing ------------------------------------------------


def canonical_lines(sc: Scenario) -> list:
    lines = []

    def put(sec, key, value):
        lines.append(f"{sec}.{key}={value}")

    put("scenario", "horizon_s", sc.horizon_s)
    put("scenario", "master_seed", sc.master_seed)
    put("scenario", "iterations", sc.iterations)
    put("scenario", "protocols", ",".join(sc.protocols))
    put("scenario", "techs", ",".join(sc.techs))
    put("scenario", "payloads", ",".join(str(p) for p in sc.payloads))
    put("scenario", "cbr_rate", sc.cbr_rate)
    put("scenario", "ttl", sc.ttl)
    put("scenario", "queue_cap", sc.queue_cap)
    put("scenario", "nominal_battery_mj", sc.nominal_battery_mj)
    put("scenario", "width", sc.width)
    put("scenario", "height", sc.height)
    put("scenario", "sink", f"{sc.sink[0]},{sc.sink[1]}")
    for k in ("pl0_db", "exponent", "wall_db", "capture_db"):
        put("radio", k, getattr(sc.prop, k))
    for name in sorted(sc.profiles):
        p = sc.profiles[name]
        put("radio", name, (p.bit_rate, p.sensitivity_dbm, p.tx_power_dbm, p.current_tx_ma,
                            p.current_rx_ma, p.current_idle_ma, p.phy_overhead, p.mac_overhead))
    for name in sorted(sc.disciplines):
        d = sc.disciplines[name]
        put("mac", name, (d.cw_min, d.cw_max, d.backoff_exponent, d.retransmit_limit,
                          d.max_cca_rounds, d.ack, d.rts_cts,
                          d.timing.slot, d.timing.sifs, d.timing.difs, d.timing.cca))
    for sec, obj in (("olsr", sc.olsr), ("aodv", sc.aodv), ("dd", sc.dd), ("gpsr", sc.gpsr),
                     ("classify", sc.classify)):
        for key in sorted(vars(obj)):
            put(sec, key, getattr(obj, key))
    for name in sorted(sc.areas):
        a = sc.areas[name]
        put("area", name, (a.kind, tuple(a.polygon)))
    for name in sorted(sc.obstacles):
        put("obstacle", name, tuple(sc.obstacles[name]))
    for g in sorted(sc.groups, key=lambda g: g.label):
        put("group", g.label, (g.count, g.home_area, g.speed_range, g.pause_range, g.transport_fraction))
    return sorted(lines)


def config_hash(sc: Scenario) -> str:
    blob = "\n".join(canonical_lines(sc)).encode()
    return hashlib.sha256(blob).hexdigest()[:16]
