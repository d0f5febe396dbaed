"""Traffic generation, per-run assembly, metrics, aggregation, classification."""

from __future__ import annotations

import math
import multiprocessing
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .config import Scenario, config_hash
from .engine import Engine, RngManager
from .mac import CsmaMac
from .medium import Medium
from .mobility import MobilityTrace, TraceSampler, generate_trace
from .radio import EnergyLedger
from .routing.aodv import AodvProtocol
from .routing.base import DROP_REASONS, NO_ROUTE, NetPacket
from .routing.diffusion import DiffusionProtocol
from .routing.gpsr import GpsrProtocol
from .routing.olsr import OlsrProtocol

PROTOCOLS = {
    "OLSRv2": (OlsrProtocol, "olsr"),
    "AODVv2": (AodvProtocol, "aodv"),
    "DD": (DiffusionProtocol, "dd"),
    "GPSR": (GpsrProtocol, "gpsr"),
}


class PacketTracker:
    """Tracks every application packet once, across however many copies exist."""

    def __init__(self):
        self.sent = 0
        self.state = {}  # (origin, app_seq) -> [live_copies, delivered, delay_s, last_reason]

    def on_send(self, packet):
        self.sent += 1
        self.state[packet.key] = [1, False, 0.0, None]

    def on_duplicate(self, packet, extra_copies):
        self.state[packet.key][0] += extra_copies

    def on_retire(self, packet):
        self.state[packet.key][0] -= 1

    def on_drop(self, packet, reason):
        st = self.state[packet.key]
        st[0] -= 1
        st[3] = reason

    def on_deliver(self, packet, now):
        st = self.state[packet.key]
        st[0] -= 1
        if not st[1]:  # duplicates count once; first arrival defines delay
            st[1] = True
            st[2] = now - packet.created_at

    def finalize(self):
        delivered = 0
        in_flight = 0
        drops = {r: 0 for r in DROP_REASONS}
        delays = []
        for st in self.state.values():
            if st[1]:
                delivered += 1
                delays.append(st[2])
            elif st[0] > 0:
                in_flight += 1
            else:
                drops[st[3] if st[3] is not None else NO_ROUTE] += 1
        return delivered, in_flight, drops, delays


class NodeApi:
    """Concrete service surface a protocol instance sees on the real stack."""

    def __init__(self, node_id, sink_id, sink_position, engine, mac, sampler, tracker,
                 rngs, iteration, energy, nominal_battery_mj, payload_limit):
        self.node_id = node_id
        self.sink_id = sink_id
        self.sink_position = sink_position
        self.engine = engine
        self.mac = mac
        self.sampler = sampler
        self.tracker = tracker
        self.rngs = rngs
        self.iteration = iteration
        self.energy = energy
        self.nominal_battery_mj = nominal_battery_mj
        self._payload_limit = payload_limit
        self.protocol = None
        mac.on_receive = self._on_receive
        mac.on_send_done = self._on_send_done

    # --- mac glue -------------------------------------------------------------

    def _on_receive(self, net, src):
        self.protocol.on_mac_receive(net, src)

    def _on_send_done(self, entry, ok, reason):
        if ok:
            self.protocol.on_mac_send_ok(entry.net, entry.dst)
        else:
            self.protocol.on_mac_send_failed(entry.net, entry.dst)

    def mac_send(self, net, dst, app_bytes, hdr_bytes, packet=None):
        return self.mac.send(net, dst, app_bytes, hdr_bytes, packet=packet)

    # --- services ----------------------------------------------------------------

    def now(self):
        return self.engine.now

    def schedule_timer(self, delay, tag):
        self.engine.schedule(delay, self._fire_timer, tag, target=self.node_id, kind="timer")

    def _fire_timer(self, tag):
        self.protocol.on_timer(tag)

    def position_of_self(self):
        return self.sampler.position(self.node_id, self.engine.now)

    def rng(self, purpose):
        return self.rngs.stream(self.iteration, self.node_id, purpose)

    def energy_fraction(self):
        return self.energy.consumed_fraction(self.node_id, self.engine.now, self.nominal_battery_mj)

    def payload_limit(self):
        return self._payload_limit

    # --- packet accounting ----------------------------------------------------------

    def deliver(self, packet):
        self.tracker.on_deliver(packet, self.engine.now)

    def drop(self, packet, reason):
        self.tracker.on_drop(packet, reason)

    def duplicate(self, packet, extra_copies):
        self.tracker.on_duplicate(packet, extra_copies)

    def retire(self, packet):
        self.tracker.on_retire(packet)


@dataclass
class RunResult:
    protocol: str
    tech: str
    payload: int
    seed: int
    sent: int
    delivered: int
    in_flight: int
    drops: dict
    delays: list
    total_energy_mj: float
    node_energy_mj: list
    config_hash: str

    @property
    def prr(self) -> float:
        if self.sent == 0:
            raise ValueError("no packets sent")
        return self.delivered / self.sent

    @property
    def mean_delay_s(self):
        if not self.delays:
            return None  # zero deliveries: delay is undefined
        return sum(self.delays) / len(self.delays)


def prr(result: RunResult) -> float:
    return result.prr


def mean_delay(result: RunResult):
    return result.mean_delay_s


def build_trace(sc: Scenario, rngs: RngManager, iteration: int) -> MobilityTrace:
    return generate_trace(
        sc.areas,
        sc.obstacle_polygons(),
        sc.groups,
        sc.sink,
        sc.horizon_s,
        lambda node: rngs.stream(iteration, node, "mobility"),
    )


def run_once(sc: Scenario, protocol_name: str, tech_name: str, payload: int,
             iteration: int, trace: MobilityTrace | None = None, log_sink=None) -> RunResult:
    profile = sc.profiles[tech_name]
    if profile.max_payload is not None and payload > profile.max_payload:
        raise ValueError(f"payload {payload} exceeds the {tech_name} limit of {profile.max_payload} bytes")
    proto_cls, params_attr = PROTOCOLS[protocol_name]
    params = getattr(sc, params_attr)

    rngs = RngManager(sc.master_seed)
    if trace is None:
        trace = build_trace(sc, rngs, iteration)
    n = trace.n_nodes
    engine = Engine(horizon=sc.horizon_s, log_sink=log_sink)
    sampler = TraceSampler(trace)
    medium = Medium(engine, profile, sc.prop, sampler, n, obstacles=sc.obstacle_polygons())
    energy = EnergyLedger(n, profile)
    tracker = PacketTracker()
    discipline = sc.disciplines[profile.mac_discipline]
    if not discipline.ack:
        # the sender never learns; the omniscient tracker records the loss
        medium.on_unicast_lost = lambda frame: tracker.on_drop(frame.packet, "mac-failure")

    protocols = []
    for i in range(n):
        mac = CsmaMac(i, profile, discipline, engine, medium, energy,
                      rngs.stream(iteration, i, "mac"), queue_cap=sc.queue_cap)
        api = NodeApi(i, 0, sc.sink, engine, mac, sampler, tracker, rngs, iteration,
                      energy, sc.nominal_battery_mj, profile.max_payload or 1 << 30)
        proto = proto_cls(api, params)
        api.protocol = proto
        protocols.append(proto)
    for proto in protocols:
        proto.start()

    # CBR sources: every mobile node streams toward the sink, start jittered
    interval = 1.0 / sc.cbr_rate
    n_packets = int(round(sc.cbr_rate * sc.horizon_s))

    def emit(args):
        node, k = args
        packet = NetPacket(node, 0, k, engine.now, payload, sc.ttl)
        tracker.on_send(packet)
        protocols[node].on_app_send(packet)

    for node in range(1, n):
        rng = rngs.stream(iteration, node, "app")
        offset = rng.uniform(0.0, interval)
        for k in range(n_packets):
            engine.schedule_at(offset + k * interval, emit, (node, k), target=node, kind="app-send")

    medium.start()
    engine.run()
    medium.finalize()

    delivered, in_flight, drops, delays = tracker.finalize()
    sent = tracker.sent
    assert sent == delivered + in_flight + sum(drops.values()), "packet conservation violated"
    node_energy = [energy.node_energy_mj(i, sc.horizon_s) for i in range(n)]
    return RunResult(
        protocol=protocol_name,
        tech=tech_name,
        payload=payload,
        seed=iteration,
        sent=sent,
        delivered=delivered,
        in_flight=in_flight,
        drops=drops,
        delays=delays,
        total_energy_mj=sum(node_energy),
        node_energy_mj=node_energy,
        config_hash=config_hash(sc),
    )


# --- sweeps ---------------------------------------------------------------------


def sweep_cells(sc: Scenario, filters=None):
    """Ordered (protocol, tech, payload, iteration) product after filtering."""
    filters = filters or {}
    cells = []
    for protocol in sc.protocols:
        if "protocol" in filters and protocol.lower() != filters["protocol"].lower():
            continue
        for tech in sc.techs:
            if "tech" in filters and tech.lower() != filters["tech"].lower():
                continue
            for payload in sc.payloads:
                if "payload" in filters and payload != int(filters["payload"]):
                    continue
                for iteration in range(sc.iterations):
                    cells.append((protocol, tech, payload, iteration))
    return cells


_WORKER = {}


def _init_worker(sc, traces):
    _WORKER["sc"] = sc
    _WORKER["traces"] = traces


def _run_cell(cell):
    protocol, tech, payload, iteration = cell
    sc = _WORKER["sc"]
    trace = _WORKER["traces"][iteration]
    try:
        return run_once(sc, protocol, tech, payload, iteration, trace=trace)
    except Exception as exc:  # a failed cell must not kill the sweep
        return (cell, repr(exc))


def run_sweep(sc: Scenario, filters=None, jobs: int = 1, on_progress=None, traces=None):
    """Run the full product; returns (results, failures) in deterministic order."""
    cells = sweep_cells(sc, filters)
    rngs = RngManager(sc.master_seed)
    if traces is None:
        iterations_needed = sorted({c[3] for c in cells})
        traces = {it: build_trace(sc, rngs, it) for it in iterations_needed}
    results, failures = [], []
    if jobs > 1:
        with multiprocessing.Pool(jobs, initializer=_init_worker, initargs=(sc, traces)) as pool:
            for i, out in enumerate(pool.imap(_run_cell, cells)):
                if isinstance(out, tuple) and not isinstance(out, RunResult):
                    failures.append(out)
                else:
                    results.append(out)
                if on_progress:
                    on_progress(i + 1, len(cells), cells[i])
    else:
        _init_worker(sc, traces)
        for i, cell in enumerate(cells):
            out = _run_cell(cell)
            if isinstance(out, tuple) and not isinstance(out, RunResult):
                failures.append(out)
            else:
                results.append(out)
            if on_progress:
                on_progress(i + 1, len(cells), cell)
    order = {p: i for i, p in enumerate(sc.protocols)}
    torder = {t: i for i, t in enumerate(sc.techs)}
    results.sort(key=lambda r: (order[r.protocol], torder[r.tech], r.payload, r.seed))
    return results, failures


# --- aggregation ------------------------------------------------------------------


def _mean_ci(samples, confidence=0.95):
    """Mean and Student-t confidence half-width over iteration means."""
    n = len(samples)
    if n == 0:
        return None, None
    mean = float(np.mean(samples))
    if n < 2:
        return mean, None
    sd = float(np.std(samples, ddof=1))
    half = float(stats.t.ppf(0.5 + confidence / 2.0, n - 1) * sd / math.sqrt(n))
    return mean, half


@dataclass
class CellSummary:
    protocol: str
    tech: str
    payload: int
    n_runs: int
    prr_mean: float
    prr_ci95: float | None
    delay_mean_ms: float | None
    delay_ci95_ms: float | None
    energy_mean_mj: float
    energy_ci95_mj: float | None
    config_hash: str


def aggregate(results) -> CellSummary:
    """Collapse >= 1 runs of one (protocol, tech, payload) cell."""
    if not results:
        raise ValueError("nothing to aggregate")
    first = results[0]
    for r in results:
        if (r.protocol, r.tech, r.payload) != (first.protocol, first.tech, first.payload):
            raise ValueError("aggregate() requires runs of a single cell")
    prr_mean, prr_ci = _mean_ci([r.prr for r in results])
    delay_samples = [r.mean_delay_s * 1000.0 for r in results if r.mean_delay_s is not None]
    delay_mean, delay_ci = _mean_ci(delay_samples)
    energy_mean, energy_ci = _mean_ci([r.total_energy_mj for r in results])
    return CellSummary(
        protocol=first.protocol,
        tech=first.tech,
        payload=first.payload,
        n_runs=len(results),
        prr_mean=prr_mean,
        prr_ci95=prr_ci,
        delay_mean_ms=delay_mean,
        delay_ci95_ms=delay_ci,
        energy_mean_mj=energy_mean,
        energy_ci95_mj=energy_ci,
        config_hash=first.config_hash,
    )


def summarize(results) -> list:
    cells = {}
    for r in results:
        cells.setdefault((r.protocol, r.tech, r.payload), []).append(r)
    return [aggregate(v) for v in cells.values()]


# --- qualitative classification ------------------------------------------------------


def _tercile_label(value, values):
    lo = float(np.quantile(values, 1.0 / 3.0))
    hi = float(np.quantile(values, 2.0 / 3.0))
    if value <= lo:
        return "Low"
    if value <= hi:
        return "Medium"
    return "High"


def classify(cells, thresholds):
    """Table-2-style grid: per (tech, protocol) a label for PRR, delay, energy.

    PRR labels use fixed thresholds on the payload-averaged mean; delay and
    energy are terciled within each technology. Worst marks dead cells.
    """
    by_pair = {}
    for c in cells:
        by_pair.setdefault((c.tech, c.protocol), []).append(c)
    grid = {}
    for (tech, protocol), group in by_pair.items():
        prr_avg = float(np.mean([c.prr_mean for c in group]))
        delays = [c.delay_mean_ms for c in group if c.delay_mean_ms is not None]
        delay_avg = float(np.mean(delays)) if delays else None
        energy_avg = float(np.mean([c.energy_mean_mj for c in group]))
        grid[(tech, protocol)] = {"prr_value": prr_avg, "delay_value": delay_avg, "energy_value": energy_avg}
    for (tech, protocol), entry in grid.items():
        dead = entry["prr_value"] <= thresholds.prr_worst
        if dead:
            entry["prr"] = entry["delay"] = entry["energy"] = "Worst"
            continue
        v = entry["prr_value"]
        if v >= thresholds.prr_high:
            entry["prr"] = "High"
        elif v >= thresholds.prr_medium:
            entry["prr"] = "Medium"
        else:
            entry["prr"] = "Low"
        peers = [e for (t, _), e in grid.items() if t == tech and e["prr_value"] > thresholds.prr_worst]
        delay_vals = [e["delay_value"] for e in peers if e["delay_value"] is not None]
        energy_vals = [e["energy_value"] for e in peers]
        entry["delay"] = (
            _tercile_label(entry["delay_value"], delay_vals) if entry["delay_value"] is not None else "Worst"
        )
        entry["energy"] = _tercile_label(entry["energy_value"], energy_vals)
    return grid


# --- text renderings -----------------------------------------------------------------


RUNS_HEADER = (
    "protocol,tech,payload_bytes,seed,sent,delivered,prr,mean_delay_ms,"
    "drop_no_route,drop_ttl,drop_queue,drop_mac,total_energy_mJ,config_hash"
)

SUMMARY_HEADER = (
    "protocol,tech,payload_bytes,n_runs,prr_mean,prr_ci95,delay_mean_ms,delay_ci95_ms,"
    "energy_mean_mJ,energy_ci95_mJ,config_hash"
)


def _fmt(x, spec="{:.6f}"):
    return "" if x is None else spec.format(x)


def runs_csv(results) -> str:
    lines = [RUNS_HEADER]
    for r in results:
        delay_ms = None if r.mean_delay_s is None else r.mean_delay_s * 1000.0
        lines.append(
            f"{r.protocol},{r.tech},{r.payload},{r.seed},{r.sent},{r.delivered},"
            f"{r.prr:.6f},{_fmt(delay_ms, '{:.3f}')},"
            f"{r.drops['no-route']},{r.drops['ttl-expired']},{r.drops['queue-overflow']},"
            f"{r.drops['mac-failure']},{r.total_energy_mj:.3f},{r.config_hash}"
        )
    return "\n".join(lines) + "\n"


def summary_csv(cells) -> str:
    lines = [SUMMARY_HEADER]
    for c in cells:
        lines.append(
            f"{c.protocol},{c.tech},{c.payload},{c.n_runs},"
            f"{c.prr_mean:.6f},{_fmt(c.prr_ci95)},"
            f"{_fmt(c.delay_mean_ms, '{:.3f}')},{_fmt(c.delay_ci95_ms, '{:.3f}')},"
            f"{c.energy_mean_mj:.3f},{_fmt(c.energy_ci95_mj, '{:.3f}')},{c.config_hash}"
        )
    return "\n".join(lines) + "\n"


def node_energy_csv(results) -> str:
    lines = ["protocol,tech,payload_bytes,seed,node,energy_mJ,config_hash"]
    for r in results:
        for node, e in enumerate(r.node_energy_mj):
            lines.append(f"{r.protocol},{r.tech},{r.payload},{r.seed},{node},{e:.3f},{r.config_hash}")
    return "\n".join(lines) + "\n"


def classification_text(grid, thresholds, cfg_hash) -> str:
    out = [
        f"# config_hash={cfg_hash}",
        f"# PRR thresholds: High>={thresholds.prr_high}  Medium>={thresholds.prr_medium}  "
        f"Low>{thresholds.prr_worst}  Worst<={thresholds.prr_worst}",
        "# delay/energy: terciles within each technology; Worst = zero-delivery cell",
        f"{'tech':<6} {'protocol':<8} {'PRR':>8} {'Delay':>8} {'Energy':>8}",
    ]
    for (tech, protocol) in sorted(grid):
        e = grid[(tech, protocol)]
        out.append(f"{tech:<6} {protocol:<8} {e['prr']:>8} {e['delay']:>8} {e['energy']:>8}")
    return "\n".join(out) + "\n"
