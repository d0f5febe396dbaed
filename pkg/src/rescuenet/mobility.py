"""Disaster-area mobility: restricted random-waypoint traces plus trace file I/O.

The catastrophe area is structured into four sub-area kinds (incident site,
casualties treatment, transport zone, command center). Each mobile node roams
inside its group's home sub-area; a configurable fraction of each group
additionally cycles between the home area and the transport zone. Node 0 is
the stationary sink at the command-center point. Straight legs that would cut
through an obstacle are replaced by a shortest detour around it.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

from .geometry import (
    InfeasibleGeometry,
    count_polygon_crossings,
    detour_path,
    dist,
    point_in_polygon,
    polygon_bbox,
)

AREA_KINDS = ("incident-site", "casualties-treatment", "transport-zone", "command-center")


@dataclass
class SubArea:
    name: str
    kind: str  # one of AREA_KINDS
    polygon: list  # [(x, y), ...]

    def __post_init__(self):
        if self.kind not in AREA_KINDS:
            raise ValueError(f"unknown sub-area kind {self.kind!r}")
        if len(self.polygon) < 3:
            raise ValueError(f"sub-area {self.name}: polygon needs >= 3 vertices")


@dataclass
class NodeGroup:
    label: str
    count: int
    home_area: str  # SubArea name
    speed_range: tuple = (0.5, 2.0)  # m/s, pedestrian movement
    pause_range: tuple = (0.0, 10.0)  # s
    transport_fraction: float = 0.0  # members cycling home -> transport zone -> home

    def __post_init__(self):
        if self.count < 1:
            raise ValueError(f"group {self.label}: count must be positive")
        if self.speed_range[0] > self.speed_range[1] or self.speed_range[0] <= 0:
            raise ValueError(f"group {self.label}: bad speed range {self.speed_range}")
        if self.pause_range[0] > self.pause_range[1] or self.pause_range[0] < 0:
            raise ValueError(f"group {self.label}: bad pause range {self.pause_range}")
        if not 0.0 <= self.transport_fraction <= 1.0:
            raise ValueError(f"group {self.label}: transport_fraction outside [0,1]")


@dataclass
class MobilityTrace:
    """Per-node timestamped waypoints; positions in between are linear."""

    waypoints: list  # index = node id, value = [(t, x, y), ...]

    @property
    def n_nodes(self) -> int:
        return len(self.waypoints)

    def end_time(self, node: int) -> float:
        return self.waypoints[node][-1][0]


def position_at(trace: MobilityTrace, node: int, t: float):
    """Linearly interpolated position; clamps to the last waypoint past the end."""
    if t < 0:
        raise ValueError("negative time")
    wps = trace.waypoints[node]
    times = [w[0] for w in wps]
    i = bisect_right(times, t) - 1
    if i < 0:
        i = 0
    if i >= len(wps) - 1:
        _, x, y = wps[-1]
        return (x, y)
    t0, x0, y0 = wps[i]
    t1, x1, y1 = wps[i + 1]
    if t1 <= t0:
        return (x1, y1)
    f = (t - t0) / (t1 - t0)
    return (x0 + f * (x1 - x0), y0 + f * (y1 - y0))


class TraceSampler:
    """Amortised O(1) position queries for non-decreasing query times."""

    def __init__(self, trace: MobilityTrace):
        self._wps = trace.waypoints
        self._cursor = [0] * len(self._wps)

    def position(self, node: int, t: float):
        wps = self._wps[node]
        i = self._cursor[node]
        last = len(wps) - 1
        while i < last and wps[i + 1][0] <= t:
            i += 1
        self._cursor[node] = i
        if i >= last:
            _, x, y = wps[last]
            return (x, y)
        t0, x0, y0 = wps[i]
        t1, x1, y1 = wps[i + 1]
        f = (t - t0) / (t1 - t0)
        return (x0 + f * (x1 - x0), y0 + f * (y1 - y0))


def obstacle_crossings(a, b, obstacles, bboxes=None) -> int:
    """Distinct obstacle polygons whose interior the open segment (a, b) enters."""
    return count_polygon_crossings(a, b, obstacles, bboxes)


# --- trace generation -------------------------------------------------------


def _sample_point(polygon, bbox, obstacles, rng, max_tries: int = 2000):
    xmin, ymin, xmax, ymax = bbox
    for _ in range(max_tries):
        p = (rng.uniform(xmin, xmax), rng.uniform(ymin, ymax))
        if not point_in_polygon(p, polygon):
            continue
        if any(point_in_polygon(p, ob) for ob in obstacles):
            continue
        return p
    raise InfeasibleGeometry("could not place a waypoint outside obstacles")


def _append_leg(wps, start, target, speed, obstacles):
    """Extend waypoint list with the (possibly detoured) leg to `target`."""
    path = detour_path(start, target, obstacles)
    t = wps[-1][0]
    pos = start
    for nxt in path[1:]:
        d = dist(pos, nxt)
        if d <= 1e-12:
            continue
        t += d / speed
        wps.append((t, nxt[0], nxt[1]))
        pos = nxt
    return pos


def generate_trace(
    areas: dict,
    obstacles: list,
    groups: list,
    sink_pos,
    horizon_s: float,
    rng_for_node,
) -> MobilityTrace:
    """Build a full trace: node 0 pinned at the sink, then each group in order.

    `rng_for_node(node_id)` must return that node's dedicated random stream so
    regenerating with the same seed reproduces the trace byte for byte.
    """
    transport = next((a for a in areas.values() if a.kind == "transport-zone"), None)
    waypoints = [[(0.0, float(sink_pos[0]), float(sink_pos[1]))]]  # node 0: stationary sink

    node_id = 1
    for group in groups:
        home = areas.get(group.home_area)
        if home is None:
            raise ValueError(f"group {group.label}: unknown home area {group.home_area!r}")
        bbox = polygon_bbox(home.polygon)
        n_transport = int(round(group.count * group.transport_fraction))
        for member in range(group.count):
            rng = rng_for_node(node_id)
            cycles_to_transport = member < n_transport and transport is not None
            try:
                wps = _node_walk(
                    home, bbox, transport, obstacles, group, cycles_to_transport, horizon_s, rng
                )
            except InfeasibleGeometry as exc:
                raise InfeasibleGeometry(f"sub-area {home.name!r}: {exc}") from exc
            waypoints.append(wps)
            node_id += 1
    return MobilityTrace(waypoints)


def _node_walk(home, home_bbox, transport, obstacles, group, cycles, horizon_s, rng):
    start = _sample_point(home.polygon, home_bbox, obstacles, rng)
    wps = [(0.0, start[0], start[1])]
    pos = start
    legs_since_trip = 0
    transport_bbox = polygon_bbox(transport.polygon) if transport is not None else None
    while wps[-1][0] < horizon_s + 5.0:
        if cycles and legs_since_trip >= 1:
            # carry casualties to the transport zone, then return home
            target = _sample_point(transport.polygon, transport_bbox, obstacles, rng)
            legs_since_trip = 0
        else:
            target = _sample_point(home.polygon, home_bbox, obstacles, rng)
            legs_since_trip += 1
        speed = rng.uniform(*group.speed_range)
        pos = _append_leg(wps, pos, target, speed, obstacles)
        pause = rng.uniform(*group.pause_range)
        if pause > 0:
            t = wps[-1][0]
            wps.append((t + pause, pos[0], pos[1]))
    return wps


# --- trace file format ------------------------------------------------------
# One line per node in ascending node id, whitespace-separated triples "t x y".


class TraceFormatError(ValueError):
    pass


def write_trace(trace: MobilityTrace) -> str:
    lines = []
    for wps in trace.waypoints:
        lines.append(" ".join(f"{t!r} {x!r} {y!r}" for t, x, y in wps))
    return "\n".join(lines) + "\n"


def parse_trace(text: str) -> MobilityTrace:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise TraceFormatError("no nodes in trace")
    waypoints = []
    for node, line in enumerate(lines):
        tokens = line.split()
        if len(tokens) % 3 != 0:
            raise TraceFormatError(
                f"line {node + 1}: expected whitespace-separated 't x y' triples, got {len(tokens)} tokens"
            )
        wps = []
        for k in range(0, len(tokens), 3):
            try:
                t, x, y = float(tokens[k]), float(tokens[k + 1]), float(tokens[k + 2])
            except ValueError:
                bad = next(tok for tok in tokens[k : k + 3] if not _is_float(tok))
                raise TraceFormatError(f"line {node + 1}: bad number {bad!r}") from None
            if not (math.isfinite(t) and math.isfinite(x) and math.isfinite(y)):
                raise TraceFormatError(f"line {node + 1}: non-finite value")
            wps.append((t, x, y))
        if wps[0][0] != 0.0:
            raise TraceFormatError(f"node {node}: first waypoint must be at t=0")
        for (t0, _, _), (t1, _, _) in zip(wps, wps[1:]):
            if t1 <= t0:
                raise TraceFormatError(f"node {node}: waypoint times not strictly increasing")
        waypoints.append(wps)
    return MobilityTrace(waypoints)


def _is_float(tok: str) -> bool:
    try:
        float(tok)
        return True
    except ValueError:
        return False
