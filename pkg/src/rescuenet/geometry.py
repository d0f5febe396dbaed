"""Planar geometry: polygon predicates, segment crossings, detours around obstacles.

Points are plain (x, y) tuples in meters; polygons are vertex lists without a
repeated closing vertex. Everything here is pure and deterministic.
"""

from __future__ import annotations

import heapq
import math

_EPS = 1e-9


class InfeasibleGeometry(Exception):
    """No valid placement or path exists for the given polygons."""


def signed_area(poly) -> float:
    s = 0.0
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        s += x1 * y2 - x2 * y1
    return 0.5 * s


def polygon_bbox(poly):
    xs = [p[0] for p in poly]
    ys = [p[1] for p in poly]
    return min(xs), min(ys), max(xs), max(ys)


def point_in_polygon(pt, poly) -> bool:
    """Ray-cast containment; points on the boundary count as inside."""
    x, y = pt
    if on_polygon_boundary(pt, poly):
        return True
    inside = False
    n = len(poly)
    x1, y1 = poly[-1]
    for i in range(n):
        x2, y2 = poly[i]
        if (y1 > y) != (y2 > y):
            xin = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if xin > x:
                inside = not inside
        x1, y1 = x2, y2
    return inside


def point_strictly_inside(pt, poly) -> bool:
    return point_in_polygon(pt, poly) and not on_polygon_boundary(pt, poly)


def on_polygon_boundary(pt, poly, tol: float = _EPS) -> bool:
    n = len(poly)
    for i in range(n):
        if _point_on_segment(pt, poly[i], poly[(i + 1) % n], tol):
            return True
    return False


def _point_on_segment(pt, a, b, tol: float = _EPS) -> bool:
    px, py = pt
    ax, ay = a
    bx, by = b
    cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
    seg_len = math.hypot(bx - ax, by - ay)
    if seg_len < tol:
        return math.hypot(px - ax, py - ay) <= tol
    if abs(cross) / seg_len > tol:
        return False
    dot = (px - ax) * (bx - ax) + (py - ay) * (by - ay)
    return -tol * seg_len <= dot <= seg_len * seg_len + tol * seg_len


def segment_intersection_params(a, b, c, d):
    """Parameters t on segment (a, b) where it meets segment (c, d).

    Returns a list of t values in [0, 1]: one for a transversal meeting,
    two (the overlap ends) when the segments are collinear and overlap.
    """
    ax, ay = a
    bx, by = b
    cx, cy = c
    dx, dy = d
    rx, ry = bx - ax, by - ay
    sx, sy = dx - cx, dy - cy
    denom = rx * sy - ry * sx
    qpx, qpy = cx - ax, cy - ay
    if abs(denom) > _EPS:
        t = (qpx * sy - qpy * sx) / denom
        u = (qpx * ry - qpy * rx) / denom
        if -_EPS <= t <= 1 + _EPS and -_EPS <= u <= 1 + _EPS:
            return [min(1.0, max(0.0, t))]
        return []
    # parallel; check collinearity
    if abs(qpx * ry - qpy * rx) > _EPS * max(1.0, math.hypot(rx, ry)):
        return []
    rlen2 = rx * rx + ry * ry
    if rlen2 < _EPS:
        return []
    t0 = (qpx * rx + qpy * ry) / rlen2
    t1 = t0 + (sx * rx + sy * ry) / rlen2
    lo, hi = min(t0, t1), max(t0, t1)
    lo, hi = max(0.0, lo), min(1.0, hi)
    if lo > hi + _EPS:
        return []
    return [lo, hi]


def segments_cross(a, b, c, d) -> bool:
    """True when the open interiors of the two segments meet transversally."""
    ax, ay = a
    bx, by = b
    cx, cy = c
    dx, dy = d
    d1 = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    d2 = (bx - ax) * (dy - ay) - (by - ay) * (dx - ax)
    d3 = (dx - cx) * (ay - cy) - (dy - cy) * (ax - cx)
    d4 = (dx - cx) * (by - cy) - (dy - cy) * (bx - cx)
    return (d1 * d2 < -_EPS) and (d3 * d4 < -_EPS)


def segment_enters_polygon(a, b, poly) -> bool:
    """True when any part of the open segment (a, b) lies strictly inside poly.

    The segment is split at every boundary meeting and each piece is judged
    by its midpoint, so grazing a vertex or running along an edge does not
    count as a crossing.
    """
    ts = [0.0, 1.0]
    n = len(poly)
    for i in range(n):
        ts.extend(segment_intersection_params(a, b, poly[i], poly[(i + 1) % n]))
    ts = sorted(set(ts))
    ax, ay = a
    bx, by = b
    for t0, t1 in zip(ts, ts[1:]):
        if t1 - t0 < _EPS:
            continue
        tm = 0.5 * (t0 + t1)
        mid = (ax + tm * (bx - ax), ay + tm * (by - ay))
        if point_strictly_inside(mid, poly):
            return True
    return False


def count_polygon_crossings(a, b, polygons, bboxes=None) -> int:
    """Number of distinct polygons whose interior the open segment (a, b) enters."""
    count = 0
    for i, poly in enumerate(polygons):
        if bboxes is not None:
            xmin, ymin, xmax, ymax = bboxes[i]
            if (
                (a[0] < xmin and b[0] < xmin)
                or (a[0] > xmax and b[0] > xmax)
                or (a[1] < ymin and b[1] < ymin)
                or (a[1] > ymax and b[1] > ymax)
            ):
                continue
        if segment_enters_polygon(a, b, poly):
            count += 1
    return count


def ensure_ccw(poly):
    return list(poly) if signed_area(poly) > 0 else list(reversed(poly))


def inflate_polygon(poly, margin: float):
    """Offset each vertex outward along the miter direction by `margin`."""
    pts = ensure_ccw(poly)
    n = len(pts)
    out = []
    for i in range(n):
        px, py = pts[(i - 1) % n]
        vx, vy = pts[i]
        nx_, ny_ = pts[(i + 1) % n]
        e1x, e1y = vx - px, vy - py
        e2x, e2y = nx_ - vx, ny_ - vy
        l1 = math.hypot(e1x, e1y) or 1.0
        l2 = math.hypot(e2x, e2y) or 1.0
        # outward normals of the two incident edges (CCW polygon)
        n1x, n1y = e1y / l1, -e1x / l1
        n2x, n2y = e2y / l2, -e2x / l2
        mx, my = n1x + n2x, n1y + n2y
        ml = math.hypot(mx, my)
        if ml < _EPS:
            mx, my, ml = n1x, n1y, 1.0
        mx, my = mx / ml, my / ml
        cos_phi = mx * n1x + my * n1y
        scale = margin / max(cos_phi, 0.25)  # capped miter for sharp corners
        out.append((vx + mx * scale, vy + my * scale))
    return out


def detour_path(a, b, polygons, margin: float = 0.5):
    """Shortest polyline from a to b that enters no polygon interior.

    Runs Dijkstra over the visibility graph of the polygons' vertices
    inflated by `margin`. Returns the full point list including a and b.
    Raises InfeasibleGeometry when the goal is unreachable.
    """
    if not any(segment_enters_polygon(a, b, poly) for poly in polygons):
        return [a, b]
    nodes = [a, b]
    for poly in polygons:
        nodes.extend(inflate_polygon(poly, margin))

    def clear(u, v):
        return not any(segment_enters_polygon(u, v, poly) for poly in polygons)

    n = len(nodes)
    dist = [math.inf] * n
    prev = [-1] * n
    dist[0] = 0.0
    heap = [(0.0, 0)]
    seen = [False] * n
    while heap:
        d, u = heapq.heappop(heap)
        if seen[u]:
            continue
        seen[u] = True
        if u == 1:
            break
        ux, uy = nodes[u]
        for v in range(n):
            if seen[v] or v == u:
                continue
            vx, vy = nodes[v]
            w = math.hypot(vx - ux, vy - uy)
            if d + w >= dist[v]:
                continue
            if clear(nodes[u], nodes[v]):
                dist[v] = d + w
                prev[v] = u
                heapq.heappush(heap, (dist[v], v))
    if not seen[1]:
        raise InfeasibleGeometry("no obstacle-free path between waypoints")
    path = []
    cur = 1
    while cur != -1:
        path.append(nodes[cur])
        cur = prev[cur]
    path.reverse()
    return path


def dist(a, b) -> float:
    return math.hypot(b[0] - a[0], b[1] - a[1])
