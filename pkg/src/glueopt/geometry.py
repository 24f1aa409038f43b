"""Planar curve networks and the geometric quantities measured on them.

A network is a finite set of nodes joined by polyline edges.  Every
operation here is a pure function of immutable inputs; arrays stored on a
:class:`CurveNetwork` are flagged read-only.
"""

from __future__ import annotations

import math
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

__all__ = [
    "Edge",
    "CurveNetwork",
    "Disc",
    "Polygon",
    "DegenerateCrossing",
    "GammaResult",
    "total_length",
    "is_connected",
    "contains_loop",
    "is_embedded",
    "flatness",
    "geodesic_distance",
    "chord_arc_constant",
    "ahlfors_density",
    "branch_count",
    "gamma_sup",
    "project_to_domain",
    "read_network",
    "write_network",
    "format_network",
    "parse_network",
]

_EPS = 1e-12


class DegenerateCrossing(ValueError):
    """A segment is tangent to (or has a vertex on) the probing circle."""


def as_point(p) -> np.ndarray:
    q = np.asarray(p, dtype=float).reshape(2)
    if not np.all(np.isfinite(q)):
        raise ValueError(f"non-finite point {p!r}")
    return q


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


class Edge(NamedTuple):
    i: int
    j: int
    interior: np.ndarray  # (K, 2) interior polyline vertices, may be empty


class CurveNetwork:
    """Connected planar network of polylines.

    Parameters
    ----------
    nodes : array_like, shape (N, 2)
        Node coordinates.  Isolated nodes (no incident edge) are allowed.
    edges : iterable of (i, j, interior)
        Edge endpoints by node index and the interior vertices of the
        polyline running from ``nodes[i]`` to ``nodes[j]``.  ``i == j`` is a
        closed loop and needs at least two interior vertices.
    """

    def __init__(self, nodes=(), edges: Iterable = (), check: bool = True):
        self.nodes = _readonly(np.asarray(nodes, dtype=float).reshape(-1, 2))
        if not np.all(np.isfinite(self.nodes)):
            raise ValueError("node coordinates must be finite")
        n = len(self.nodes)
        built = []
        for e in edges:
            i, j, interior = e
            i, j = int(i), int(j)
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"edge ({i}, {j}) references a missing node")
            interior = _readonly(np.asarray(interior, dtype=float).reshape(-1, 2))
            if not np.all(np.isfinite(interior)):
                raise ValueError("polyline vertices must be finite")
            if check:
                if i == j and len(interior) < 2:
                    raise ValueError("a closed edge needs at least two interior vertices")
                pts = np.vstack([self.nodes[i], interior, self.nodes[j]])
                if np.any(np.hypot(*np.diff(pts, axis=0).T) <= _EPS):
                    raise ValueError(f"edge ({i}, {j}) has coincident consecutive vertices")
            built.append(Edge(i, j, interior))
        self.edges: tuple[Edge, ...] = tuple(built)

    # -- constructors ----------------------------------------------------
    @classmethod
    def from_polylines(cls, polylines: Sequence, tol: float = 1e-9) -> "CurveNetwork":
        """Build a network from polylines, merging endpoints closer than ``tol``.

        A polyline whose first and last vertex coincide becomes a loop edge.
        """
        nodes: list[np.ndarray] = []

        def node_id(p):
            for k, q in enumerate(nodes):
                if np.hypot(*(p - q)) <= tol:
                    return k
            nodes.append(p)
            return len(nodes) - 1

        edges = []
        for pl in polylines:
            pl = np.asarray(pl, dtype=float).reshape(-1, 2)
            if len(pl) < 2:
                raise ValueError("a polyline needs at least two vertices")
            i = node_id(pl[0])
            j = node_id(pl[-1])
            edges.append((i, j, pl[1:-1]))
        return cls(np.array(nodes).reshape(-1, 2), edges)

    @classmethod
    def point(cls, p) -> "CurveNetwork":
        return cls([as_point(p)], ())

    # -- structure -------------------------------------------------------
    def __repr__(self):
        return f"CurveNetwork(nodes={len(self.nodes)}, edges={len(self.edges)})"

    @property
    def is_empty(self) -> bool:
        return len(self.nodes) == 0

    @property
    def is_point(self) -> bool:
        return len(self.edges) == 0 and len(self.nodes) == 1

    def polyline(self, k: int) -> np.ndarray:
        e = self.edges[k]
        return np.vstack([self.nodes[e.i], e.interior, self.nodes[e.j]])

    def polylines(self) -> list[np.ndarray]:
        return [self.polyline(k) for k in range(len(self.edges))]

    def degree(self) -> np.ndarray:
        deg = np.zeros(len(self.nodes), dtype=int)
        for e in self.edges:
            deg[e.i] += 1
            deg[e.j] += 1
        return deg

    @cached_property
    def _vertex_table(self):
        # global vertex ids: nodes first, then interior vertices edge by edge
        coords = [self.nodes]
        seg_a, seg_b, seg_edge = [], [], []
        nxt = len(self.nodes)
        for k, e in enumerate(self.edges):
            m = len(e.interior)
            ids = [e.i, *range(nxt, nxt + m), e.j]
            nxt += m
            coords.append(e.interior)
            seg_a.extend(ids[:-1])
            seg_b.extend(ids[1:])
            seg_edge.extend([k] * (len(ids) - 1))
        verts = np.vstack(coords) if coords else np.zeros((0, 2))
        return (
            verts.reshape(-1, 2),
            np.array(seg_a, dtype=int),
            np.array(seg_b, dtype=int),
            np.array(seg_edge, dtype=int),
        )

    @property
    def vertices(self) -> np.ndarray:
        return self._vertex_table[0]

    @property
    def segment_vertex_ids(self) -> tuple[np.ndarray, np.ndarray]:
        t = self._vertex_table
        return t[1], t[2]

    @property
    def segment_edge(self) -> np.ndarray:
        return self._vertex_table[3]

    @cached_property
    def segments(self) -> np.ndarray:
        """All polyline segments as an ``(S, 2, 2)`` array."""
        v, a, b, _ = self._vertex_table
        seg = np.stack([v[a], v[b]], axis=1) if len(a) else np.zeros((0, 2, 2))
        seg.setflags(write=False)
        return seg

    def transformed(self, fn, check: bool = True) -> "CurveNetwork":
        """Apply a vectorized point map ``fn((P, 2)) -> (P, 2)`` to all vertices."""
        nodes = fn(np.array(self.nodes)) if len(self.nodes) else self.nodes
        edges = [(e.i, e.j, fn(np.array(e.interior)) if len(e.interior) else e.interior)
                 for e in self.edges]
        return CurveNetwork(nodes, edges, check=check)

    def cleaned(self, tol: float = 1e-10) -> "CurveNetwork":
        """Drop repeated consecutive vertices and collapsed edges, renumbering nodes."""
        nodes = [np.array(p) for p in self.nodes]
        parent = list(range(len(nodes)))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        kept = []
        for k, e in enumerate(self.edges):
            pts = self.polyline(k)
            keep = [pts[0]]
            for p in pts[1:-1]:
                if np.hypot(*(p - keep[-1])) > tol:
                    keep.append(p)
            while len(keep) > 1 and np.hypot(*(pts[-1] - keep[-1])) <= tol:
                keep.pop()
            interior = np.array(keep[1:]).reshape(-1, 2)
            if e.i == e.j and len(interior) < 2:
                continue
            if len(interior) == 0 and np.hypot(*(pts[-1] - pts[0])) <= tol:
                parent[find(e.j)] = find(e.i)
                continue
            kept.append((e.i, e.j, interior))
        roots = sorted({find(a) for a in range(len(nodes))})
        remap = {r: n for n, r in enumerate(roots)}
        new_nodes = np.array([nodes[r] for r in roots]).reshape(-1, 2)
        edges = [(remap[find(i)], remap[find(j)], interior) for i, j, interior in kept]
        return CurveNetwork(new_nodes, edges)

    def without_isolated_nodes(self) -> "CurveNetwork":
        deg = self.degree()
        if len(self.edges) == 0 or np.all(deg > 0):
            return self
        keep = np.flatnonzero(deg > 0)
        remap = {int(o): n for n, o in enumerate(keep)}
        return CurveNetwork(self.nodes[keep],
                            [(remap[e.i], remap[e.j], e.interior) for e in self.edges])


# ---------------------------------------------------------------------------
# Domains


class Disc:
    """Open disc domain."""

    convex = True

    def __init__(self, center=(0.0, 0.0), radius: float = 1.0):
        self.center = as_point(center)
        self.radius = float(radius)
        if not self.radius > 0:
            raise ValueError("disc radius must be positive")

    def __repr__(self):
        return f"Disc(center={tuple(self.center)}, radius={self.radius})"

    @property
    def bbox(self):
        c, r = self.center, self.radius
        return (c[0] - r, c[1] - r, c[0] + r, c[1] + r)

    @property
    def area(self) -> float:
        return math.pi * self.radius ** 2

    def contains(self, pts, closed: bool = False) -> np.ndarray:
        d = np.hypot(*(np.atleast_2d(pts) - self.center).T)
        slack = 1e-12 * self.radius
        return d <= self.radius + slack if closed else d < self.radius - slack

    def boundary_distance(self, pts) -> np.ndarray:
        return np.abs(np.hypot(*(np.atleast_2d(pts) - self.center).T) - self.radius)

    def nearest_boundary(self, p):
        """Nearest boundary point of ``p`` and the unit tangent there."""
        p = as_point(p)
        d = p - self.center
        n = np.hypot(*d)
        u = d / n if n > 0 else np.array([1.0, 0.0])
        return self.center + self.radius * u, np.array([-u[1], u[0]])

    def project(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        d = pts - self.center
        n = np.hypot(*d.T)
        scale = np.where(n > self.radius, self.radius / np.maximum(n, _EPS), 1.0)
        return self.center + d * scale[:, None]

    def cut_fraction(self, a, b) -> np.ndarray:
        """Parameter ``t`` of the first boundary crossing on each segment ``a -> b``.

        ``a`` lies inside; ``inf`` where the segment stays inside.
        """
        a = np.atleast_2d(a)
        d = np.atleast_2d(b) - a
        f = a - self.center
        qa = np.einsum("ij,ij->i", d, d)
        qb = 2 * np.einsum("ij,ij->i", f, d)
        qc = np.einsum("ij,ij->i", f, f) - self.radius ** 2
        disc = np.maximum(qb * qb - 4 * qa * qc, 0.0)
        t = np.maximum((-qb + np.sqrt(disc)) / (2 * qa), 0.0)
        return np.where(t <= 1.0, t, np.inf)

    def circle_crossings(self, x, r) -> np.ndarray:
        """Angles (about ``x``) where the circle of radius ``r`` meets the boundary."""
        x = as_point(x)
        d = np.hypot(*(self.center - x))
        R = self.radius
        if d < _EPS or d > r + R or d < abs(R - r):
            return np.zeros(0)
        base = math.atan2(*(self.center - x)[::-1])
        cosv = (r * r + d * d - R * R) / (2 * r * d)
        half = math.acos(max(-1.0, min(1.0, cosv)))
        return np.array([base - half, base + half])


class Polygon:
    """Simple polygon domain with counterclockwise vertices."""

    def __init__(self, vertices):
        v = np.asarray(vertices, dtype=float).reshape(-1, 2)
        if len(v) < 3:
            raise ValueError("a polygon needs at least three vertices")
        self.vertices = _readonly(v)
        if not self.area > 0:
            raise ValueError("polygon vertices must be counterclockwise with positive area")
        segs = self.edges
        for a in range(len(segs)):
            for b in range(a + 1, len(segs)):
                if b == a + 1 or (a == 0 and b == len(segs) - 1):
                    continue
                if _segments_intersect(segs[a], segs[b]):
                    raise ValueError("polygon is self-intersecting")

    def __repr__(self):
        return f"Polygon({self.vertices.tolist()})"

    @cached_property
    def edges(self) -> np.ndarray:
        return np.stack([self.vertices, np.roll(self.vertices, -1, axis=0)], axis=1)

    @cached_property
    def area(self) -> float:
        x, y = self.vertices.T
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))

    @cached_property
    def convex(self) -> bool:
        e = np.diff(np.vstack([self.vertices, self.vertices[:2]]), axis=0)
        cross = e[:-1, 0] * e[1:, 1] - e[:-1, 1] * e[1:, 0]
        return bool(np.all(cross >= -1e-14))

    @property
    def bbox(self):
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return (lo[0], lo[1], hi[0], hi[1])

    @property
    def _scale(self):
        x0, y0, x1, y1 = self.bbox
        return max(x1 - x0, y1 - y0)

    def boundary_distance(self, pts) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return point_segment_distance(pts, self.edges).min(axis=1)

    def contains(self, pts, closed: bool = False) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        x, y = pts[:, 0:1], pts[:, 1:2]
        (ax, ay), (bx, by) = self.edges[:, 0].T, self.edges[:, 1].T
        straddle = (ay > y) != (by > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = ax + (y - ay) * (bx - ax) / (by - ay)
        inside = np.count_nonzero(straddle & (x < xint), axis=1) % 2 == 1
        on_bd = self.boundary_distance(pts) <= 1e-12 * self._scale
        return (inside | on_bd) if closed else (inside & ~on_bd)

    def nearest_boundary(self, p):
        p = as_point(p)
        d = point_segment_distance(p[None], self.edges)[0]
        k = int(np.argmin(d))
        a, b = self.edges[k]
        t = np.clip(np.dot(p - a, b - a) / np.dot(b - a, b - a), 0.0, 1.0)
        tan = (b - a) / np.hypot(*(b - a))
        return a + t * (b - a), tan

    def project(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = pts.copy()
        outside = ~self.contains(pts, closed=True)
        for k in np.flatnonzero(outside):
            out[k] = self.nearest_boundary(pts[k])[0]
        return out

    def cut_fraction(self, a, b) -> np.ndarray:
        a = np.atleast_2d(a)
        b = np.atleast_2d(b)
        t = np.full(len(a), np.inf)
        for ea, eb in self.edges:
            t = np.minimum(t, _segment_param(a, b, ea, eb))
        return t

    def circle_crossings(self, x, r) -> np.ndarray:
        x = as_point(x)
        out = []
        for seg in self.edges:
            for t in _circle_params(seg[0], seg[1], x, r):
                p = seg[0] + t * (seg[1] - seg[0]) - x
                out.append(math.atan2(p[1], p[0]))
        return np.array(out)


# ---------------------------------------------------------------------------
# Elementary segment geometry


def point_segment_distance(pts, segs) -> np.ndarray:
    """Distances from ``(P, 2)`` points to ``(S, 2, 2)`` segments, shape ``(P, S)``."""
    pts = np.atleast_2d(pts)
    segs = np.asarray(segs).reshape(-1, 2, 2)
    a = segs[None, :, 0, :]
    d = segs[None, :, 1, :] - a
    w = pts[:, None, :] - a
    dd = np.sum(d * d, axis=-1)
    t = np.clip(np.sum(w * d, axis=-1) / np.maximum(dd, _EPS), 0, 1)
    diff = w - t[..., None] * d
    return np.hypot(diff[..., 0], diff[..., 1])


def _cross(u, v):
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


def _segments_intersect(s, t, eps: float = 1e-14) -> bool:
    p, r = s[0], s[1] - s[0]
    q, w = t[0], t[1] - t[0]
    den = _cross(r, w)
    if abs(den) < eps:
        if abs(_cross(q - p, r)) > eps:
            return False
        rr = float(np.dot(r, r))
        t0 = np.dot(q - p, r) / rr
        t1 = t0 + np.dot(w, r) / rr
        return max(t0, t1) >= -eps and min(t0, t1) <= 1 + eps
    a = _cross(q - p, w) / den
    b = _cross(q - p, r) / den
    return -eps <= a <= 1 + eps and -eps <= b <= 1 + eps


def _segment_param(a, b, ea, eb) -> np.ndarray:
    """Parameter along each ``a -> b`` of the crossing with segment ``ea eb``; inf if none."""
    r = b - a
    w = eb - ea
    den = _cross(r, w)
    qp = ea - a
    with np.errstate(divide="ignore", invalid="ignore"):
        t = _cross(qp, w) / den
        s = _cross(qp, r) / den
    ok = (np.abs(den) > _EPS) & (t >= 0) & (t <= 1) & (s >= 0) & (s <= 1)
    return np.where(ok, t, np.inf)


def _circle_params(a, b, x, r) -> list[float]:
    d = b - a
    f = a - x
    qa = float(np.dot(d, d))
    qb = 2 * float(np.dot(f, d))
    qc = float(np.dot(f, f)) - r * r
    disc = qb * qb - 4 * qa * qc
    if disc < 0:
        return []
    s = math.sqrt(disc)
    return [t for t in ((-qb - s) / (2 * qa), (-qb + s) / (2 * qa)) if 0.0 <= t <= 1.0]


def clip_to_ball(segs, x, r) -> np.ndarray:
    """Portions of segments inside the closed ball ``B_r(x)``, shape ``(S', 2, 2)``."""
    segs = np.asarray(segs).reshape(-1, 2, 2)
    if len(segs) == 0:
        return segs
    a = segs[:, 0] - x
    d = segs[:, 1] - segs[:, 0]
    qa = np.einsum("ij,ij->i", d, d)
    qb = 2 * np.einsum("ij,ij->i", a, d)
    qc = np.einsum("ij,ij->i", a, a) - r * r
    disc = qb * qb - 4 * qa * qc
    hit = disc > 0
    s = np.sqrt(np.where(hit, disc, 0.0))
    t0 = np.clip((-qb - s) / (2 * qa), 0.0, 1.0)
    t1 = np.clip((-qb + s) / (2 * qa), 0.0, 1.0)
    keep = hit & (t1 > t0)
    t0, t1 = t0[keep], t1[keep]
    base, d = segs[keep, 0], d[keep]
    return np.stack([base + t0[:, None] * d, base + t1[:, None] * d], axis=1)


def _seg_lengths(segs) -> np.ndarray:
    segs = np.asarray(segs).reshape(-1, 2, 2)
    return np.hypot(*(segs[:, 1] - segs[:, 0]).T)


# ---------------------------------------------------------------------------
# Quantities on networks


def total_length(net: CurveNetwork) -> float:
    return float(_seg_lengths(net.segments).sum())


def _node_components(net: CurveNetwork):
    n = len(net.nodes)
    if n == 0:
        return 0, np.zeros(0, dtype=int)
    rows = [e.i for e in net.edges]
    cols = [e.j for e in net.edges]
    g = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    return connected_components(g, directed=False)


def is_connected(net: CurveNetwork) -> bool:
    """Graph connectivity of the node/edge structure (isolated nodes count)."""
    ncomp, _ = _node_components(net)
    return ncomp <= 1


def contains_loop(net: CurveNetwork) -> bool:
    """True iff the edge graph has a cycle (self-loops and multi-edges included)."""
    ncomp, _ = _node_components(net)
    # a forest satisfies #edges = #nodes - #components
    return len(net.edges) > len(net.nodes) - ncomp


def is_embedded(net: CurveNetwork, eps: float = 1e-12) -> bool:
    """True iff distinct segments meet only at shared polyline vertices."""
    segs = net.segments
    S = len(segs)
    if S < 2:
        return True
    a_id, b_id = net.segment_vertex_ids
    p = segs[:, 0]
    r = segs[:, 1] - segs[:, 0]
    lo = np.minimum(segs[:, 0], segs[:, 1])
    hi = np.maximum(segs[:, 0], segs[:, 1])
    for k in range(S - 1):
        rest = np.arange(k + 1, S)
        box = np.all(lo[rest] <= hi[k] + eps, axis=1) & np.all(hi[rest] >= lo[k] - eps, axis=1)
        rest = rest[box]
        if len(rest) == 0:
            continue
        shares = ((a_id[rest] == a_id[k]) | (a_id[rest] == b_id[k])
                  | (b_id[rest] == a_id[k]) | (b_id[rest] == b_id[k]))
        for m in rest[~shares]:
            if _segments_intersect(segs[k], segs[m], eps):
                return False
        for m in rest[shares]:
            # adjacent segments may only overlap at their shared vertex
            den = _cross(r[k], r[m])
            if abs(den) < eps * max(1.0, np.dot(r[k], r[k])):
                ends_k = {int(a_id[k]), int(b_id[k])}
                shared = ends_k & {int(a_id[m]), int(b_id[m])}
                if len(shared) == 2:
                    return False
                sv = net.vertices[shared.pop()]
                fk = segs[k][1] if np.allclose(segs[k][0], sv) else segs[k][0]
                fm = segs[m][1] if np.allclose(segs[m][0], sv) else segs[m][0]
                if np.dot(fk - sv, fm - sv) > 0:
                    return False
    return True


def flatness(net: CurveNetwork, x, r: float, angle_samples: int = 180,
             refine: bool = True) -> float:
    """Two-sided flatness of the network in the ball ``B_r(x)``.

    Minimum over lines through ``x`` of the Hausdorff distance between the
    clipped network and the clipped line, divided by ``r``.  The distance
    from the network to a line is exact (it is convex along each segment);
    the distance from the line back to the network samples the diameter at
    step ``r/256``.  The best sampled direction is refined by bounded scalar
    minimization.
    """
    if angle_samples < 64:
        raise ValueError("angle_samples must be at least 64")
    if not r > 0:
        raise ValueError("radius must be positive")
    x = as_point(x)
    clip = clip_to_ball(net.segments, x, r)
    if len(clip) == 0:
        # a lone node inside the ball is still a set in the ball
        inside = net.nodes[np.hypot(*(net.nodes - x).T) <= r] if len(net.nodes) else []
        if len(inside) == 0:
            raise ValueError("no set in ball")
        clip = np.stack([inside, inside], axis=1)
    ends = clip.reshape(-1, 2) - x
    s = np.linspace(-r, r, 513)

    def hd(theta):
        e = np.array([math.cos(theta), math.sin(theta)])
        one = np.abs(ends @ np.array([-e[1], e[0]])).max()
        line = x + s[:, None] * e
        other = point_segment_distance(line, clip).min(axis=1).max()
        return max(one, other) / r

    thetas = np.arange(angle_samples) * (math.pi / angle_samples)
    vals = np.array([hd(t) for t in thetas])
    k = int(np.argmin(vals))
    best = float(vals[k])
    if refine:
        step = math.pi / angle_samples
        res = minimize_scalar(hd, bounds=(thetas[k] - step, thetas[k] + step),
                              method="bounded", options={"xatol": 1e-7})
        best = min(best, float(res.fun))
    return best


def _locate(net: CurveNetwork, p, tol):
    segs = net.segments
    if len(segs) == 0:
        if len(net.nodes) and np.hypot(*(net.nodes[0] - p)) <= tol:
            return None
        raise ValueError(f"point {tuple(p)} is not on the network")
    d = point_segment_distance(p[None], segs)[0]
    k = int(np.argmin(d))
    if d[k] > tol:
        raise ValueError(f"point {tuple(p)} is not on the network (distance {d[k]:.3g})")
    a, b = segs[k]
    t = float(np.clip(np.dot(p - a, b - a) / np.dot(b - a, b - a), 0.0, 1.0))
    return k, t


def _augmented_graph(net: CurveNetwork, points, tol):
    """Segment graph with ``points`` inserted as extra vertices.

    Returns the sparse distance graph, the vertex coordinates and the vertex
    id of each inserted point.
    """
    verts = [np.asarray(net.vertices)]
    a_id, b_id = net.segment_vertex_ids
    nv = len(net.vertices)
    splits: dict[int, list[tuple[float, int]]] = {}
    pid = []
    for p in points:
        p = as_point(p)
        loc = _locate(net, p, tol)
        if loc is None:
            pid.append(0)
            continue
        k, t = loc
        if t <= 1e-12:
            pid.append(int(a_id[k]))
        elif t >= 1 - 1e-12:
            pid.append(int(b_id[k]))
        else:
            splits.setdefault(k, []).append((t, nv))
            a, b = net.segments[k]
            verts.append((a + t * (b - a))[None])
            pid.append(nv)
            nv += 1
    coords = np.vstack(verts)
    rows, cols = [], []
    for k in range(len(a_id)):
        chain = [int(a_id[k])] + [v for _, v in sorted(splits.get(k, []))] + [int(b_id[k])]
        rows.extend(chain[:-1])
        cols.extend(chain[1:])
    rows = np.array(rows, dtype=int)
    cols = np.array(cols, dtype=int)
    w = np.hypot(*(coords[rows] - coords[cols]).T)
    # zero-weight edges would vanish from the sparse graph
    w = np.maximum(w, 1e-300)
    g = coo_matrix((w, (rows, cols)), shape=(nv, nv)).tocsr()
    return g, coords, np.array(pid, dtype=int)


def geodesic_distance(net: CurveNetwork, a, b, tol: float = 1e-9) -> float:
    a, b = as_point(a), as_point(b)
    g, _, ids = _augmented_graph(net, [a, b], tol)
    if ids[0] == ids[1]:
        return 0.0
    d = dijkstra(g, directed=False, indices=int(ids[0]))[ids[1]]
    if not np.isfinite(d):
        raise ValueError("points lie in different components of the network")
    return float(d) if d > 1e-200 else 0.0


def sample_network(net: CurveNetwork, n: int) -> np.ndarray:
    """About ``n`` points at uniform arclength, plus every node."""
    L = total_length(net)
    step = L / max(n, 1)
    pts = [np.asarray(net.nodes)]
    for pl in net.polylines():
        seg_len = np.hypot(*np.diff(pl, axis=0).T)
        cum = np.concatenate([[0.0], np.cumsum(seg_len)])
        m = int(cum[-1] // step)
        s = (np.arange(1, m + 1) * step)
        s = s[s < cum[-1]]
        if len(s):
            k = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(seg_len) - 1)
            t = (s - cum[k]) / seg_len[k]
            pts.append(pl[k] + t[:, None] * (pl[k + 1] - pl[k]))
    return np.vstack(pts)


def chord_arc_constant(net: CurveNetwork, sample_pairs: int = 64) -> float:
    """Largest sampled ratio of geodesic to Euclidean distance.

    ``sample_pairs`` controls the number of arclength sample points; every
    node is also sampled.  The result bounds the true constant from below.
    """
    if net.is_empty or len(net.edges) == 0:
        raise ValueError("chord-arc constant needs a network with at least one edge")
    if not is_connected(net):
        raise ValueError("chord-arc constant needs a connected network")
    pts = sample_network(net, max(int(sample_pairs), 2))
    g, coords, ids = _augmented_graph(net, pts, 1e-9)
    ids = np.unique(ids)
    if len(ids) < 2:
        raise ValueError("need at least two distinct sample points")
    dg = dijkstra(g, directed=False, indices=ids)[:, ids]
    P = coords[ids]
    de = np.hypot(P[:, None, 0] - P[None, :, 0], P[:, None, 1] - P[None, :, 1])
    mask = de > 1e-12
    return float(np.max(dg[mask] / de[mask])) if np.any(mask) else 1.0


def ahlfors_density(net: CurveNetwork, x, r: float) -> float:
    """Length of the network inside ``B_r(x)`` divided by ``r``."""
    if not r > 0:
        raise ValueError("radius must be positive")
    return float(_seg_lengths(clip_to_ball(net.segments, as_point(x), r)).sum() / r)


def branch_count(net: CurveNetwork, x, r: float, tol: float = 1e-9) -> int:
    """Number of transversal crossings of the network with the circle ``∂B_r(x)``.

    Raises :class:`DegenerateCrossing` if a segment is tangent to the circle
    or a polyline vertex lies on it; callers retry with a perturbed radius.
    """
    if not r > 0:
        raise ValueError("radius must be positive")
    x = as_point(x)
    segs = net.segments
    if len(segs) == 0:
        return 0
    vd = np.hypot(*(net.vertices - x).T)
    if np.any(np.abs(vd - r) <= tol * r):
        raise DegenerateCrossing(f"degenerate crossing: vertex on circle r={r}")
    a = segs[:, 0] - x
    d = segs[:, 1] - segs[:, 0]
    qa = np.einsum("ij,ij->i", d, d)
    tf = np.clip(-np.einsum("ij,ij->i", a, d) / qa, 0, 1)
    foot = a + tf[:, None] * d
    fd = np.hypot(*foot.T)
    interior_foot = (tf > 0) & (tf < 1)
    if np.any(interior_foot & (np.abs(fd - r) <= tol * r)):
        raise DegenerateCrossing(f"degenerate crossing: segment tangent to circle r={r}")
    count = 0
    for k in range(len(segs)):
        count += len(_circle_params(segs[k, 0], segs[k, 1], x, r))
    return count


class GammaResult(NamedTuple):
    gamma: float
    violated: bool  # some sampled circle met neither the network nor the boundary


def _circle_hits(net: CurveNetwork, x, r) -> list[float]:
    out = []
    segs = clip_to_ball(net.segments, x, r * (1 + 1e-9) + 1e-300)
    for a, b in segs:
        for t in _circle_params(a, b, x, r):
            p = a + t * (b - a) - x
            out.append(math.atan2(p[1], p[0]))
    for p in net.nodes[[k for k, dg in enumerate(net.degree()) if dg == 0]]:
        if abs(np.hypot(*(p - x)) - r) <= 1e-12 * max(r, 1.0):
            out.append(math.atan2(p[1] - x[1], p[0] - x[0]))
    return out


def gamma_sup(net: CurveNetwork, domain, x, r0: float, r1: float,
              radial_samples: int = 32) -> GammaResult:
    """Largest normalized arc of ``∂B_r(x)`` avoiding the network and ``∂Ω``.

    The supremum runs over ``radial_samples`` radii at the midpoints of a
    uniform partition of ``(r0, r1)``.
    """
    if not (0 <= r0 < r1):
        raise ValueError("need 0 <= r0 < r1")
    if radial_samples < 16:
        raise ValueError("radial_samples must be at least 16")
    x = as_point(x)
    best = 0.0
    violated = False
    for k in range(radial_samples):
        r = r0 + (k + 0.5) * (r1 - r0) / radial_samples
        ang = _circle_hits(net, x, r)
        if domain is not None:
            ang.extend(domain.circle_crossings(x, r).tolist())
        if not ang:
            violated = True
            best = 2 * math.pi
            continue
        th = np.sort(np.mod(ang, 2 * math.pi))
        gaps = np.diff(np.concatenate([th, [th[0] + 2 * math.pi]]))
        best = max(best, float(gaps.max()))
    return GammaResult(min(best, 2 * math.pi), violated)


def project_to_domain(net: CurveNetwork, domain) -> CurveNetwork:
    """Replace every vertex by its nearest point in the closed convex domain."""
    if not domain.convex:
        raise ValueError("projection requires convex domain")
    return net.transformed(domain.project, check=False).cleaned()


# ---------------------------------------------------------------------------
# Text format


def format_network(net: CurveNetwork) -> str:
    lines = [f"nodes {len(net.nodes)} edges {len(net.edges)}"]
    lines += [f"{float(x)!r} {float(y)!r}" for x, y in net.nodes]
    for e in net.edges:
        lines.append(f"edge {e.i} {e.j} {len(e.interior)}")
        lines += [f"{float(x)!r} {float(y)!r}" for x, y in e.interior]
    return "\n".join(lines) + "\n"


def parse_network(text: str) -> CurveNetwork:
    rows = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not rows or len(rows[0]) != 4 or rows[0][0] != "nodes" or rows[0][2] != "edges":
        raise ValueError("network file must start with 'nodes N edges M'")
    n, m = int(rows[0][1]), int(rows[0][3])
    pos = 1
    nodes = [[float(v) for v in rows[pos + k]] for k in range(n)]
    pos += n
    edges = []
    for _ in range(m):
        head = rows[pos]
        if head[0] != "edge" or len(head) != 4:
            raise ValueError(f"malformed edge header: {' '.join(head)}")
        i, j, K = int(head[1]), int(head[2]), int(head[3])
        interior = [[float(v) for v in rows[pos + 1 + k]] for k in range(K)]
        edges.append((i, j, np.array(interior).reshape(-1, 2)))
        pos += 1 + K
    if pos != len(rows):
        raise ValueError("trailing content after last edge")
    return CurveNetwork(np.array(nodes).reshape(-1, 2), edges)


def read_network(path) -> CurveNetwork:
    with open(path) as fh:
        return parse_network(fh.read())


def write_network(net: CurveNetwork, path) -> None:
    with open(path, "w") as fh:
        fh.write(format_network(net))
