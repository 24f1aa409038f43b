"""Local edits of curve networks: ball cuts, chord and circle-wall competitors,
arc removal, degree-two merging and arclength resampling."""

from __future__ import annotations

import math

import numpy as np

from .geometry import CurveNetwork, _circle_params, as_point, point_segment_distance

MERGE_TOL = 1e-9


def _dedup(pts, tol=1e-12):
    out = [pts[0]]
    for p in pts[1:]:
        if np.hypot(*(p - out[-1])) > tol:
            out.append(p)
    return np.array(out)


def split_polyline(pl: np.ndarray, x, r: float):
    """Split a polyline at its crossings with ``∂B_r(x)``.

    Returns ``(pieces, inside_flags)``; consecutive pieces share the crossing
    point.  A piece is inside when its interior lies in the open ball.
    """
    x = as_point(x)
    pieces, flags = [], []
    cur = [pl[0]]
    status = None
    for a, b in zip(pl[:-1], pl[1:]):
        ts = sorted(t for t in _circle_params(a, b, x, r) if 0.0 < t < 1.0)
        bounds = [0.0, *ts, 1.0]
        for t0, t1 in zip(bounds[:-1], bounds[1:]):
            mid = a + 0.5 * (t0 + t1) * (b - a)
            inside = bool(np.hypot(*(mid - x)) < r)
            end = a + t1 * (b - a) if t1 < 1.0 else b
            if status is None:
                status = inside
            if inside != status:
                start = a + t0 * (b - a)
                if np.hypot(*(start - cur[-1])) > 1e-12:
                    cur.append(start)
                pieces.append(np.array(cur))
                flags.append(status)
                cur = [start]
                status = inside
            cur.append(end)
    pieces.append(np.array(cur))
    flags.append(bool(status))
    kept = [(_dedup(p), f) for p, f in zip(pieces, flags)]
    kept = [(p, f) for p, f in kept if len(p) >= 2]
    return [p for p, _ in kept], [f for _, f in kept]


def outside_pieces(net: CurveNetwork, x, r: float):
    """Polyline pieces of the network outside ``B_r(x)`` and the crossing points."""
    out = []
    crossings = []
    for pl in net.polylines():
        pieces, flags = split_polyline(pl, x, r)
        out += [p for p, f in zip(pieces, flags) if not f]
        for p, f in zip(pieces, flags):
            if f:
                for q in (p[0], p[-1]):
                    if abs(np.hypot(*(q - x)) - r) <= 1e-9 * max(r, 1.0):
                        crossings.append(q)
    uniq = []
    for q in crossings:
        if not any(np.hypot(*(q - u)) <= MERGE_TOL for u in uniq):
            uniq.append(q)
    return out, uniq


def from_pieces(pieces) -> CurveNetwork:
    pieces = [_dedup(np.asarray(p, float)) for p in pieces]
    pieces = [p for p in pieces if len(p) >= 2]
    if not pieces:
        return CurveNetwork()
    closed = [p for p in pieces if np.hypot(*(p[0] - p[-1])) <= MERGE_TOL and len(p) < 4]
    pieces = [p for p in pieces if not any(p is c for c in closed)]
    if not pieces:
        return CurveNetwork()
    return merge_degree_two(CurveNetwork.from_polylines(pieces, MERGE_TOL).cleaned())


def chord_replacement(net: CurveNetwork, x, r: float) -> CurveNetwork | None:
    """Replace the part inside ``B_r(x)`` by the chord between its two crossings."""
    pieces, cross = outside_pieces(net, x, r)
    if len(cross) != 2:
        return None
    return from_pieces(pieces + [np.array(cross)])


def circle_wall(net: CurveNetwork, domain, x, r: float, step: float) -> CurveNetwork:
    """``(Σ∖B_r(x)) ∪ (∂B_r(x) ∩ closed Ω)``, the circle polygonized at ``step``."""
    x = as_point(x)
    pieces, cross = outside_pieces(net, x, r)
    special = {}
    for q in cross:
        special[math.atan2(q[1] - x[1], q[0] - x[0]) % (2 * math.pi)] = q
    if domain is not None:
        for a in domain.circle_crossings(x, r):
            a = a % (2 * math.pi)
            special[a] = x + r * np.array([math.cos(a), math.sin(a)])
    n = max(8, int(math.ceil(2 * math.pi * r / step)))
    angles = sorted(set((2 * math.pi * np.arange(n) / n).tolist()) | set(special))
    # drop regular samples that crowd a special angle
    tol = 0.25 * (2 * math.pi / n)
    angles = [a for a in angles if a in special or all(abs(a - s) > tol for s in special)]
    ring = [(a, special[a] if a in special else x + r * np.array([math.cos(a), math.sin(a)]),
             a in special) for a in angles]
    ring.append((ring[0][0] + 2 * math.pi, ring[0][1], ring[0][2]))
    arcs = []
    cur = []
    for (a0, p0, _), (a1, p1, s1) in zip(ring[:-1], ring[1:]):
        mid = 0.5 * (a0 + a1)
        mp = x + r * np.array([math.cos(mid), math.sin(mid)])
        ok = domain is None or bool(domain.contains(mp[None], closed=True)[0])
        if ok:
            if not cur:
                cur = [p0]
            cur.append(p1)
            if s1:
                arcs.append(np.array(cur))
                cur = []
        elif cur:
            arcs.append(np.array(cur))
            cur = []
    if cur:
        arcs.append(np.array(cur))
    return from_pieces(pieces + arcs)


def remove_subarc(net: CurveNetwork, edge_index: int, v, radius: float) -> CurveNetwork:
    """Delete the piece of one edge inside ``B_radius(v)`` that passes nearest ``v``."""
    v = as_point(v)
    polys = net.polylines()
    pieces, flags = split_polyline(polys[edge_index], v, radius)
    inside = [k for k, f in enumerate(flags) if f]
    if not inside:
        return net

    def dist(p):
        segs = np.stack([p[:-1], p[1:]], axis=1)
        return float(point_segment_distance(v[None], segs).min())

    drop = min(inside, key=lambda k: dist(pieces[k]))
    kept = [p for k, p in enumerate(pieces) if k != drop]
    others = [p for k, p in enumerate(polys) if k != edge_index]
    return from_pieces(others + kept)


def merge_degree_two(net: CurveNetwork) -> CurveNetwork:
    """Absorb nodes with exactly two distinct incident edges into polylines."""
    polys = [pl for pl in net.polylines()]
    ends = [(e.i, e.j) for e in net.edges]
    nodes = np.array(net.nodes)
    changed = True
    while changed:
        changed = False
        inc: dict[int, list[int]] = {}
        for k, (i, j) in enumerate(ends):
            inc.setdefault(i, []).append(k)
            inc.setdefault(j, []).append(k)
        for nd, ks in inc.items():
            if len(ks) != 2 or ks[0] == ks[1]:
                continue
            a, b = ks
            pa, pb = polys[a], polys[b]
            ia, ja = ends[a]
            ib, jb = ends[b]
            if ja != nd:
                pa, (ia, ja) = pa[::-1], (ja, ia)
            if ib != nd:
                pb, (ib, jb) = pb[::-1], (jb, ib)
            joined = np.vstack([pa, pb[1:]])
            if ia == jb and len(joined) < 4:
                continue
            polys[a] = joined
            ends[a] = (ia, jb)
            del polys[b]
            del ends[b]
            changed = True
            break
    used = sorted({n for e in ends for n in e}) if ends else list(range(len(nodes)))
    remap = {o: k for k, o in enumerate(used)}
    edges = [(remap[i], remap[j], p[1:-1]) for (i, j), p in zip(ends, polys)]
    return CurveNetwork(nodes[used].reshape(-1, 2), edges)


def resample(net: CurveNetwork, spacing: float) -> CurveNetwork:
    """Redistribute each edge's interior vertices uniformly in arclength."""
    edges = []
    for k, e in enumerate(net.edges):
        pl = net.polyline(k)
        seg = np.hypot(*np.diff(pl, axis=0).T)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        L = cum[-1]
        m = max(1, int(round(L / spacing)))
        if e.i == e.j:
            m = max(m, 3)
        s = L * np.arange(1, m) / m
        idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(seg) - 1)
        t = (s - cum[idx]) / seg[idx]
        interior = pl[idx] + t[:, None] * (pl[idx + 1] - pl[idx])
        edges.append((e.i, e.j, interior))
    return CurveNetwork(net.nodes, edges)
