"""Convex planar geometry kernel: polygons, halfspaces, rotations, Minkowski sums."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi

# Tolerance for strict-convexity / dedup checks, relative to polygon scale.
_CONVEXITY_RTOL = 1e-9


def normalize_angle(a: float) -> float:
    """Normalize an angle to [0, 2*pi) using floored modulo."""
    return float(np.mod(a, TWO_PI))


def wrap_pi(a: float) -> float:
    """Wrap an angle difference to (-pi, pi]."""
    w = np.mod(a + np.pi, TWO_PI) - np.pi
    return float(np.pi) if w == -np.pi else float(w)


def rotate(p, angle: float):
    """Rotate a 2D point about the origin (counter-clockwise positive)."""
    c, s = np.cos(angle), np.sin(angle)
    p = np.asarray(p, dtype=float)
    return np.array([c * p[0] - s * p[1], s * p[0] + c * p[1]])


def rotation_matrix(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class Halfspace:
    """Closed halfspace {p : normal . p <= offset} with unit normal."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        if not np.isclose(np.linalg.norm(n), 1.0, atol=1e-9):
            raise ValueError("halfspace normal must be a unit vector")
        object.__setattr__(self, "normal", n)

    def contains(self, p) -> bool:
        return float(self.normal @ np.asarray(p, dtype=float)) <= self.offset + 1e-12


class ConvexPolygon:
    """Strictly convex polygon with CCW-ordered vertices (closed set)."""

    __slots__ = ("vertices", "_center", "_radius")

    def __init__(self, vertices):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise ValueError("polygon needs at least 3 planar vertices")
        if not np.all(np.isfinite(v)):
            raise ValueError("polygon vertices must be finite")
        if _signed_area(v) <= 0:
            raise ValueError("polygon vertices must be counter-clockwise")
        if not _strictly_convex(v):
            raise ValueError("polygon must be strictly convex")
        self._finish(v)

    def _finish(self, v: np.ndarray):
        self.vertices = v
        c = v.mean(axis=0)
        self._center = c
        self._radius = float(np.sqrt(((v - c) ** 2).sum(axis=1).max()))

    @classmethod
    def trusted(cls, vertices: np.ndarray) -> "ConvexPolygon":
        """Construction bypass for vertices already known to be a CCW hull."""
        poly = cls.__new__(cls)
        poly._finish(np.asarray(vertices, dtype=float))
        return poly

    @staticmethod
    def from_points(points) -> "ConvexPolygon":
        """Convex hull of a point cloud, collinear points dropped."""
        return ConvexPolygon(convex_hull(points))

    def __len__(self):
        return len(self.vertices)

    @property
    def bounding_center(self) -> np.ndarray:
        return self._center

    @property
    def bounding_radius(self) -> float:
        return self._radius

    def area(self) -> float:
        return _signed_area(self.vertices)

    def contains_point(self, p, tol: float = 1e-9) -> bool:
        v = self.vertices
        nxt = np.roll(v, -1, axis=0)
        edges = nxt - v
        rel = np.asarray(p, dtype=float) - v
        cross = edges[:, 0] * rel[:, 1] - edges[:, 1] * rel[:, 0]
        scale = max(1.0, self._radius)
        return bool(np.all(cross >= -tol * scale))

    def translated(self, offset) -> "ConvexPolygon":
        poly = ConvexPolygon.__new__(ConvexPolygon)
        poly.vertices = self.vertices + np.asarray(offset, dtype=float)
        poly._center = self._center + np.asarray(offset, dtype=float)
        poly._radius = self._radius
        return poly

    def rotated(self, angle: float) -> "ConvexPolygon":
        """Rotation about the origin; convexity and orientation are preserved."""
        r = rotation_matrix(angle)
        poly = ConvexPolygon.__new__(ConvexPolygon)
        poly.vertices = self.vertices @ r.T
        poly._center = r @ self._center
        poly._radius = self._radius
        return poly


def _signed_area(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _strictly_convex(v: np.ndarray) -> bool:
    nxt = np.roll(v, -1, axis=0)
    edges = nxt - v
    prev = np.roll(edges, 1, axis=0)
    cross = prev[:, 0] * edges[:, 1] - prev[:, 1] * edges[:, 0]
    scale = max(1.0, float(np.abs(edges).max())) ** 2
    return bool(np.all(cross > _CONVEXITY_RTOL * scale))


def convex_hull(points) -> np.ndarray:
    """Andrew monotone chain; returns CCW vertices with collinear points dropped."""
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    if len(pts) < 3:
        return pts
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]
    scale = max(1.0, float(np.abs(pts).max())) ** 2
    eps = _CONVEXITY_RTOL * scale

    def half(seq):
        out = []
        for p in seq:
            while len(out) >= 2:
                o, a = out[-2], out[-1]
                if (a[0] - o[0]) * (p[1] - o[1]) - (a[1] - o[1]) * (p[0] - o[0]) <= eps:
                    out.pop()
                else:
                    break
            out.append(p)
        return out

    lower = half(pts)
    upper = half(pts[::-1])
    hull = np.array(lower[:-1] + upper[:-1])
    return hull


def _bottom_start(v: np.ndarray) -> np.ndarray:
    idx = np.lexsort((v[:, 0], v[:, 1]))[0]
    return np.roll(v, -idx, axis=0)


def _drop_collinear(v: np.ndarray) -> np.ndarray:
    nxt = np.roll(v, -1, axis=0)
    prv = np.roll(v, 1, axis=0)
    e_in = v - prv
    e_out = nxt - v
    cross = e_in[:, 0] * e_out[:, 1] - e_in[:, 1] * e_out[:, 0]
    scale = max(1.0, float(np.abs(e_out).max())) ** 2
    keep = cross > _CONVEXITY_RTOL * scale
    return v[keep]


def minkowski_sum(a: ConvexPolygon, b) -> ConvexPolygon:
    """Minkowski sum of two convex polygons (or a polygon and a point).

    Linear-time edge merge: both boundaries are walked in increasing edge
    angle starting from their bottom-most vertices.
    """
    bv = b.vertices if isinstance(b, ConvexPolygon) else np.asarray(b, dtype=float)
    if bv.ndim == 1:
        return a.translated(bv)
    va = _bottom_start(a.vertices)
    vb = _bottom_start(bv)
    ea = np.roll(va, -1, axis=0) - va
    eb = np.roll(vb, -1, axis=0) - vb
    ang_a = np.mod(np.arctan2(ea[:, 1], ea[:, 0]), TWO_PI)
    ang_b = np.mod(np.arctan2(eb[:, 1], eb[:, 0]), TWO_PI)
    n, m = len(va), len(vb)
    out = np.empty((n + m, 2))
    cur = va[0] + vb[0]
    i = j = k = 0
    while i < n or j < m:
        out[k] = cur
        k += 1
        if j >= m or (i < n and ang_a[i] < ang_b[j] - 1e-12):
            cur = cur + ea[i]
            i += 1
        elif i >= n or ang_b[j] < ang_a[i] - 1e-12:
            cur = cur + eb[j]
            j += 1
        else:  # parallel edges advance together
            cur = cur + ea[i] + eb[j]
            i += 1
            j += 1
    return ConvexPolygon.trusted(_drop_collinear(out[:k]))


def intersects(a: ConvexPolygon, b: ConvexPolygon) -> bool:
    """Separating-axis test; closed sets, so boundary contact counts."""
    gap = np.linalg.norm(a.bounding_center - b.bounding_center)
    if gap > a.bounding_radius + b.bounding_radius:
        return False
    return _sat_overlap(a.vertices, b.vertices) and _sat_overlap(b.vertices, a.vertices)


def _sat_overlap(va: np.ndarray, vb: np.ndarray) -> bool:
    edges = np.roll(va, -1, axis=0) - va
    normals = np.stack([-edges[:, 1], edges[:, 0]], axis=1)
    pa = normals @ va.T
    pb = normals @ vb.T
    if np.any(pa.max(axis=1) < pb.min(axis=1)) or np.any(pb.max(axis=1) < pa.min(axis=1)):
        return False
    return True


def oriented_rectangle(length: float, width: float, position, orientation: float) -> ConvexPolygon:
    """Rectangle of the given footprint centered at position, rotated by orientation."""
    hl, hw = 0.5 * length, 0.5 * width
    corners = np.array([[-hl, -hw], [hl, -hw], [hl, hw], [-hl, hw]])
    r = rotation_matrix(orientation)
    return ConvexPolygon.trusted(corners @ r.T + np.asarray(position, dtype=float))


def regular_polygon_circumscribed(radius: float, n: int = 16, center=(0.0, 0.0)) -> ConvexPolygon:
    """Regular n-gon that circumscribes (contains) the disc of the given radius."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    r = radius / np.cos(np.pi / n)
    ang = np.arange(n) * (TWO_PI / n)
    v = np.stack([r * np.cos(ang), r * np.sin(ang)], axis=1) + np.asarray(center, dtype=float)
    return ConvexPolygon.trusted(v)


def disc_polygon(center, radius: float, n: int = 16):
    """Circumscribed polygon for a disc; degenerates to a point for radius ~ 0."""
    if radius < 1e-12:
        return np.asarray(center, dtype=float).reshape(1, 2)
    return regular_polygon_circumscribed(radius, n, center).vertices


def hull_of(*vertex_arrays) -> ConvexPolygon:
    """Convex hull polygon of several vertex arrays."""
    stacked = np.vstack([np.atleast_2d(v) for v in vertex_arrays])
    return ConvexPolygon.trusted(convex_hull(stacked))


def rotated_shape_hull(length: float, width: float, theta_lo: float, theta_hi: float) -> ConvexPolygon:
    """Convex over-approximation of a rectangle rotated over an orientation interval.

    Hull of the rectangle at the interval endpoints and midpoint, bloated by the
    chord-sagitta bound R*(1 - cos(span/4)) so every intermediate rotation is
    covered. Spans of 2*pi or more fall back to the circumscribed disc.
    """
    span = theta_hi - theta_lo
    if span < 0:
        raise ValueError("orientation interval must be ordered")
    r_corner = 0.5 * float(np.hypot(length, width))
    if span >= TWO_PI:
        return regular_polygon_circumscribed(r_corner, 16)
    samples = [theta_lo, 0.5 * (theta_lo + theta_hi), theta_hi]
    hl, hw = 0.5 * length, 0.5 * width
    corners = np.array([[-hl, -hw], [hl, -hw], [hl, hw], [-hl, hw]])
    pts = np.vstack([corners @ rotation_matrix(t).T for t in samples])
    hull = hull_of(pts)
    bloat = r_corner * (1.0 - np.cos(span / 4.0))
    if bloat > 1e-12:
        hull = minkowski_sum(hull, regular_polygon_circumscribed(bloat, 8))
    return hull
