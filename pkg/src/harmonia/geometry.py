"""Domains, Dirichlet boundary features and deterministic sampling.

Boundary features are straight segments (2-d) or axis-aligned faces (3-d),
each carrying one Dirichlet value. Domains answer membership queries with a
small tolerance so that points generated on shared edges are owned by every
adjacent subdomain.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

EPS = 1e-9


@dataclass(frozen=True)
class Segment:
    """Straight 2-d boundary piece with a constant Dirichlet value."""

    p0: tuple
    p1: tuple
    value: float = 0.0

    def points(self):
        return np.asarray(self.p0, float), np.asarray(self.p1, float)

    @property
    def length(self):
        a, b = self.points()
        return float(np.linalg.norm(b - a))


@dataclass(frozen=True)
class Face:
    """Axis-aligned 3-d boundary rectangle (normal along `axis`)."""

    axis: int
    coord: float
    lo: tuple    # bounds of the two in-plane axes, ascending axis order
    hi: tuple
    value: float = 0.0

    def in_plane_axes(self):
        return tuple(a for a in range(3) if a != self.axis)


def segment_sample(seg, n=100, endpoints=True):
    """n uniformly spaced points; midpoint rule when endpoints is False."""
    a, b = seg.points()
    if endpoints:
        t = np.linspace(0.0, 1.0, n)
    else:
        t = (np.arange(n) + 0.5) / n
    return a[None, :] + t[:, None] * (b - a)[None, :]


def face_sample(face, n_per_axis=32):
    ax1, ax2 = face.in_plane_axes()
    t1 = np.linspace(face.lo[0], face.hi[0], n_per_axis)
    t2 = np.linspace(face.lo[1], face.hi[1], n_per_axis)
    g1, g2 = np.meshgrid(t1, t2, indexing="ij")
    out = np.empty((n_per_axis * n_per_axis, 3))
    out[:, face.axis] = face.coord
    out[:, ax1] = g1.ravel()
    out[:, ax2] = g2.ravel()
    return out


def sample_boundary(features, n=100, n_face=32):
    """Sample every feature; returns (points, values, feature index)."""
    pts, vals, idx = [], [], []
    for k, f in enumerate(features):
        p = segment_sample(f, n) if isinstance(f, Segment) else \
            face_sample(f, n_face)
        pts.append(p)
        vals.append(np.full(len(p), f.value))
        idx.append(np.full(len(p), k))
    return np.vstack(pts), np.concatenate(vals), np.concatenate(idx)


# -- domains -----------------------------------------------------------------


class Rect:
    """Axis-aligned box; kind 'rect' in 2-d, 'cube' in 3-d."""

    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, float)
        self.hi = np.asarray(hi, float)
        self.dim = self.lo.shape[0]
        self.kind = "rect" if self.dim == 2 else "cube"

    def bbox(self):
        return self.lo.copy(), self.hi.copy()

    def contains(self, X, eps=EPS):
        X = np.atleast_2d(X)
        return np.all((X >= self.lo - eps) & (X <= self.hi + eps), axis=1)

    def strictly_inside(self, X, margin=0.0):
        X = np.atleast_2d(X)
        return np.all((X > self.lo + margin) & (X < self.hi - margin), axis=1)


class Polygon:
    """Simple 2-d polygon, vertices in order; kind 'polygon'."""

    kind = "polygon"
    dim = 2

    def __init__(self, vertices):
        self.vertices = np.asarray(vertices, float)
        if self.vertices.shape[0] < 3:
            raise ValueError("polygon needs at least 3 vertices")

    def bbox(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def edges(self):
        v = self.vertices
        return [(v[i], v[(i + 1) % len(v)]) for i in range(len(v))]

    def area(self):
        v = self.vertices
        x, y = v[:, 0], v[:, 1]
        return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))

    def _winding_inside(self, X):
        """Crossing-number test, strict about the boundary (handled apart)."""
        X = np.atleast_2d(X)
        inside = np.zeros(len(X), dtype=bool)
        v = self.vertices
        n = len(v)
        px, py = X[:, 0], X[:, 1]
        for i in range(n):
            x1, y1 = v[i]
            x2, y2 = v[(i + 1) % n]
            crosses = ((y1 > py) != (y2 > py))
            with np.errstate(divide="ignore", invalid="ignore"):
                xint = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
            inside ^= crosses & (px < np.where(crosses, xint, np.inf))
        return inside

    def on_boundary(self, X, eps=EPS):
        X = np.atleast_2d(X)
        d = np.full(len(X), np.inf)
        for a, b in self.edges():
            d = np.minimum(d, _segment_distance(X, a, b))
        return d <= eps

    def contains(self, X, eps=EPS):
        return self._winding_inside(X) | self.on_boundary(X, eps)

    def strictly_inside(self, X, margin=0.0):
        return self._winding_inside(X) & ~self.on_boundary(X, max(EPS, margin))


class RectUnion:
    """Union of overlapping axis-aligned rectangles."""

    kind = "rect_union"

    def __init__(self, rects):
        self.rects = list(rects)
        self.dim = self.rects[0].dim

    def bbox(self):
        lo = np.min([r.lo for r in self.rects], axis=0)
        hi = np.max([r.hi for r in self.rects], axis=0)
        return lo, hi

    def contains(self, X, eps=EPS):
        X = np.atleast_2d(X)
        out = np.zeros(len(X), dtype=bool)
        for r in self.rects:
            out |= r.contains(X, eps)
        return out

    def strictly_inside(self, X, margin=0.0):
        # interior of the union: in the closed union and not within margin
        # of the union's outer boundary; callers provide outer segments via
        # scenarios, so this conservative version only handles margin 0.
        X = np.atleast_2d(X)
        out = np.zeros(len(X), dtype=bool)
        for r in self.rects:
            out |= r.strictly_inside(X, margin)
        return out


class RectMinusPolygon:
    """Axis-aligned rectangle with a polygonal hole."""

    kind = "rect_minus_polygon"
    dim = 2

    def __init__(self, rect, hole):
        self.rect = rect
        self.hole = hole

    def bbox(self):
        return self.rect.bbox()

    def contains(self, X, eps=EPS):
        X = np.atleast_2d(X)
        return self.rect.contains(X, eps) & ~self.hole.strictly_inside(X)

    def strictly_inside(self, X, margin=0.0):
        X = np.atleast_2d(X)
        return (self.rect.strictly_inside(X, margin)
                & ~self.hole.contains(X, max(EPS, margin)))


# -- distance ----------------------------------------------------------------


def _segment_distance(X, a, b):
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    u = b - a
    L2 = float(u @ u)
    t = np.clip(((X - a) @ u) / L2, 0.0, 1.0)
    proj = a[None, :] + t[:, None] * u[None, :]
    return np.linalg.norm(X - proj, axis=1)


def _face_distance(X, face):
    ax1, ax2 = face.in_plane_axes()
    q = X.copy()
    q[:, face.axis] = face.coord
    q[:, ax1] = np.clip(q[:, ax1], face.lo[0], face.hi[0])
    q[:, ax2] = np.clip(q[:, ax2], face.lo[1], face.hi[1])
    return np.linalg.norm(X - q, axis=1), q


def distance_to(features, X):
    """Euclidean distance from each row of X to the nearest feature."""
    X = np.atleast_2d(np.asarray(X, float))
    d = np.full(len(X), np.inf)
    for f in features:
        if isinstance(f, Segment):
            a, b = f.points()
            d = np.minimum(d, _segment_distance(X, a, b))
        else:
            d = np.minimum(d, _face_distance(X, f)[0])
    return d


def distance_jets(features, X):
    """Distance plus its exact gradient and Hessian at strictly outside points.

    The Hessian of the distance to a feature with tangent projector T is
    (I - T - g g^T)/d, which reduces to 0 for flat pieces approached face-on
    and to the curvature of the wavefront for edge and corner features.
    """
    X = np.atleast_2d(np.asarray(X, float))
    B, dim = X.shape
    best_d = np.full(B, np.inf)
    best_p = np.zeros((B, dim))
    best_T = np.zeros((B, dim, dim))  # tangent-space projector of the feature
    for f in features:
        if isinstance(f, Segment):
            a, b = f.points()
            u = b - a
            L = np.linalg.norm(u)
            uhat = u / L
            t = np.clip(((X - a) @ u) / (L * L), 0.0, 1.0)
            proj = a[None, :] + t[:, None] * u[None, :]
            d = np.linalg.norm(X - proj, axis=1)
            T = np.where(((t > 0) & (t < 1))[:, None, None],
                         np.outer(uhat, uhat)[None, :, :], 0.0)
        else:
            d, proj = _face_distance(X, f)
            ax1, ax2 = f.in_plane_axes()
            on1 = (X[:, ax1] > f.lo[0]) & (X[:, ax1] < f.hi[0])
            on2 = (X[:, ax2] > f.lo[1]) & (X[:, ax2] < f.hi[1])
            e1 = np.zeros(dim)
            e1[ax1] = 1.0
            e2 = np.zeros(dim)
            e2[ax2] = 1.0
            T = (on1[:, None, None] * np.outer(e1, e1)[None]
                 + on2[:, None, None] * np.outer(e2, e2)[None])
        closer = d < best_d
        best_d = np.where(closer, d, best_d)
        best_p = np.where(closer[:, None], proj, best_p)
        best_T = np.where(closer[:, None, None], T, best_T)
    if np.any(best_d <= 0.0):
        raise ValueError("distance jets need strictly outside points")
    r = X - best_p
    g = r / best_d[:, None]
    eye = np.eye(dim)[None, :, :]
    hess = (eye - best_T - g[:, :, None] * g[:, None, :]) / \
        best_d[:, None, None]
    return best_d, g, hess


def segment_normal(seg):
    a, b = seg.points()
    u = (b - a) / np.linalg.norm(b - a)
    return np.array([-u[1], u[0]])


def oriented_interface_normal(seg, dom_from, dom_to, probe=1e-6):
    """Unit normal on `seg` pointing from dom_from into dom_to."""
    n = segment_normal(seg)
    a, b = seg.points()
    mid = 0.5 * (a + b)
    if dom_to.contains(mid + probe * n)[0] and \
            not dom_to.contains(mid - probe * n)[0]:
        return n
    if dom_from.contains(mid + probe * n)[0] and \
            not dom_from.contains(mid - probe * n)[0]:
        return -n
    raise ValueError("interface normal orientation is ambiguous")


# -- decompositions ----------------------------------------------------------


@dataclass(frozen=True)
class Interface:
    """Shared edge between subdomains i < j of a decomposition."""

    i: int
    j: int
    segment: Segment


@dataclass
class Decomposition:
    subdomains: list
    interfaces: list = field(default_factory=list)

    def locate(self, X, eps=EPS):
        """Membership matrix (B, n_sub); shared-edge points own several."""
        X = np.atleast_2d(X)
        return np.stack([s.contains(X, eps) for s in self.subdomains], axis=1)

    def interface_normal(self, k, x, tol=EPS):
        """Normal of interface k at x, oriented low index to high index."""
        iface = self.interfaces[k]
        a, b = iface.segment.points()
        if _segment_distance(np.atleast_2d(x), a, b)[0] > max(tol, 1e-9):
            raise ValueError("point is not on the interface")
        return oriented_interface_normal(iface.segment,
                                         self.subdomains[iface.i],
                                         self.subdomains[iface.j])


def equilateral_triangle(center, side, tip_up=True):
    c = np.asarray(center, float)
    r = side / np.sqrt(3.0)
    base = 90.0 if tip_up else -90.0
    ang = np.deg2rad(base + np.array([0.0, 120.0, 240.0]))
    return Polygon(c[None, :] + r * np.stack([np.cos(ang), np.sin(ang)],
                                             axis=1))


def radial_cut_decomposition(box, hole):
    """Split box-minus-hole into simply connected pieces.

    One straight cut runs from each hole vertex away from the hole centroid
    until it meets the box boundary. Consecutive cuts plus the hole edge and
    the box walls between the cut feet bound each subdomain.
    """
    lo, hi = box.lo, box.hi
    verts = hole.vertices
    c = verts.mean(axis=0)
    n = len(verts)

    def hit_box(p, u):
        ts = []
        for ax in range(2):
            if u[ax] > 0:
                ts.append((hi[ax] - p[ax]) / u[ax])
            elif u[ax] < 0:
                ts.append((lo[ax] - p[ax]) / u[ax])
        t = min(ts)
        return p + t * u

    feet = [hit_box(v, (v - c) / np.linalg.norm(v - c)) for v in verts]

    corners = [np.array([lo[0], lo[1]]), np.array([hi[0], lo[1]]),
               np.array([hi[0], hi[1]]), np.array([lo[0], hi[1]])]

    def walk_wall(a, b):
        """Box-boundary corners passed walking counter-clockwise a -> b."""
        def station(p):
            # perimeter coordinate, counter-clockwise from (lo, lo)
            w, h = hi[0] - lo[0], hi[1] - lo[1]
            if abs(p[1] - lo[1]) < 1e-12 and p[0] < hi[0] - 1e-12:
                return p[0] - lo[0]
            if abs(p[0] - hi[0]) < 1e-12 and p[1] < hi[1] - 1e-12:
                return w + p[1] - lo[1]
            if abs(p[1] - hi[1]) < 1e-12 and p[0] > lo[0] + 1e-12:
                return w + h + (hi[0] - p[0])
            return 2 * w + h + (hi[1] - p[1])
        sa, sb = station(a), station(b)
        per = 2 * ((hi[0] - lo[0]) + (hi[1] - lo[1]))
        out = []
        for corner in corners:
            sc = station(corner)
            gap = (sc - sa) % per
            if 1e-12 < gap < (sb - sa) % per:
                out.append((gap, corner))
        return [p for _, p in sorted(out, key=lambda t: t[0])]

    subs = []
    interfaces = []
    for k in range(n):
        v0, v1 = verts[k], verts[(k + 1) % n]
        f0, f1 = feet[k], feet[(k + 1) % n]
        poly = [v1, v0, f0] + walk_wall(f0, f1) + [f1]
        subs.append(Polygon(np.array(poly)))
    for k in range(n):
        a, b = min(k, (k + 1) % n), max(k, (k + 1) % n)
        interfaces.append(Interface(a, b, Segment(tuple(verts[(k + 1) % n]),
                                                  tuple(feet[(k + 1) % n]))))
    return Decomposition(subs, interfaces)


# -- random interior sampling -------------------------------------------------


def sample_interior(domain, n=1024, seed=0, min_acceptance=0.01):
    """n uniform points strictly inside the domain, rejection from the bbox.

    Deterministic for a given seed. Raises if the acceptance rate drops
    below min_acceptance after a warm-up volume of draws.
    """
    rng = np.random.default_rng(seed)
    lo, hi = domain.bbox()
    dim = lo.shape[0]
    got = []
    accepted = 0
    drawn = 0
    while accepted < n:
        chunk = rng.uniform(lo, hi, size=(4 * n, dim))
        keep = domain.strictly_inside(chunk)
        got.append(chunk[keep])
        accepted += int(keep.sum())
        drawn += len(chunk)
        if drawn >= 40 * n and accepted < min_acceptance * drawn:
            raise RuntimeError("interior sampling acceptance below 1%")
    return np.vstack(got)[:n]
