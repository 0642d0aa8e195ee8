"""Ray dynamics in billiards with straight and circular walls.

Periodic orbits are found per bounce-surface sequence. Flat walls between two
circle bounces are unfolded, so a sequence with k circle bounces is a k
dimensional critical-point problem for the total length; a sequence without
circle bounces is solved by linear algebra on the composed reflections.
Every candidate is confirmed by tracing it through the real geometry.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import errors
from .diophantine import DirichletResult, dirichlet_approx
from .geometry import ANGLE_MAX_DEN, BilliardSpec, point_in_polygon

HIT_TOL = 1e-9
CLOSURE_TOL = 1e-9
CLUSTER_TOL = 2 * math.pi / 100
RADIAL_BOUNCES = 12
SEEDS = 64
T_MIN = 1e-12


@dataclass(frozen=True)
class Circle:
    center: Tuple[float, float]
    radius: float

    def point(self, phi) -> np.ndarray:
        c = np.asarray(self.center)
        return c + self.radius * np.stack([np.cos(phi), np.sin(phi)], axis=-1)

    def angle_of(self, p) -> float:
        return math.atan2(p[1] - self.center[1], p[0] - self.center[0]) % (2 * math.pi)

    def to_json(self):
        return {"center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class Surface:
    """One wall: a polygon side (kind 'side') or a circle (kind 'circle')."""

    kind: str
    ident: str
    a: np.ndarray = field(default=None, repr=False)
    b: np.ndarray = field(default=None, repr=False)
    circle: Optional[Circle] = None

    @property
    def reflection(self) -> np.ndarray:
        """Affine reflection in the side's line, as a 3x3 matrix."""
        t = (self.b - self.a) / np.linalg.norm(self.b - self.a)
        M = 2 * np.outer(t, t) - np.eye(2)
        out = np.eye(3)
        out[:2, :2] = M
        out[:2, 2] = self.a - M @ self.a
        return out

    def normal_at(self, p) -> np.ndarray:
        if self.kind == "circle":
            return (np.asarray(p) - np.asarray(self.circle.center)) / self.circle.radius
        e = self.b - self.a
        return np.array([-e[1], e[0]]) / np.linalg.norm(e)

    def point_at(self, s) -> np.ndarray:
        if self.kind == "circle":
            return self.circle.point(s)
        return self.a + s * (self.b - self.a)

    def parameter_of(self, p) -> float:
        if self.kind == "circle":
            return self.circle.angle_of(p)
        e = self.b - self.a
        return float((np.asarray(p) - self.a) @ e / (e @ e))


@dataclass(frozen=True)
class CurvedBilliard:
    """Outer polygon (counter-clockwise), optional polygonal holes, circular holes."""

    outer: Tuple[Tuple[float, float], ...]
    circles: Tuple[Circle, ...] = ()
    holes: Tuple[Tuple[Tuple[float, float], ...], ...] = ()
    family: str = ""
    params: Tuple[Tuple[str, float], ...] = ()

    def __post_init__(self):
        pts = np.asarray(self.outer, dtype=float)
        if len(pts) < 3:
            raise errors.NonSimplePolygon("outer polygon needs at least 3 vertices")
        area = 0.5 * np.sum(pts[:, 0] * np.roll(pts[:, 1], -1) - np.roll(pts[:, 0], -1) * pts[:, 1])
        if area < 0:
            object.__setattr__(self, "outer", tuple(map(tuple, pts[::-1])))
        for i, c in enumerate(self.circles):
            if c.radius <= 0:
                raise errors.BadParameters(f"circle {i} needs a positive radius")
            centre = np.asarray(c.center, dtype=float)
            if not point_in_polygon(centre, np.asarray(self.outer)):
                raise errors.HoleOutsideOuter(f"circle {i} centre lies outside the outer polygon")
            for a, b in self._polygon_sides():
                if _segment_distance(centre, a, b) <= c.radius + HIT_TOL:
                    raise errors.HoleOutsideOuter(f"circle {i} touches a wall")

    def _polygon_sides(self):
        for poly in (self.outer, *self.holes):
            pts = np.asarray(poly, dtype=float)
            for j in range(len(pts)):
                yield pts[j], pts[(j + 1) % len(pts)]

    @property
    def surfaces(self) -> Tuple[Surface, ...]:
        out = []
        for l, poly in enumerate((self.outer, *self.holes)):
            pts = np.asarray(poly, dtype=float)
            for j in range(len(pts)):
                out.append(Surface("side", f"s{l}.{j}", pts[j], pts[(j + 1) % len(pts)]))
        for i, c in enumerate(self.circles):
            out.append(Surface("circle", f"c{i}", circle=c))
        return tuple(out)

    @property
    def vertices(self) -> np.ndarray:
        return np.vstack([np.asarray(p, dtype=float) for p in (self.outer, *self.holes)])

    def contains(self, p, margin: float = 0.0) -> bool:
        p = np.asarray(p, dtype=float)
        if not point_in_polygon(p, np.asarray(self.outer)):
            return False
        if any(point_in_polygon(p, np.asarray(h)) for h in self.holes):
            return False
        if any(np.hypot(*(p - np.asarray(c.center))) <= c.radius + margin for c in self.circles):
            return False
        return all(_segment_distance(p, a, b) > margin for a, b in self._polygon_sides())

    def to_json(self):
        out = {"schema": "v1", "outer": [list(p) for p in self.outer],
               "circles": [c.to_json() for c in self.circles]}
        if self.holes:
            out["holes"] = [[list(p) for p in h] for h in self.holes]
        if self.family:
            out["family"] = self.family
            out["params"] = dict(self.params)
        return out

    @classmethod
    def from_json(cls, raw) -> "CurvedBilliard":
        try:
            if "outer" not in raw and raw.get("family") == "sinai":
                return sinai_curved(**raw.get("params", {}))
            return cls(tuple(tuple(map(float, p)) for p in raw["outer"]),
                       tuple(Circle(tuple(map(float, c["center"])), float(c["radius"]))
                             for c in raw.get("circles", [])),
                       tuple(tuple(tuple(map(float, p)) for p in h) for h in raw.get("holes", [])),
                       raw.get("family", ""),
                       tuple(sorted((k, float(v)) for k, v in raw.get("params", {}).items())))
        except (KeyError, TypeError, ValueError) as exc:
            raise errors.InvalidSpec(f"malformed curved billiard: {exc}") from exc


def sinai_curved(w: float = 0.55, h: float = 0.5, r: float = 0.2) -> CurvedBilliard:
    """Triangle (0,0),(1,0),(1,sqrt3) with a circular hole of centre (w, h), radius r."""
    from .families import TRIANGLE, check_sinai
    check_sinai(w, h, r)
    return CurvedBilliard(tuple(map(tuple, TRIANGLE)), (Circle((float(w), float(h)), float(r)),),
                          family="sinai", params=(("h", float(h)), ("r", float(r)), ("w", float(w))))


def as_curved(billiard) -> CurvedBilliard:
    if isinstance(billiard, CurvedBilliard):
        return billiard
    if isinstance(billiard, BilliardSpec):
        return CurvedBilliard(tuple(map(tuple, billiard.points[0])),
                              holes=tuple(tuple(map(tuple, p)) for p in billiard.points[1:]))
    raise TypeError(f"not a billiard: {type(billiard).__name__}")


def _segment_distance(p, a, b) -> float:
    e = b - a
    s = np.clip((p - a) @ e / (e @ e), 0.0, 1.0)
    return float(np.hypot(*(p - a - s * e)))


def _cross(u, v) -> float:
    return u[0] * v[1] - u[1] * v[0]


# ---------------------------------------------------------------------------
# tracing


@dataclass
class Path:
    points: List[np.ndarray]
    surfaces: List[str]
    directions: List[np.ndarray]
    normals: List[np.ndarray]
    flag: Optional[str] = None

    @property
    def length(self) -> float:
        return float(sum(np.linalg.norm(b - a) for a, b in zip(self.points, self.points[1:])))

    def law_residuals(self) -> List[float]:
        """Per bounce: |angle of incidence - angle of reflection| in radians."""
        out = []
        for k, n in enumerate(self.normals):
            d_in, d_out = self.directions[k], self.directions[k + 1]
            a_in = math.atan2(_cross(n, -d_in), n @ -d_in)
            a_out = math.atan2(_cross(n, d_out), n @ d_out)
            out.append(abs(a_in + a_out))
        return out

    def to_json(self):
        return {"points": [list(map(float, p)) for p in self.points], "surfaces": list(self.surfaces),
                "flag": self.flag, "length": self.length}


def _first_hit(surfs: Sequence[Surface], o, d, skip: int):
    best_t, best = math.inf, None
    for i, s in enumerate(surfs):
        if i == skip:
            continue
        if s.kind == "side":
            e = s.b - s.a
            den = _cross(d, e)
            if abs(den) < 1e-15:
                continue
            w = s.a - o
            t = _cross(w, e) / den
            u = _cross(w, d) / den
            if t <= T_MIN or u < -HIT_TOL or u > 1 + HIT_TOL:
                continue
        else:
            c = np.asarray(s.circle.center)
            oc = o - c
            b = oc @ d
            disc = b * b - (oc @ oc - s.circle.radius ** 2)
            if disc < -2 * HIT_TOL * s.circle.radius:
                continue
            t = -b - math.sqrt(max(disc, 0.0))
            if t <= T_MIN:
                continue
        if t < best_t:
            best_t, best = t, i
    return best_t, best


def _near_vertex(verts: np.ndarray, a, b) -> bool:
    e = b - a
    s = np.clip((verts - a) @ e / (e @ e), 0.0, 1.0)
    dist = np.hypot(*(verts - a - s[:, None] * e).T)
    return bool(np.any(dist < HIT_TOL))


def _trace(bil: CurvedBilliard, surfs, start, d, max_bounces: int, skip: int = -1,
           strict: bool = False) -> Path:
    verts = bil.vertices
    o = np.asarray(start, dtype=float)
    path = Path([o], [], [d], [])
    for _ in range(max_bounces):
        t, i = _first_hit(surfs, o, d, skip)
        if i is None:
            path.flag = "escape"
            break
        p = o + t * d
        if _near_vertex(verts, o, p):
            path.points.append(p)
            path.flag = "corner"
            if strict:
                raise errors.CornerHit(f"ray passes within {HIT_TOL} of a vertex near {p.tolist()}")
            break
        s = surfs[i]
        n = s.normal_at(p)
        if s.kind == "circle" and abs(n @ d) < HIT_TOL:
            path.points.append(p)
            path.flag = "tangent"
            if strict:
                raise errors.TangentHit(f"ray grazes circle {s.ident} at {p.tolist()}")
            break
        d = d - 2 * (d @ n) * n
        d = d / np.linalg.norm(d)
        path.points.append(p)
        path.surfaces.append(s.ident)
        path.normals.append(n)
        path.directions.append(d)
        o, skip = p, i
    return path


def trace(billiard, start, direction, max_bounces: int, strict: bool = False) -> Path:
    """Follow a ray with specular reflection for at most max_bounces bounces.

    Corner and grazing hits stop the path and set `flag`; with strict=True they
    raise CornerHit / TangentHit instead.
    """
    bil = as_curved(billiard)
    if not bil.contains(start):
        raise errors.PointOutside(f"start {list(start)} is not strictly inside the billiard")
    d = np.asarray(direction, dtype=float)
    norm = np.linalg.norm(d)
    if norm == 0:
        raise errors.BadParameters("direction must be nonzero")
    return _trace(bil, bil.surfaces, start, d / norm, max_bounces, strict=strict)


# ---------------------------------------------------------------------------
# periodic orbits


@dataclass(frozen=True)
class Orbit:
    points: Tuple[Tuple[float, float], ...]
    surfaces: Tuple[str, ...]
    parameters: Tuple[float, ...]
    length: float
    stability: str

    @property
    def bounces(self) -> int:
        return len(self.surfaces)

    @property
    def closure_gap(self) -> float:
        return float(np.hypot(*(np.subtract(self.points[-1], self.points[0]))))

    def circle_points(self, ident: str = "c0") -> List[Tuple[float, float]]:
        return [p for p, s in zip(self.points[1:], self.surfaces) if s == ident]

    def touches(self, ident: str) -> bool:
        return ident in self.surfaces

    def to_json(self):
        return {"points": [list(p) for p in self.points], "surfaces": list(self.surfaces),
                "parameters": list(self.parameters), "length": self.length,
                "stability": self.stability}


def reflection_residuals(billiard, orbit: Orbit) -> List[float]:
    """Reflection-law residual (radians) at every bounce of a closed orbit."""
    surfs = {s.ident: s for s in as_curved(billiard).surfaces}
    pts = np.asarray(orbit.points)
    out = []
    k = len(orbit.surfaces)
    for i, ident in enumerate(orbit.surfaces):
        p = pts[i + 1]
        d_in = p - pts[i]
        d_out = pts[(i + 2) if i + 2 <= k else 1] - p
        n = surfs[ident].normal_at(p)
        d_in, d_out = d_in / np.linalg.norm(d_in), d_out / np.linalg.norm(d_out)
        a_in = math.atan2(_cross(n, -d_in), n @ -d_in)
        a_out = math.atan2(_cross(n, d_out), n @ d_out)
        out.append(abs(a_in + a_out))
    return out


def length_at(billiard, surfaces: Sequence[str], parameters: Sequence[float]) -> float:
    """Closed polygon length through the surface points at the given parameters."""
    surfs = {s.ident: s for s in as_curved(billiard).surfaces}
    pts = [surfs[s].point_at(t) for s, t in zip(surfaces, parameters)]
    return float(sum(np.linalg.norm(pts[i] - pts[i - 1]) for i in range(len(pts))))


def _canonical(word: Tuple[int, ...]) -> Tuple[int, ...]:
    n = len(word)
    rots = [word[i:] + word[:i] for i in range(n)]
    rev = word[::-1]
    rots += [rev[i:] + rev[:i] for i in range(n)]
    return min(rots)


def _is_power(word) -> bool:
    n = len(word)
    return any(n % p == 0 and word == word[:p] * (n // p) for p in range(1, n))


def _facing(surfs: Sequence[Surface]) -> np.ndarray:
    """facing[i, j]: some point of surface j lies on the domain side of surface i."""
    S = len(surfs)
    out = np.ones((S, S), dtype=bool)
    for i, s in enumerate(surfs):
        out[i, i] = False
        if s.kind != "side":
            continue
        n = s.normal_at(s.a)
        for j, o in enumerate(surfs):
            if j == i:
                continue
            if o.kind == "side":
                vals = [(o.a - s.a) @ n, (o.b - s.a) @ n]
                out[i, j] = max(vals) > HIT_TOL
            else:
                out[i, j] = (np.asarray(o.circle.center) - s.a) @ n + o.circle.radius > HIT_TOL
    return out


def surface_words(surfs: Sequence[Surface], max_bounces: int) -> List[Tuple[int, ...]]:
    """Canonical cyclic bounce sequences, no powers, consecutive walls mutually facing."""
    facing = _facing(surfs)
    both = facing & facing.T
    S = len(surfs)
    out = []

    def grow(word):
        n = len(word)
        if n >= 2 and both[word[-1], word[0]]:
            if _canonical(word) == word and not _is_power(word):
                out.append(word)
        if n == max_bounces:
            return
        for j in range(word[0], S):
            if both[word[-1], j]:
                grow(word + (j,))

    for first in range(S):
        grow((first,))
    out.sort(key=lambda w: (len(w), w))
    return out


def _unit(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


class _CircleWord:
    """Unfolded length functional for a word containing circle bounces."""

    def __init__(self, surfs, word):
        start = next(i for i, s in enumerate(word) if surfs[s].kind == "circle")
        self.word = word[start:] + word[:start]
        pos = [i for i, s in enumerate(self.word) if surfs[s].kind == "circle"]
        self.k = len(pos)
        self.circles = [surfs[self.word[i]].circle for i in pos]
        self.centres = np.array([c.center for c in self.circles])
        self.radii = np.array([c.radius for c in self.circles])
        self.maps = []
        for c, i in enumerate(pos):
            j = pos[c + 1] if c + 1 < len(pos) else len(self.word)
            G = np.eye(3)
            for s in self.word[i + 1:j]:
                G = G @ surfs[s].reflection
            self.maps.append(G)

    def _points(self, phi):
        P = self.centres + self.radii[:, None] * np.stack([np.cos(phi), np.sin(phi)], -1)
        dP = self.radii[:, None] * np.stack([-np.sin(phi), np.cos(phi)], -1)
        return P, dP

    def parts(self, phi):
        """phi: (S, k). Returns points, tangents, unit chords e_i and chord lengths."""
        P, dP = self._points(phi)
        E, L = [], []
        for i, G in enumerate(self.maps):
            nxt = P[:, (i + 1) % self.k]
            Q = nxt @ G[:2, :2].T + G[:2, 2]
            diff = P[:, i] - Q
            L.append(np.linalg.norm(diff, axis=-1))
            E.append(diff / np.maximum(L[-1], 1e-300)[:, None])
        return P, dP, E, L

    def length(self, phi):
        return sum(self.parts(phi)[3])

    def gradient(self, phi):
        P, dP, E, _ = self.parts(phi)
        g = np.empty_like(phi)
        for j in range(self.k):
            i = (j - 1) % self.k
            A = self.maps[i][:2, :2]
            g[:, j] = np.sum(E[j] * dP[:, j], -1) - np.sum(E[i] * (dP[:, j] @ A.T), -1)
        return g

    def hessian(self, phi, h=1e-6):
        H = np.empty(phi.shape + (self.k,))
        for j in range(self.k):
            step = np.zeros(self.k)
            step[j] = h
            H[:, :, j] = (self.gradient(phi + step) - self.gradient(phi - step)) / (2 * h)
        return H

    def solve(self, seeds: np.ndarray, iterations: int = 60) -> np.ndarray:
        phi = seeds.copy()
        for _ in range(iterations):
            g = self.gradient(phi)
            H = self.hessian(phi)
            try:
                step = np.linalg.solve(H + 1e-14 * np.eye(self.k), -g[..., None])[..., 0]
            except np.linalg.LinAlgError:
                step = -g
            size = np.max(np.abs(step), axis=-1, keepdims=True)
            step = np.where(size > 0.3, step * 0.3 / np.maximum(size, 1e-300), step)
            phi = phi + step
            if np.all(np.abs(g) < 1e-13):
                break
        ok = np.all(np.abs(self.gradient(phi)) < 1e-10, axis=-1)
        return np.mod(phi[ok], 2 * math.pi)


def _seeds(k: int, rng: np.random.Generator) -> np.ndarray:
    if k == 1:
        return (np.arange(SEEDS)[:, None] + 0.5) * 2 * math.pi / SEEDS
    if k == 2:
        g = (np.arange(8) + 0.5) * 2 * math.pi / 8
        return np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)
    return rng.uniform(0, 2 * math.pi, size=(SEEDS, k))


def _confirm(bil, surfs, word, start_point, d, start_index) -> Optional[Path]:
    """Trace the candidate and accept it only if it reproduces the word and closes."""
    path = _trace(bil, surfs, start_point, d, len(word), skip=start_index)
    expected = [surfs[s].ident for s in word[1:] + word[:1]]
    if path.flag or path.surfaces != expected:
        return None
    if np.linalg.norm(path.points[-1] - path.points[0]) > CLOSURE_TOL:
        return None
    if np.linalg.norm(path.directions[-1] - d) > CLOSURE_TOL:
        return None
    return path


def _shoot_refine(bil, surfs, word, circle_index, phi, d):
    """Newton on the return map (circle angle, launch angle) to tighten closure."""
    circ = surfs[circle_index]
    x = np.array([phi, math.atan2(d[1], d[0])])

    def F(x):
        p = circ.point_at(x[0])
        dd = np.array([math.cos(x[1]), math.sin(x[1])])
        path = _trace(bil, surfs, p, dd, len(word), skip=circle_index)
        if path.flag or len(path.points) != len(word) + 1:
            return None
        q = path.points[-1]
        out = path.directions[-1]
        return np.array([(circ.parameter_of(q) - x[0] + math.pi) % (2 * math.pi) - math.pi,
                         (math.atan2(out[1], out[0]) - x[1] + math.pi) % (2 * math.pi) - math.pi])

    for _ in range(8):
        f = F(x)
        if f is None:
            return phi, d
        if np.max(np.abs(f)) < 1e-13:
            break
        J = np.empty((2, 2))
        for j in range(2):
            h = np.zeros(2)
            h[j] = 1e-7
            fp, fm = F(x + h), F(x - h)
            if fp is None or fm is None:
                return phi, d
            J[:, j] = (fp - fm) / 2e-7
        try:
            x = x - np.linalg.solve(J - np.eye(2) * 0, f)
        except np.linalg.LinAlgError:
            return phi, d
    return float(x[0]), np.array([math.cos(x[1]), math.sin(x[1])])


def _orbit_from_path(surfs, path: Path, stability: str) -> Orbit:
    by_id = {s.ident: s for s in surfs}
    pts = path.points
    closing = pts[-1]
    pts = [closing] + pts[1:-1] + [closing]
    idents = path.surfaces
    params = [by_id[s].parameter_of(p) for s, p in zip(idents, pts[1:])]
    length = float(sum(np.linalg.norm(b - a) for a, b in zip(pts, pts[1:])))
    return Orbit(tuple((float(p[0]), float(p[1])) for p in pts), tuple(idents), tuple(params),
                 length, stability)


def _circle_orbits(bil, surfs, word, rng) -> List[Orbit]:
    cw = _CircleWord(surfs, word)
    seeds = _seeds(cw.k, rng)
    vals = cw.length(seeds)
    if np.ptp(vals) < 1e-12:
        return []
    sols = cw.solve(seeds)
    found, out = [], []
    w = cw.word
    c0 = w[0]
    for phi in sols:
        if any(np.max(np.abs(np.angle(np.exp(1j * (phi - f))))) < 1e-7 for f in found):
            continue
        found.append(phi)
        P, _, E, L = cw.parts(phi[None, :])
        if min(l[0] for l in L) < HIT_TOL:
            continue
        d = -E[0][0]
        start = P[0, 0]
        p0, d0 = _shoot_refine(bil, surfs, w, c0, float(phi[0]), d)
        start, d = surfs[c0].point_at(p0), d0
        path = _confirm(bil, surfs, w, start, d, c0)
        if path is not None:
            out.append(_orbit_from_path(surfs, path, "isolated"))
    return out


def _polygon_orbits(bil, surfs, word) -> List[Orbit]:
    s1 = surfs[word[0]]
    G = np.eye(3)
    for s in word[1:]:
        G = G @ surfs[s].reflection
    G = G @ s1.reflection
    A, b = G[:2, :2], G[:2, 2]
    e = s1.b - s1.a
    if len(word) % 2 == 0:
        if np.max(np.abs(A - np.eye(2))) > 1e-12 or np.linalg.norm(b) < HIT_TOL:
            return []
        d = b / np.linalg.norm(b)
        ts = (np.arange(SEEDS) + 0.5) / SEEDS
        good = [t for t in ts if _confirm(bil, surfs, word, s1.a + t * e, d, word[0]) is not None]
        if not good:
            return []
        runs, cur = [], [good[0]]
        for t in good[1:]:
            if abs(t - cur[-1] - 1.0 / SEEDS) < 1e-12:
                cur.append(t)
            else:
                runs.append(cur)
                cur = [t]
        runs.append(cur)
        run = max(runs, key=len)
        t = 0.5 * (run[0] + run[-1])
        path = _confirm(bil, surfs, word, s1.a + t * e, d, word[0])
        if path is None:
            t = run[len(run) // 2]
            path = _confirm(bil, surfs, word, s1.a + t * e, d, word[0])
        return [_orbit_from_path(surfs, path, "family")]
    # odd word: A is a reflection; the orbit runs along its axis
    w_, v_ = np.linalg.eigh((A + A.T) / 2)
    axis = v_[:, np.argmax(w_)]
    normal = np.array([-axis[1], axis[0]])
    den = e @ normal
    if abs(den) < 1e-12:
        return []
    t = (0.5 * (b @ normal) - s1.a @ normal) / den
    if not (HIT_TOL < t < 1 - HIT_TOL):
        return []
    P = s1.a + t * e
    jump = A @ P + b - P
    if np.linalg.norm(jump) < HIT_TOL:
        return []
    d = axis if jump @ axis > 0 else -axis
    path = _confirm(bil, surfs, word, P, d, word[0])
    return [] if path is None else [_orbit_from_path(surfs, path, "isolated")]


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("BILLIARD_THREADS", "1")))
    except ValueError:
        return 1


def _orbit_key(o: Orbit):
    return tuple(sorted((round(x, 7), round(y, 7)) for x, y in o.points[1:]))


def find_periodic_orbits(billiard, max_bounces: int = 6, max_length: float = 10.0,
                         seed: int = 0) -> List[Orbit]:
    """Distinct periodic orbits up to max_bounces bounces and max_length length,
    sorted by length then bounce sequence. An empty list means none were found."""
    if max_bounces < 2 or max_bounces > 8:
        raise errors.BadParameters("max_bounces must be between 2 and 8")
    if not math.isfinite(max_length) or max_length <= 0:
        raise errors.BadParameters("max_length must be finite and positive")
    bil = as_curved(billiard)
    surfs = bil.surfaces
    words = surface_words(surfs, max_bounces)

    def work(item):
        idx, word = item
        rng = np.random.default_rng([seed, idx])
        if any(surfs[s].kind == "circle" for s in word):
            return _circle_orbits(bil, surfs, word, rng)
        return _polygon_orbits(bil, surfs, word)

    items = list(enumerate(words))
    if _threads() > 1:
        with ThreadPoolExecutor(_threads()) as pool:
            results = list(pool.map(work, items))
    else:
        results = [work(it) for it in items]
    seen: Dict[tuple, Orbit] = {}
    for orbits in results:
        for o in orbits:
            if o.length <= max_length:
                seen.setdefault(_orbit_key(o), o)
    return sorted(seen.values(), key=lambda o: (round(o.length, 9), o.surfaces))


def _radial_profile(bil, surfs, ci, phi, depth):
    """Surfaces hit by the ray leaving circle ci along its normal at angle phi,
    with the signed incidence sin(angle to the wall normal) at each hit."""
    circ = surfs[ci]
    u = np.array([math.cos(phi), math.sin(phi)])
    path = _trace(bil, surfs, circ.point_at(phi), u, depth, skip=ci)
    out = []
    for k, ident in enumerate(path.surfaces):
        n = path.normals[k]
        out.append((ident, _cross(n, path.directions[k])))
        if ident.startswith("c"):
            break
    return out


def radial_orbits(billiard, max_bounces: int = 12, samples: int = 720) -> List[Orbit]:
    """Orbits with a single circle bounce at normal incidence, sorted by length.

    Such an orbit leaves the circle along a normal, meets some wall at right
    angles and retraces itself, so it has an even number of bounces. The
    angle of the wall hit is root-found along the circle (one dimension).
    """
    if max_bounces < 2:
        raise errors.BadParameters("max_bounces must be at least 2")
    bil = as_curved(billiard)
    surfs = bil.surfaces
    depth = max_bounces // 2
    found: Dict[tuple, Orbit] = {}
    for ci, circ in enumerate(surfs):
        if circ.kind != "circle":
            continue
        grid = np.arange(samples) * 2 * math.pi / samples
        profiles = [_radial_profile(bil, surfs, ci, phi, depth) for phi in grid]
        for i in range(samples):
            lo, hi = grid[i], grid[i] + 2 * math.pi / samples
            pa, pb = profiles[i], profiles[(i + 1) % samples]
            for j in range(min(len(pa), len(pb))):
                if pa[j][0] != pb[j][0] or pa[j][0].startswith("c"):
                    break
                if pa[j][1] == 0 or np.sign(pa[j][1]) != np.sign(pb[j][1]):
                    phi = _bisect_incidence(bil, surfs, ci, lo, hi, j, depth, pa[:j + 1])
                    if phi is None:
                        continue
                    orbit = _radial_orbit(bil, surfs, ci, phi, j + 1)
                    if orbit is not None:
                        found.setdefault(_orbit_key(orbit), orbit)
                    break
    return sorted(found.values(), key=lambda o: (round(o.length, 9), o.surfaces))


def _bisect_incidence(bil, surfs, ci, lo, hi, j, depth, prefix):
    names = [p[0] for p in prefix]

    def f(phi):
        prof = _radial_profile(bil, surfs, ci, phi, depth)
        if len(prof) <= j or [p[0] for p in prof[:j + 1]] != names:
            return None
        return prof[j][1]

    flo, fhi = f(lo), f(hi)
    if flo is None or fhi is None:
        return None
    if flo == 0:
        return lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm is None:
            return None
        if fm == 0 or hi - lo < 1e-16:
            return mid
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _radial_orbit(bil, surfs, ci, phi, j) -> Optional[Orbit]:
    circ = surfs[ci]
    u = np.array([math.cos(phi), math.sin(phi)])
    start = circ.point_at(phi)
    path = _trace(bil, surfs, start, u, 2 * j, skip=ci)
    ids = path.surfaces
    if path.flag or len(ids) != 2 * j or ids[-1] != circ.ident:
        return None
    if ids[j:-1] != ids[:j - 1][::-1]:
        return None
    if np.linalg.norm(path.points[-1] - start) > CLOSURE_TOL:
        return None
    if np.linalg.norm(path.directions[-1] - u) > CLOSURE_TOL:
        return None
    return _orbit_from_path(surfs, path, "isolated")


# ---------------------------------------------------------------------------
# envelope polygons


def cluster_angles(angles: Sequence[float], tol: float = CLUSTER_TOL) -> List[Tuple[float, int]]:
    """Merge angles closer than tol (chained, on the circle) into (mean angle, count)."""
    a = np.sort(np.mod(np.asarray(angles, dtype=float), 2 * math.pi))
    if len(a) == 0:
        return []
    gaps = np.diff(np.append(a, a[0] + 2 * math.pi))
    breaks = np.nonzero(gaps >= tol)[0]
    if len(breaks) == 0:
        groups = [a]
    else:
        shift = breaks[-1] + 1
        a = np.roll(a, -shift)
        gaps = np.roll(gaps, -shift)
        groups, cur = [], [a[0]]
        for x, g in zip(a[1:], gaps[:-1]):
            if g >= tol:
                groups.append(np.array(cur))
                cur = [x]
            else:
                cur.append(x)
        groups.append(np.array(cur))
    out = []
    for g in groups:
        mean = math.atan2(np.mean(np.sin(g)), np.mean(np.cos(g))) % (2 * math.pi)
        if 2 * math.pi - mean < 1e-12:
            mean = 0.0
        out.append((mean, len(g)))
    return sorted(out)


@dataclass(frozen=True)
class Envelope:
    circle: Circle
    tangency: Tuple[float, ...]
    vertices: Tuple[Tuple[float, float], ...]
    beta_start: float
    beta_width: float

    @property
    def interior_angles(self) -> Tuple[float, ...]:
        """Polygon interior angles in radians (pi minus the tangency gap)."""
        t = self.tangency
        return tuple(math.pi - ((t[(i + 1) % len(t)] - t[i]) % (2 * math.pi)) for i in range(len(t)))

    def side_lengths(self) -> Tuple[float, ...]:
        v = np.asarray(self.vertices)
        return tuple(float(np.hypot(*(v[(i + 1) % len(v)] - v[i]))) for i in range(len(v)))

    def to_json(self):
        return {"circle": self.circle.to_json(), "tangency": list(self.tangency),
                "vertices": [list(p) for p in self.vertices],
                "beta_sector": {"start": self.beta_start, "width": self.beta_width}}


def envelope_polygon(circle: Circle, points) -> Envelope:
    """Polygon of tangent lines at the given circle points (or angles, radians).

    Vertex i joins the tangents at tangency i and i+1; it is listed counter-clockwise
    starting after the widest gap, which is reported as the beta sector.
    """
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 2:
        arr = np.arctan2(arr[:, 1] - circle.center[1], arr[:, 0] - circle.center[0])
    t = np.sort(np.mod(arr, 2 * math.pi))
    keep = np.append(True, np.diff(t) > 1e-12)
    t = t[keep]
    if len(t) > 1 and (t[0] + 2 * math.pi - t[-1]) <= 1e-12:
        t = t[:-1]
    if len(t) < 3:
        raise errors.AdjacentGapTooWide("need at least 3 distinct tangency points")
    gaps = np.diff(np.append(t, t[0] + 2 * math.pi))
    widest = int(np.argmax(gaps))
    if gaps[widest] >= math.pi - 1e-12:
        raise errors.AdjacentGapTooWide(
            f"gap of {gaps[widest]:.6f} rad between tangency points leaves the envelope open")
    order = np.roll(t, -(widest + 1))
    c = np.asarray(circle.center)
    verts = []
    for i in range(len(order)):
        a, b = order[i], order[(i + 1) % len(order)]
        gap = (b - a) % (2 * math.pi)
        mid = a + gap / 2
        verts.append(tuple(c + circle.radius / math.cos(gap / 2) * np.array([math.cos(mid), math.sin(mid)])))
    return Envelope(circle, tuple(float(x) for x in order), tuple(verts),
                    float(t[widest]), float(gaps[widest]))


# ---------------------------------------------------------------------------
# curved billiard -> rational polygon billiard


@dataclass
class Approximation:
    spec: BilliardSpec
    envelopes: List[Envelope]
    orbits: List[Orbit]
    clusters: List[List[Tuple[float, int]]]
    rationalization: Optional[DirichletResult] = None

    def to_json(self):
        out = {"schema": "v1", "spec": self.spec.to_json(),
               "envelopes": [e.to_json() for e in self.envelopes],
               "orbits": [o.to_json() for o in self.orbits],
               "clusters": [[{"angle": a, "count": n} for a, n in cl] for cl in self.clusters]}
        if self.rationalization is not None:
            out["rationalization"] = self.rationalization.to_json()
        return out


def _rational_pi(x: float) -> Optional[Fraction]:
    f = Fraction(x).limit_denominator(ANGLE_MAX_DEN)
    return f if abs(float(f) - x) <= HIT_TOL else None


def _tangency_directions_rational(bil: CurvedBilliard, tangency: Sequence[float]) -> bool:
    outer = np.asarray(bil.outer)
    e = outer[1] - outer[0]
    ref = math.atan2(e[1], e[0])
    return all(_rational_pi(((t - ref) / math.pi) % 2.0) is not None for t in tangency)


def _is_dodecagon(tangency: Sequence[float]) -> bool:
    steps = sorted(round((t % (2 * math.pi)) / (math.pi / 6)) % 12 for t in tangency)
    return steps == list(range(12)) and all(
        abs(t - round(t / (math.pi / 6)) * math.pi / 6) < HIT_TOL for t in tangency)


def circle_incidence(curved: CurvedBilliard, orbit: Orbit) -> float:
    """Largest angle between the ray and the circle normal over all circle bounces."""
    pts = np.asarray(orbit.points)
    k = len(orbit.surfaces)
    worst = 0.0
    for i, ident in enumerate(orbit.surfaces):
        if not ident.startswith("c"):
            continue
        c = np.asarray(curved.circles[int(ident[1:])].center)
        p = pts[i + 1]
        out = pts[i + 2 if i + 2 <= k else 1] - p
        n = (p - c) / np.linalg.norm(p - c)
        worst = max(worst, abs(math.atan2(_cross(n, out), n @ out)))
    return worst


def is_radial(curved: CurvedBilliard, orbit: Orbit) -> bool:
    """One circle bounce per period, at normal incidence."""
    hits = [s for s in orbit.surfaces if s.startswith("c")]
    return len(hits) == 1 and circle_incidence(curved, orbit) < 1e-6


def approximate(curved: CurvedBilliard, K: int = 21, max_bounces: int = 8,
                max_length: float = 10.0, cluster_tol: float = CLUSTER_TOL, N: int = 360,
                seed: int = 0, orbits: Optional[List[Orbit]] = None,
                selection: str = "radial") -> Approximation:
    """Replace each circle by the envelope of its reflection points in the K
    shortest circle-touching periodic orbits.

    selection="radial" keeps orbits with a single, head-on circle bounce: they run
    along a circle normal to a wall met at right angles and retrace themselves.
    selection="all" keeps every circle-touching orbit.
    """
    if selection not in ("radial", "all"):
        raise errors.BadParameters("selection must be 'radial' or 'all'")
    from .families import numeric_billiard, sinai_polygon
    if K < 3:
        raise errors.BadParameters("the orbit budget K must be at least 3")
    if not curved.circles:
        raise errors.BadParameters("nothing to approximate: the billiard has no circles")
    if orbits is None:
        if selection == "radial":
            orbits = radial_orbits(curved, max(max_bounces, RADIAL_BOUNCES))
        else:
            orbits = find_periodic_orbits(curved, max_bounces, max_length, seed)
    circle_ids = [f"c{i}" for i in range(len(curved.circles))]
    chosen = [o for o in orbits if any(o.touches(c) for c in circle_ids)
              and (selection == "all" or is_radial(curved, o))][:K]
    envelopes, clusters = [], []
    for ident, circle in zip(circle_ids, curved.circles):
        angles = [circle.angle_of(p) for o in chosen for p in o.circle_points(ident)]
        cl = cluster_angles(angles, cluster_tol)
        clusters.append(cl)
        envelopes.append(envelope_polygon(circle, [a for a, _ in cl]))

    if (curved.family == "sinai" and len(envelopes) == 1
            and _is_dodecagon(envelopes[0].tangency)):
        return Approximation(sinai_polygon(**dict(curved.params)), envelopes, chosen, clusters)

    rationalization = None
    if not all(_tangency_directions_rational(curved, e.tangency) for e in envelopes):
        outer = np.asarray(curved.outer)
        e0 = outer[1] - outer[0]
        ref = math.atan2(e0[1], e0[0])
        values = [((t - ref) / math.pi) % 2.0 for e in envelopes for t in e.tangency]
        rationalization = dirichlet_approx(values, N)
        it = iter(rationalization.ratios())
        snapped = []
        for e in envelopes:
            angles = [ref + math.pi * float(next(it)) for _ in e.tangency]
            if len({round(a % (2 * math.pi), 12) for a in angles}) < len(angles):
                raise errors.AdjacentGapTooWide(
                    f"rationalization with N={N} (Z={rationalization.Z}) merges tangency directions")
            snapped.append(envelope_polygon(e.circle, angles))
        envelopes = snapped
    holes = [list(curved.holes[i]) for i in range(len(curved.holes))]
    holes += [list(e.vertices) for e in envelopes]
    spec = numeric_billiard(list(curved.outer), holes)
    return Approximation(spec, envelopes, chosen, clusters, rationalization)


def approximate_billiard(curved: CurvedBilliard, K: int = 21, **kwargs) -> BilliardSpec:
    return approximate(curved, K, **kwargs).spec
