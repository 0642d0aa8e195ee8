"""Plane primitives, rational angles, symbolic coordinates and billiard specs."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Dict, List, Sequence, Tuple

import numpy as np

from . import errors
from .exact import QF, ExactVec, LinForm, rotation_steps

GEOM_TOL = 1e-9
ANGLE_MAX_DEN = 720


def _lcm(a: int, b: int) -> int:
    return a * b // math.gcd(a, b)


def lcm_all(values) -> int:
    return reduce(_lcm, values, 1)


@dataclass(frozen=True)
class RationalAngle:
    """Angle p/q in units of pi."""

    p: int
    q: int

    def __post_init__(self):
        if self.q <= 0 or math.gcd(self.p, self.q) != 1:
            raise ValueError(f"angle {self.p}/{self.q} is not in lowest terms")
        if not 0 < self.p < 2 * self.q:
            raise ValueError(f"angle {self.p}/{self.q} outside (0, 2)")

    @classmethod
    def from_fraction(cls, f: Fraction) -> "RationalAngle":
        f = Fraction(f)
        return cls(f.numerator, f.denominator)

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.p, self.q)

    @property
    def radians(self) -> float:
        return math.pi * self.p / self.q

    def __str__(self):
        return f"{self.p}/{self.q}"


@dataclass(frozen=True)
class BasisElement:
    """Named irrational. `surd` marks values of the form sqrt(surd) * symbol."""

    name: str
    value: float
    surd: int = 1
    symbol: str = ""

    def __post_init__(self):
        if self.surd not in (1, 2, 3, 6):
            raise ValueError("surd factor must be one of 1, 2, 3, 6")
        if not self.symbol:
            object.__setattr__(self, "symbol", self.name)
        if self.symbol == "1" and (self.surd == 1 or abs(self.atom_value - 1) > 1e-12):
            raise ValueError('symbol "1" is reserved for pure surds sqrt(d)')

    @property
    def atom_value(self) -> float:
        return self.value / math.sqrt(self.surd)


@dataclass(frozen=True)
class SymbolicCoord:
    """rational + sum(coef * basis[index])."""

    rational: Fraction = Fraction(0)
    terms: Tuple[Tuple[Fraction, int], ...] = ()

    @classmethod
    def of(cls, rational=0, *terms) -> "SymbolicCoord":
        return cls(Fraction(rational), tuple((Fraction(c), int(i)) for c, i in terms))

    def evaluate(self, basis_values: Sequence[float]) -> float:
        return evaluate_symbolic(self, basis_values)

    def linform(self, basis: Sequence[BasisElement]) -> LinForm:
        out = LinForm.const(self.rational)
        for coef, idx in self.terms:
            el = basis[idx]
            out = out + LinForm({el.symbol: QF.surd(el.surd, coef)})
        return out

    def to_json(self):
        return {
            "rat": [self.rational.numerator, self.rational.denominator],
            "terms": [[[c.numerator, c.denominator], i] for c, i in self.terms],
        }

    @classmethod
    def from_json(cls, obj) -> "SymbolicCoord":
        p, q = obj.get("rat", [0, 1])
        terms = tuple((Fraction(c[0], c[1]), int(i)) for c, i in obj.get("terms", []))
        return cls(Fraction(p, q), terms)


def evaluate_symbolic(coord: SymbolicCoord, basis_values: Sequence[float]) -> float:
    total = float(coord.rational)
    for coef, idx in coord.terms:
        if not 0 <= idx < len(basis_values):
            raise errors.UnknownBasisIndex(f"basis index {idx} out of range")
        total += float(coef) * basis_values[idx]
    return total


def reflect_point(point, a, b) -> np.ndarray:
    """Mirror `point` in the line through a and b."""
    p, a, b = (np.asarray(v, dtype=float) for v in (point, a, b))
    d = b - a
    dd = float(d @ d)
    if dd < GEOM_TOL ** 2:
        raise errors.DegenerateLine("line endpoints coincide")
    foot = a + d * ((p - a) @ d) / dd
    return 2 * foot - p


def rotate_point(point, angle: float, center=(0.0, 0.0)) -> np.ndarray:
    p, c = np.asarray(point, dtype=float), np.asarray(center, dtype=float)
    cs, sn = math.cos(angle), math.sin(angle)
    x, y = p - c
    return c + np.array([x * cs - y * sn, x * sn + y * cs])


def rotation_matrix(angle: float) -> np.ndarray:
    cs, sn = math.cos(angle), math.sin(angle)
    return np.array([[cs, -sn], [sn, cs]])


def mirror_matrix(theta: float) -> np.ndarray:
    """Linear reflection in the line through the origin at angle theta."""
    c2, s2 = math.cos(2 * theta), math.sin(2 * theta)
    return np.array([[c2, s2], [s2, -c2]])


@dataclass(frozen=True)
class Isometry:
    """x -> L x + t with L = Rot(2*pi*rot/C) * Mirror(theta0)**parity."""

    rot: int
    parity: int
    C: int
    theta0: float = 0.0
    translation: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "rot", self.rot % self.C)
        object.__setattr__(self, "parity", self.parity % 2)

    @property
    def angle(self) -> float:
        return 2 * math.pi * self.rot / self.C

    @property
    def linear(self) -> np.ndarray:
        m = rotation_matrix(self.angle)
        return m @ mirror_matrix(self.theta0) if self.parity else m

    @property
    def sign(self) -> int:
        return -1 if self.parity else 1

    def compose_linear(self, other: "Isometry") -> Tuple[int, int]:
        """(rot, parity) of self.L @ other.L."""
        step = -other.rot if self.parity else other.rot
        return (self.rot + step) % self.C, (self.parity + other.parity) % 2

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return pts @ self.linear.T + np.asarray(self.translation)


def exact_linear(rot: int, parity: int, C: int, theta0_steps: int, v: ExactVec) -> ExactVec:
    """Apply the linear part of an Isometry to an exact vector."""
    if 24 % C:
        raise errors.MixedBasis(f"exact arithmetic needs C | 24, got C={C}")
    if parity:
        v = v.conj().rotate(2 * theta0_steps)
    return v.rotate(24 * rot // C)


# ---------------------------------------------------------------------------
# billiard spec


def _signed_area(pts: np.ndarray) -> float:
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _segments_cross(p1, p2, q1, q2, tol=GEOM_TOL) -> bool:
    """True if closed segments p1p2 and q1q2 touch or cross."""
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    def on_seg(a, b, c):
        return (min(a[0], b[0]) - tol <= c[0] <= max(a[0], b[0]) + tol
                and min(a[1], b[1]) - tol <= c[1] <= max(a[1], b[1]) + tol)

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    if ((d1 > tol and d2 < -tol) or (d1 < -tol and d2 > tol)) and \
       ((d3 > tol and d4 < -tol) or (d3 < -tol and d4 > tol)):
        return True
    return any(abs(d) <= tol and on_seg(a, b, c) for d, a, b, c in (
        (d1, q1, q2, p1), (d2, q1, q2, p2), (d3, p1, p2, q1), (d4, p1, p2, q2)))


def point_in_polygon(pt, poly: np.ndarray) -> bool:
    x, y = pt
    inside = False
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            xc = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if xc > x:
                inside = not inside
    return inside


def distance_to_segment(pt, a, b) -> float:
    pt, a, b = (np.asarray(v, dtype=float) for v in (pt, a, b))
    d = b - a
    t = np.clip((pt - a) @ d / (d @ d), 0.0, 1.0)
    return float(np.linalg.norm(pt - a - t * d))


def _check_simple(pts: np.ndarray, label: str):
    n = len(pts)
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if _segments_cross(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n]):
                raise errors.NonSimplePolygon(f"{label}: sides {i} and {j} intersect")
    for i in range(n):
        if np.linalg.norm(pts[(i + 1) % n] - pts[i]) < GEOM_TOL:
            raise errors.NonSimplePolygon(f"{label}: zero-length side {i}")


def _rationalize_pi(x: float, label: str) -> Fraction:
    f = Fraction(x).limit_denominator(ANGLE_MAX_DEN)
    if abs(float(f) - x) > GEOM_TOL:
        raise errors.IrrationalAngle(f"{label}: {x}*pi is not rational (rationalize first)")
    return f


Vertex = Tuple[SymbolicCoord, SymbolicCoord]


@dataclass(frozen=True)
class BilliardSpec:
    """Validated rational multi-connected polygon billiard.

    Polygon 0 is the outer boundary (stored counter-clockwise), the rest are
    holes (stored clockwise), so the domain is always left of each side.
    Side j of polygon l runs from vertex j to vertex j+1.
    """

    basis: Tuple[BasisElement, ...]
    polygons: Tuple[Tuple[Vertex, ...], ...]
    points: Tuple[np.ndarray, ...] = field(repr=False)
    angles: Tuple[Tuple[RationalAngle, ...], ...]
    side_steps: Tuple[Tuple[int, ...], ...]
    C: int
    theta0: float

    # derived counts ------------------------------------------------------
    @property
    def k(self) -> int:
        return len(self.polygons)

    @property
    def n_sides(self) -> Tuple[int, ...]:
        return tuple(len(p) for p in self.polygons)

    @property
    def total_sides(self) -> int:
        return sum(self.n_sides)

    @property
    def polygon_lcms(self) -> Tuple[int, ...]:
        return tuple(lcm_all(a.q for a in poly) for poly in self.angles)

    @property
    def angle_lcm(self) -> int:
        return lcm_all(self.polygon_lcms)

    @property
    def angle_sum(self) -> Fraction:
        return sum((a.fraction for poly in self.angles for a in poly), Fraction(0))

    @property
    def closure_constant(self) -> int:
        return self.total_sides + 2 * self.k - 4

    @property
    def basis_values(self) -> List[float]:
        return [b.value for b in self.basis]

    @property
    def atom_values(self) -> Dict[str, float]:
        return {b.symbol: b.atom_value for b in self.basis}

    @property
    def theta0_steps(self) -> int:
        return rotation_steps(_rationalize_pi(self.theta0 / math.pi, "reference direction"))

    def sides(self):
        """Yield (l, j) for every side."""
        for l, poly in enumerate(self.polygons):
            for j in range(len(poly)):
                yield l, j

    def side_points(self, l: int, j: int) -> Tuple[np.ndarray, np.ndarray]:
        pts = self.points[l]
        return pts[j], pts[(j + 1) % len(pts)]

    def exact_vertex(self, l: int, j: int) -> ExactVec:
        x, y = self.polygons[l][j % len(self.polygons[l])]
        return ExactVec(x.linform(self.basis), y.linform(self.basis))

    def contains(self, pt, tol: float = 0.0) -> bool:
        """Point in the closed domain (boundary within tol counts)."""
        if self.boundary_distance(pt) <= tol:
            return True
        if not point_in_polygon(pt, self.points[0]):
            return False
        return not any(point_in_polygon(pt, h) for h in self.points[1:])

    def boundary_distance(self, pt) -> float:
        return min(distance_to_segment(pt, *self.side_points(l, j)) for l, j in self.sides())

    def to_json(self):
        def poly_json(poly):
            return [[x.to_json(), y.to_json()] for x, y in poly]
        basis = []
        for b in self.basis:
            item = {"name": b.name, "value": b.value}
            if b.surd != 1:
                item["surd"] = b.surd
            if b.symbol != b.name:
                item["symbol"] = b.symbol
            basis.append(item)
        return {"basis": basis, "outer": poly_json(self.polygons[0]),
                "holes": [poly_json(h) for h in self.polygons[1:]]}


def _orient(poly: List[Vertex], pts: np.ndarray, ccw: bool):
    area = _signed_area(pts)
    if (area > 0) != ccw:
        order = [0] + list(range(len(poly) - 1, 0, -1))
        return [poly[i] for i in order], pts[order]
    return poly, pts


def make_billiard(raw) -> BilliardSpec:
    """Validate a billiard given as JSON-like dict (see BilliardSpec.to_json)."""
    try:
        basis = tuple(BasisElement(b["name"], float(b["value"]), int(b.get("surd", 1)),
                                   b.get("symbol", "")) for b in raw.get("basis", []))
        raw_polys = [raw["outer"]] + list(raw.get("holes", []))
        polys = [[(SymbolicCoord.from_json(x), SymbolicCoord.from_json(y)) for x, y in p]
                 for p in raw_polys]
    except (AttributeError, KeyError, TypeError, ValueError) as exc:
        raise errors.InvalidSpec(f"malformed billiard spec: {exc}") from exc
    return build_billiard(basis, polys)


def build_billiard(basis: Sequence[BasisElement], polys: Sequence[Sequence[Vertex]]) -> BilliardSpec:
    basis = tuple(basis)
    atoms: Dict[str, float] = {}
    for b in basis:
        prev = atoms.setdefault(b.symbol, b.atom_value)
        if abs(prev - b.atom_value) > 1e-12 * max(1.0, abs(prev)):
            raise errors.InvalidSpec(f"inconsistent values for symbol {b.symbol!r}")
    values = [b.value for b in basis]

    polygons, points = [], []
    for l, poly in enumerate(polys):
        if len(poly) < 3:
            raise errors.NonSimplePolygon(f"polygon {l} has fewer than 3 vertices")
        pts = np.array([[x.evaluate(values), y.evaluate(values)] for x, y in poly])
        poly, pts = _orient(list(poly), pts, ccw=(l == 0))
        _check_simple(pts, f"polygon {l}")
        polygons.append(tuple(poly))
        points.append(pts)

    outer = points[0]
    for l, pts in enumerate(points[1:], start=1):
        for p in pts:
            if not point_in_polygon(p, outer) or min(
                    distance_to_segment(p, outer[i], outer[(i + 1) % len(outer)])
                    for i in range(len(outer))) <= GEOM_TOL:
                raise errors.HoleOutsideOuter(f"hole {l} is not strictly inside the outer polygon")
        for m in range(1, l):
            other = points[m]
            if any(point_in_polygon(p, other) for p in pts) or any(
                    point_in_polygon(p, pts) for p in other):
                raise errors.HoleOutsideOuter(f"holes {m} and {l} overlap")
            for i in range(len(pts)):
                for j in range(len(other)):
                    if _segments_cross(pts[i], pts[(i + 1) % len(pts)], other[j],
                                       other[(j + 1) % len(other)]):
                        raise errors.HoleOutsideOuter(f"holes {m} and {l} intersect")
        for i in range(len(pts)):
            for j in range(len(outer)):
                if _segments_cross(pts[i], pts[(i + 1) % len(pts)], outer[j],
                                   outer[(j + 1) % len(outer)]):
                    raise errors.HoleOutsideOuter(f"hole {l} crosses the outer polygon")

    angles, directions = [], []
    for l, pts in enumerate(points):
        n = len(pts)
        poly_angles, poly_dirs = [], []
        for j in range(n):
            d_in = pts[j] - pts[j - 1]
            d_out = pts[(j + 1) % n] - pts[j]
            turn = math.atan2(d_in[0] * d_out[1] - d_in[1] * d_out[0], d_in @ d_out)
            frac = _rationalize_pi((math.pi - turn) / math.pi, f"vertex ({l},{j})")
            if frac <= 0 or frac >= 2:
                raise errors.NonSimplePolygon(f"vertex ({l},{j}) is degenerate")
            poly_angles.append(RationalAngle.from_fraction(frac))
            poly_dirs.append(math.atan2(d_out[1], d_out[0]))
        angles.append(tuple(poly_angles))
        directions.append(poly_dirs)

    total = sum((a.fraction for poly in angles for a in poly), Fraction(0))
    expected = sum(len(p) for p in polygons) + 2 * len(polygons) - 4
    if total != expected:
        raise errors.AngleSumViolation(f"angle sum {total} != closure constant {expected}")

    theta0 = directions[0][0]
    offsets = [[_rationalize_pi(((th - theta0) / math.pi) % 1.0, "side direction") % 1
                for th in poly] for poly in directions]
    C = lcm_all([f.denominator for poly in offsets for f in poly] +
                [a.q for poly in angles for a in poly])
    side_steps = tuple(tuple(int(f * C) % C for f in poly) for poly in offsets)
    return BilliardSpec(basis, tuple(polygons), tuple(points), tuple(angles), side_steps, C, theta0)


def coord_from_value(value, basis_index: int | None = None) -> SymbolicCoord:
    """Rational literal, or a single basis term when an index is given."""
    if basis_index is None:
        return SymbolicCoord.of(Fraction(value))
    return SymbolicCoord.of(0, (1, basis_index))
