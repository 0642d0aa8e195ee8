"""Built-in billiard families with symbolic coordinates."""
from __future__ import annotations

import math
from fractions import Fraction
from typing import List, Sequence, Tuple

import numpy as np

from . import errors
from .exact import QF, cos_pi12, sin_pi12
from .geometry import BasisElement, BilliardSpec, SymbolicCoord, build_billiard

FAMILIES = ("rect-holes", "rect-rotated-holes", "sinai")
SINAI_DEFAULT = {"w": 0.55, "h": 0.5, "r": 0.2}


def _rat(x) -> Fraction:
    return Fraction(str(x)) if isinstance(x, float) else Fraction(x)


def _sym(idx: int, coef=1, rational=0) -> SymbolicCoord:
    return SymbolicCoord.of(rational, (coef, idx))


def rectangle(a=1, b=1) -> BilliardSpec:
    a, b = _rat(a), _rat(b)
    R = SymbolicCoord.of
    return build_billiard([], [[(R(0), R(0)), (R(a), R(0)), (R(a), R(b)), (R(0), R(b))]])


def rect_holes(a=1, b=1, holes: Sequence[Tuple[float, float, float, float]] = ()) -> BilliardSpec:
    """Rectangle [0,a]x[0,b] with axis-parallel holes.

    Each hole is (w, h, aw, bh): lower-left corner (w, h), upper-right (aw, bh).
    Every hole edge coordinate, divided by a (x) or b (y), is one basis element.
    """
    a, b = _rat(a), _rat(b)
    if a <= 0 or b <= 0:
        raise errors.BadParameters("rectangle sides must be positive")
    basis: List[BasisElement] = []
    polys = [[(SymbolicCoord.of(0), SymbolicCoord.of(0)), (SymbolicCoord.of(a), SymbolicCoord.of(0)),
              (SymbolicCoord.of(a), SymbolicCoord.of(b)), (SymbolicCoord.of(0), SymbolicCoord.of(b))]]
    for l, hole in enumerate(holes, start=1):
        w, h, aw, bh = (float(v) for v in hole)
        if not (0 < w < aw < float(a) and 0 < h < bh < float(b)):
            raise errors.BadParameters(f"hole {l} must satisfy 0 < w < aw < a and 0 < h < bh < b")
        i = len(basis)
        basis += [BasisElement(f"w{l}/a", w / float(a)), BasisElement(f"aw{l}/a", aw / float(a)),
                  BasisElement(f"h{l}/b", h / float(b)), BasisElement(f"bh{l}/b", bh / float(b))]
        x0, x1, y0, y1 = _sym(i, a), _sym(i + 1, a), _sym(i + 2, b), _sym(i + 3, b)
        polys.append([(x0, y0), (x1, y0), (x1, y1), (x0, y1)])
    return build_billiard(basis, polys)


def default_rect_holes(k: int) -> List[Tuple[float, float, float, float]]:
    """k-1 small holes on a diagonal strip with irrational-looking coordinates."""
    out = []
    for l in range(1, k):
        base = (l - 0.5) / (k - 1)
        w = base * 0.8 + 0.1 - 0.05 * math.sqrt(2) / (k - 1)
        h = base * 0.8 + 0.1 - 0.04 * math.sqrt(3) / (k - 1)
        out.append((w, h, w + 0.12 * math.sqrt(5) / (k - 1), h + 0.1 * math.sqrt(7) / (k - 1)))
    return out


def rect_rotated_holes(a=1, b=1, holes: Sequence[Tuple[float, float, float, float]] = ()) -> BilliardSpec:
    """Rectangle with holes rotated by pi/4.

    Each hole is (u, v, s, t): centre (u, v); corners at centre +- s(1,1) +- t(-1,1).
    """
    a, b = _rat(a), _rat(b)
    basis: List[BasisElement] = []
    R = SymbolicCoord.of
    polys = [[(R(0), R(0)), (R(a), R(0)), (R(a), R(b)), (R(0), R(b))]]
    for l, hole in enumerate(holes, start=1):
        u, v, s, t = (float(x) for x in hole)
        if s <= 0 or t <= 0:
            raise errors.BadParameters(f"hole {l} needs positive half-diagonals")
        i = len(basis)
        basis += [BasisElement(f"u{l}", u), BasisElement(f"v{l}", v),
                  BasisElement(f"s{l}", s), BasisElement(f"t{l}", t)]
        corners = []
        for es, et in ((-1, -1), (1, -1), (1, 1), (-1, 1)):
            # centre + es*s*(1,1) + et*t*(-1,1)
            x = SymbolicCoord.of(0, (1, i), (es, i + 2), (-et, i + 3))
            y = SymbolicCoord.of(0, (1, i + 1), (es, i + 2), (et, i + 3))
            corners.append((x, y))
        polys.append(corners)
    return build_billiard(basis, polys)


def default_rotated_holes(k: int) -> List[Tuple[float, float, float, float]]:
    out = []
    for l in range(1, k):
        c = (l - 0.5) / (k - 1)
        out.append((0.1 + 0.8 * c + 0.01 * math.sqrt(2), 0.1 + 0.8 * c + 0.01 * math.sqrt(3),
                    0.06 * math.sqrt(2) / (k - 1), 0.05 * math.sqrt(3) / (k - 1)))
    return out


# ---------------------------------------------------------------------------
# Sinai-like billiard

SQRT3 = math.sqrt(3.0)
TRIANGLE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, SQRT3]])


def sinai_basis(w: float, h: float, r: float) -> List[BasisElement]:
    return [
        BasisElement("sqrt3", SQRT3, 3, "1"),
        BasisElement("w", w), BasisElement("sqrt3*w", SQRT3 * w, 3, "w"),
        BasisElement("h", h), BasisElement("sqrt3*h", SQRT3 * h, 3, "h"),
        BasisElement("r", r), BasisElement("sqrt3*r", SQRT3 * r, 3, "r"),
    ]


def check_sinai(w: float, h: float, r: float, clearance: float = 1.0):
    """Raise BadParameters unless the disc (radius r*clearance) sits inside the triangle."""
    rr = r * clearance
    if r <= 0:
        raise errors.BadParameters("radius must be positive")
    if not (h - rr > 0 and 1 - w - rr > 0 and (SQRT3 * w - h) / 2 - rr > 0):
        raise errors.BadParameters("circle does not fit inside the triangle")


def dodecagon_offsets() -> List[Tuple[QF, QF]]:
    """Exact vertex offsets (in units of r) of the regular dodecagon circumscribing
    the unit circle with tangency points at angles k*pi/6."""
    out = []
    denom = QF(1) + cos_pi12(2)
    inv = denom.inverse()
    for k in range(12):
        cx = cos_pi12(2 * k) + cos_pi12(2 * k + 2)
        cy = sin_pi12(2 * k) + sin_pi12(2 * k + 2)
        out.append((cx * inv, cy * inv))
    return out


def sinai_polygon(w: float = SINAI_DEFAULT["w"], h: float = SINAI_DEFAULT["h"],
                  r: float = SINAI_DEFAULT["r"]) -> BilliardSpec:
    """Right triangle (0,0),(1,0),(1,sqrt3) with a regular dodecagon hole around
    the circle of centre (w, h), radius r."""
    check_sinai(w, h, r, clearance=1 / math.cos(math.pi / 12))
    basis = sinai_basis(w, h, r)
    R = SymbolicCoord.of
    outer = [(R(0), R(0)), (R(1), R(0)), (R(1), R(0, (1, 0)))]
    hole = []
    for ox, oy in dodecagon_offsets():
        def coord(center_idx, off: QF):
            terms = [(1, center_idx)]
            for surd, c in off.items():
                if surd == 1:
                    terms.append((c, 5))
                elif surd == 3:
                    terms.append((c, 6))
                else:
                    raise AssertionError("dodecagon offsets live in Q(sqrt3)")
            return R(0, *terms)
        hole.append((coord(1, ox), coord(3, oy)))
    return build_billiard(basis, [outer, hole])


def numeric_billiard(outer, holes=()) -> BilliardSpec:
    """Spec from float coordinates: each distinct coordinate becomes its own basis element."""
    basis: List[BasisElement] = []
    index = {}

    def coord(v: float) -> SymbolicCoord:
        v = float(v)
        if float(Fraction(v).limit_denominator(1000)) == v:
            return SymbolicCoord.of(Fraction(v).limit_denominator(1000))
        if v not in index:
            index[v] = len(basis)
            basis.append(BasisElement(f"c{len(basis)}", v))
        return SymbolicCoord.of(0, (1, index[v]))

    polys = [[(coord(x), coord(y)) for x, y in poly] for poly in [outer, *holes]]
    return build_billiard(basis, polys)


def builtin_family(name: str, **params):
    """Family constructor by name; `sinai` returns the curved billiard."""
    if name == "rect-holes":
        k = int(params.pop("k", 2))
        holes = params.pop("holes", None) or default_rect_holes(k)
        return rect_holes(params.pop("a", 1), params.pop("b", 1), holes)
    if name == "rect-rotated-holes":
        k = int(params.pop("k", 2))
        holes = params.pop("holes", None) or default_rotated_holes(k)
        return rect_rotated_holes(params.pop("a", 1), params.pop("b", 1), holes)
    if name == "sinai":
        from .dynamics import sinai_curved
        return sinai_curved(**{**SINAI_DEFAULT, **params})
    if name == "sinai-polygon":
        return sinai_polygon(**{**SINAI_DEFAULT, **params})
    raise errors.UnknownFamily(f"unknown family {name!r}; choose from {FAMILIES}")
