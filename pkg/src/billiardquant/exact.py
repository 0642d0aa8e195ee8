"""Exact arithmetic in Q(sqrt2, sqrt3) and linear forms over named symbols.

Rotations by multiples of pi/12 have matrix entries in this field, so every
vertex of an unfolding built from such rotations stays an exact linear
combination of the billiard's formal symbols.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Dict, Iterable, Mapping, Tuple

import numpy as np

SURDS = (1, 2, 3, 6)
_SQRT = {1: 1.0, 2: 2.0 ** 0.5, 3: 3.0 ** 0.5, 6: 6.0 ** 0.5}
_IDX = {d: i for i, d in enumerate(SURDS)}

# sqrt(a) * sqrt(b) = factor * sqrt(d)
_PRODUCT = {}
for _a in SURDS:
    for _b in SURDS:
        _sq = _a * _b
        _d = 1
        for _cand in (6, 3, 2):
            if _sq % _cand == 0 and ((_sq // _cand) ** 0.5).is_integer():
                _d = _cand
                break
        _PRODUCT[(_a, _b)] = (int(round((_sq // _d) ** 0.5)), _d)


class QF:
    """Element a + b*sqrt2 + c*sqrt3 + d*sqrt6 with rational coefficients."""

    __slots__ = ("c",)

    def __init__(self, coeffs=(0, 0, 0, 0)):
        if isinstance(coeffs, (int, Fraction)):
            coeffs = (coeffs, 0, 0, 0)
        self.c = tuple(Fraction(x) for x in coeffs)

    @classmethod
    def surd(cls, d: int, coef=1) -> "QF":
        out = [0, 0, 0, 0]
        out[_IDX[d]] = Fraction(coef)
        return cls(out)

    def __add__(self, other):
        other = _lift(other)
        return QF(tuple(a + b for a, b in zip(self.c, other.c)))

    __radd__ = __add__

    def __neg__(self):
        return QF(tuple(-a for a in self.c))

    def __sub__(self, other):
        return self + (-_lift(other))

    def __rsub__(self, other):
        return _lift(other) - self

    def __mul__(self, other):
        other = _lift(other)
        out = [Fraction(0)] * 4
        for i, a in enumerate(self.c):
            if not a:
                continue
            for j, b in enumerate(other.c):
                if not b:
                    continue
                factor, d = _PRODUCT[(SURDS[i], SURDS[j])]
                out[_IDX[d]] += a * b * factor
        return QF(out)

    __rmul__ = __mul__

    def _conj(self, flip):
        return QF(tuple(-x if s in flip else x for x, s in zip(self.c, SURDS)))

    def inverse(self) -> "QF":
        if self.is_zero():
            raise ZeroDivisionError("inverse of zero field element")
        y = self * self._conj((2, 6))       # fixed by sqrt2 -> -sqrt2
        norm = y * y._conj((3, 6))          # rational
        return self._conj((2, 6)) * y._conj((3, 6)) * QF(1 / norm.c[0])

    def __truediv__(self, other):
        return self * _lift(other).inverse()

    def is_zero(self) -> bool:
        return not any(self.c)

    def is_rational(self) -> bool:
        return not any(self.c[1:])

    def __eq__(self, other):
        try:
            return self.c == _lift(other).c
        except TypeError:
            return NotImplemented

    def __hash__(self):
        return hash(self.c)

    def __float__(self):
        return float(sum(float(a) * _SQRT[d] for a, d in zip(self.c, SURDS)))

    def items(self):
        """(surd, rational coefficient) pairs with nonzero coefficient."""
        return [(d, a) for a, d in zip(self.c, SURDS) if a]

    def __repr__(self):
        parts = [f"{a}" if d == 1 else f"{a}*sqrt{d}" for d, a in self.items()]
        return "QF(" + (" + ".join(parts) or "0") + ")"


def _lift(x) -> QF:
    if isinstance(x, QF):
        return x
    if isinstance(x, (int, Fraction)):
        return QF(x)
    raise TypeError(f"cannot lift {type(x).__name__} into QF")


ZERO = QF()
ONE = QF(1)

# cos(k*pi/12) for k = 0..6
_COS_TABLE = [
    QF(1),
    QF((0, Fraction(1, 4), 0, Fraction(1, 4))),
    QF((0, 0, Fraction(1, 2), 0)),
    QF((0, Fraction(1, 2), 0, 0)),
    QF(Fraction(1, 2)),
    QF((0, Fraction(-1, 4), 0, Fraction(1, 4))),
    QF(0),
]


def cos_pi12(k: int) -> QF:
    """Exact cos(k*pi/12)."""
    k %= 24
    if k > 12:
        k = 24 - k
    if k <= 6:
        return _COS_TABLE[k]
    return -_COS_TABLE[12 - k]


def sin_pi12(k: int) -> QF:
    return cos_pi12(6 - k)


def rotation_steps(turn: Fraction) -> int:
    """Angle given in units of pi, converted to a whole number of pi/12 steps."""
    steps = Fraction(turn) * 12
    if steps.denominator != 1:
        raise ValueError(f"angle {turn}*pi is not a multiple of pi/12")
    return int(steps)


class LinForm:
    """Sum over symbols of field coefficients; the symbol "1" is the constant."""

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[str, QF] | None = None):
        self.terms: Dict[str, QF] = {}
        for k, v in (terms or {}).items():
            v = _lift(v)
            if not v.is_zero():
                self.terms[k] = v

    @classmethod
    def const(cls, value) -> "LinForm":
        return cls({"1": _lift(value)})

    def __add__(self, other: "LinForm") -> "LinForm":
        out = dict(self.terms)
        for k, v in other.terms.items():
            out[k] = out[k] + v if k in out else v
        return LinForm(out)

    def __neg__(self):
        return LinForm({k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def scale(self, factor) -> "LinForm":
        factor = _lift(factor)
        return LinForm({k: v * factor for k, v in self.terms.items()})

    def is_zero(self) -> bool:
        return not self.terms

    def evaluate(self, values: Mapping[str, float]) -> float:
        total = 0.0
        for k, v in self.terms.items():
            total += float(v) * (1.0 if k == "1" else values[k])
        return total

    def symbols(self) -> Iterable[str]:
        return self.terms.keys()

    def __eq__(self, other):
        return isinstance(other, LinForm) and self.terms == other.terms

    def __repr__(self):
        return "LinForm(" + ", ".join(f"{k}: {v!r}" for k, v in sorted(self.terms.items())) + ")"


class ExactVec:
    """2-vector whose components are linear forms."""

    __slots__ = ("x", "y")

    def __init__(self, x: LinForm, y: LinForm):
        self.x, self.y = x, y

    @classmethod
    def zero(cls):
        return cls(LinForm(), LinForm())

    def __add__(self, other):
        return ExactVec(self.x + other.x, self.y + other.y)

    def __sub__(self, other):
        return ExactVec(self.x - other.x, self.y - other.y)

    def __neg__(self):
        return ExactVec(-self.x, -self.y)

    def rotate(self, steps: int) -> "ExactVec":
        """Rotate by steps*pi/12."""
        c, s = cos_pi12(steps), sin_pi12(steps)
        return ExactVec(self.x.scale(c) - self.y.scale(s), self.x.scale(s) + self.y.scale(c))

    def conj(self) -> "ExactVec":
        """Mirror in the x-axis."""
        return ExactVec(self.x, -self.y)

    def is_zero(self) -> bool:
        return self.x.is_zero() and self.y.is_zero()

    def evaluate(self, values: Mapping[str, float]) -> np.ndarray:
        return np.array([self.x.evaluate(values), self.y.evaluate(values)])

    def __repr__(self):
        return f"ExactVec({self.x!r}, {self.y!r})"


def solve_2x2(d1: ExactVec, d2: ExactVec, v: ExactVec) -> Tuple[LinForm, LinForm]:
    """Coefficients (c1, c2) with v = c1*d1 + c2*d2; d1, d2 must be constant."""
    for d in (d1, d2):
        for comp in (d.x, d.y):
            if set(comp.symbols()) - {"1"}:
                raise ValueError("basis periods must be free of symbols")
    a, b = d1.x.terms.get("1", ZERO), d2.x.terms.get("1", ZERO)
    c, d = d1.y.terms.get("1", ZERO), d2.y.terms.get("1", ZERO)
    det = a * d - b * c
    if det.is_zero():
        raise ValueError("basis periods are parallel")
    inv = det.inverse()
    c1 = v.x.scale(d * inv) - v.y.scale(b * inv)
    c2 = v.y.scale(a * inv) - v.x.scale(c * inv)
    return c1, c2
