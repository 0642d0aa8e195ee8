"""Dirichlet simultaneous approximation and the rationalisation steps built on it.

The reference search is an exhaustive scan over Z = 1..N. It is vectorised in
chunks, so desk-scale N (up to ~1e7) stays fast, and it always returns the
smallest admissible Z.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np

from . import errors
from .geometry import RationalAngle, lcm_all

MAX_N = 2 ** 40
SLACK = 1e-14
_CHUNK = 1 << 18


def round_half_away(x):
    """Nearest integer, halves rounded away from zero."""
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


@dataclass(frozen=True)
class DirichletResult:
    Z: int
    numerators: Tuple[int, ...]
    N: int
    p: int
    errors: Tuple[float, ...]

    @property
    def bound(self) -> float:
        """N^(-1/p), the admissibility threshold on |Z*alpha - Z_k|."""
        return self.N ** (-1.0 / self.p)

    @property
    def max_error(self) -> float:
        return max(self.errors) if self.errors else 0.0

    @property
    def certified_error(self) -> float:
        """Bound on |alpha_k - Z_k/Z|."""
        return self.bound / self.Z

    def ratios(self) -> List[Fraction]:
        return [Fraction(zk, self.Z) for zk in self.numerators]

    def to_json(self):
        return {"Z": self.Z, "numerators": list(self.numerators), "N": self.N, "p": self.p,
                "bound": self.bound, "errors": list(self.errors)}


def _validate(alphas, N) -> np.ndarray:
    a = np.asarray(list(alphas), dtype=float)
    if a.size == 0:
        raise errors.EmptyInput("need at least one real to approximate")
    if int(N) < 1:
        raise errors.BadParameters("N must be >= 1")
    if int(N) > MAX_N:
        raise errors.Overflow(f"N={N} beyond supported range {MAX_N}")
    if not np.all(np.isfinite(a)):
        raise errors.BadParameters("alphas must be finite")
    return a


def _scan(a: np.ndarray, N: int, first_only: bool):
    bound = N ** (-1.0 / a.size) + SLACK
    found = []
    for start in range(1, N + 1, _CHUNK):
        z = np.arange(start, min(N, start + _CHUNK - 1) + 1, dtype=float)
        prod = np.outer(z, a)
        err = np.abs(prod - round_half_away(prod)).max(axis=1)
        hits = np.nonzero(err <= bound)[0]
        if hits.size:
            if first_only:
                return [int(z[hits[0]])]
            found.extend(int(v) for v in z[hits])
    return found


def _result(a: np.ndarray, Z: int, N: int) -> DirichletResult:
    prod = Z * a
    nums = round_half_away(prod)
    return DirichletResult(Z, tuple(int(v) for v in nums), int(N), int(a.size),
                           tuple(float(v) for v in np.abs(prod - nums)))


def exact_rationals(alphas) -> List[Fraction] | None:
    """The inputs as Fractions when every one is an exact int or Fraction."""
    alphas = list(alphas)
    if alphas and all(isinstance(x, (int, Fraction)) and not isinstance(x, bool) for x in alphas):
        return [Fraction(x) for x in alphas]
    return None


def dirichlet_approx(alphas: Sequence[float], N: int) -> DirichletResult:
    """Smallest Z in 1..N with max_k |Z*alpha_k - Z_k| <= N^(-1/p).

    Exact rational input (ints/Fractions) whose common denominator C fits
    under N returns Z = C with zero error instead: the exact solution the
    Dirichlet bound is only approximating.
    """
    exact = exact_rationals(alphas)
    a = _validate(alphas, N)
    if exact is not None:
        C = lcm_all(f.denominator for f in exact)
        if C <= int(N):
            return DirichletResult(C, tuple(int(f * C) for f in exact), int(N), len(exact),
                                   tuple(0.0 for _ in exact))
    hits = _scan(a, int(N), first_only=True)
    if not hits:  # cannot happen by Dirichlet's theorem; guards float trouble
        raise errors.Overflow("no admissible Z found; inputs beyond float precision")
    return _result(a, hits[0], int(N))


def all_admissible_Z(alphas: Sequence[float], N: int) -> List[int]:
    a = _validate(alphas, N)
    return _scan(a, int(N), first_only=False)


# ---------------------------------------------------------------------------
# angles


@dataclass(frozen=True)
class RationalizedAngles:
    angles: Tuple[RationalAngle, ...]
    orientations: Tuple[Fraction, ...]
    dirichlet: DirichletResult | None
    distinguished: int
    errors: Tuple[float, ...]
    bound_each: float
    bound_distinguished: float

    @property
    def Z(self) -> int:
        return self.dirichlet.Z if self.dirichlet else 1


def rationalize_angles(angles: Sequence[float], N: int, polygon_sizes: Sequence[int] | None = None,
                       orientations: Sequence[float] = (), distinguished: int = -1
                       ) -> RationalizedAngles:
    """Replace angles (pi units) by rationals with a common denominator.

    All angles except `distinguished` become Z_k/Z from one Dirichlet run; the
    distinguished one is fixed by the closure identity sum = sum(n) + 2k - 4.
    Hole orientations (pi units, k-1 of them) join the same Dirichlet tuple,
    which is what makes the exponent 1/(sum(n)+k-2).
    """
    angles = [float(a) for a in angles]
    sizes = list(polygon_sizes) if polygon_sizes else [len(angles)]
    if sum(sizes) != len(angles):
        raise errors.BadParameters("polygon sizes do not match the number of angles")
    k = len(sizes)
    closure = sum(sizes) + 2 * k - 4
    if abs(sum(angles) - closure) > 1e-9:
        raise errors.ClosureViolation(f"angle sum {sum(angles)} != {closure}")
    if len(orientations) not in (0, k - 1):
        raise errors.BadParameters("give one orientation per hole or none")
    d = distinguished % len(angles)
    free = [a for i, a in enumerate(angles) if i != d] + [float(o) for o in orientations]
    n_tot = sum(sizes)
    exponent = n_tot + k - 2
    if not free:
        raise errors.EmptyInput("nothing to rationalize")
    res = dirichlet_approx(free, N)
    fracs = res.ratios()
    n_free = len(angles) - 1
    out: List[Fraction] = []
    it = iter(fracs[:n_free])
    for i in range(len(angles)):
        out.append(Fraction(0) if i == d else next(it))
    out[d] = closure - sum(out)
    try:
        rational = tuple(RationalAngle.from_fraction(f) for f in out)
    except ValueError as exc:
        raise errors.ClosureViolation(f"rationalized angles leave (0, 2): {exc}") from exc
    errs = tuple(abs(a - float(f)) for a, f in zip(angles, out))
    return RationalizedAngles(
        angles=rational,
        orientations=tuple(fracs[n_free:]),
        dirichlet=res,
        distinguished=d,
        errors=errs,
        bound_each=res.bound / res.Z,
        bound_distinguished=(n_tot - 1) / (res.Z * N ** (1.0 / exponent)),
    )


# ---------------------------------------------------------------------------
# period coefficients


@dataclass(frozen=True)
class RationalCombination:
    """rational + sum(coef[name] * value(name)) over named reals."""

    rational: Fraction = Fraction(0)
    coeffs: Tuple[Tuple[str, Fraction], ...] = ()

    @classmethod
    def build(cls, rational=0, coeffs: Mapping[str, Fraction] | None = None):
        items = tuple(sorted((k, Fraction(v)) for k, v in (coeffs or {}).items() if v))
        return cls(Fraction(rational), items)

    def as_dict(self) -> Dict[str, Fraction]:
        return dict(self.coeffs)

    def evaluate(self, values: Mapping[str, float]) -> float:
        return float(self.rational) + sum(float(c) * values[k] for k, c in self.coeffs)

    def denominators(self) -> List[int]:
        return [self.rational.denominator] + [c.denominator for _, c in self.coeffs]

    def names(self) -> List[str]:
        return [k for k, _ in self.coeffs]

    def to_json(self):
        return {"rat": [self.rational.numerator, self.rational.denominator],
                "terms": {k: [c.numerator, c.denominator] for k, c in self.coeffs}}

    def __str__(self):
        parts = [str(self.rational)] if self.rational or not self.coeffs else []
        parts += [f"{c}*{k}" for k, c in self.coeffs]
        return " + ".join(parts)


@dataclass(frozen=True)
class DirectionRationalization:
    """Dirichlet data for one direction: Z, the LCM C and the basis used."""

    names: Tuple[str, ...]
    C: int
    dirichlet: DirichletResult | None

    @property
    def Z(self) -> int:
        return self.dirichlet.Z if self.dirichlet else 1

    @property
    def scale(self) -> int:
        """Z*C, the integer multiplying the quantum number."""
        return self.Z * self.C

    @property
    def mu(self) -> int:
        return len(self.names)

    def numerator(self, name: str) -> int:
        return self.dirichlet.numerators[self.names.index(name)]

    def approx_integer(self, comb: RationalCombination) -> Fraction:
        """Z*C*comb with each basis value replaced by its Dirichlet numerator / Z."""
        total = comb.rational * self.Z
        for k, c in comb.coeffs:
            total += c * self.numerator(k)
        return total * self.C

    def error_bound(self, comb: RationalCombination) -> float:
        """Certified bound on |Z*C*comb - approx_integer(comb)|."""
        if not comb.coeffs:
            return 0.0
        return sum(abs(float(c)) for _, c in comb.coeffs) * self.C * self.dirichlet.bound

    def to_json(self):
        return {"basis": list(self.names), "C": self.C, "Z": self.Z,
                "dirichlet": self.dirichlet.to_json() if self.dirichlet else None}


@dataclass(frozen=True)
class PeriodRationalization:
    x: DirectionRationalization
    y: DirectionRationalization
    inequalities: Tuple[Tuple[float, float], ...] = field(default=())

    @property
    def Z_x(self):
        return self.x.Z

    @property
    def Z_y(self):
        return self.y.Z

    @property
    def C_x(self):
        return self.x.C

    @property
    def C_y(self):
        return self.y.C


def rationalize_direction(combos: Sequence[RationalCombination], values: Mapping[str, float],
                          N: int, extra_names: Sequence[str] = ()) -> DirectionRationalization:
    names = sorted({k for c in combos for k in c.names()} | set(extra_names))
    C = lcm_all(d for c in combos for d in c.denominators())
    if not names:
        return DirectionRationalization((), C, None)
    try:
        alphas = [values[k] for k in names]
    except KeyError as exc:
        raise errors.MixedBasis(f"no value declared for basis element {exc}") from exc
    return DirectionRationalization(tuple(names), C, dirichlet_approx(alphas, N))


def rationalize_period_coefficients(periods: Sequence[Tuple[RationalCombination, RationalCombination]],
                                    values: Mapping[str, float], N: int,
                                    joint: bool = False) -> PeriodRationalization:
    """Direction-wise LCMs and Dirichlet integers for a table of period coefficients.

    `periods` holds (x-coefficient, y-coefficient) pairs relative to (D1, D2).
    With joint=True both directions share one Dirichlet run over the union of
    basis elements (the Sinai treatment with a single Z).
    Each returned inequality pair is (|Z C c - integer|, certified bound).
    """
    xs = [p[0] for p in periods]
    ys = [p[1] for p in periods]
    if joint:
        names = sorted({k for c in xs + ys for k in c.names()})
        both = rationalize_direction(xs + ys, values, N, names)
        rx = DirectionRationalization(both.names, lcm_all(d for c in xs for d in c.denominators()),
                                      both.dirichlet)
        ry = DirectionRationalization(both.names, lcm_all(d for c in ys for d in c.denominators()),
                                      both.dirichlet)
    else:
        rx = rationalize_direction(xs, values, N)
        ry = rationalize_direction(ys, values, N)
    ineq = []
    for comb, r in [(c, rx) for c in xs] + [(c, ry) for c in ys]:
        exact = comb.evaluate(values) * r.scale
        ineq.append((abs(exact - float(r.approx_integer(comb))), r.error_bound(comb)))
    return PeriodRationalization(rx, ry, tuple(ineq))
