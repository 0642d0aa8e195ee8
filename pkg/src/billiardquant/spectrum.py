"""Semiclassical quantization on aperiodic and periodic skeletons.

Momenta solve p.D1 = 2 pi m Z1, p.D2 = 2 pi n Z2. On a periodic skeleton the
momentum splits into a running part along the skeleton and a correction across
it, fixed by coprime pairs (k, l) and (r, s).
"""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, List, Optional, Tuple

import numpy as np

from . import errors
from .diophantine import dirichlet_approx, round_half_away

DEGENERATE_TOL = 1e-12
PARALLEL_TOL = 1e-9


@dataclass(frozen=True)
class QuantumState:
    m: int
    n: int
    Z1: int
    Z2: int
    p: np.ndarray
    E: float
    kind: str = "aperiodic"
    sigma: Optional[int] = None
    E0: float = 0.0
    kl: Optional[Tuple[int, int]] = None
    rs: Optional[Tuple[int, int]] = None
    p_running: Optional[np.ndarray] = field(default=None, repr=False)
    p_cor: Optional[np.ndarray] = field(default=None, repr=False)
    flags: Tuple[str, ...] = ()

    def to_json(self):
        out = {"m": self.m, "n": self.n, "Z1": self.Z1, "Z2": self.Z2,
               "px": float(self.p[0]), "py": float(self.p[1]), "E": self.E,
               "kind": self.kind, "flags": list(self.flags)}
        if self.kind == "periodic":
            out.update({"sigma": self.sigma, "E0": self.E0, "k": self.kl[0], "l": self.kl[1],
                        "r": self.rs[0], "s": self.rs[1]})
        return out


@dataclass(frozen=True)
class WavelengthUnit:
    direction: str
    value: float


@dataclass(frozen=True)
class SkeletonClass:
    kind: str
    period: Optional[np.ndarray] = None

    @property
    def periodic(self) -> bool:
        return self.kind == "periodic"


def _vec(v) -> np.ndarray:
    out = np.asarray(v, dtype=float).reshape(2)
    if not np.all(np.isfinite(out)):
        raise errors.DegeneratePeriods("period vector is not finite")
    return out


def _cross(a, b) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


def _check_independent(D1, D2) -> float:
    c = _cross(D1, D2)
    scale = np.linalg.norm(D1) * np.linalg.norm(D2)
    if scale == 0 or abs(c) <= DEGENERATE_TOL * scale:
        raise errors.DegeneratePeriods("periods are parallel or zero")
    return c


def momentum(D1, D2, a1: float, a2: float) -> np.ndarray:
    """Momentum with p.D1 = 2 pi a1 and p.D2 = 2 pi a2."""
    D1, D2 = _vec(D1), _vec(D2)
    _check_independent(D1, D2)
    return np.linalg.solve(np.array([D1, D2]), 2 * math.pi * np.array([a1, a2], float))


def momentum_closed_form(D1, D2, a1: float, a2: float) -> np.ndarray:
    """The cross-product solution 2 pi (a1 D2 - a2 D1) x (D1 x D2) / |D1 x D2|^2."""
    D1, D2 = _vec(D1), _vec(D2)
    c = _check_independent(D1, D2)
    A = a1 * D2 - a2 * D1
    return 2 * math.pi * np.array([A[1], -A[0]]) / c


def energy_closed_form(D1, D2, Z1, Z2, m, n) -> float:
    D1, D2 = _vec(D1), _vec(D2)
    c = _check_independent(D1, D2)
    a, b = m * Z1, n * Z2
    num = a * a * (D2 @ D2) - 2 * a * b * (D1 @ D2) + b * b * (D1 @ D1)
    return 2 * math.pi ** 2 * num / c ** 2


def energy_orthogonal(L1: float, L2: float, Z1, Z2, m, n) -> float:
    """Energy for orthogonal periods of lengths L1 and L2."""
    return 2 * math.pi ** 2 * ((m * Z1 / L1) ** 2 + (n * Z2 / L2) ** 2)


def _check_z(Z1, Z2):
    if int(Z1) != Z1 or int(Z2) != Z2 or Z1 < 1 or Z2 < 1:
        raise errors.BadParameters("Z1 and Z2 must be positive integers")


def quantize_aperiodic(D1, D2, Z1: int, Z2: int, m: int, n: int,
                       allow_zero: bool = False) -> QuantumState:
    """Plane-wave state on an aperiodic skeleton."""
    _check_z(Z1, Z2)
    if not allow_zero and (m == 0 or n == 0):
        raise errors.ZeroQuantumNumber("aperiodic states need nonzero m and n")
    p = momentum(D1, D2, m * Z1, n * Z2)
    return QuantumState(int(m), int(n), int(Z1), int(Z2), p, 0.5 * float(p @ p))


def _frame(skeleton) -> np.ndarray:
    """Rotation taking the skeleton direction onto +y."""
    d = _vec(skeleton)
    norm = np.linalg.norm(d)
    if norm == 0:
        raise errors.DegeneratePeriods("zero skeleton direction")
    uy = d / norm
    ux = np.array([uy[1], -uy[0]])
    return np.array([ux, uy])


def _coprime_pair(lhs_coef: Fraction, rhs_coef: Fraction) -> Tuple[int, int]:
    """Coprime (k, l), not both zero, with k * lhs_coef = l * rhs_coef."""
    if lhs_coef == 0 and rhs_coef == 0:
        raise errors.NoCoprimeSolution("both coefficients vanish")
    if lhs_coef == 0:
        return 1, 0
    if rhs_coef == 0:
        return 0, 1
    ratio = Fraction(rhs_coef) / Fraction(lhs_coef)
    return ratio.numerator, ratio.denominator


def rationalize_ratio(x: float, N: int) -> Fraction:
    """Best Dirichlet rational for a period component ratio."""
    res = dirichlet_approx([x], N)
    return Fraction(res.numerators[0], res.Z)


def skeleton_ratios(D1, D2, skeleton, N: int) -> Tuple[Optional[Fraction], Optional[Fraction]]:
    """Rationalized (D1y/D2y, D1x/D2x) in the skeleton frame; None where a component vanishes."""
    D1, D2 = _vec(D1), _vec(D2)
    R = _frame(skeleton)
    d1, d2 = R @ D1, R @ D2
    tol = PARALLEL_TOL * max(np.linalg.norm(D1), np.linalg.norm(D2))

    def ratio(c1: float, c2: float) -> Optional[Fraction]:
        if abs(c1) <= tol or abs(c2) <= tol:
            return None
        return rationalize_ratio(c1 / c2, N)

    return ratio(d1[1], d2[1]), ratio(d1[0], d2[0])


def quantize_periodic(D1, D2, Z1: int, Z2: int, m: int, n: int,
                      ratios: Optional[Tuple[Optional[Fraction], Optional[Fraction]]] = None,
                      skeleton=None, epsilon: float = 0.1) -> Tuple[QuantumState, QuantumState]:
    """States on a periodic skeleton, one per sign of the correction momentum.

    `ratios` are rationalized (D1y/D2y, D1x/D2x) in the frame whose y axis runs
    along the skeleton (default: along D2). A component that vanishes needs no
    ratio.
    """
    _check_z(Z1, Z2)
    D1, D2 = _vec(D1), _vec(D2)
    _check_independent(D1, D2)
    R = _frame(D2 if skeleton is None else skeleton)
    d1, d2 = R @ D1, R @ D2
    tol = PARALLEL_TOL * max(np.linalg.norm(D1), np.linalg.norm(D2))
    ry, rx = ratios if ratios is not None else (None, None)

    def pair(c1: float, c2: float, given: Optional[Fraction]):
        # k Z1 c2 = l Z2 c1
        z1, z2 = abs(c1) <= tol, abs(c2) <= tol
        if z1 and z2:
            raise errors.DegeneratePeriods("both periods lie across the skeleton")
        if z1:
            return 0, 1
        if z2:
            return 1, 0
        if given is None:
            raise errors.NoCoprimeSolution("component ratio has not been rationalized")
        given = Fraction(given)
        if given == 0:
            raise errors.NoCoprimeSolution("rationalized ratio is zero for nonzero components")
        # c1 / c2 = given, so k Z1 = l Z2 given
        return _coprime_pair(Fraction(Z1), Fraction(Z2) * given)

    k, l = pair(d1[1], d2[1], ry)
    r, s = pair(d1[0], d2[0], rx)
    p_run = momentum_closed_form(D1, D2, n * k * Z1, n * l * Z2)
    p_cor = momentum_closed_form(D1, D2, m * r * Z1, m * s * Z2)
    E_run = 0.5 * float(p_run @ p_run)
    E0 = 0.5 * float(p_cor @ p_cor)
    flags = []
    if E0 > epsilon * E_run:
        flags.append("condition_f")
        warnings.warn(f"E0={E0:.6g} is not small against p^2/2={E_run:.6g} (m={m}, n={n})",
                      errors.ConditionFViolated, stacklevel=2)
    states = []
    for sigma in (1, -1):
        p = p_run + sigma * p_cor
        states.append(QuantumState(int(m), int(n), int(Z1), int(Z2), p, 0.5 * float(p @ p),
                                   kind="periodic", sigma=sigma, E0=E0, kl=(k, l), rs=(r, s),
                                   p_running=p_run, p_cor=p_cor, flags=tuple(flags)))
    return states[0], states[1]


def wavelength(state: QuantumState, period_length: float, direction: str = "x") -> WavelengthUnit:
    """Wavelength unit along one period: period length / (|m| Z)."""
    if direction not in ("x", "y"):
        raise errors.BadParameters("direction must be 'x' or 'y'")
    q, Z = (state.m, state.Z1) if direction == "x" else (state.n, state.Z2)
    if q == 0:
        raise errors.ZeroQuantumNumber(f"quantum number along {direction} is zero")
    if period_length <= 0:
        raise errors.BadParameters("period length must be positive")
    return WavelengthUnit(direction, float(period_length) / (abs(q) * Z))


def measure_length(L: float, lam: float) -> Tuple[int, float]:
    """Nearest whole number of wavelengths in L and the leftover length."""
    if not lam > 0:
        raise errors.BadParameters("wavelength must be positive")
    count = int(round_half_away(L / lam))
    return count, abs(L - count * lam)


def classify_skeleton(direction, periods: Iterable, tolerance: float = PARALLEL_TOL) -> SkeletonClass:
    """Periodic when the direction is parallel to some period; the shortest such is returned."""
    d = _vec(direction)
    d = d / np.linalg.norm(d)
    best = None
    for per in periods:
        v = _vec(getattr(per, "vector", per))
        norm = np.linalg.norm(v)
        if norm == 0:
            continue
        if abs(_cross(d, v)) / norm <= tolerance:
            if best is None or norm < np.linalg.norm(best):
                best = v
    if best is None:
        return SkeletonClass("aperiodic")
    return SkeletonClass("periodic", best)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("BILLIARD_THREADS", "1")))
    except ValueError:
        return 1


def spectrum_table(D1, D2, Z1: int, Z2: int, mn_range: int, kind: str = "aperiodic",
                   ratios=None, skeleton=None, epsilon: float = 0.1) -> List[QuantumState]:
    """All states with |m|, |n| <= mn_range, ordered by (E, m, n)."""
    if mn_range < 1:
        raise errors.BadParameters("mn_range must be at least 1")
    rng = range(-mn_range, mn_range + 1)
    if kind == "aperiodic":
        pairs = [(m, n) for m in rng for n in rng if m and n]

        def one(mn):
            return [quantize_aperiodic(D1, D2, Z1, Z2, *mn)]
    elif kind == "periodic":
        pairs = [(m, n) for m in rng for n in rng if (m, n) != (0, 0)]

        def one(mn):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", errors.ConditionFViolated)
                return list(quantize_periodic(D1, D2, Z1, Z2, *mn, ratios=ratios,
                                              skeleton=skeleton, epsilon=epsilon))
    else:
        raise errors.BadParameters(f"unknown skeleton kind {kind!r}")
    workers = _threads()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            chunks = list(pool.map(one, pairs))
    else:
        chunks = [one(mn) for mn in pairs]
    states = [s for chunk in chunks for s in chunk]
    states.sort(key=lambda s: (round(s.E, 9), s.m, s.n, -(s.sigma or 0)))
    return states
