"""Semiclassical wavefunctions as signed plane-wave sums over the pattern cells.

The raw sum over the 2C images vanishes exactly on the two sides at the base
vertex and approximately elsewhere. The bounds here come from Dirichlet data:
each phase is a rational combination of basis reals, so its distance to a
multiple of pi is controlled by the approximation errors.
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
from .diophantine import (DirectionRationalization, PeriodRationalization, RationalCombination,
                          rationalize_period_coefficients)
from .epp import (Epp, Pairing, _Group, build_full, constant_vector, linform_to_combination,
                  period_coefficients)
from .exact import QF, ExactVec, LinForm
from .geometry import BilliardSpec
from .spectrum import QuantumState, quantize_aperiodic

SQRT3 = math.sqrt(3.0)
DEFAULT_SAMPLES = 1024
RECT_NORMALIZATION = -0.25
SINAI_NORMALIZATION = -0.25
PARALLEL_TOL = 1e-9
PHASE_TOL = 1e-9
ROUNDOFF = 1e-9      # floor of the floating-point allowance when comparing to bounds
PHASE_EPS = 4 * np.finfo(float).eps


# ---------------------------------------------------------------------------
# quantized setups


@dataclass(frozen=True)
class QuantizedBilliard:
    """A billiard, its pattern, the period pair, the Dirichlet data and one state."""

    billiard: BilliardSpec
    epp: Epp
    D1: ExactVec
    D2: ExactVec
    rationalization: PeriodRationalization
    state: QuantumState
    N: int
    family: Optional[str] = None
    normalization: float = 1.0
    params: Dict[str, float] = field(default_factory=dict)

    @property
    def D1_vec(self) -> np.ndarray:
        return self.D1.evaluate(self.billiard.atom_values)

    @property
    def D2_vec(self) -> np.ndarray:
        return self.D2.evaluate(self.billiard.atom_values)

    @property
    def Z(self) -> int:
        """Shared Dirichlet integer when both directions use one run (Sinai)."""
        return self.rationalization.Z_x

    def with_state(self, state: QuantumState) -> "QuantizedBilliard":
        return QuantizedBilliard(self.billiard, self.epp, self.D1, self.D2, self.rationalization,
                                 state, self.N, self.family, self.normalization, self.params)

    def with_epp(self, epp: Epp) -> "QuantizedBilliard":
        return QuantizedBilliard(self.billiard, epp, self.D1, self.D2, self.rationalization,
                                 self.state, self.N, self.family, self.normalization, self.params)


def _sqrt3(coef=1) -> QF:
    return QF.surd(3, coef)


def family_periods(family: str, billiard: BilliardSpec) -> Tuple[ExactVec, ExactVec]:
    """The period pair each family is quantized on."""
    if family in ("rect-holes", "rect-rotated-holes", "rectangle"):
        pts = billiard.points[0]
        a = Fraction(billiard.polygons[0][1][0].rational)
        b = Fraction(billiard.polygons[0][2][1].rational)
        if not (np.isclose(pts[1][0], float(a)) and np.isclose(pts[2][1], float(b))):
            raise errors.BadParameters("outer rectangle must have rational sides")
        return constant_vector(2 * a, 0), constant_vector(0, 2 * b)
    if family in ("sinai", "sinai-polygon"):
        return constant_vector(2, 0), constant_vector(1, _sqrt3())
    raise errors.UnknownFamily(f"no default periods for family {family!r}")


def family_base(family: Optional[str]) -> Tuple[int, int]:
    return (0, 0)


def prepare(billiard: BilliardSpec, m: int, n: int, N: int, family: Optional[str] = None,
            D1: Optional[ExactVec] = None, D2: Optional[ExactVec] = None,
            base: Optional[Tuple[int, int]] = None, joint: Optional[bool] = None,
            params: Optional[Dict[str, float]] = None) -> QuantizedBilliard:
    """Build the pattern, rationalize its periods against (D1, D2) and quantize (m, n).

    Z1 = Z_x C_x and Z2 = Z_y C_y, so p.D1 = 2 pi m Z1 and p.D2 = 2 pi n Z2.
    """
    epp = build_full(billiard, base if base is not None else family_base(family))
    if D1 is None or D2 is None:
        if family is None:
            raise errors.BadParameters("a period pair is needed when no family is named")
        D1, D2 = family_periods(family, billiard)
    if joint is None:
        joint = family in ("sinai", "sinai-polygon")
    coeffs = period_coefficients(epp, D1, D2)
    values = {b.name: b.value for b in billiard.basis}
    rat = rationalize_period_coefficients(coeffs, values, N, joint=joint)
    v1 = D1.evaluate(billiard.atom_values)
    v2 = D2.evaluate(billiard.atom_values)
    state = quantize_aperiodic(v1, v2, rat.x.scale, rat.y.scale, m, n)
    norm = {"rect-holes": RECT_NORMALIZATION, "rectangle": RECT_NORMALIZATION,
            "sinai": SINAI_NORMALIZATION, "sinai-polygon": SINAI_NORMALIZATION}.get(family, 1.0)
    return QuantizedBilliard(billiard, epp, D1, D2, rat, state, int(N), family, norm,
                             dict(params or {}))


# ---------------------------------------------------------------------------
# evaluation


def _points(points) -> Tuple[np.ndarray, bool]:
    pts = np.asarray(points, dtype=float)
    single = pts.ndim == 1
    return pts.reshape(-1, 2), single


def inside_mask(billiard: BilliardSpec, pts: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Vectorised closed-domain test."""
    pts = np.asarray(pts, float).reshape(-1, 2)

    def in_poly(poly):
        x, y = pts[:, 0], pts[:, 1]
        inside = np.zeros(len(pts), bool)
        n = len(poly)
        for i in range(n):
            x1, y1 = poly[i]
            x2, y2 = poly[(i + 1) % n]
            crosses = (y1 > y) != (y2 > y)
            with np.errstate(divide="ignore", invalid="ignore"):
                xi = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            inside ^= crosses & (x < xi)
        return inside

    def near_boundary():
        dmin = np.full(len(pts), np.inf)
        for l, j in billiard.sides():
            a, b = billiard.side_points(l, j)
            ab = b - a
            t = np.clip(((pts - a) @ ab) / (ab @ ab), 0, 1)
            d = np.linalg.norm(pts - (a + t[:, None] * ab), axis=1)
            dmin = np.minimum(dmin, d)
        return dmin <= tol

    mask = in_poly(billiard.points[0])
    for hole in billiard.points[1:]:
        mask &= ~in_poly(hole)
    return mask | near_boundary()


def _check_inside(billiard: BilliardSpec, pts: np.ndarray):
    mask = inside_mask(billiard, pts)
    if not mask.all():
        bad = pts[~mask][0]
        raise errors.PointOutside(f"point {tuple(bad)} lies outside the billiard")


def _cell_data(epp: Epp):
    b = epp.billiard
    lins, trans, signs = [], [], []
    for c in epp.cells:
        iso = c.isometry(b)
        lins.append(iso.linear)
        trans.append(np.asarray(c.translation, float))
        signs.append(c.sign)
    return np.array(lins), np.array(trans), np.array(signs, float)


def evaluate(epp: Epp, state: QuantumState, point, form: str = "images",
             check: bool = True) -> np.ndarray | complex:
    """Raw signed plane-wave sum over all cells of the pattern.

    form="images" sums exp(i p.x_c) over the images x_c of the point;
    form="directions" keeps the point fixed and rotates the momentum instead.
    """
    pts, single = _points(point)
    if check:
        _check_inside(epp.billiard, pts)
    lins, trans, signs = _cell_data(epp)
    p = np.asarray(state.p, float)
    out = np.zeros(len(pts), complex)
    if form == "images":
        for L, t, s in zip(lins, trans, signs):
            images = pts @ L.T + t
            out += s * np.exp(1j * (images @ p))
    elif form == "directions":
        for L, t, s in zip(lins, trans, signs):
            rotated = L.T @ p
            out += s * np.exp(1j * float(p @ t)) * np.exp(1j * (pts @ rotated))
    else:
        raise errors.BadParameters(f"unknown form {form!r}")
    return complex(out[0]) if single else out


def normalized(setup: QuantizedBilliard, point, check: bool = True):
    """Raw sum times the family normalization constant."""
    return setup.normalization * evaluate(setup.epp, setup.state, point, check=check)


# ---------------------------------------------------------------------------
# closed forms


def sinai_Z(state: QuantumState) -> int:
    if state.Z1 != state.Z2 or state.Z1 % 6:
        raise errors.BadParameters("Sinai states need Z1 = Z2 = 6Z")
    return state.Z1 // 6


def rect_closed_form(state: QuantumState, pts: np.ndarray, a=1.0, b=1.0) -> np.ndarray:
    x, y = pts[:, 0], pts[:, 1]
    return (np.sin(math.pi * state.m * state.Z1 * x / a) *
            np.sin(math.pi * state.n * state.Z2 * y / b)).astype(complex)


def rotated_closed_form(state: QuantumState, pts: np.ndarray, a=1.0, b=1.0,
                        h_prime: Optional[float] = None, w_prime: Optional[float] = None):
    if h_prime is None or w_prime is None:
        raise errors.BadParameters("the rotated-hole form needs h_prime and w_prime")
    x, y = pts[:, 0], pts[:, 1]
    m, n, Zx, Zy = state.m, state.n, state.Z1, state.Z2
    phase = np.exp(1j * math.pi * (m * Zx / a + n * Zy / b) * (h_prime + w_prime))
    return (np.sin(math.pi * m * Zx * x / a) * np.sin(math.pi * n * Zy * y / b)
            - phase * np.sin(math.pi * m * Zx * y / a) * np.sin(math.pi * n * Zy * x / b))


def sinai_closed_form(state: QuantumState, pts: np.ndarray) -> np.ndarray:
    """Three sine products of the triangle (0,0),(1,0),(1,sqrt3)."""
    Z = sinai_Z(state)
    m, n = state.m, state.n
    x, y = pts[:, 0], pts[:, 1]
    k = math.pi * Z * SQRT3 * (2 * n - m)
    return (np.sin(6 * math.pi * m * Z * x) * np.sin(2 * k * y)
            + np.sin(3 * math.pi * m * Z * (x - SQRT3 * y)) * np.sin(k * (SQRT3 * x + y))
            - np.sin(3 * math.pi * m * Z * (x + SQRT3 * y)) * np.sin(k * (SQRT3 * x - y))
            ).astype(complex)


def sinai_closed_form_axes(state: QuantumState, pts: np.ndarray) -> np.ndarray:
    """The same function as products of sines in x and y alone."""
    Z = sinai_Z(state)
    m, n = state.m, state.n
    x, y = pts[:, 0], pts[:, 1]
    t = 2 * math.pi * SQRT3 * Z
    return (np.sin(6 * math.pi * m * Z * x) * np.sin(t * (2 * n - m) * y)
            + np.sin(6 * math.pi * n * Z * x) * np.sin(t * (n - 2 * m) * y)
            - np.sin(6 * math.pi * (n - m) * Z * x) * np.sin(t * (n + m) * y)
            ).astype(complex)


def closed_form(family: str, state: QuantumState, point, variant: str = "products",
                **params) -> np.ndarray | complex:
    """Explicit sine-product form for the built-in families.

    Sinai variants: "products" (rotated arguments) and "axes" (x and y separated).
    """
    pts, single = _points(point)
    if family in ("rect-holes", "rectangle"):
        out = rect_closed_form(state, pts, params.get("a", 1.0), params.get("b", 1.0))
    elif family == "rect-rotated-holes":
        out = rotated_closed_form(state, pts, params.get("a", 1.0), params.get("b", 1.0),
                                  params.get("h_prime"), params.get("w_prime"))
    elif family in ("sinai", "sinai-polygon", "sinai-triangle"):
        if variant == "products":
            out = sinai_closed_form(state, pts)
        elif variant == "axes":
            out = sinai_closed_form_axes(state, pts)
        else:
            raise errors.BadParameters(f"unknown variant {variant!r}")
    else:
        raise errors.UnknownFamily(f"no closed form for family {family!r}")
    return complex(out[0]) if single else out


def fit_constant(reference: np.ndarray, model: np.ndarray) -> complex:
    """Least-squares c with reference ~ c * model."""
    denom = np.vdot(model, model)
    if abs(denom) == 0:
        raise errors.BadParameters("model vanishes at every sample")
    return complex(np.vdot(model, reference) / denom)


# ---------------------------------------------------------------------------
# phase bounds from Dirichlet data


@dataclass(frozen=True)
class PhaseBound:
    """Bound on |sin(pi * (m Z1 A + n Z2 B))| for rational combinations A, B."""

    residue: float      # distance of the exact rational part to an integer
    error: float        # certified bound on the irrational part
    bounded: bool       # False when some basis real escaped the Dirichlet run

    @property
    def value(self) -> float:
        if not self.bounded:
            return 1.0
        return min(1.0, abs(math.sin(math.pi * self.residue)) + math.pi * self.error)


def _direction_split(r: DirectionRationalization, comb: RationalCombination, q: int):
    """Rational part of q*Z*C*comb after replacing basis reals by Dirichlet numerators, and its error bound."""
    names = set(r.names)
    if any(k not in names for k in comb.names()):
        return None
    return Fraction(q) * r.approx_integer(comb), abs(q) * r.error_bound(comb)


def phase_bound(setup: QuantizedBilliard, A: RationalCombination, B: RationalCombination,
                m: Optional[int] = None, n: Optional[int] = None) -> PhaseBound:
    m = setup.state.m if m is None else m
    n = setup.state.n if n is None else n
    rat = setup.rationalization
    sa = _direction_split(rat.x, A, m)
    sb = _direction_split(rat.y, B, n)
    if sa is None or sb is None:
        return PhaseBound(0.0, 0.0, False)
    total = sa[0] + sb[0]
    frac = total - round(total)
    return PhaseBound(abs(float(frac)), sa[1] + sb[1], True)


def _dual_vectors(D1: ExactVec, D2: ExactVec):
    """u1, u2 with u_i . D_j = delta_ij, as constant field vectors."""
    a, b = D1.x.terms.get("1", QF(0)), D1.y.terms.get("1", QF(0))
    c, d = D2.x.terms.get("1", QF(0)), D2.y.terms.get("1", QF(0))
    inv = (a * d - b * c).inverse()
    u1 = (d * inv, -c * inv)
    u2 = (-b * inv, a * inv)
    return u1, u2


def _dot(u: Tuple[QF, QF], v: ExactVec) -> LinForm:
    return v.x.scale(u[0]) + v.y.scale(u[1])


def vector_phase_bound(setup: QuantizedBilliard, v: ExactVec, factor: Fraction = Fraction(1)) -> PhaseBound:
    """Bound on |sin(factor * p.v / 2)| for an exact vector v."""
    u1, u2 = _dual_vectors(setup.D1, setup.D2)
    try:
        A = linform_to_combination(_dot(u1, v).scale(QF(factor)), setup.billiard)
        B = linform_to_combination(_dot(u2, v).scale(QF(factor)), setup.billiard)
    except errors.MixedBasis:
        return PhaseBound(0.0, 0.0, False)
    return phase_bound(setup, A, B)


# ---------------------------------------------------------------------------
# residual reports


@dataclass(frozen=True)
class ResidualReport:
    line: str
    samples: int
    measured: float
    bound: float
    constants: Dict[str, object] = field(default_factory=dict)
    roundoff: float = ROUNDOFF

    @property
    def ok(self) -> bool:
        return self.measured <= self.bound + self.roundoff

    def to_json(self):
        return {"line": self.line, "samples": self.samples, "measured": self.measured,
                "bound": self.bound, "roundoff": self.roundoff, "ok": self.ok,
                "constants": self.constants}


def phase_roundoff(setup: QuantizedBilliard) -> float:
    """Floating-point error of the sum: each of the 2C phases p.x carries about |p||x| eps."""
    extent = float(np.abs(np.concatenate(setup.billiard.points)).max())
    lins, trans, _ = _cell_data(setup.epp)
    reach = extent + max(float(np.linalg.norm(t)) for t in trans)
    scale = float(np.linalg.norm(setup.state.p)) * reach * PHASE_EPS * len(lins)
    return abs(setup.normalization) * scale


def roundoff(setup: QuantizedBilliard) -> float:
    """Allowance used when comparing measured residuals to bounds."""
    return max(ROUNDOFF, phase_roundoff(setup))


def _side_samples(billiard: BilliardSpec, side, samples: int) -> np.ndarray:
    a, b = billiard.side_points(*side)
    t = np.linspace(0.0, 1.0, samples)
    return a + t[:, None] * (b - a)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("BILLIARD_THREADS", "1")))
    except ValueError:
        return 1


def _max_abs(setup: QuantizedBilliard, pts: np.ndarray) -> float:
    if len(pts) == 0:
        return 0.0
    workers = _threads()
    if workers > 1 and len(pts) > 4096:
        chunks = np.array_split(pts, workers)
        with ThreadPoolExecutor(workers) as pool:
            parts = pool.map(lambda c: float(np.max(np.abs(normalized(setup, c, check=False)))), chunks)
            return max(parts)
    return float(np.max(np.abs(normalized(setup, pts, check=False))))


def side_bound(setup: QuantizedBilliard, side: Tuple[int, int]) -> Tuple[float, Dict[str, object]]:
    """Bound on |Psi| along one billiard side.

    On the side, the images in the two cells of each pairing differ by the
    pairing's period D, so their contributions add to at most 2|sin(p.D/2)|.
    """
    epp = setup.epp
    pairs = [pr for pr in epp.pairings if pr.side == tuple(side)]
    total = 0.0
    terms = []
    for pr in pairs:
        if pr.glued:
            continue
        pb = vector_phase_bound(setup, pr.exact) if pr.exact is not None else PhaseBound(0, 0, False)
        total += 2 * pb.value
        terms.append({"a": pr.a, "b": pr.b, "residue": pb.residue, "error": pb.error,
                      "bounded": pb.bounded})
    rat = setup.rationalization
    consts = {"pairs": terms, "N": setup.N, "mu1": rat.x.mu, "mu2": rat.y.mu,
              "C1": rat.C_x, "C2": rat.C_y, "Z1": setup.state.Z1, "Z2": setup.state.Z2}
    return abs(setup.normalization) * total, consts


def boundary_residual(setup: QuantizedBilliard, side, samples: int = DEFAULT_SAMPLES) -> ResidualReport:
    """Measured max |Psi| on a side against its bound.

    `side` is (polygon, index) or, for Sinai, the line "x=w".
    """
    if samples < 2:
        raise errors.BadParameters("need at least two samples")
    b = setup.billiard
    if isinstance(side, str):
        if side == "x=w" and setup.family in ("sinai", "sinai-polygon"):
            return sinai_centre_line(setup, samples)
        raise errors.SideNotFound(f"unknown line {side!r}")
    side = tuple(int(v) for v in side)
    if side not in set(b.sides()):
        raise errors.SideNotFound(f"no side {side}")
    pts = _side_samples(b, side, samples)
    measured = _max_abs(setup, pts)
    bound, consts = side_bound(setup, side)
    fam = family_side_bound(setup, side)
    if fam is not None:
        consts["family_bound"] = fam
    return ResidualReport(f"side {side[0]},{side[1]}", samples, measured, bound, consts,
                          roundoff(setup))


def family_side_bound(setup: QuantizedBilliard, side) -> Optional[float]:
    """Printed bound for hole sides of the parallel-hole rectangle: pi|m|N^(-1/mu)."""
    if setup.family != "rect-holes" or side[0] == 0:
        return None
    a, b = setup.billiard.side_points(*side)
    vertical = abs(a[0] - b[0]) < abs(a[1] - b[1])
    rat = setup.rationalization
    if vertical:
        return math.pi * abs(setup.state.m) * setup.N ** (-1.0 / rat.x.mu)
    return math.pi * abs(setup.state.n) * setup.N ** (-1.0 / rat.y.mu)


def rect_hole_bound(m_or_n: int, N: int, k: int) -> float:
    """pi |m| N^(-1/(2(k-1))) for k polygons."""
    return math.pi * abs(m_or_n) * N ** (-1.0 / (2 * (k - 1)))


def sinai_line_bound(m: int, n: int, N: int) -> float:
    return 6 * math.pi * (abs(m) + abs(n) + abs(m - n)) * N ** -0.25


def _line_points(billiard: BilliardSpec, origin, direction, samples: int) -> np.ndarray:
    """Samples of a line restricted to the closed billiard."""
    pts = billiard.points[0]
    span = np.ptp(pts, axis=0).max() * 2 + 1
    t = np.linspace(-span, span, samples * 8)
    cand = np.asarray(origin) + t[:, None] * np.asarray(direction)
    mask = inside_mask(billiard, cand)
    inside = cand[mask]
    if len(inside) > samples:
        idx = np.linspace(0, len(inside) - 1, samples).round().astype(int)
        inside = inside[idx]
    return inside


def sinai_centre_line(setup: QuantizedBilliard, samples: int = DEFAULT_SAMPLES) -> ResidualReport:
    """Residual on the vertical line through the disc centre."""
    w = setup.params.get("w")
    if w is None:
        w = next(bb.value for bb in setup.billiard.basis if bb.name == "w")
    pts = _line_points(setup.billiard, (w, 0.0), (0.0, 1.0), samples)
    measured = _max_abs(setup, pts)
    st = setup.state
    # one Dirichlet run over {w, sqrt3 h, r, sqrt3 r}
    bound = sinai_line_bound(st.m, st.n, setup.N)
    return ResidualReport("x=w", len(pts), measured, bound,
                          {"N": setup.N, "mu": setup.rationalization.x.mu, "Z": sinai_Z(st)},
                          roundoff(setup))


# ---------------------------------------------------------------------------
# sine-product reduction


@dataclass(frozen=True)
class SineTerm:
    alpha: float
    px: float
    py: float
    coefficient: float = -4.0


def _check_symmetric(epp: Epp, state: QuantumState):
    C = epp.billiard.C
    if C % 2:
        raise errors.SymmetryAbsent("C is odd, so the images are not symmetric in both axes")
    p = np.asarray(state.p, float)
    lins, trans, _ = _cell_data(epp)
    for L in lins:
        for t in trans:
            phase = float(p @ (L @ t)) / (2 * math.pi)
            if abs(phase - round(phase)) > PHASE_TOL * max(1.0, abs(phase)):
                raise errors.SymmetryAbsent("cell translations add phases; the images are not a point group")


def sine_product_reduction(state: QuantumState, r12: int) -> List[SineTerm]:
    """Psi = -4 sum_r sin(p_x^(r) x) sin(p_y^(r) y) with momenta rotated by alpha_r = pi(r-1)/r12."""
    if r12 < 1:
        raise errors.SymmetryAbsent("r12 must be positive")
    p = np.asarray(state.p, float)
    out = []
    for r in range(1, r12 + 1):
        a = math.pi * (r - 1) / r12
        px = p[0] * math.cos(a) + p[1] * math.sin(a)
        py = -p[0] * math.sin(a) + p[1] * math.cos(a)
        out.append(SineTerm(a, px, py))
    return out


def evaluate_sine_products(terms: Sequence[SineTerm], point) -> np.ndarray | complex:
    pts, single = _points(point)
    out = np.zeros(len(pts), complex)
    for t in terms:
        out += t.coefficient * np.sin(t.px * pts[:, 0]) * np.sin(t.py * pts[:, 1])
    return complex(out[0]) if single else out


def reduction_for(setup: QuantizedBilliard) -> List[SineTerm]:
    """Sine-product table for a pattern whose images form a point group about the origin."""
    _check_symmetric(setup.epp, setup.state)
    return sine_product_reduction(setup.state, setup.billiard.C // 2)


# ---------------------------------------------------------------------------
# singular diagonals


@dataclass(frozen=True)
class SingularDiagonal:
    axis: str                 # "x" (line x' = c) or "y" (line y' = c)
    offset: float             # c, signed distance from the origin along the axis
    segments: Tuple[np.ndarray, ...] = field(repr=False, default=())


def _exact_vertices(epp: Epp) -> List[ExactVec]:
    b = epp.billiard
    group = _Group(b)
    out = []
    for c in epp.cells:
        if c.exact_translation is None:
            raise errors.MixedBasis("pattern has no exact data for this geometry")
        for l, poly in enumerate(b.polygons):
            for j in range(len(poly)):
                out.append(c.exact_translation + group.apply_exact((c.rot, c.parity), b.exact_vertex(l, j)))
    return out


def _inner(v: ExactVec, D: ExactVec) -> LinForm:
    return v.x.scale(D.x.terms.get("1", QF(0))) + v.y.scale(D.y.terms.get("1", QF(0)))


def _steps_of(vec: np.ndarray) -> Optional[int]:
    ang = math.atan2(vec[1], vec[0]) / (math.pi / 12)
    k = round(ang)
    return k % 24 if abs(ang - k) < 1e-9 else None


def orthogonal_pair(setup: QuantizedBilliard) -> Tuple[ExactVec, ExactVec]:
    """Orthogonal periods bounding the channels: (D1, D2), or (D1, 2 D2 - D1) on the triangle."""
    vals = setup.billiard.atom_values
    if abs(setup.D1.evaluate(vals) @ setup.D2.evaluate(vals)) <= PARALLEL_TOL:
        return setup.D1, setup.D2
    second = setup.D2 + setup.D2 - setup.D1
    if abs(setup.D1.evaluate(vals) @ second.evaluate(vals)) <= PARALLEL_TOL:
        return setup.D1, second
    raise errors.PeriodsNotOrthogonal("no orthogonal period pair among D1, D2, 2 D2 - D1")


def singular_diagonals(setup: QuantizedBilliard, D1: Optional[ExactVec] = None,
                       D2: Optional[ExactVec] = None, samples: int = 256,
                       max_lines: Optional[int] = None) -> List[Tuple[SingularDiagonal, ResidualReport]]:
    """Lines through pattern vertices parallel to an orthogonal period pair, folded into the billiard.

    On the line x' = c the sine-product form gives
    |Psi_raw| <= 4 sum_r |sin(c p.R(alpha_r) e1)|, bounded through the Dirichlet data.
    """
    D1 = setup.D1 if D1 is None else D1
    D2 = setup.D2 if D2 is None else D2
    vals = setup.billiard.atom_values
    d1, d2 = D1.evaluate(vals), D2.evaluate(vals)
    if abs(d1 @ d2) > PARALLEL_TOL * np.linalg.norm(d1) * np.linalg.norm(d2):
        raise errors.PeriodsNotOrthogonal("singular diagonals need orthogonal periods")
    terms = reduction_for(setup)
    r12 = len(terms)
    s1 = _steps_of(d1)
    if s1 is None or ((s1 - setup.billiard.theta0_steps) * setup.billiard.C) % 12:
        raise errors.SymmetryAbsent("period pair is not aligned with the mirror axes")
    epp = setup.epp
    lins, trans, _ = _cell_data(epp)
    verts = _exact_vertices(epp)
    out = []
    for axis, D, dvec in (("x", D1, d1), ("y", D2, d2)):
        norm2 = _inner(D, D).terms.get("1", QF(0))
        inv = norm2.inverse()
        seen: Dict[float, LinForm] = {}
        for v in verts:
            s = _inner(v, D).scale(inv)        # v . D / |D|^2
            key = round(s.evaluate(vals), 9)
            seen.setdefault(key, s)
        unit = dvec / np.linalg.norm(dvec)
        steps = 0
        for key in sorted(seen)[: max_lines]:
            s = seen[key]
            offset = key * float(np.linalg.norm(dvec))
            segs = []
            for L, t in zip(lins, trans):
                # billiard points r with (L r + t) . unit = offset
                normal = L.T @ unit
                c = offset - t @ unit
                direction = np.array([-normal[1], normal[0]])
                seg = _line_points(setup.billiard, c * normal, direction, samples)
                if len(seg):
                    segs.append(seg)
            if not segs:
                continue
            pts = np.vstack(segs)
            measured = _max_abs(setup, pts)
            bound_raw = 0.0
            detail = []
            for r in range(r12):
                rot = steps + r * (12 // r12)
                v = D.rotate(rot)
                # v_r = s R(alpha_r) D, and p.v_r = pi (m Z1 A + n Z2 B) with A = 2 u1.v_r
                vr = ExactVec(_mul_forms(s, v.x), _mul_forms(s, v.y))
                pb = vector_phase_bound(setup, vr, Fraction(2))
                bound_raw += 4 * pb.value
                detail.append({"alpha": math.pi * r / r12, "residue": pb.residue, "error": pb.error,
                               "bounded": pb.bounded})
            line = SingularDiagonal(axis, offset, tuple(segs))
            rep = ResidualReport(f"{axis}'={offset:.9g}", len(pts), measured,
                                 abs(setup.normalization) * bound_raw,
                                 {"terms": detail, "N": setup.N}, roundoff(setup))
            out.append((line, rep))
    return out


def _mul_forms(s: LinForm, c: LinForm) -> Optional[LinForm]:
    """Product of two linear forms when one of them is constant."""
    if set(c.symbols()) <= {"1"}:
        return s.scale(c.terms.get("1", QF(0)))
    if set(s.symbols()) <= {"1"}:
        return c.scale(s.terms.get("1", QF(0)))
    raise errors.MixedBasis("product of two symbolic forms")


# ---------------------------------------------------------------------------
# regluing


def reglue_bound(setup: QuantizedBilliard, pairing: Pairing) -> Tuple[float, Dict[str, object]]:
    """Bound on the raw |Psi' - Psi| after moving a cell by the pairing's period D.

    2 pi (|m| I1 N^(-1/mu1) + |n| I2 N^(-1/mu2)), plus 2|sin(pi K)| when the
    LCMs leave a rational residue K; never above 2.
    """
    if pairing.exact is None:
        return 2.0, {"bounded": False}
    u1, u2 = _dual_vectors(setup.D1, setup.D2)
    A = linform_to_combination(_dot(u1, pairing.exact), setup.billiard)
    B = linform_to_combination(_dot(u2, pairing.exact), setup.billiard)
    pb = phase_bound(setup, A, B)
    if not pb.bounded:
        return 2.0, {"bounded": False}
    rat = setup.rationalization
    I1 = sum(abs(c) for _, c in A.coeffs) * rat.C_x
    I2 = sum(abs(c) for _, c in B.coeffs) * rat.C_y
    st = setup.state
    printed = 2 * math.pi * (abs(st.m) * float(I1) * (setup.N ** (-1.0 / rat.x.mu) if rat.x.mu else 0.0)
                             + abs(st.n) * float(I2) * (setup.N ** (-1.0 / rat.y.mu) if rat.y.mu else 0.0))
    bound = min(2.0, printed + 2 * abs(math.sin(math.pi * pb.residue)))
    return bound, {"I1": str(I1), "I2": str(I2), "printed": printed, "residue": pb.residue,
                   "bounded": True}


# ---------------------------------------------------------------------------
# grids


@dataclass(frozen=True)
class ScalarField:
    region: Tuple[float, float, float, float]       # xmin, xmax, ymin, ymax
    resolution: Tuple[int, int]                     # nx, ny
    values: np.ndarray = field(repr=False)          # (ny, nx) complex, nan outside
    mask: np.ndarray = field(repr=False)            # (ny, nx) bool
    state: QuantumState = field(repr=False, default=None)

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(self.region[0], self.region[1], self.resolution[0])

    @property
    def ys(self) -> np.ndarray:
        return np.linspace(self.region[2], self.region[3], self.resolution[1])

    def to_csv(self, path):
        X, Y = np.meshgrid(self.xs, self.ys)
        with open(path, "w", newline="") as fh:
            fh.write("x,y,re,im,abs\n")
            for x, y, v, ok in zip(X.ravel(), Y.ravel(), self.values.ravel(), self.mask.ravel()):
                if ok:
                    fh.write(f"{x:.12g},{y:.12g},{v.real:.12g},{v.imag:.12g},{abs(v):.12g}\n")

    def to_pgm(self, path):
        """Binary P5 image of |Psi| scaled to 0..255 over the in-mask maximum (top row = max y)."""
        mag = np.where(self.mask, np.abs(np.nan_to_num(self.values)), 0.0)
        top = mag[self.mask].max() if self.mask.any() else 0.0
        img = np.zeros_like(mag) if top == 0 else np.round(mag / top * 255)
        data = img[::-1].astype(np.uint8)
        ny, nx = data.shape
        with open(path, "wb") as fh:
            fh.write(f"P5\n{nx} {ny}\n255\n".encode())
            fh.write(data.tobytes())


def grid_field(setup: QuantizedBilliard, resolution, region=None) -> ScalarField:
    if isinstance(resolution, int):
        resolution = (resolution, resolution)
    nx, ny = (int(v) for v in resolution)
    if nx < 2 or ny < 2:
        raise errors.BadResolution("grid needs at least 2x2 points")
    pts = setup.billiard.points[0]
    if region is None:
        region = (float(pts[:, 0].min()), float(pts[:, 0].max()),
                  float(pts[:, 1].min()), float(pts[:, 1].max()))
    xs = np.linspace(region[0], region[1], nx)
    ys = np.linspace(region[2], region[3], ny)
    X, Y = np.meshgrid(xs, ys)
    flat = np.column_stack([X.ravel(), Y.ravel()])
    mask = inside_mask(setup.billiard, flat)
    vals = np.full(len(flat), np.nan + 0j, complex)
    if mask.any():
        inside = flat[mask]
        workers = _threads()
        if workers > 1 and len(inside) > 4096:
            chunks = np.array_split(inside, workers)
            with ThreadPoolExecutor(workers) as pool:
                parts = list(pool.map(lambda c: normalized(setup, c, check=False), chunks))
            vals[mask] = np.concatenate(parts)
        else:
            vals[mask] = normalized(setup, inside, check=False)
    return ScalarField(tuple(region), (nx, ny), vals.reshape(ny, nx), mask.reshape(ny, nx), setup.state)
