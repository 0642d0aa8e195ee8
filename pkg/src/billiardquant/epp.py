"""Elementary polygon patterns: unfolding a rational billiard into 2C images.

A cell is an isometry x -> L x + t applied to the billiard, with L drawn from
the dihedral group of order 2C generated by the side mirrors. Each group
element appears exactly once. Sides of neighbouring cells that coincide are
glued; the remaining boundary sides pair up into twins related by a
translation, the period.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import errors
from .diophantine import RationalCombination
from .exact import ExactVec, LinForm, solve_2x2
from .geometry import GEOM_TOL, BilliardSpec, Isometry, exact_linear

Side = Tuple[int, int]


@dataclass(frozen=True)
class EppCell:
    index: int
    rot: int
    parity: int
    translation: np.ndarray = field(repr=False)
    exact_translation: Optional[ExactVec] = field(default=None, repr=False)
    copy: int = 1          # u: which sector copy the cell belongs to
    r: int = 1             # position inside its sector

    def isometry(self, billiard: BilliardSpec) -> Isometry:
        return Isometry(self.rot, self.parity, billiard.C, billiard.theta0,
                        tuple(float(v) for v in self.translation))

    @property
    def sign(self) -> int:
        return -1 if self.parity else 1


@dataclass(frozen=True)
class Pairing:
    """Side (l, j) of cell a identified with side (l, j) of cell b.

    `a` is the even cell. Cell b's copy of the side equals cell a's copy
    translated by `vector`; glued pairings have a zero vector.
    """

    a: int
    b: int
    side: Side
    vector: np.ndarray = field(repr=False)
    exact: Optional[ExactVec] = field(default=None, repr=False)

    @property
    def glued(self) -> bool:
        return bool(np.linalg.norm(self.vector) < GEOM_TOL)


@dataclass(frozen=True)
class Period:
    vector: np.ndarray
    exact: Optional[ExactVec]
    side: Side
    even_cell: int
    odd_cell: int

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.vector))


@dataclass(frozen=True)
class Epp:
    billiard: BilliardSpec
    base: Side
    p: int
    q: int
    cells: Tuple[EppCell, ...]
    R: Tuple[np.ndarray, ...]
    pairings: Tuple[Pairing, ...]

    @property
    def m(self) -> int:
        return self.billiard.C // self.q

    @property
    def periods(self) -> List[Period]:
        return [Period(pr.vector, pr.exact, pr.side, pr.a, pr.b)
                for pr in self.pairings if not pr.glued]

    @property
    def expected_period_count(self) -> int:
        b = self.billiard
        return b.C * (b.total_sides - 2) - self.m + 1

    def cell_of(self, rot: int, parity: int) -> EppCell:
        for c in self.cells:
            if c.rot == rot and c.parity == parity:
                return c
        raise KeyError((rot, parity))

    def cell_polygons(self, cell: EppCell) -> List[np.ndarray]:
        iso = cell.isometry(self.billiard)
        return [iso.apply(pts) for pts in self.billiard.points]

    def images(self, point) -> Tuple[np.ndarray, np.ndarray]:
        """All 2C images of a billiard point, with their parity signs."""
        pts = np.array([c.isometry(self.billiard).apply(np.asarray(point, float))
                        for c in self.cells])
        return pts, np.array([c.sign for c in self.cells])

    def boundary_sides(self, cell_index: int) -> List[Pairing]:
        return [pr for pr in self.pairings if not pr.glued and cell_index in (pr.a, pr.b)]

    def to_json(self):
        return {
            "schema": "v1",
            "base_vertex": list(self.base),
            "angle": [self.p, self.q],
            "C": self.billiard.C,
            "m": self.m,
            "cells": [{"index": c.index, "rotation_index": c.rot, "parity": "odd" if c.parity else "even",
                       "copy": c.copy, "r": c.r, "translation": [float(v) for v in c.translation]}
                      for c in self.cells],
            "R": [[float(v) for v in r] for r in self.R],
            "pairings": [{"a": pr.a, "b": pr.b, "side": list(pr.side), "glued": pr.glued,
                          "vector": [float(v) for v in pr.vector]} for pr in self.pairings],
            "period_count": len(self.periods),
        }


# ---------------------------------------------------------------------------
# construction helpers


class _Group:
    """Dihedral group elements (rot, parity) of order 2C for one billiard."""

    def __init__(self, billiard: BilliardSpec):
        self.b = billiard
        self.C = billiard.C
        try:
            self.theta0_steps = billiard.theta0_steps
            self.exact_ok = 24 % self.C == 0
        except ValueError:
            self.theta0_steps, self.exact_ok = 0, False

    def mul(self, g, h):
        step = -h[0] if g[1] else h[0]
        return ((g[0] + step) % self.C, (g[1] + h[1]) % 2)

    def mirror(self, side: Side):
        return (self.b.side_steps[side[0]][side[1]], 1)

    def linear(self, g) -> np.ndarray:
        return Isometry(g[0], g[1], self.C, self.b.theta0).linear

    def apply_exact(self, g, v: ExactVec) -> ExactVec:
        return exact_linear(g[0], g[1], self.C, self.theta0_steps, v)


def _mirror_neighbour(group: _Group, billiard: BilliardSpec, g, t, t_exact, side: Side):
    """Element and translation of the cell obtained by mirroring across `side`."""
    gs = group.mul(g, group.mirror(side))
    P = billiard.points[side[0]][side[1]]
    t_new = t + group.linear(g) @ P - group.linear(gs) @ P
    ex = None
    if t_exact is not None:
        Pe = billiard.exact_vertex(*side)
        ex = t_exact + group.apply_exact(g, Pe) - group.apply_exact(gs, Pe)
    return gs, t_new, ex


def _sector(group: _Group, billiard: BilliardSpec, base: Side):
    """Elements of the sector around the base vertex, in angular order."""
    l, j = base
    n = len(billiard.polygons[l])
    side_in, side_out = (l, (j - 1) % n), (l, j)
    angle = billiard.angles[l][j]
    elems = [(0, 0)]
    use_out = True
    while True:
        nxt = group.mul(elems[-1], group.mirror(side_out if use_out else side_in))
        use_out = not use_out
        if nxt == elems[0]:
            break
        elems.append(nxt)
        if len(elems) > 2 * group.C:
            raise errors.InvalidVertex("sector does not close")
    if len(elems) != 2 * angle.q:
        raise errors.InvalidVertex(
            f"sector at vertex {base} has {len(elems)} cells, expected {2 * angle.q}")
    return elems


def build_sector(billiard: BilliardSpec, base: Side = (0, 0)) -> Epp:
    """The 2q images around the base vertex (the whole EPP when C = q)."""
    return _build(billiard, base, full=False)


def build_full(billiard: BilliardSpec, base: Side = (0, 0)) -> Epp:
    return _build(billiard, base, full=True)


def _check_base(billiard: BilliardSpec, base: Side):
    l, j = base
    if not (0 <= l < billiard.k and 0 <= j < len(billiard.polygons[l])):
        raise errors.InvalidVertex(f"no vertex {base}")


def _build(billiard: BilliardSpec, base: Side, full: bool) -> Epp:
    _check_base(billiard, base)
    group = _Group(billiard)
    angle = billiard.angles[base[0]][base[1]]
    V = billiard.points[base[0]][base[1]]
    Ve = billiard.exact_vertex(*base) if group.exact_ok else None
    sector = _sector(group, billiard, base)

    cells: List[EppCell] = []
    R = [np.zeros(2)]

    def add_copy(elems, offset, offset_exact, base_elem, copy_no):
        for r, h in enumerate(elems, start=1):
            g = group.mul(base_elem, h)
            t = offset + V - group.linear(g) @ V
            te = None
            if Ve is not None:
                te = offset_exact + Ve - group.apply_exact(g, Ve)
            cells.append(EppCell(len(cells), g[0], g[1], t, te, copy_no, r))

    add_copy(sector, np.zeros(2), ExactVec.zero() if Ve is not None else None, (0, 0), 1)
    present = {(c.rot, c.parity) for c in cells}
    target = 2 * billiard.C if full else 2 * angle.q
    copy_no = 1
    while len(cells) < target:
        chosen = None
        for c in cells:
            for side in billiard.sides():
                gs, t_m, te_m = _mirror_neighbour(group, billiard, (c.rot, c.parity),
                                                  c.translation, c.exact_translation, side)
                if gs not in present:
                    chosen = (gs, t_m, te_m)
                    break
            if chosen:
                break
        if chosen is None:
            raise errors.NoGluingSide("no boundary side leads to a missing sector copy")
        gs, t_m, te_m = chosen
        copy_no += 1
        # the new copy is the isometric image of the base sector under (gs, t_m)
        offset = t_m + group.linear(gs) @ V - V
        off_e = None
        if te_m is not None:
            off_e = te_m + group.apply_exact(gs, Ve) - Ve
        R.append(offset)
        add_copy(sector, offset, off_e, gs, copy_no)
        present = {(c.rot, c.parity) for c in cells}
        if len(present) != len(cells):
            raise errors.NoGluingSide("sector copies overlap in the group")

    pairings = _pair_sides(billiard, group, cells)
    return Epp(billiard, base, angle.p, angle.q, tuple(cells), tuple(R), tuple(pairings))


def _pair_sides(billiard: BilliardSpec, group: _Group, cells: Sequence[EppCell]) -> List[Pairing]:
    by_elem = {(c.rot, c.parity): c for c in cells}
    out = []
    for c in cells:
        if c.parity:
            continue
        for side in billiard.sides():
            gs, t_m, te_m = _mirror_neighbour(group, billiard, (c.rot, c.parity),
                                              c.translation, c.exact_translation, side)
            other = by_elem.get(gs)
            if other is None:
                # only possible for a partial (sector) pattern
                continue
            vec = other.translation - t_m
            ex = None
            if te_m is not None and other.exact_translation is not None:
                ex = other.exact_translation - te_m
            out.append(Pairing(c.index, other.index, side, vec, ex))
    return out


def enumerate_periods(epp: Epp) -> List[Period]:
    """Twin-pair periods; checks that every boundary side is paired once."""
    if len(epp.cells) != 2 * epp.billiard.C:
        raise errors.UnpairedSide("pattern is not complete (use build_full)")
    seen = {}
    for pr in epp.pairings:
        for key in ((pr.a, pr.side), (pr.b, pr.side)):
            if key in seen:
                raise errors.UnpairedSide(f"side {key} paired twice")
            seen[key] = pr
    total = len(epp.cells) * epp.billiard.total_sides
    if len(seen) != total:
        raise errors.UnpairedSide(f"{total - len(seen)} sides without a partner")
    periods = epp.periods
    for per in periods:
        a = epp.cells[per.even_cell].isometry(epp.billiard)
        b = epp.cells[per.odd_cell].isometry(epp.billiard)
        ends = np.array(epp.billiard.side_points(*per.side))
        if np.abs(a.apply(ends) + per.vector - b.apply(ends)).max() > 1e-9:
            raise errors.UnpairedSide(f"period for side {per.side} does not map it onto its twin")
    return periods


def twin_displacement(point, gamma: float) -> np.ndarray:
    """Displacement to the twin image of `point`: its mirror in the line at angle -pi*gamma (clockwise)."""
    x, y = point
    s, c = math.sin(math.pi * gamma), math.cos(math.pi * gamma)
    return -np.array([2 * x * s * s + y * math.sin(2 * math.pi * gamma),
                      x * math.sin(2 * math.pi * gamma) + 2 * y * c * c])


# ---------------------------------------------------------------------------
# genus and homology


@dataclass(frozen=True)
class GenusReport:
    g: int
    E: Fraction
    V: Fraction
    S: int
    closed_form: Fraction


def compute_genus(billiard: BilliardSpec) -> GenusReport:
    C = billiard.C
    angs = [a for poly in billiard.angles for a in poly]
    E = C * sum((a.fraction for a in angs), Fraction(0)) + 4 * C
    V = C * sum((Fraction(1, a.q) for a in angs), Fraction(0))
    S = 4 * C
    g_euler = (E - V - S + 2) / 2
    closed = 1 + Fraction(C, 2) * sum((Fraction(a.p - 1, a.q) for a in angs), Fraction(0))
    if g_euler.denominator != 1 or g_euler != closed:
        raise AssertionError(f"genus mismatch {g_euler} vs {closed}")
    return GenusReport(int(g_euler), E, V, S, closed)


def _vertex_links(epp: Epp):
    """Walk once around every vertex of the glued surface.

    Returns (classes, links): classes is a list of corner lists; each link is a
    list of (kind, key, sign) crossings, kind 'edge' (a pairing index) or
    'cut' ((cell, hole)).
    """
    b = epp.billiard
    side_to_pair = {}
    for i, pr in enumerate(epp.pairings):
        side_to_pair[(pr.a, pr.side)] = (i, pr.b, +1)
        side_to_pair[(pr.b, pr.side)] = (i, pr.a, -1)
    # each hole is cut open from outer vertex 0 to its own vertex 0
    cut_ends = {}
    for h in range(1, b.k):
        cut_ends.setdefault((0, 0), []).append((h, +1))
        cut_ends.setdefault((h, 0), []).append((h, -1))

    visited = set()
    classes, links = [], []
    for start_cell in range(len(epp.cells)):
        for l, j in b.sides():
            if (start_cell, l, j) in visited:
                continue
            n = len(b.polygons[l])
            s_prev, s_next = (l, (j - 1) % n), (l, j)
            cell = start_cell
            corners, link = [], []
            while True:
                if (cell, l, j) in visited:
                    break
                visited.add((cell, l, j))
                corners.append((cell, l, j))
                sign = epp.cells[cell].sign
                for hole, s in cut_ends.get((l, j), []):
                    link.append(("cut", (cell, hole), s * sign))
                exit_side = s_prev if sign > 0 else s_next
                idx, other, orient = side_to_pair[(cell, exit_side)]
                link.append(("edge", idx, orient))
                cell = other
            classes.append(corners)
            links.append(link)
    return classes, links


def surface_genus(epp: Epp) -> int:
    """Genus of the closed surface glued from the pattern, counted directly."""
    classes, _ = _vertex_links(epp)
    faces_chi = len(epp.cells) * (2 - epp.billiard.k)
    chi = len(classes) - len(epp.pairings) + faces_chi
    return (2 - chi) // 2


_PRIMES = (2305843009213693951, 4611686018427387847)


def _rank_mod(rows: List[Dict[int, int]], prime: int) -> int:
    rows = [{k: v % prime for k, v in r.items() if v % prime} for r in rows]
    rows = [r for r in rows if r]
    rank = 0
    pivots: Dict[int, Dict[int, int]] = {}
    for r in rows:
        r = dict(r)
        while r:
            col = min(r)
            if col not in pivots:
                inv = pow(r[col], prime - 2, prime)
                pivots[col] = {k: v * inv % prime for k, v in r.items()}
                rank += 1
                break
            piv = pivots[col]
            f = r[col]
            for k, v in piv.items():
                nv = (r.get(k, 0) - f * v) % prime
                if nv:
                    r[k] = nv
                else:
                    r.pop(k, None)
    return rank


def rational_rank(rows: List[Dict[int, int]]) -> int:
    """Rank over Q of sparse integer rows (max over two large primes)."""
    return max(_rank_mod(rows, p) for p in _PRIMES)


def integer_rank(
    epp: Epp, periods: Sequence[Period] | None = None, hole_loops: bool = True
) -> int:
    """Rank of the period lattice as cycles on the glued surface.

    Coordinates are the non-tree edges of the dual graph (cells joined through
    glued sides form the tree), plus one loop per hole per cell for the cut
    that turns each cell into a disc. Vertex links give the relations.

    A period cycle crosses its twin side once and returns inside the cells; the
    return path may pass either side of a hole, so each class is fixed only up
    to hole loops. With ``hole_loops`` those loops join the lattice.
    """
    _, links = _vertex_links(epp)
    n = len(epp.cells)
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    tree = set()
    for i, pr in enumerate(epp.pairings):
        if pr.glued:
            ra, rb = find(pr.a), find(pr.b)
            if ra != rb:
                parent[ra] = rb
                tree.add(i)
    coord: Dict[Tuple, int] = {}

    def col(key):
        return coord.setdefault(key, len(coord))

    relations = []
    for link in links:
        row: Dict[int, int] = {}
        for kind, key, sign in link:
            if kind == "edge" and key in tree:
                continue
            c = col((kind, key))
            row[c] = row.get(c, 0) + sign
        relations.append({k: v for k, v in row.items() if v})
    wanted = periods if periods is not None else epp.periods
    index = {(pr.a, pr.side): i for i, pr in enumerate(epp.pairings)}
    period_rows = [{col(("edge", index[(p.even_cell, p.side)])): 1} for p in wanted]
    if hole_loops:
        period_rows += [{c: 1} for key, c in list(coord.items()) if key[0] == "cut"]
    return rational_rank(period_rows + relations) - rational_rank(relations)


# ---------------------------------------------------------------------------
# symbolic period coefficients


def linform_to_combination(form: LinForm, billiard: BilliardSpec) -> RationalCombination:
    """Express a linear form over symbols as a rational combination of declared basis names."""
    lookup = {(b.symbol, b.surd): b.name for b in billiard.basis}
    rational = Fraction(0)
    coeffs: Dict[str, Fraction] = {}
    for sym, qf in form.terms.items():
        for surd, coef in qf.items():
            if sym == "1" and surd == 1:
                rational += coef
                continue
            name = lookup.get((sym, surd))
            if name is None:
                label = sym if surd == 1 else f"sqrt{surd}*{sym}"
                raise errors.MixedBasis(f"{label} is not a declared basis element")
            coeffs[name] = coeffs.get(name, Fraction(0)) + coef
    return RationalCombination.build(rational, coeffs)


def period_coefficients(epp: Epp, D1: ExactVec, D2: ExactVec,
                        periods: Sequence[Period] | None = None):
    """(x, y) coefficient combinations of each period relative to D1, D2."""
    out = []
    for per in (periods if periods is not None else epp.periods):
        if per.exact is None:
            raise errors.MixedBasis("pattern has no exact period data for this geometry")
        try:
            c1, c2 = solve_2x2(D1, D2, per.exact)
        except ValueError as exc:
            raise errors.DegeneratePeriods(str(exc)) from exc
        out.append((linform_to_combination(c1, epp.billiard),
                    linform_to_combination(c2, epp.billiard)))
    return out


def constant_vector(x, y) -> ExactVec:
    """Exact vector from two field elements (or rationals)."""
    return ExactVec(LinForm.const(x), LinForm.const(y))


# ---------------------------------------------------------------------------
# regluing


def reglue(epp: Epp, cell_index: int, side: Side) -> Epp:
    """Move a boundary cell across one of its twin sides so that side becomes glued."""
    if not 0 <= cell_index < len(epp.cells):
        raise errors.NotBoundaryCell(f"no cell {cell_index}")
    twins = epp.boundary_sides(cell_index)
    if not twins:
        raise errors.NotBoundaryCell(f"cell {cell_index} has no boundary sides")
    match = [pr for pr in twins if pr.side == tuple(side)]
    if not match:
        raise errors.NotTwinSide(f"side {side} of cell {cell_index} is not a boundary twin side")
    pr = match[0]
    # cell a's copy + vector = cell b's copy; moving the cell onto the partner's side
    shift = pr.vector if cell_index == pr.a else -pr.vector
    shift_exact = None
    if pr.exact is not None:
        shift_exact = pr.exact if cell_index == pr.a else -pr.exact
    old = epp.cells[cell_index]
    te = old.exact_translation + shift_exact if (old.exact_translation is not None
                                                 and shift_exact is not None) else None
    moved = replace(old, translation=old.translation + shift, exact_translation=te)
    cells = list(epp.cells)
    cells[cell_index] = moved
    group = _Group(epp.billiard)
    pairings = _pair_sides(epp.billiard, group, cells)
    return replace(epp, cells=tuple(cells), pairings=tuple(pairings))


def period_set(epp: Epp, decimals: int = 9):
    """Periods as a set of vectors up to sign, rounded for comparison."""
    out = set()
    for per in epp.periods:
        v = np.round(per.vector, decimals) + 0.0
        w = np.round(-per.vector, decimals) + 0.0
        out.add(max(tuple(v), tuple(w)))
    return out


def _exact_row(vec: ExactVec, columns: Dict[Tuple, int]) -> Dict[int, int]:
    entries = {}
    for comp, form in enumerate((vec.x, vec.y)):
        for sym, qf in form.terms.items():
            for surd, coef in qf.items():
                if coef:
                    entries[columns.setdefault((comp, sym, surd), len(columns))] = Fraction(coef)
    scale = math.lcm(*(c.denominator for c in entries.values())) if entries else 1
    return {k: int(v * scale) for k, v in entries.items()}


def same_period_span(first: Epp, second: Epp) -> bool:
    """True when both patterns' periods span the same space of exact vectors."""
    if any(p.exact is None for p in first.periods + second.periods):
        a = np.array([p.vector for p in first.periods])
        b = np.array([p.vector for p in second.periods])
        ra = np.linalg.matrix_rank(a, tol=1e-9)
        return ra == np.linalg.matrix_rank(b, tol=1e-9) == np.linalg.matrix_rank(np.vstack([a, b]), tol=1e-9)
    columns: Dict[Tuple, int] = {}
    a = [_exact_row(p.exact, columns) for p in first.periods]
    b = [_exact_row(p.exact, columns) for p in second.periods]
    ra, rb = rational_rank(a), rational_rank(b)
    return ra == rb == rational_rank(a + b)

