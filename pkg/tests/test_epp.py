import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

import billiardquant as bq
from billiardquant import errors
from billiardquant.epp import (build_full, build_sector, compute_genus, constant_vector,
                               enumerate_periods, integer_rank, period_coefficients, period_set,
                               reglue, same_period_span, surface_genus, twin_displacement)

FAMILIES = {
    "square": lambda: bq.rectangle(1, 1),
    "rect-holes-2": lambda: bq.builtin_family("rect-holes", k=2),
    "rect-holes-3": lambda: bq.builtin_family("rect-holes", k=3),
    "rotated-2": lambda: bq.builtin_family("rect-rotated-holes", k=2),
    "sinai": lambda: bq.sinai_polygon(),
}


def vertex_multiset(polys, decimals=9):
    return Counter(tuple(np.round(p, decimals) + 0.0) for poly in polys for p in poly)


def admissible_bases(b):
    out = []
    for side in b.sides():
        try:
            build_sector(b, side)
        except errors.InvalidVertex:
            continue
        out.append(side)
    return out


def test_square_sector_tiles_block(square):
    epp = build_sector(square, (0, 0))
    assert len(epp.cells) == 4
    pts = np.vstack([p for c in epp.cells for p in epp.cell_polygons(c)])
    assert np.allclose(pts.min(axis=0), [-1, -1]) and np.allclose(pts.max(axis=0), [1, 1])


def test_sinai_sector_has_twelve_cells(sinai):
    epp = build_sector(sinai, (0, 2))
    assert (epp.q, len(epp.cells)) == (6, 12)


def test_rect_hole_sector_has_four_cells(rect_hole):
    assert len(build_sector(rect_hole, (0, 0)).cells) == 4


@pytest.mark.parametrize("name", sorted(FAMILIES))
def test_sector_rotation_invariance(name):
    b = FAMILIES[name]()
    for base in admissible_bases(b):
        epp = build_sector(b, base)
        centre = b.points[base[0]][base[1]]
        polys = [p for c in epp.cells for p in epp.cell_polygons(c)]
        angle = 2 * math.pi / epp.q
        rot = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
        turned = [(p - centre) @ rot.T + centre for p in polys]
        assert vertex_multiset(polys) == vertex_multiset(turned)


@pytest.mark.parametrize("name", sorted(FAMILIES))
def test_full_pattern_invariants(name):
    b = FAMILIES[name]()
    epp = build_full(b, (0, 0))
    assert len(epp.cells) == 2 * b.C
    periods = enumerate_periods(epp)
    seen = Counter((c, pr.side) for pr in epp.pairings for c in (pr.a, pr.b))
    assert set(seen.values()) == {1}
    assert len(seen) == len(epp.cells) * b.total_sides
    for per in periods:
        a = epp.cells[per.even_cell].isometry(b)
        c = epp.cells[per.odd_cell].isometry(b)
        ends = np.array(b.side_points(*per.side))
        assert np.abs(a.apply(ends) + per.vector - c.apply(ends)).max() < 1e-9


def test_sinai_counts(sinai):
    epp = build_full(sinai, (0, 2))
    periods = enumerate_periods(epp)
    assert len(periods) == 78 == epp.expected_period_count
    assert integer_rank(epp, periods) == 74
    assert compute_genus(sinai).g == 37


def test_single_sector_case_matches_formula(sinai):
    epp = build_full(sinai, (0, 2))
    assert epp.m == 1
    assert len(epp.periods) == sinai.C * (sinai.total_sides - 2)


def test_sinai_period_count_at_pi_over_three_corner(sinai):
    # the two sector copies meet along two sides, one more than the formula assumes
    epp = build_full(sinai, (0, 0))
    assert epp.m == 2
    assert len(epp.periods) == 76
    assert integer_rank(epp) == 74


def test_rect_hole_counts(rect_hole):
    epp = build_full(rect_hole, (0, 0))
    assert len(enumerate_periods(epp)) == 12 == epp.expected_period_count
    assert integer_rank(epp) == 10 == 2 * compute_genus(rect_hole).g


def test_square_periods(square):
    epp = build_full(square, (0, 0))
    assert period_set(epp) == {(2.0, 0.0), (0.0, 2.0)}
    assert integer_rank(epp) == 2
    assert compute_genus(square).g == 1


def test_rect_hole_period_has_hole_coefficient(rect_hole):
    epp = build_full(rect_hole, (0, 0))
    coeffs = period_coefficients(epp, constant_vector(2, 0), constant_vector(0, 2))
    assert any(A.as_dict() == {"w1/a": Fraction(1)} and not B.as_dict() for A, B in coeffs)


def test_bad_base_vertex(square):
    with pytest.raises(errors.InvalidVertex):
        build_full(square, (0, 7))


def test_twin_displacement_examples():
    assert np.allclose(twin_displacement((0.3, 0.7), 0), (0, -1.4))
    assert np.allclose(twin_displacement((0.3, 0.7), 0.5), (-0.6, 0))
    assert np.allclose(twin_displacement((1, 0), 1 / 6), (-0.5, -math.sqrt(3) / 2))


def test_twin_displacement_lands_on_mirror_image():
    rng = np.random.default_rng(3)
    for _ in range(200):
        p, g = rng.normal(size=2), rng.random()
        u = np.array([math.cos(math.pi * g), -math.sin(math.pi * g)])
        mirror = 2 * (p @ u) * u - p
        assert np.allclose(p + twin_displacement(p, g), mirror)


@pytest.mark.parametrize("name", sorted(FAMILIES))
def test_genus_euler_matches_closed_form(name):
    rep = compute_genus(FAMILIES[name]())
    assert (rep.E - rep.V - rep.S + 2) / 2 == rep.closed_form == rep.g


@pytest.mark.parametrize("name", sorted(FAMILIES))
def test_rank_and_genus_independent_of_base(name):
    b = FAMILIES[name]()
    g = compute_genus(b).g
    for base in admissible_bases(b):
        epp = build_full(b, base)
        assert integer_rank(epp) == 2 * g
        assert surface_genus(epp) == g


def test_closed_form_genus_values():
    assert [compute_genus(bq.builtin_family("rect-holes", k=k)).g for k in (2, 3, 4)] == [5, 9, 13]
    assert [compute_genus(bq.builtin_family("rect-rotated-holes", k=k)).g for k in (2, 3)] == [9, 17]


def test_reglue_round_trip(square):
    epp = build_full(square, (0, 0))
    pr = epp.periods[0]
    moved = reglue(epp, pr.even_cell, pr.side)
    back_pair = [p for p in moved.pairings if not p.glued and pr.even_cell in (p.a, p.b)]
    assert same_period_span(epp, moved)
    for p in back_pair:
        again = reglue(moved, pr.even_cell, p.side)
        if np.allclose(again.cells[pr.even_cell].translation, epp.cells[pr.even_cell].translation):
            assert period_set(again) == period_set(epp)
            return
    pytest.fail("no reglue returns the cell")


def test_reglue_square_keeps_periods(square):
    epp = build_full(square, (0, 0))
    for pr in epp.periods:
        assert same_period_span(epp, reglue(epp, pr.even_cell, pr.side))


def test_reglue_errors(square):
    epp = build_full(square, (0, 0))
    with pytest.raises(errors.NotBoundaryCell):
        reglue(epp, 99, (0, 0))
    glued = next(pr for pr in epp.pairings if pr.glued)
    with pytest.raises(errors.NotTwinSide):
        reglue(epp, glued.a, glued.side)


@pytest.mark.xfail(reason="every cell sits in the closed sector, so a move breaks one glued "
                          "cycle and leaves 13 periods", strict=True)
def test_rect_hole_reglue_keeps_count(rect_hole):
    epp = build_full(rect_hole, (0, 0))
    pr = epp.periods[0]
    assert len(enumerate_periods(reglue(epp, pr.even_cell, pr.side))) == 12


def test_epp_json(sinai):
    data = build_full(sinai, (0, 2)).to_json()
    assert data["schema"] == "v1" and data["period_count"] == 78 and len(data["cells"]) == 12
