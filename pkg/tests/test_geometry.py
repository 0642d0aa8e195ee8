import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import billiardquant as bq
from billiardquant import errors
from billiardquant.geometry import (SymbolicCoord, BasisElement, evaluate_symbolic, reflect_point,
                                    rotate_point)

coords = st.floats(-10, 10, allow_nan=False)


def raw_square(holes=()):
    def c(v):
        f = Fraction(v)
        return {"rat": [f.numerator, f.denominator], "terms": []}
    poly = lambda pts: [[c(x), c(y)] for x, y in pts]
    return {"basis": [], "outer": poly([(0, 0), (1, 0), (1, 1), (0, 1)]),
            "holes": [poly(h) for h in holes]}


def test_unit_square_angles():
    b = bq.make_billiard(raw_square())
    assert (b.C, b.k) == (2, 1)
    assert b.angle_sum == 2 == b.closure_constant


def test_square_with_hole_angles():
    hole = [(Fraction(1, 4), Fraction(1, 4)), (Fraction(1, 2), Fraction(1, 4)),
            (Fraction(1, 2), Fraction(1, 2)), (Fraction(1, 4), Fraction(1, 2))]
    b = bq.make_billiard(raw_square([hole]))
    assert b.C == 2
    assert sorted(a.fraction for a in b.angles[0]) == [Fraction(1, 2)] * 4
    assert sorted(a.fraction for a in b.angles[1]) == [Fraction(3, 2)] * 4
    assert b.angle_sum == 8


def test_triangle_with_dodecagon(sinai):
    assert sinai.C == 6
    assert [a.fraction for a in sinai.angles[1]] == [Fraction(7, 6)] * 12
    assert sinai.angle_sum == sinai.closure_constant == 15


def test_hole_outside_is_rejected():
    hole = [(2, 2), (3, 2), (3, 3), (2, 3)]
    with pytest.raises(errors.InvalidSpec):
        bq.make_billiard(raw_square([hole]))


def test_malformed_spec_is_rejected():
    with pytest.raises(errors.InvalidSpec):
        bq.make_billiard({"outer": "nope"})


def test_reflect_examples():
    assert np.allclose(reflect_point((1, 2), (0, 0), (1, 0)), (1, -2))
    assert np.allclose(reflect_point((1, 2), (0, 0), (1, 1)), (2, 1))
    assert np.allclose(reflect_point((3, 3), (0, 0), (1, 1)), (3, 3))


def test_rotate_examples():
    assert np.allclose(rotate_point((1, 0), math.pi / 2), (0, 1), atol=1e-15)
    p = np.array([0.3, -1.7])
    for C in (2, 3, 4, 6, 12):
        q = p
        for _ in range(C):
            q = rotate_point(q, 2 * math.pi / C)
        assert np.allclose(q, p, atol=1e-10)


def test_symbolic_evaluation():
    assert evaluate_symbolic(SymbolicCoord.of(Fraction(1, 2)), []) == 0.5
    coord = SymbolicCoord.of(0, (1, 0))
    h = BasisElement("sqrt3*h", math.sqrt(3) * 0.4, 3, "h")
    assert math.isclose(evaluate_symbolic(coord, [h.value]), 0.6928203230275509, rel_tol=1e-12)


def test_sinai_vertices_from_basis(sinai):
    values = {b.name: b.value for b in sinai.basis}
    assert {"w", "sqrt3*h", "r", "sqrt3*r"} <= set(values)
    assert np.allclose(sinai.points[0], [[0, 0], [1, 0], [1, math.sqrt(3)]])


@settings(max_examples=1000, deadline=None)
@given(coords, coords, coords, coords, coords, coords)
def test_reflection_is_involution(x, y, ax, ay, bx, by):
    if math.hypot(bx - ax, by - ay) < 1e-3:
        return
    p = reflect_point(reflect_point((x, y), (ax, ay), (bx, by)), (ax, ay), (bx, by))
    assert np.allclose(p, (x, y), atol=1e-10 * (1 + abs(x) + abs(y) + abs(ax) + abs(ay)))


@settings(max_examples=1000, deadline=None)
@given(coords, coords, st.floats(-7, 7), st.floats(-7, 7))
def test_rotation_composes_additively(x, y, a, b):
    p = rotate_point(rotate_point((x, y), a), b)
    assert np.allclose(p, rotate_point((x, y), a + b), atol=1e-10 * (1 + abs(x) + abs(y)))


@pytest.mark.parametrize("name", ["rect-holes", "rect-rotated-holes", "sinai-polygon"])
def test_angle_sum_and_divisibility(name):
    b = bq.builtin_family(name)
    assert b.angle_sum == b.closure_constant
    assert all(b.C % a.q == 0 for poly in b.angles for a in poly)
    assert all(b.C % c == 0 for c in b.polygon_lcms)
