import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from billiardquant import errors
from billiardquant.diophantine import (RationalCombination, all_admissible_Z, dirichlet_approx,
                                       rationalize_angles, rationalize_period_coefficients)


def nearest(x):
    return math.floor(x + 0.5) if x >= 0 else -math.floor(-x + 0.5)


def scan_oracle(alphas, N):
    """Smallest Z in 1..N with every |Z a - round(Z a)| <= N^(-1/p)."""
    bound = N ** (-1.0 / len(alphas))
    for Z in range(1, N + 1):
        if all(abs(Z * a - nearest(Z * a)) <= bound + 1e-14 for a in alphas):
            return Z
    raise AssertionError("Dirichlet guarantees a solution")


def test_integers_give_one():
    res = dirichlet_approx([3.0, -2.0, 7.0], 50)
    assert res.Z == 1 and res.max_error == 0


def test_rational_lcm_case():
    for N in (12, 13, 100, 10 ** 4):
        res = dirichlet_approx([Fraction(3, 4), Fraction(5, 6)], N)
        assert res.Z == 12 and res.numerators == (9, 10) and res.max_error == 0


def test_sqrt2_oracle():
    res = dirichlet_approx([math.sqrt(2)], 10)
    assert (res.Z, res.numerators) == (5, (7,))
    assert math.isclose(res.errors[0], abs(5 * math.sqrt(2) - 7))
    assert res.errors[0] < 0.1
    assert min(all_admissible_Z([math.sqrt(2)], 10)) == 5


def test_admissible_lists():
    assert all_admissible_Z([2.0, 5.0], 9) == list(range(1, 10))
    assert 12 in all_admissible_Z([0.75, 5 / 6], 40)


def test_bad_inputs():
    with pytest.raises(errors.BilliardError):
        dirichlet_approx([], 10)
    with pytest.raises(errors.BilliardError):
        dirichlet_approx([0.5], 0)


def test_random_tuples_match_scan():
    rng = random.Random(7)
    for _ in range(1000):
        p = rng.randint(1, 4)
        N = rng.choice([10, 100, 1000, rng.randint(2, 10 ** 4)])
        alphas = [rng.uniform(-5, 5) for _ in range(p)]
        res = dirichlet_approx(alphas, N)
        assert 1 <= res.Z <= N
        assert res.max_error <= N ** (-1.0 / p) + 1e-14
        assert res.Z == scan_oracle(alphas, N)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-3, 3, allow_nan=False), min_size=1, max_size=3),
       st.integers(1, 3000))
def test_certificate_holds(alphas, N):
    res = dirichlet_approx(alphas, N)
    for a, zk in zip(alphas, res.numerators):
        assert abs(res.Z * a - zk) <= N ** (-1.0 / len(alphas)) + 1e-14


def test_certified_bound_monotone():
    alphas = [math.sqrt(2), math.pi - 3]
    last_Z, last_bound = None, math.inf
    for N in range(2, 3000):
        res = dirichlet_approx(alphas, N)
        if res.Z != last_Z:
            assert res.certified_error <= last_bound
            last_Z, last_bound = res.Z, res.certified_error


def test_rational_angles_unchanged():
    out = rationalize_angles([0.5, 1 / 3, 1 / 6], 100, distinguished=0)
    assert [a.fraction for a in out.angles] == [Fraction(1, 2), Fraction(1, 3), Fraction(1, 6)]


def test_perturbed_triangle_closes_exactly():
    eps = 1e-3
    angles = [0.5, 1 / 3 + eps, 1 / 6 - eps]
    out = rationalize_angles(angles, 10 ** 4, distinguished=0)
    assert sum(a.fraction for a in out.angles) == 1
    free = [e for i, e in enumerate(out.errors) if i != out.distinguished]
    assert max(free) <= out.bound_each + 1e-15
    assert out.errors[out.distinguished] <= out.bound_distinguished + 1e-15


def test_angle_sum_violation():
    with pytest.raises(errors.ClosureViolation):
        rationalize_angles([0.5, 0.5, 0.5], 100)


def test_rational_coordinates_have_zero_error():
    combos = [(RationalCombination.build(Fraction(1, 2)), RationalCombination.build(Fraction(3, 4)))]
    rat = rationalize_period_coefficients(combos, {}, 1000)
    assert rat.x.dirichlet is None or rat.x.dirichlet.max_error == 0
