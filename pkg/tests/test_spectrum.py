import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from billiardquant import errors
from billiardquant.diophantine import dirichlet_approx
from billiardquant.epp import build_full
from billiardquant.spectrum import (classify_skeleton, energy_closed_form, energy_orthogonal,
                                    measure_length, momentum_closed_form, quantize_aperiodic,
                                    quantize_periodic, spectrum_table, wavelength)

SQ3 = math.sqrt(3)
SINAI_D1, SINAI_D2 = (2.0, 0.0), (1.0, SQ3)
nonzero = st.integers(-6, 6).filter(bool)


def test_orthogonal_square():
    st_ = quantize_aperiodic((2, 0), (0, 2), 1, 1, 1, 1)
    assert math.isclose(st_.E, math.pi ** 2, rel_tol=1e-12)


def test_rectangle_levels_match_plane_wave_formula():
    a, b = 1.3, 0.7
    for m in (-3, 1, 2):
        for n in (1, 4):
            for Z in (1, 5):
                E = quantize_aperiodic((2 * a, 0), (0, 2 * b), Z, Z, m, n).E
                expected = 0.5 * math.pi ** 2 * ((m * Z / a) ** 2 + (n * Z / b) ** 2)
                assert math.isclose(E, expected, rel_tol=1e-12)


@pytest.mark.parametrize("Z", [1, 3, 560])
def test_sinai_levels(Z):
    for m in range(-5, 6):
        for n in range(-5, 6):
            if not m or not n:
                continue
            s = quantize_aperiodic(SINAI_D1, SINAI_D2, 6 * Z, 6 * Z, m, n)
            assert math.isclose(s.p @ np.array(SINAI_D1), 12 * math.pi * m * Z, rel_tol=1e-9)
            # unit period length: E |D|^2 / (96 pi^2 Z^2)
            q = s.E * 4 / (96 * math.pi ** 2 * Z ** 2)
            assert abs(q - round(q)) < 1e-9 and round(q) == m * m - m * n + n * n
            assert math.isclose(s.E, 24 * math.pi ** 2 * Z ** 2 * (m * m - m * n + n * n),
                                rel_tol=1e-12)


def test_hexagonal_m_equals_n_scales_quadratically():
    E1 = quantize_aperiodic(SINAI_D1, SINAI_D2, 6, 6, 1, 1).E
    for m in (2, 3, 7):
        s = quantize_aperiodic(SINAI_D1, SINAI_D2, 6, 6, m, m)
        assert math.isclose(s.E, m * m * E1, rel_tol=1e-12)
        assert math.isclose(s.E, energy_closed_form(SINAI_D1, SINAI_D2, 6, 6, m, m), rel_tol=1e-12)


def test_aperiodic_errors():
    with pytest.raises(errors.DegeneratePeriods):
        quantize_aperiodic((1, 1), (2, 2), 1, 1, 1, 1)
    with pytest.raises(errors.ZeroQuantumNumber):
        quantize_aperiodic((2, 0), (0, 2), 1, 1, 0, 1)


def test_momentum_solve_on_random_pairs():
    rng = np.random.default_rng(11)
    done = 0
    while done < 1000:
        D1, D2 = rng.normal(size=2) * rng.uniform(0.1, 10), rng.normal(size=2) * rng.uniform(0.1, 10)
        if abs(D1[0] * D2[1] - D1[1] * D2[0]) < 1e-3 * np.linalg.norm(D1) * np.linalg.norm(D2):
            continue
        Z1, Z2 = rng.integers(1, 1000, size=2)
        m, n = rng.integers(1, 20, size=2) * rng.choice([-1, 1], size=2)
        s = quantize_aperiodic(D1, D2, int(Z1), int(Z2), int(m), int(n))
        for D, target in ((D1, m * Z1), (D2, n * Z2)):
            assert abs(s.p @ D - 2 * math.pi * target) <= 1e-9 * abs(2 * math.pi * target)
        closed = momentum_closed_form(D1, D2, m * Z1, n * Z2)
        assert np.allclose(s.p, closed, rtol=1e-9, atol=1e-9 * np.linalg.norm(closed))
        assert math.isclose(s.E, energy_closed_form(D1, D2, Z1, Z2, m, n), rel_tol=1e-9)
        done += 1


@settings(max_examples=200, deadline=None)
@given(nonzero, nonzero, st.integers(1, 50), st.integers(1, 50))
def test_energy_symmetries(m, n, Z1, Z2):
    D1, D2 = (1.7, 0.2), (-0.4, 2.3)
    E = quantize_aperiodic(D1, D2, Z1, Z2, m, n).E
    assert math.isclose(E, quantize_aperiodic(D1, D2, Z1, Z2, -m, -n).E, rel_tol=1e-12)
    if Z1 == Z2:
        E_hex = quantize_aperiodic(SINAI_D1, SINAI_D2, Z1, Z1, m, n).E
        assert math.isclose(E_hex, quantize_aperiodic(SINAI_D1, SINAI_D2, Z1, Z1, n, m).E,
                            rel_tol=1e-12)


def test_periodic_orthogonal_pairs():
    with pytest.warns(errors.ConditionFViolated):
        plus, minus = quantize_periodic((2, 0), (0, 2), 1, 1, 1, 1)
    assert plus.kl == (0, 1) and plus.rs == (1, 0)
    assert math.isclose(plus.E, math.pi ** 2, rel_tol=1e-12)
    assert math.isclose(minus.E, math.pi ** 2, rel_tol=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.integers(-6, 6), nonzero, st.integers(1, 40), st.integers(1, 40),
       st.floats(0.2, 5), st.floats(0.2, 5))
def test_periodic_orthogonal_equals_aperiodic(m, n, Z1, Z2, L1, L2):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", errors.ConditionFViolated)
        plus, minus = quantize_periodic((L1, 0), (0, L2), Z1, Z2, m, n)
    expected = energy_orthogonal(L1, L2, Z1, Z2, m, n)
    assert math.isclose(plus.E, expected, rel_tol=1e-12)
    assert math.isclose(minus.E, expected, rel_tol=1e-12)
    if m:
        assert math.isclose(quantize_aperiodic((L1, 0), (0, L2), Z1, Z2, m, n).E, expected,
                            rel_tol=1e-12)


def test_running_wave_state():
    plus, minus = quantize_periodic((2, 0), (0, 2), 3, 3, 0, 2)
    assert plus.E0 == 0 and plus.E == minus.E
    assert math.isclose(plus.E, 2 * math.pi ** 2 * (2 * 3 / 2) ** 2, rel_tol=1e-12)


def test_condition_f_flags_without_dropping():
    with pytest.warns(errors.ConditionFViolated):
        plus, _ = quantize_periodic((2, 0), (0, 2), 1, 1, 5, 1)
    assert "condition_f" in plus.flags


def test_oblique_ratio_needed():
    with pytest.raises(errors.NoCoprimeSolution):
        quantize_periodic((2, 0.5), (0.3, 2), 1, 1, 1, 1)


def test_wavelength_examples():
    s = quantize_aperiodic((2, 0), (0, 2), 1, 1, 1, 1)
    assert wavelength(s, 2.0).value == 2.0
    s3 = quantize_aperiodic((2, 0), (0, 2), 3, 3, 2, 1)
    assert math.isclose(wavelength(s3, 2.0).value, 1 / 3)
    assert math.isclose(wavelength(quantize_aperiodic((2, 0), (0, 2), 3, 3, 4, 1), 2.0).value,
                        wavelength(s3, 2.0).value / 2)
    with pytest.raises(errors.ZeroQuantumNumber):
        wavelength(quantize_periodic((2, 0), (0, 2), 1, 1, 0, 1)[0], 2.0)


def test_measure_length_exact():
    count, rest = measure_length(7 * 0.3, 0.3)
    assert count == 7 and rest < 1e-15


@pytest.mark.parametrize("N", [100, 10 ** 4, 10 ** 6])
@pytest.mark.parametrize("m", [1, 2])
def test_measure_hole_period_in_wavelengths(rect_hole, N, m):
    values = {b.name: b.value for b in rect_hole.basis}
    res = dirichlet_approx([values["w1/a"], values["aw1/a"]], N)
    lam = 2.0 / (m * res.Z)
    count, rest = measure_length(2 * values["w1/a"], lam)
    assert count == m * res.numerators[0]
    assert rest <= m * lam * N ** -0.5


def test_classify_skeleton(sinai):
    periods = build_full(sinai, (0, 2)).periods
    vertical = classify_skeleton((0, 1), periods)
    assert vertical.periodic
    assert abs(vertical.period[0]) < 1e-9
    along = classify_skeleton(SINAI_D2, [SINAI_D1, SINAI_D2])
    assert along.periodic and np.allclose(along.period, SINAI_D2)
    assert not classify_skeleton((1, math.sqrt(2)), periods).periodic


def test_spectrum_table_order_and_parallel(monkeypatch):
    rows = spectrum_table(SINAI_D1, SINAI_D2, 6, 6, 3)
    keys = [(round(s.E, 9), s.m, s.n) for s in rows]
    assert keys == sorted(keys) and len(rows) == 36
    monkeypatch.setenv("BILLIARD_THREADS", "4")
    again = spectrum_table(SINAI_D1, SINAI_D2, 6, 6, 3)
    assert [(s.m, s.n, s.E) for s in again] == [(s.m, s.n, s.E) for s in rows]
