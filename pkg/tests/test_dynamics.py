import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from billiardquant import dynamics as dy
from billiardquant import errors

SQ3 = math.sqrt(3)
TRIANGLE = ((0, 0), (1, 0), (1, SQ3))


@pytest.fixture(scope="module")
def wall_circle():
    return dy.CurvedBilliard(((0, 0), (2, 0), (2, 2), (0, 2)), (dy.Circle((1.0, 0.8), 0.3),))


@pytest.fixture(scope="module")
def sinai_orbits():
    b = dy.sinai_curved()
    return b, dy.find_periodic_orbits(b, 6, 10.0)


@pytest.fixture(scope="module")
def generic_disc():
    b = dy.CurvedBilliard(TRIANGLE, (dy.Circle((0.62, 0.47), 0.17),))
    return b, dy.find_periodic_orbits(b, 4, 10.0)


def unit_square():
    return dy.CurvedBilliard(((0, 0), (1, 0), (1, 1), (0, 1)))


# tracing ------------------------------------------------------------------

def test_horizontal_ray_in_square():
    path = dy.trace(unit_square(), (0.3, 0.5), (1, 0), 4)
    xs = [round(float(p[0]), 12) for p in path.points[1:]]
    assert xs == [1.0, 0.0, 1.0, 0.0]
    between = sum(np.linalg.norm(b - a) for a, b in zip(path.points[1:3], path.points[2:4]))
    assert math.isclose(between, 2.0)


def test_ray_at_centre_reverses(wall_circle):
    path = dy.trace(wall_circle, (1.0, 1.6), (0, -1), 1)
    assert path.surfaces == ["c0"]
    assert np.allclose(path.points[1], (1.0, 1.1))
    assert np.allclose(path.directions[1], (0, 1))


def test_random_rays_obey_reflection_law():
    b = dy.sinai_curved()
    rng = np.random.default_rng(5)
    for _ in range(20):
        start = np.array([0.8, 0.15])
        ang = rng.uniform(0, 2 * math.pi)
        path = dy.trace(b, start, (math.cos(ang), math.sin(ang)), 100)
        assert path.flag is None and len(path.surfaces) == 100
        assert max(path.law_residuals()) < 1e-9


def test_corner_and_tangent_hits(wall_circle):
    with pytest.raises(errors.CornerHit):
        dy.trace(unit_square(), (0.5, 0.5), (1, 1), 3, strict=True)
    assert dy.trace(unit_square(), (0.5, 0.5), (1, 1), 3).flag == "corner"
    with pytest.raises(errors.TangentHit):
        dy.trace(wall_circle, (0.2, 0.5), (1, 0), 3, strict=True)
    assert dy.trace(wall_circle, (0.2, 0.5), (1, 0), 3).flag == "tangent"


def test_start_outside(wall_circle):
    with pytest.raises(errors.PointOutside):
        dy.trace(wall_circle, (1.0, 0.8), (1, 0), 3)
    with pytest.raises(errors.PointOutside):
        dy.trace(wall_circle, (3.0, 0.8), (1, 0), 3)


def test_circle_must_clear_walls():
    with pytest.raises(errors.HoleOutsideOuter):
        dy.CurvedBilliard(((0, 0), (1, 0), (1, 1), (0, 1)), (dy.Circle((0.5, 0.1), 0.2),))
    with pytest.raises(errors.BadParameters):
        dy.CurvedBilliard(((0, 0), (1, 0), (1, 1), (0, 1)), (dy.Circle((0.5, 0.5), 0.0),))


# periodic orbits ------------------------------------------------------------

def test_circle_wall_two_bounce_orbit(wall_circle):
    orbits = dy.find_periodic_orbits(wall_circle, 2, 10.0)
    two = [o for o in orbits if set(o.surfaces) == {"s0.0", "c0"}]
    assert len(two) == 1
    assert abs(two[0].length - 2 * (0.8 - 0.3)) < 1e-9


def test_square_families():
    orbits = dy.find_periodic_orbits(unit_square(), 4, 10.0)
    assert math.isclose(orbits[0].length, 2.0) and orbits[0].stability == "family"
    assert any(math.isclose(o.length, 2 * math.sqrt(2)) for o in orbits)


def test_sinai_has_enough_circle_orbits(sinai_orbits):
    b, orbits = sinai_orbits
    circle = [o for o in orbits if o.touches("c0")]
    assert len(circle) >= 21
    lengths = [round(o.length, 9) for o in orbits]
    assert lengths == sorted(lengths)
    # the reflection points leave an empty beta sector on the circle
    c = b.circles[0]
    ang = np.sort([c.angle_of(p) % (2 * math.pi) for o in circle[:21] for p in o.circle_points()])
    gaps = np.diff(np.append(ang, ang[0] + 2 * math.pi))
    assert gaps.max() > dy.CLUSTER_TOL


def test_orbits_close_and_reflect(sinai_orbits, wall_circle):
    b, orbits = sinai_orbits
    for bil, orbs in ((b, orbits), (wall_circle, dy.find_periodic_orbits(wall_circle, 4, 10.0))):
        for o in orbs:
            assert o.closure_gap < 1e-9
            assert max(dy.reflection_residuals(bil, o)) < 1e-9


def test_orbits_are_length_stationary(sinai_orbits):
    b, orbits = sinai_orbits
    delta = 1e-6
    for o in orbits:
        if o.stability == "family":
            continue
        base = dy.length_at(b, o.surfaces, o.parameters)
        assert math.isclose(base, o.length, rel_tol=1e-9)
        for i in range(len(o.parameters)):
            up, down = list(o.parameters), list(o.parameters)
            up[i] += delta
            down[i] -= delta
            slope = (dy.length_at(b, o.surfaces, up) - dy.length_at(b, o.surfaces, down)) / (2 * delta)
            assert abs(slope) < 1e-4 * base


def test_no_duplicate_orbits(sinai_orbits):
    _, orbits = sinai_orbits
    keys = set()
    for o in orbits:
        word = o.surfaces
        rots = [word[i:] + word[:i] for i in range(len(word))]
        rots += [tuple(reversed(r)) for r in rots]
        key = (round(o.length, 7), min(rots))
        assert key not in keys
        keys.add(key)


def test_search_is_deterministic(monkeypatch, wall_circle):
    first = dy.find_periodic_orbits(wall_circle, 4, 10.0, seed=3)
    again = dy.find_periodic_orbits(wall_circle, 4, 10.0, seed=3)
    monkeypatch.setenv("BILLIARD_THREADS", "4")
    threaded = dy.find_periodic_orbits(wall_circle, 4, 10.0, seed=3)
    for other in (again, threaded):
        assert [(o.surfaces, o.length) for o in other] == [(o.surfaces, o.length) for o in first]


def test_bounce_limit(wall_circle):
    with pytest.raises(errors.BadParameters):
        dy.find_periodic_orbits(wall_circle, 9, 10.0)


# envelopes ------------------------------------------------------------------

def test_dodecagon_envelope():
    for r in (1.0, 0.2):
        env = dy.envelope_polygon(dy.Circle((0.3, -0.1), r), np.arange(12) * math.pi / 6)
        assert np.allclose(env.side_lengths(), 2 * r * math.tan(math.pi / 12), atol=1e-9)
        assert np.allclose(env.interior_angles, 5 * math.pi / 6)


def test_square_envelope():
    env = dy.envelope_polygon(dy.Circle((0, 0), 1.0), np.arange(4) * math.pi / 2)
    assert np.allclose(env.side_lengths(), 2.0)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 2 * math.pi), min_size=3, max_size=16), st.floats(0.05, 3))
def test_envelope_circumscribes(angles, r):
    circle = dy.Circle((0.4, -1.2), r)
    try:
        env = dy.envelope_polygon(circle, angles)
    except errors.AdjacentGapTooWide:
        return
    v = np.asarray(env.vertices)
    c = np.asarray(circle.center)
    for a, b in zip(v, np.roll(v, -1, axis=0)):
        d = b - a
        dist = abs(d[0] * (c - a)[1] - d[1] * (c - a)[0]) / np.linalg.norm(d)
        assert abs(dist - r) < 1e-9 * max(1.0, np.linalg.norm(d))


def test_envelope_errors():
    c = dy.Circle((0, 0), 1.0)
    with pytest.raises(errors.AdjacentGapTooWide):
        dy.envelope_polygon(c, [0.0, 1.0])
    with pytest.raises(errors.AdjacentGapTooWide):
        dy.envelope_polygon(c, [0.0, 0.5, 1.0])


def test_cluster_angles():
    out = dy.cluster_angles([0.0, 0.01, 2 * math.pi - 0.01, 1.0, 1.02, 3.0])
    assert [n for _, n in out] == [3, 2, 1]
    assert abs(out[0][0]) < 1e-12


# approximation ----------------------------------------------------------------

def test_sinai_pipeline_gives_dodecagon():
    res = dy.approximate(dy.sinai_curved(), 21)
    assert res.spec.C == 6
    assert res.spec.n_sides == (3, 12)
    assert np.allclose(np.degrees(res.envelopes[0].interior_angles), 150.0, atol=0.5)
    assert res.rationalization is None
    assert len(res.orbits) <= 21


def test_centred_circle_in_square():
    b = dy.CurvedBilliard(((0, 0), (1, 0), (1, 1), (0, 1)), (dy.Circle((0.5, 0.5), 0.2),))
    spec = dy.approximate_billiard(b, 4)
    assert spec.C == 2 and spec.n_sides == (4, 4)
    hole = spec.points[1]
    assert np.allclose(np.ptp(hole, axis=0), 0.4)


def test_generic_position_is_rationalized(generic_disc):
    b, orbits = generic_disc
    res = dy.approximate(b, 4, selection="all", N=10 ** 4, orbits=orbits)
    cert = res.rationalization
    assert cert is not None and cert.max_error <= cert.bound
    # directions in pi units relative to the first side move by at most N^(-1/p) / Z
    orig = sorted(a for a, _ in res.clusters[0])
    moved = sorted(t % (2 * math.pi) for t in res.envelopes[0].tangency)
    assert len(orig) == len(moved)
    for a, t in zip(orig, moved):
        assert abs(a - t) <= math.pi * cert.certified_error + 1e-12
    assert all(poly_angle.q <= res.spec.C for poly in res.spec.angles for poly_angle in poly)


def test_radial_directions_are_wall_normals(generic_disc):
    b, _ = generic_disc
    res = dy.approximate(b, 21)
    for t in res.envelopes[0].tangency:
        k = t / (math.pi / 6)
        assert abs(k - round(k)) < 1e-9
    assert res.spec.C == 6


def test_budget_must_allow_a_polygon():
    with pytest.raises(errors.BadParameters):
        dy.approximate(dy.sinai_curved(), 2)


def test_curved_json_round_trip():
    b = dy.sinai_curved()
    back = dy.CurvedBilliard.from_json(b.to_json())
    assert back == b
    assert dy.CurvedBilliard.from_json({"family": "sinai", "params": {}}) == b
    with pytest.raises(errors.InvalidSpec):
        dy.CurvedBilliard.from_json({"outer": 5})
