"""Sinai billiard end to end: curved disc -> 12-gon hole -> periods, genus, levels."""
import billiardquant as bq
from billiardquant import dynamics as dy
from billiardquant.epp import build_full, compute_genus, integer_rank

curved = dy.sinai_curved()
res = dy.approximate(curved, 21)
poly = res.spec
print(f"orbits used: {len(res.orbits)}   hole sides: {poly.n_sides[1]}   C = {poly.C}")

epp = build_full(poly, (0, 2))
print(f"periods: {len(epp.periods)}   integer rank: {integer_rank(epp)}   "
      f"genus: {compute_genus(poly).g}")

for m, n in [(1, 3), (3, 5), (2, -1)]:
    s = bq.prepare(poly, m, n, 100, family="sinai")
    print(f"(m, n) = ({m:2d}, {n:2d})   Z1 = {s.state.Z1:5d}   E = {s.state.E:.6e}")
