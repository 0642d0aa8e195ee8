"""How fast the rectangle-with-holes wavefunction vanishes on the hole sides as N grows."""
import billiardquant as bq
from billiardquant import wavefunction as wf

for k in (2, 3):
    b = bq.builtin_family("rect-holes", k=k)
    print(f"k = {k}")
    for N in (10 ** 2, 10 ** 4, 10 ** 6):
        s = bq.prepare(b, 1, 2, N, family="rect-holes")
        worst = max((wf.boundary_residual(s, side) for side in b.sides() if side[0]),
                    key=lambda r: r.measured)
        print(f"  N = {N:>7d}   max |psi| on holes = {worst.measured:.3e}   "
              f"bound = {worst.constants['family_bound']:.3e}")
