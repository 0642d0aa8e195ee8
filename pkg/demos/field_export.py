"""Write |psi| of a Sinai state as CSV and PGM next to this script."""
from pathlib import Path

import billiardquant as bq
from billiardquant import wavefunction as wf

here = Path(__file__).parent
s = bq.prepare(bq.sinai_polygon(), 3, 5, 100, family="sinai")
field = wf.grid_field(s, 200)
field.to_csv(here / "sinai_3_5.csv")
field.to_pgm(here / "sinai_3_5.pgm")
print(f"E = {s.state.E:.6e}, wrote {here / 'sinai_3_5.pgm'}")
