"""Command-line interface: billiardquant <command> ...

Exit codes: 0 success, 1 invalid input, 2 usage error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction
from typing import List, Optional

import numpy as np

from . import errors
from .diophantine import dirichlet_approx
from .dynamics import CurvedBilliard, approximate, find_periodic_orbits
from .epp import build_full, compute_genus, enumerate_periods, integer_rank, surface_genus
from .families import FAMILIES, builtin_family
from .geometry import BilliardSpec, make_billiard
from .spectrum import skeleton_ratios, spectrum_table
from .wavefunction import (boundary_residual, grid_field, orthogonal_pair, prepare,
                           singular_diagonals)

SCHEMA = "v1"
INPUT_ERRORS = (errors.InvalidSpec, errors.UnknownFamily, errors.BadParameters,
                errors.EmptyInput, errors.InvalidVertex)


class UsageError(Exception):
    pass


class Input:
    """A loaded input file: polygon spec or curved billiard, plus its family name."""

    def __init__(self, obj, family: Optional[str], params: dict):
        self.obj = obj
        self.family = family
        self.params = params

    def polygon(self) -> BilliardSpec:
        if not isinstance(self.obj, BilliardSpec):
            raise errors.InvalidSpec("this command needs a polygon billiard; run `approximate` first")
        return self.obj

    def curved(self) -> CurvedBilliard:
        if not isinstance(self.obj, CurvedBilliard):
            raise errors.InvalidSpec("this command needs a billiard with circular holes")
        return self.obj


def load_input(path: str) -> Input:
    """Read a JSON billiard, or build a family when `path` is a family name."""
    if not os.path.exists(path):
        if path in FAMILIES or path in ("sinai-polygon", "rectangle"):
            raw = {"family": path}
        else:
            raise errors.InvalidSpec(f"no such file: {path}")
    else:
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise errors.InvalidSpec(f"cannot read {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise errors.InvalidSpec("top level must be a JSON object")
    family = raw.get("family")
    params = dict(raw.get("params", {}))
    if "outer" not in raw:
        if not family:
            raise errors.InvalidSpec("give either 'outer' or 'family'")
        if family == "rectangle":
            return Input(_rectangle(params), "rectangle", params)
        fam_params = dict(params)
        if "holes" in fam_params:
            fam_params["holes"] = [tuple(h) for h in fam_params["holes"]]
        return Input(builtin_family(family, **fam_params), family, params)
    if "circles" in raw:
        return Input(CurvedBilliard.from_json(raw), family, params)
    return Input(make_billiard(raw), family, params)


def _rectangle(params):
    from .families import rectangle
    return rectangle(params.get("a", 1), params.get("b", 1))


def spec_json(spec: BilliardSpec, family: Optional[str] = None, params: Optional[dict] = None):
    out = {"schema": SCHEMA, **spec.to_json()}
    if family:
        out["family"] = family
    if params:
        out["params"] = params
    return out


def _plain(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"cannot serialize {type(value).__name__}")


def _emit(obj, out: Optional[str]):
    text = json.dumps(obj, indent=2, sort_keys=True, default=_plain) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _vertex(text: str):
    try:
        l, j = (int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"vertex must look like 'l,j', got {text!r}")
    return l, j


def _alphas(text: str):
    out = []
    for item in text.split(","):
        item = item.strip()
        try:
            out.append(Fraction(item) if "/" in item else float(item))
        except (ValueError, ZeroDivisionError):
            raise argparse.ArgumentTypeError(f"not a number: {item!r}")
    if not out:
        raise argparse.ArgumentTypeError("need at least one value")
    return out


def _positive(kind):
    def parse(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}")
        if v < 1:
            raise argparse.ArgumentTypeError("must be at least 1")
        return v
    return parse


def _family_of(inp: Input, override: Optional[str]) -> Optional[str]:
    return override or inp.family


# ---------------------------------------------------------------------------
# commands


def _base(inp, vertex):
    """Explicit vertex, else the pi/6 corner for the triangle (one sector covers C), else (0,0)."""
    if vertex is not None:
        return vertex
    return (0, 2) if inp.family in ("sinai", "sinai-polygon") else (0, 0)


def cmd_epp(args) -> int:
    inp = load_input(args.spec)
    b = inp.polygon()
    epp = build_full(b, _base(inp, args.vertex))
    _emit(epp.to_json(), args.out)
    return 0


def cmd_genus(args) -> int:
    b = load_input(args.spec).polygon()
    rep = compute_genus(b)
    print(f"g={rep.g}")
    if args.out:
        _emit({"schema": SCHEMA, "g": rep.g, "E": str(rep.E), "V": str(rep.V), "S": rep.S,
               "C": b.C, "closed_form": str(rep.closed_form)}, args.out)
    return 0


def cmd_periods(args) -> int:
    inp = load_input(args.spec)
    b = inp.polygon()
    epp = build_full(b, _base(inp, args.vertex))
    periods = enumerate_periods(epp)
    _emit({"schema": SCHEMA, "C": b.C, "count": len(periods),
           "expected_count": epp.expected_period_count,
           "integer_rank": integer_rank(epp, periods), "genus": surface_genus(epp),
           "periods": [{"vector": [float(v) for v in p.vector], "side": list(p.side),
                        "even_cell": p.even_cell, "odd_cell": p.odd_cell} for p in periods]},
          args.out)
    return 0


def cmd_dirichlet(args) -> int:
    res = dirichlet_approx(args.alphas, args.N)
    _emit({"schema": SCHEMA, **res.to_json()}, args.out)
    return 0


def _setup(inp: Input, args, m: int, n: int):
    family = _family_of(inp, args.family)
    return prepare(inp.polygon(), m, n, args.N, family=family, params=inp.params)


def cmd_spectrum(args) -> int:
    inp = load_input(args.spec)
    setup = _setup(inp, args, 1, 1)
    D1, D2 = setup.D1_vec, setup.D2_vec
    Z1, Z2 = setup.state.Z1, setup.state.Z2
    if args.skeleton == "auto":
        kind, skeleton, ratios = "aperiodic", None, None
    else:
        kind = "periodic"
        skeleton = D1 if args.skeleton == "x" else D2
        ratios = skeleton_ratios(D1, D2, skeleton, args.N)
    states = spectrum_table(D1, D2, Z1, Z2, args.mn_range, kind=kind, ratios=ratios,
                            skeleton=skeleton, epsilon=args.epsilon)
    _emit({"schema": SCHEMA, "kind": kind, "skeleton": args.skeleton, "N": args.N,
           "Z1": Z1, "Z2": Z2,
           "D1": [float(v) for v in D1], "D2": [float(v) for v in D2],
           "states": [s.to_json() for s in states]}, args.out)
    return 0


def cmd_field(args) -> int:
    inp = load_input(args.spec)
    setup = _setup(inp, args, args.m, args.n)
    field_ = grid_field(setup, args.grid)
    field_.to_csv(args.out)
    if args.pgm:
        field_.to_pgm(args.pgm)
    return 0


def cmd_verify(args) -> int:
    inp = load_input(args.spec)
    setup = _setup(inp, args, args.m, args.n)
    b = setup.billiard
    reports = [boundary_residual(setup, side, args.samples) for side in b.sides()]
    if setup.family in ("sinai", "sinai-polygon"):
        reports.append(boundary_residual(setup, "x=w", args.samples))
    if args.diagonals:
        try:
            reports += [rep for _, rep in singular_diagonals(setup, *orthogonal_pair(setup))]
        except (errors.SymmetryAbsent, errors.PeriodsNotOrthogonal) as exc:
            sys.stderr.write(f"singular diagonals skipped: {exc}\n")
    sys.stderr.write(f"{'line':<12} {'measured':>12} {'bound':>12}  ok\n")
    for r in reports:
        sys.stderr.write(f"{r.line:<12} {r.measured:12.4e} {r.bound:12.4e}  {'yes' if r.ok else 'NO'}\n")
    _emit({"schema": SCHEMA, "m": args.m, "n": args.n, "N": args.N,
           "Z1": setup.state.Z1, "Z2": setup.state.Z2,
           "residuals": [r.to_json() for r in reports]}, args.out)
    return 0 if all(r.ok for r in reports) else 3


def cmd_orbits(args) -> int:
    curved = load_input(args.spec).curved()
    orbits = find_periodic_orbits(curved, args.max_bounces, args.max_length, seed=args.seed)
    _emit({"schema": SCHEMA, "count": len(orbits), "orbits": [o.to_json() for o in orbits]},
          args.out)
    return 0


def cmd_approximate(args) -> int:
    curved = load_input(args.spec).curved()
    res = approximate(curved, args.k, max_bounces=args.max_bounces, max_length=args.max_length,
                      N=args.N, seed=args.seed, selection=args.selection)
    family = "sinai-polygon" if res.spec.C == 6 and curved.family == "sinai" else None
    out = spec_json(res.spec, family, dict(curved.params) if family else None)
    out["approximation"] = {k: v for k, v in res.to_json().items() if k not in ("schema", "spec")}
    _emit(out, args.out)
    return 0


# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="billiardquant", description="EPP quantization of rational polygon billiards")
    p.add_argument("--seed", type=int, default=0, help="seed for randomized searches")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, spec=True, out=True):
        if spec:
            sp.add_argument("spec", help="billiard JSON file or built-in family name")
        if out:
            sp.add_argument("--out", help="output file (default: stdout)")
        sp.add_argument("--seed", type=int, default=argparse.SUPPRESS)

    def quantum(sp):
        sp.add_argument("--N", type=_positive(int), default=1000, help="Dirichlet quality")
        sp.add_argument("--family", help="family name when the file does not carry one")

    sp = sub.add_parser("epp", help="build the elementary polygon pattern")
    common(sp)
    sp.add_argument("--vertex", type=_vertex, default=None, help="base vertex 'l,j'")
    sp.set_defaults(func=cmd_epp)

    sp = sub.add_parser("genus", help="genus of the invariant surface")
    common(sp)
    sp.set_defaults(func=cmd_genus)

    sp = sub.add_parser("periods", help="periods, their count and integer rank")
    common(sp)
    sp.add_argument("--vertex", type=_vertex, default=None, help="base vertex 'l,j'")
    sp.set_defaults(func=cmd_periods)

    sp = sub.add_parser("dirichlet", help="simultaneous Dirichlet approximation")
    common(sp, spec=False)
    sp.add_argument("--alphas", type=_alphas, required=True, help="comma-separated reals or p/q")
    sp.add_argument("--N", "--n", dest="N", type=_positive(int), required=True)
    sp.set_defaults(func=cmd_dirichlet)

    sp = sub.add_parser("spectrum", help="energy table for |m|,|n| <= range")
    common(sp)
    quantum(sp)
    sp.add_argument("--mn-range", "--range", dest="mn_range", type=_positive(int), default=5,
                    help="largest |m| and |n|")
    sp.add_argument("--skeleton", choices=("auto", "x", "y"), default="auto",
                    help="auto: aperiodic skeleton; x or y: periodic skeleton along D1 or D2")
    sp.add_argument("--epsilon", type=float, default=0.1, help="condition (f) threshold")
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("field", help="wavefunction on a grid, CSV and optional PGM")
    common(sp, out=False)
    quantum(sp)
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--grid", type=int, default=256)
    sp.add_argument("--out", required=True, help="CSV output")
    sp.add_argument("--pgm", help="PGM image output")
    sp.set_defaults(func=cmd_field)

    sp = sub.add_parser("verify", help="boundary residuals against their bounds")
    common(sp)
    quantum(sp)
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--samples", type=int, default=1024)
    sp.add_argument("--diagonals", action="store_true", help="also check singular diagonals")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("orbits", help="shortest periodic orbits")
    common(sp)
    sp.add_argument("--max-bounces", type=int, default=6)
    sp.add_argument("--max-length", type=float, default=10.0)
    sp.set_defaults(func=cmd_orbits)

    sp = sub.add_parser("approximate", help="replace circles by envelope polygons")
    common(sp)
    sp.add_argument("--k", type=int, default=21, help="orbit budget")
    sp.add_argument("--max-bounces", type=int, default=8)
    sp.add_argument("--max-length", type=float, default=10.0)
    sp.add_argument("--N", type=_positive(int), default=360, help="Dirichlet quality if rationalizing")
    sp.add_argument("--selection", choices=("radial", "all"), default="radial")
    sp.set_defaults(func=cmd_approximate)
    return p


def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return 2
    np.random.seed(args.seed % (2 ** 32))
    try:
        return args.func(args)
    except INPUT_ERRORS as exc:
        sys.stderr.write(f"invalid input: {exc}\n")
        return 1
    except errors.BilliardError as exc:
        sys.stderr.write(f"numerical failure: {type(exc).__name__}: {exc}\n")
        return 3
    except OSError as exc:
        sys.stderr.write(f"i/o error: {exc}\n")
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
