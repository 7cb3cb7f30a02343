"""Command-line front end.  Every command prints {"command": ..., "result": ...}.

Exit codes: 0 success, 1 invalid input, 2 a mathematical invariant failed,
3 a resource bound was exceeded.
"""
from __future__ import annotations

import argparse
import json
import sys
from typing import Sequence

from . import complexes, cubes, flagtheory, intlin, rootdata

EXIT_INPUT, EXIT_INVARIANT, EXIT_RESOURCE = 1, 2, 3


class InputError(ValueError):
    pass


def _load_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc.msg} at line {exc.lineno}") from None


def _root_datum(args) -> rootdata.RootDatum:
    if args.input and args.command != "dataseq":
        data = _load_json(args.input)
    else:
        data = {}
    if not isinstance(data, dict):
        raise InputError("root datum input must be a JSON object")
    dtype = args.type or data.get("type")
    rank = args.rank if args.rank is not None else data.get("rank")
    lattice = args.lattice or data.get("lattice_basis") or data.get("lattice") or "simply_connected"
    if dtype is None or rank is None:
        raise InputError("a root datum needs --type and --rank (or an input file with type/rank)")
    if not isinstance(rank, int) or isinstance(rank, bool):
        raise InputError("rank must be an integer")
    return rootdata.build_root_datum(str(dtype), rank, lattice)


def _ring(args, rd):
    theory = getattr(args, "theory", "chow")
    if theory == "k0":
        return flagtheory.k0_flag_ring(rd, args.weyl_bound)
    return flagtheory.chow_flag_ring(rd, args.weyl_bound)


def _image(args, R) -> flagtheory.ImageSublattice:
    choice = args.image
    if choice in (None, "char"):
        return flagtheory.char_image(R)
    if choice == "full":
        return flagtheory.full_image(R)
    if choice == "scalar":
        return flagtheory.scalar_image(R)
    obj = _load_json(choice)
    if not isinstance(obj, dict):
        raise InputError("image input must be a JSON object")
    if "m" in obj:
        if R.theory != "k0":
            raise InputError("a Tits-index diagonal {\"m\": ...} only makes sense for K0")
        m = obj["m"]
        if not isinstance(m, dict) or not all(isinstance(v, int) and v > 0 for v in m.values()):
            raise InputError("\"m\" must map Weyl words to positive integers")
        return flagtheory.tits_image(R, m)
    gens = obj.get("generators")
    if not isinstance(gens, list) or not all(isinstance(g, list) for g in gens):
        raise InputError("image input needs \"generators\": a list of coefficient lists")
    try:
        return flagtheory.ImageSublattice.of(R, gens)
    except (TypeError, ValueError) as exc:
        raise InputError(f"bad image generators: {exc}") from None


def _class_json(R, v) -> dict:
    words = R.words()
    return {words[i]: int(c) for i, c in enumerate(v) if c}


# ---------------------------------------------------------------------------
# commands


def cmd_specseq(args) -> dict:
    if not args.input:
        raise InputError("specseq needs --input cube.json")
    obj = _load_json(args.input)
    if not isinstance(obj, dict) or "m" not in obj or "entries" not in obj:
        raise InputError("cube input needs \"m\" and \"entries\"")
    try:
        K = cubes.cube_from_json(obj)
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise InputError(f"malformed cube: {exc}") from None
    seq = cubes.pages(K)
    C = seq[-1].filtered.complex
    report = cubes.e_infinity_compare(K, seq[-1])
    return {
        "m": K.m,
        "cofiber_homology": [{"degree": n, **complexes.homology(C, n).to_json()} for n in C.degrees],
        "pages": [P.to_json() for P in seq],
        "convergence": report.to_json(),
    }


def cmd_flag_chow(args) -> dict:
    rd = _root_datum(args)
    R = flagtheory.chow_flag_ring(rd, args.weyl_bound)
    return {
        "root_datum": rd.to_json(),
        "ranks": R.ranks,
        "basis": [{"w": w, "degree": d} for w, d in zip(R.words(), R.degree_of)],
        "char_map": [{"chi": list(chi), "class": _class_json(R, flagtheory.char_map_chow(R, chi))}
                     for chi in R.char_basis()],
    }


def cmd_flag_k0(args) -> dict:
    rd = _root_datum(args)
    R = flagtheory.k0_flag_ring(rd, args.weyl_bound)
    return {
        "root_datum": rd.to_json(),
        "rank": R.size,
        "steinberg": [{"w": w, "lambda": list(lam)} for w, lam in zip(R.words(), R.weights)],
        "gram_determinant": int(R.gram_det),
        "c1": [{"chi": list(chi), "class": _class_json(R, R.c1(chi))} for chi in R.char_basis()],
    }


def cmd_group_ring(args) -> dict:
    R = _ring(args, _root_datum(args))
    return flagtheory.group_ring_quotient(R).to_json()


def cmd_torsion_index(args) -> dict:
    R = flagtheory.chow_flag_ring(_root_datum(args), args.weyl_bound)
    per, tau = flagtheory.torsion_index(R)
    return {"per_degree": [i if i != float("inf") else "inf" for i in per], "tau": tau}


def cmd_j_invariant(args) -> dict:
    if args.prime is None:
        raise InputError("j-invariant needs --prime")
    if not flagtheory._prime(args.prime):
        raise InputError(f"--prime {args.prime} is not a prime")
    R = flagtheory.chow_flag_ring(_root_datum(args), args.weyl_bound)
    image = _image(args, R) if args.image else None
    try:
        return flagtheory.j_invariant(R, args.prime, image)
    except flagtheory.ShapeFailure as exc:
        return {"shape_failure": exc.report}


def cmd_tits_indexes(args) -> dict:
    R = flagtheory.k0_flag_ring(_root_datum(args), args.weyl_bound)
    try:
        return {"m": flagtheory.maximal_tits_indexes(R)}
    except flagtheory.NonDiagonalImage as exc:
        return {"non_diagonal": {"words": exc.words,
                                 "hermite": [[int(x) for x in row] for row in exc.hermite]}}


def cmd_hat_ring(args) -> dict:
    R = _ring(args, _root_datum(args))
    return flagtheory.hat_ring(R, _image(args, R)).to_json()


COMMANDS = {
    "specseq": cmd_specseq,
    "flag-chow": cmd_flag_chow,
    "flag-k0": cmd_flag_k0,
    "group-ring": cmd_group_ring,
    "torsion-index": cmd_torsion_index,
    "j-invariant": cmd_j_invariant,
    "tits-indexes": cmd_tits_indexes,
    "hat-ring": cmd_hat_ring,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cubeflag", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--input", help="JSON input file (cube for specseq, root datum otherwise)")
        p.add_argument("--pretty", action="store_true", help="indent the JSON output")
        p.add_argument("--jobs", type=int, default=1, help="worker count (computations are sequential)")
        p.add_argument("--weyl-bound", type=int, default=rootdata.DEFAULT_WEYL_BOUND)
        if name != "specseq":
            p.add_argument("--type")
            p.add_argument("--rank", type=int)
            p.add_argument("--lattice", choices=["simply_connected", "adjoint"])
        if name in ("group-ring", "hat-ring"):
            p.add_argument("--theory", choices=["chow", "k0"], default="chow")
        if name == "j-invariant":
            p.add_argument("--prime", type=int)
        if name in ("j-invariant", "hat-ring"):
            p.add_argument("--image", help="char | full | scalar | path to an image JSON file")
    return parser


def run(argv: Sequence[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_INPUT
    for name in ("type", "rank", "lattice", "prime", "image", "theory"):
        if not hasattr(args, name):
            setattr(args, name, None)
    try:
        result = COMMANDS[args.command](args)
    except rootdata.WeylBoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (cubes.FunctorialityError, cubes.NonCommutingError, cubes.InvariantViolation,
            cubes.ChainMapViolation, complexes.NotAComplexError, complexes.NotAChainMapError,
            flagtheory.BasisVerificationError, intlin.CompositeNonzeroError) as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (InputError, rootdata.RootDatumError, rootdata.LatticeError, cubes.InvalidCubeError,
            intlin.DimensionMismatchError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    doc = {"command": args.command, "result": result}
    if args.pretty:
        text = json.dumps(doc, indent=2, sort_keys=True)
    else:
        text = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    out.write(text + "\n")
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
