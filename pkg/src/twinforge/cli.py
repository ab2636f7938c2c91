"""``twinforge`` command line.

Exit codes: 0 success, 2 usage or parse error, 3 mathematical infeasibility,
4 violated hypothesis of a reconstruction step.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import cofactor, field, habit, mask, report, twin
from .config import DEFAULT, max_threads
from .errors import InputError, MiddleEigenvalueNotOne, ParseError, TwinforgeError, TwinforgeWarning
from .profiles import Profile

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_HYPOTHESIS = 0, 2, 3, 4


# -- argument parsing helpers -------------------------------------------------

def parse_numbers(text: str, count: int, what: str) -> np.ndarray:
    toks = [t.strip() for t in str(text).split(",")]
    if len(toks) != count:
        raise ParseError(f"{what}: expected {count} comma-separated numbers, got {len(toks)}")
    out = []
    for col, tok in enumerate(toks, 1):
        try:
            v = float(tok)
        except ValueError:
            raise ParseError(f"{what}: {tok!r} is not a number", column=col) from None
        if not np.isfinite(v):
            raise ParseError(f"{what}: non-finite entry {tok!r}", column=col)
        out.append(v)
    return np.array(out)


def parse_matrix(text: str, what: str = "matrix") -> np.ndarray:
    """Row-major 3x3 matrix from nine comma-separated numbers."""
    return parse_numbers(text, 9, what).reshape(3, 3)


def parse_vector(text: str, what: str = "vector") -> np.ndarray:
    return parse_numbers(text, 3, what)


def parse_grid(text: str):
    toks = str(text).split(",")
    if len(toks) != 3:
        raise ParseError(f"--grid expects nx,ny,nz, got {text!r}")
    try:
        return tuple(int(t) for t in toks)
    except ValueError:
        raise ParseError(f"--grid expects integers, got {text!r}") from None


def _from_json(value, shape, what):
    arr = np.asarray(value, dtype=float)
    if arr.size != int(np.prod(shape)):
        raise ParseError(f"{what}: expected {int(np.prod(shape))} numbers")
    return arr.reshape(shape)


def _read_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc.msg}", exc.lineno, exc.colno) from None


_INLINE = {"u1": (3, 3), "u2": (3, 3), "b": (3,), "m": (3,)}


def load_matrices(args, required, optional=()):
    """Collect U1/U2/b/m from inline flags or a JSON ``--file``, never both."""
    inline = {k: getattr(args, k, None) for k in _INLINE}
    given = {k: v for k, v in inline.items() if v is not None}
    out = {}
    if args.file is not None:
        if given:
            raise InputError(f"--file and inline {', '.join('--' + k for k in sorted(given))} both given")
        data = _read_json(args.file)
        if not isinstance(data, dict):
            raise ParseError(f"{args.file}: expected a JSON object")
        lowered = {str(k).lower(): v for k, v in data.items()}
        for k in (*required, *optional):
            if k in lowered:
                out[k] = _from_json(lowered[k], _INLINE[k], k)
    else:
        for k, text in given.items():
            out[k] = parse_matrix(text, "--" + k) if _INLINE[k] == (3, 3) else parse_vector(text, "--" + k)
    missing = [k for k in required if k not in out]
    if missing:
        raise InputError(f"missing input: {', '.join(missing)}")
    return out


def _tolerances(args):
    tol = getattr(args, "tol", None)
    return DEFAULT if tol is None else DEFAULT.with_(cofactor=tol, habit=max(DEFAULT.habit, tol))


# -- commands -----------------------------------------------------------------

def _system_dict(s: twin.TwinSystem) -> dict:
    return {
        "e_hat": s.e_hat, "type": s.type, "formula": s.formula, "b": s.b, "m": s.m,
        "R_hat": s.R_hat, "U2": s.U2, "residual": s.residual,
    }


def cmd_twin(args):
    mats = load_matrices(args, ("u1", "u2"))
    res = twin.analyze_pair(mats["u1"], mats["u2"])
    results = {
        "axes": res.axes,
        "classification": res.classification,
        "systems": [_system_dict(s) for s in res.systems],
    }
    return mats, results, DEFAULT


def _branches(args, mats, tol):
    if "b" in mats and "m" in mats:
        return [("given", mats["b"], mats["m"])]
    if "u2" not in mats:
        raise InputError("give --b and --m, or --u2 with --auto")
    if not getattr(args, "auto", True):
        raise InputError("--u2 needs --auto to pick the twin branches")
    res = twin.analyze_pair(mats["u1"], mats["u2"], tol)
    if not res.systems:
        raise InputError("the two variants admit no twin")
    return [(f"axis{i // 2}-{s.formula}", s.b, s.m) for i, s in enumerate(res.systems)]


def _families(U1, b, m, tol):
    out = {}
    for name, fn in (("type_I", cofactor.typeI_families), ("type_II", cofactor.typeII_families)):
        try:
            out[name] = [f.as_dict() for f in fn(U1, b, m, tol.cofactor)]
        except TwinforgeError as exc:
            out[name] = {"error": type(exc).__name__, "message": str(exc)}
    return out


def cmd_cofactor(args):
    tol = _tolerances(args)
    mats = load_matrices(args, ("u1",), ("u2", "b", "m"))
    rows = []
    for label, b, m in _branches(args, mats, tol):
        rep = cofactor.check_cofactor(mats["u1"], b, m, tol.cofactor)
        row = {"branch": label, "b": b, "m": m, **rep.as_dict()}
        if rep.satisfied and args.families:
            row["families"] = _families(mats["u1"], b, m, tol)
        rows.append(row)
    return mats, {"branches": rows}, tol


def _habit_dict(s: habit.HabitSolution) -> dict:
    return {"lambda": s.lam, "R": s.R, "a": s.a, "n": s.n, "residual": s.residual}


def cmd_habit(args):
    tol = _tolerances(args)
    mats = load_matrices(args, ("u1",), ("u2", "b", "m"))
    branches = _branches(args, mats, tol)
    if not 0 <= args.branch < len(branches):
        raise InputError(f"--branch must lie in [0, {len(branches) - 1}]")
    _, b, m = branches[args.branch]
    U1 = mats["u1"]
    inputs = {**mats, "b": b, "m": m}
    if args.scan is not None:
        if args.scan < 2:
            raise InputError("--scan needs at least 2 points")
        rows = habit.lambda_scan(U1, b, m, args.scan, tol.habit)
        return inputs, {"scan": rows, "solvable": sum(r.solvable for r in rows)}, tol
    lam = args.lam
    if not 0.0 <= lam <= 1.0:
        raise InputError(f"--lambda {lam} outside [0, 1]")
    sigma = habit.middle_eigenvalue(U1, b, m, lam)
    try:
        sols = habit.solve_habit(U1, b, m, lam, tol.habit)
        deviation = abs(sigma - 1.0)
    except MiddleEigenvalueNotOne as exc:
        sols, deviation = [], exc.deviation
    results = {
        "lambda": lam, "sigma_mid": sigma, "sigma_mid_deviation": deviation,
        "solvable": bool(sols), "solutions": [_habit_dict(s) for s in sols],
    }
    return inputs, results, tol


def _field_inputs(args, fld):
    return {"field": Path(args.field).name, "dims": fld.dims, "digest": report.digest(fld.F)}


def cmd_analyze(args):
    fld = field.load_field(args.field, args.format)
    diag = field.analyze_cells(fld, D_ref=args.dref, threshold=args.threshold)
    if args.csv:
        field.atomic_write(args.csv, diag.to_csv(fld))
    jumps = field.face_jump_fit(fld)
    scen = {k: int(np.sum(jumps.scenario == k)) for k in ("a", "b", "unclassified")}
    results = {"cells": diag.summary(), "jumps": {"count": len(jumps), "scenarios": scen}}
    try:
        results["compatibility"] = field.discrete_compatibility(fld).summary()
    except InputError as exc:
        results["compatibility"] = {"skipped": str(exc)}
    inputs = {**_field_inputs(args, fld), "dref": args.dref, "threshold": args.threshold}
    return inputs, results, DEFAULT.with_(cof_threshold=args.threshold)


def _parse_q(text):
    if text is None or text.strip().lower() == "identity":
        return np.eye(3)
    return parse_matrix(text, "--q")


def cmd_reconstruct(args):
    fld = field.load_field(args.field, args.format)
    Q = _parse_q(args.q)
    if args.tsamples < 1:
        raise InputError("--tsamples must be positive")
    fam = mask.reconstruct_interfaces(fld, Q, t_samples=args.tsamples)
    if args.csv:
        field.atomic_write(args.csv, mask.interfaces_to_csv(fam))
    vel = mask.interface_velocity(fam) if not fam.curve.degenerate else []
    results = {
        **fam.summary(),
        "curve_diameter": fam.curve.diameter,
        "t_samples": fam.t_samples,
        "velocities": [v.as_dict() for v in vel],
    }
    return {**_field_inputs(args, fld), "Q": Q, "tsamples": args.tsamples}, results, DEFAULT


def _profile(params, default: Profile) -> Profile:
    return Profile.from_dict(params["profile"]) if "profile" in params else default


def _family_matrices(params, kind):
    if "u1" in params:
        U1 = _from_json(params["u1"], (3, 3), "u1")
        b = _from_json(params["b"], (3,), "b")
        m = _from_json(params["m"], (3,), "m")
        return U1, b, m
    U1, _, s = cofactor.supercompatible_example(kind, tuple(params.get("stretches", (0.9, 1.0, 1.1))))
    return U1, s.b, s.m


def generate(kind: str, params: dict, grid) -> mask.Generated:
    """Dispatch to a generator from a JSON-shaped parameter record."""
    params = {str(k).lower(): v for k, v in (params or {}).items()}
    geo = {k: params[k] for k in ("spacing", "origin") if k in params}
    try:
        if kind == "planar":
            n = params.get("n", (1.0, 0.0, 0.0))
            return mask.gen_planar_laminate(n, _profile(params, Profile.sine()), grid, params.get("a_dir", (1.0, 0.0, 0.0)), **geo)
        if kind == "type1":
            fam = cofactor.build_typeI_family(*_family_matrices(params, "I"))
            return mask.gen_typeI_curved(fam, _profile(params, Profile.sine()), grid, frame=params.get("frame", "lab"), **geo)
        if kind == "type2":
            fam = cofactor.build_typeII_family(*_family_matrices(params, "II"))
            return mask.gen_typeII_planar(fam, _profile(params, Profile.sine()), grid, frame=params.get("frame", "aligned"), **geo)
        if kind == "mu1":
            return mask.gen_mu1_compound(_profile(params, Profile.sine(mean=0.0, amplitude=0.1)), grid, **geo)
    except (KeyError, TypeError) as exc:
        raise ParseError(f"bad generator parameters: {exc}") from None
    except ValueError as exc:
        if isinstance(exc, TwinforgeError):
            raise
        raise ParseError(f"bad generator parameters: {exc}") from None
    raise InputError(f"unknown generator kind {kind!r}")


def cmd_generate(args):
    grid = parse_grid(args.grid)
    params = _read_json(args.params) if args.params else {}
    if not isinstance(params, dict):
        raise ParseError("--params must hold a JSON object")
    gen = generate(args.kind, params, grid)
    field.save_field(gen.field, args.field_out, args.format)
    sidecar = str(args.field_out) + ".truth.json"
    field.atomic_write(sidecar, report.dumps(gen.truth.to_dict()))
    diag = field.analyze_cells(gen.field)
    results = {
        "field": Path(args.field_out).name,
        "sidecar": Path(sidecar).name,
        "dims": gen.field.dims,
        "truth": gen.truth.to_dict(),
        "analysis": diag.summary(),
        "closure_residual": mask.closure_residual(gen.field),
    }
    return {"kind": args.kind, "params": params, "grid": grid}, results, DEFAULT


# -- parser ------------------------------------------------------------------

def _matrix_flags(p, vectors=True):
    p.add_argument("--u1", help="U1 as nine row-major numbers")
    p.add_argument("--u2", help="U2 as nine row-major numbers")
    if vectors:
        p.add_argument("--b", help="twin shear vector b (three numbers)")
        p.add_argument("--m", help="twin plane normal m (three numbers)")
    p.add_argument("--file", help="JSON object with u1, u2, b, m entries")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="twinforge", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("twin", help="twin axes, solutions and classification of a variant pair")
    _matrix_flags(p, vectors=False)
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.set_defaults(func=cmd_twin)

    p = sub.add_parser("cofactor", help="cofactor conditions for (U1, b, m) or every branch of (U1, U2)")
    _matrix_flags(p)
    p.add_argument("--auto", action="store_true", help="take b, m from every twin solution of (U1, U2)")
    p.add_argument("--tol", type=float, default=None, help="cofactor tolerance (default 1e-8)")
    p.add_argument("--no-families", dest="families", action="store_false", help="skip the moving-mask family search")
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.set_defaults(func=cmd_cofactor)

    p = sub.add_parser("habit", help="austenite-martensite habit planes")
    _matrix_flags(p)
    p.add_argument("--auto", action="store_true", help="take b, m from the twin solutions of (U1, U2)")
    p.add_argument("--branch", type=int, default=0, help="twin solution index with --auto")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--lambda", dest="lam", type=float, help="twin volume fraction in [0, 1]")
    g.add_argument("--scan", type=int, help="number of uniformly spaced fractions")
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.set_defaults(func=cmd_habit)

    p = sub.add_parser("analyze", help="per-cell rank-one diagnostics of a gradient field")
    p.add_argument("--field", required=True)
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--dref", type=float, default=None, help="reference determinant")
    p.add_argument("--threshold", type=float, default=DEFAULT.cof_threshold)
    p.add_argument("--csv", help="write per-cell diagnostics here")
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("reconstruct", help="moving interfaces from a gradient field")
    p.add_argument("--field", required=True)
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--q", default="identity", help="'identity' or nine row-major numbers")
    p.add_argument("--tsamples", type=int, default=mask.DEFAULT_T_SAMPLES)
    p.add_argument("--csv", help="write the interface triangles here")
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("generate", help="synthetic fields with a ground-truth sidecar")
    p.add_argument("--kind", required=True, choices=("planar", "type1", "type2", "mu1"))
    p.add_argument("--params", help="JSON parameter file")
    p.add_argument("--grid", required=True, help="nx,ny,nz")
    p.add_argument("--out", dest="field_out", required=True, help="field file (.csv or .json)")
    p.add_argument("--format", choices=("csv", "json"))
    p.set_defaults(func=cmd_generate)
    return ap


def _apply_threads():
    n = str(max_threads())
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, n)


def main(argv=None, timestamp: str | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    report_out = None if args.command == "generate" else args.out
    _apply_threads()
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            inputs, results, tol = args.func(args)
        flags = [f"{getattr(w.category, 'flag', w.category.__name__)}: {w.message}" for w in caught if issubclass(w.category, TwinforgeWarning)]
        doc = report.build_report(args.command, argv, inputs, results, tol, flags, timestamp)
        text = report.dumps(doc)
        if report_out:
            field.atomic_write(report_out, text)
        else:
            sys.stdout.write(text)
        for f in flags:
            print(f"warning: {f}", file=sys.stderr)
        return EXIT_OK
    except TwinforgeError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return int(exc.exit_code)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
