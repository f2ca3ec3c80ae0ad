"""Command-line front end.

Usage: ``ballmodel <group> <action> [flags]``.  Exit status is 0 when the
computation succeeded and every check passed, 1 when a check failed (the
report names the residual) and 2 for malformed input or usage errors.
"""
from __future__ import annotations

import argparse
import sys
from typing import Callable, Sequence

import numpy as np

from . import agler, colligation, rowmodel
from .errors import BallModelError, NotStabilized
from .jsonio import (
    dumps,
    encode_comm_series,
    encode_matrix,
    encode_nc_series,
    load_colligation,
    load_row_contraction,
    parse_points,
    to_jsonable,
)
from .matcore import RANK_TOL, unitary_defect

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# helpers


def _tol(args, default: float) -> float:
    return default if args.tol is None else args.tol


def _need(args, name: str) -> str:
    value = getattr(args, name if name != "lambda" else "lambda_")
    if value is None:
        raise UsageError(f"--{name} is required for this command")
    return value


def _points(args, d: int) -> np.ndarray:
    pts = parse_points(_need(args, "points"), d)
    if len(pts) == 0:
        raise UsageError("--points lists no points")
    return pts


def _report(command: str, inputs: dict, body: dict, passed: bool) -> dict:
    out = {"command": command, "inputs": inputs, "passed": bool(passed)}
    out.update(body)
    return out


# ---------------------------------------------------------------------------
# commands; each returns a report dict with a "passed" entry


def cmd_realize_eval(args):
    U = load_colligation(_need(args, "file"))
    pts = _points(args, U.d)
    values = [{"point": list(z), "value": colligation.transfer_eval(U, z)} for z in pts]
    body = {"dims": {"d": U.d, "n": U.n, "p": U.p, "q": U.q}, "values": values}
    return _report("realize eval", {"file": args.file, "points": args.points}, body, True)


def cmd_check_colligation(args):
    U = load_colligation(_need(args, "file"))
    tol = _tol(args, colligation.DEFAULT_TOL)
    f = colligation.classify(U, tol, args.rank_tol)
    body = {"tol": tol, "rank_tol": args.rank_tol, "flags": f.as_dict(), "residuals": f.residuals,
            "dims": f.dims}
    return _report("check colligation", {"file": args.file}, body, f.stabilized)


def cmd_agler_verify(args):
    U = load_colligation(_need(args, "file"))
    tol = _tol(args, colligation.DEFAULT_TOL)
    samples = agler.DEFAULT_PAIRS if args.samples is None else args.samples
    rep = agler.agler_verify(U, tol=tol, samples=samples, seed=args.seed)
    gram = agler.v_isometry_check(U, tol=tol, seed=args.seed)
    body = {"tol": tol, "seed": args.seed, "samples": samples, "agler": rep.as_dict(),
            "v_isometry": gram.as_dict(), "max_residual": rep.residuals["total"]}
    return _report("agler verify", {"file": args.file}, body, rep.passed and gram.passed)


def cmd_agler_defects(args):
    U = load_colligation(_need(args, "file"))
    tol = _tol(args, colligation.DEFAULT_TOL)
    geom = agler.model_subspaces(U, tol, args.rank_tol, require_stable=False)
    body = {"tol": tol, "rank_tol": args.rank_tol, "geometry": geom.as_dict(), "X": geom.X}
    ok = geom.stabilized and geom.residuals["off_diagonal"] < tol
    if geom.canonical:
        ok = ok and unitary_defect(geom.X) < tol if geom.X.size else ok
    return _report("agler defects", {"file": args.file}, body, ok)


def cmd_model_verify(args):
    U = load_colligation(_need(args, "file"))
    tol = _tol(args, colligation.DEFAULT_TOL)
    kind = args.kind or "tcfm"
    if kind not in agler.KINDS:
        raise UsageError(f"--kind must be one of {', '.join(agler.KINDS)}")
    rep = agler.functional_model_verify(U, kind, args.order, tol, args.rank_tol)
    return _report("model verify", {"file": args.file, "kind": kind}, rep.as_dict(), rep.passed)


def cmd_rowc_charfunc(args):
    T = load_row_contraction(_need(args, "file"))
    tol = _tol(args, colligation.DEFAULT_TOL)
    U = rowmodel.halmos(T, tol, args.rank_tol)
    pts = _points(args, T.d)
    values = [{"point": list(z), "value": colligation.transfer_eval(U, z)} for z in pts]
    body = {"tol": tol, "dims": {"d": T.d, "n": T.n, "defect": U.p, "defect_star": U.q},
            "theta0": U.D, "pure": rowmodel.purity_check(U.D, tol), "values": values}
    if args.order is not None:
        body["series"] = encode_comm_series(colligation.transfer_taylor(U, args.order))
    return _report("rowc charfunc", {"file": args.file, "points": args.points}, body, True)


def cmd_rowc_classify(args):
    T = load_row_contraction(_need(args, "file"))
    tol = _tol(args, colligation.DEFAULT_TOL)
    c = rowmodel.classify_row(T, tol, args.rank_tol)
    ok = all(c.stabilized.values()) and c.forms_agree
    return _report("rowc classify", {"file": args.file}, {"tol": tol, "rank_tol": args.rank_tol,
                                                          "classification": c.as_dict()}, ok)


def cmd_rowc_moments(args):
    T = load_row_contraction(_need(args, "file"))
    tol = _tol(args, colligation.DEFAULT_TOL)
    order = rowmodel.DEFAULT_WORD_LENGTH if args.order is None else args.order
    mt = rowmodel.expanded_moments(T, order, tol)
    word = lambda v: "".join(str(x) for x in v)
    expanded = [{"v": word(v), "v2": word(v2), "k": k, "j": j, "value": encode_matrix(M)}
                for (v, v2, k, j), M in mt.expanded.items()]
    residuals = {"symmetry": mt.symmetry_residual(), "phi_cross_check": mt.phi_cross_check}
    body = {"tol": tol, "order": order, "nc_moments": encode_nc_series(mt.nc), "expanded": expanded,
            "residuals": residuals}
    return _report("rowc moments", {"file": args.file}, body, max(residuals.values()) < tol)


def _pair(args):
    return load_row_contraction(_need(args, "a")), load_row_contraction(_need(args, "b"))


def cmd_rowc_equiv(args):
    T, R = _pair(args)
    tol = _tol(args, 1e-9)
    if (T.d, T.n) != (R.d, R.n):
        body = {"tol": tol, "equivalent": False, "reason": "dimensions differ"}
        return _report("rowc equiv", {"a": args.a, "b": args.b}, body, False)
    res = rowmodel.equiv_intertwiner(T, R, tol, args.restarts, args.seed)
    body = {"tol": tol, "seed": args.seed, "restarts": args.restarts, "equivalent": res.found,
            "reason": "witness found" if res.found else "not found (heuristic)",
            "residuals": {"intertwiner": res.residual}, "attempts": res.attempts, "detail": res.detail}
    if res.found:
        body["witness"] = res.witness
    return _report("rowc equiv", {"a": args.a, "b": args.b}, body, res.found)


def cmd_rowc_triple_equiv(args):
    T, R = _pair(args)
    tol = _tol(args, 1e-8)
    res = rowmodel.triple_equiv(T, R, tol, args.restarts, args.seed, args.samples)
    body = {"tol": tol, "seed": args.seed, "restarts": args.restarts, **res.as_dict()}
    if res.equivalent:
        body["witnesses"] = res.witnesses
    return _report("rowc triple-equiv", {"a": args.a, "b": args.b}, body, res.equivalent)


def _parse_lambda(text: str) -> tuple[complex, complex]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise UsageError("--lambda needs two comma-separated coordinates")
    try:
        return complex(parts[0].replace(" ", "")), complex(parts[1].replace(" ", ""))
    except ValueError:
        raise UsageError(f"--lambda: cannot parse {text!r}") from None


def cmd_example_spherical(args):
    lam = _parse_lambda(_need(args, "lambda"))
    tol = _tol(args, 1e-10)
    samples = 50 if args.samples is None else args.samples
    ex = rowmodel.spherical_example(lam[0], lam[1], tol=max(tol, 1e-9), pairs=samples, seed=args.seed)
    c = rowmodel.classify_row(ex.T, rank_tol=args.rank_tol)
    origin = np.zeros(2)
    body = {
        "tol": tol, "seed": args.seed, "samples": samples,
        "row_contraction": ex.T, "colligation": ex.colligation,
        "kernel_at_origin": ex.kernel(origin, origin),
        "realized_kernel_at_origin": agler.BigKernelFactor(ex.colligation)(origin, origin),
        "classification": {"cnc": c.cnc, "strongly_cc": c.strongly_cc, "cc": c.cc},
        "residuals": {"agreement": ex.agreement, "polynomial": ex.polynomial},
    }
    ok = ex.agreement < tol and ex.polynomial < tol
    return _report("example spherical", {"lambda": args.lambda_}, body, ok)


COMMANDS: dict[tuple[str, str], Callable] = {
    ("realize", "eval"): cmd_realize_eval,
    ("check", "colligation"): cmd_check_colligation,
    ("agler", "verify"): cmd_agler_verify,
    ("agler", "defects"): cmd_agler_defects,
    ("model", "verify"): cmd_model_verify,
    ("rowc", "charfunc"): cmd_rowc_charfunc,
    ("rowc", "classify"): cmd_rowc_classify,
    ("rowc", "moments"): cmd_rowc_moments,
    ("rowc", "equiv"): cmd_rowc_equiv,
    ("rowc", "triple-equiv"): cmd_rowc_triple_equiv,
    ("example", "spherical"): cmd_example_spherical,
}


# ---------------------------------------------------------------------------
# text rendering


def _flatten(obj, prefix: str = ""):
    if isinstance(obj, dict):
        if set(obj) == {"rows", "cols", "data"}:
            yield prefix, _matrix_text(obj)
            return
        for k in sorted(obj):
            yield from _flatten(obj[k], f"{prefix}.{k}" if prefix else k)
    elif isinstance(obj, list) and obj and isinstance(obj[0], (dict, list)) and not _is_pair(obj[0]):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}[{i}]")
    else:
        yield prefix, obj


def _is_pair(x) -> bool:
    return isinstance(x, list) and len(x) == 2 and all(isinstance(t, (int, float)) for t in x)


def _matrix_text(m: dict) -> str:
    entries = [complex(re, im) if not isinstance(re, str) else re for re, im in m["data"]]
    rows = [entries[i * m["cols"]:(i + 1) * m["cols"]] for i in range(m["rows"])]
    body = "; ".join(" ".join(f"{z:.6g}" if isinstance(z, complex) else str(z) for z in r) for r in rows)
    return f"{m['rows']}x{m['cols']} [{body}]"


def render_text(report: dict) -> str:
    return "".join(f"{k}: {v}\n" for k, v in _flatten(to_jsonable(report)))


# ---------------------------------------------------------------------------
# entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ballmodel", description="Colligations, Agler decompositions and row contractions.")
    p.add_argument("group", choices=sorted({g for g, _ in COMMANDS}))
    p.add_argument("action")
    p.add_argument("--file")
    p.add_argument("--a")
    p.add_argument("--b")
    p.add_argument("--points")
    p.add_argument("--order", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float)
    p.add_argument("--rank-tol", type=float, default=RANK_TOL)
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--format", choices=("json", "text"), default="json")
    p.add_argument("--kind")
    p.add_argument("--lambda", dest="lambda_")
    return p


def _validate(args) -> None:
    for name in ("order", "samples", "restarts"):
        v = getattr(args, name)
        if v is not None and v < 0:
            raise UsageError(f"--{name} must be nonnegative")
    if args.tol is not None and not args.tol > 0:
        raise UsageError("--tol must be positive")
    if not args.rank_tol > 0:
        raise UsageError("--rank-tol must be positive")


def run(argv: Sequence[str] | None = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(list(argv) if argv is not None else None)
        fn = COMMANDS.get((args.group, args.action))
        if fn is None:
            actions = sorted(a for g, a in COMMANDS if g == args.group)
            raise UsageError(f"unknown action {args.action!r} for {args.group}; choose from {', '.join(actions)}")
        _validate(args)
        report = fn(args)
        passed = report["passed"]
    except UsageError as exc:
        err.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except NotStabilized as exc:
        err.write(f"check failed: {exc}\n")
        return EXIT_FAIL
    except BallModelError as exc:
        err.write(f"input error: {exc}\n")
        return EXIT_USAGE
    out.write(dumps(report) if args.format == "json" else render_text(report))
    return EXIT_OK if passed else EXIT_FAIL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
