"""Command-line front end.

Exit status: 0 for a definitive result, 1 when the question stays
undecided (or a certificate fails verification), 2 for usage or input
errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import certificates as certs
from . import leslie, rds
from .matcore import (
    DEFAULT_MARGIN,
    DEFAULT_TOL,
    MatrixError,
    load_matrix,
    matrix_to_json,
    spectral_radius,
)

EXIT_OK, EXIT_UNDECIDED, EXIT_INPUT = 0, 1, 2

FLAVORS = ("clclf", "jlclf", "cdlf-stein", "cdlf-lyapunov", "stein", "lyapunov", "auto")


class InputError(Exception):
    pass


def _common(p: argparse.ArgumentParser, d: bool = False, b: bool = True) -> None:
    p.add_argument("-a", required=True, metavar="A.json", help="matrix A")
    if b:
        p.add_argument("-b", required=True, metavar="B.json", help="matrix B")
    if d:
        p.add_argument("-d", required=True, metavar="D.json", help="coupling matrix D")
    p.add_argument("--coupling", choices=["diagonal", "leslie", "leslie-single-row"], default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--budget", type=int, default=rds.DEFAULT_BUDGET)
    p.add_argument("--margin", type=float, default=DEFAULT_MARGIN, help="Schur margin")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL, help="eigen-iteration tolerance")
    p.add_argument("--json", action="store_true", help="emit JSON")
    p.add_argument("--leslie", action="store_true", help="require the extended Leslie pattern")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rdstab",
        description="Robust diffusive stability of coupled positive linear systems.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("spectral-radius", help="spectral radius and Schur test of one matrix")
    _common(p, b=False)

    p = sub.add_parser("certify", help="search for (or verify) a Lyapunov certificate")
    p.add_argument("family", nargs="?", choices=["clclf", "jlclf", "cdlf", "auto"], default=None)
    p.add_argument("--flavor", choices=FLAVORS, default=None)
    p.add_argument("--verify", metavar="CERT.json", default=None)
    _common(p)

    p = sub.add_parser("check-rds", help="certify or refute robust diffusive stability")
    _common(p)

    p = sub.add_parser("find-destabilizer", help="search for a destabilising coupling")
    _common(p)

    p = sub.add_parser("rho-coupled", help="spectral radius of the coupled matrix")
    _common(p, d=True)

    p = sub.add_parser("simulate", help="iterate the coupled system")
    _common(p, d=True)
    p.add_argument("--x0", default=None, help="comma-separated initial x (default all ones)")
    p.add_argument("--y0", default=None, help="comma-separated initial y (default all ones)")
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--out", default=None, metavar="PATH.csv", help="write the trajectory as CSV")

    p = sub.add_parser("row-selections", help="all row selections of (A, B) and their spectral radii")
    _common(p)
    return parser


# -- loading ----------------------------------------------------------------

def _load(path: str, want_leslie: bool) -> np.ndarray:
    m = load_matrix(path)
    if want_leslie:
        try:
            leslie.validate_leslie(m)
        except leslie.LesliePatternError as exc:
            coords = ", ".join(f"rows[{i}][{j}]" for i, j in exc.offenders)
            raise InputError(f"{path}: nonzero entries outside the Leslie pattern at {coords}") from exc
    return m


def _pair(args, a: np.ndarray, b: np.ndarray, default: str = "diagonal") -> rds.SystemPair:
    coupling = args.coupling or ("leslie" if args.leslie else default)
    try:
        return rds.SystemPair(a, b, coupling, args.margin)
    except MatrixError as exc:
        raise InputError(f"{args.a}, {args.b}: {exc}") from exc


def _vector(text: Optional[str], n: int, what: str) -> np.ndarray:
    if text is None:
        return np.ones(n)
    try:
        v = np.array([float(x) for x in text.split(",")])
    except ValueError as exc:
        raise InputError(f"--{what}: not a comma-separated list of numbers") from exc
    if v.shape != (n,) or np.any(v < 0) or not np.all(np.isfinite(v)):
        raise InputError(f"--{what}: expected {n} nonnegative numbers")
    return v


def _emit(args, payload: dict, lines: Sequence[str]) -> None:
    if args.json:
        print(json.dumps(payload, indent=2))
    else:
        print("\n".join(lines))


def _fmt(v) -> str:
    return "[" + ", ".join(f"{x:.6g}" for x in np.asarray(v).ravel()) + "]"


# -- verbs ------------------------------------------------------------------

def cmd_spectral_radius(args) -> int:
    a = _load(args.a, args.leslie)
    res = spectral_radius(a, args.tol)
    schur = res.rho < 1.0 - args.margin
    payload = {
        "rho": res.rho,
        "method": res.method,
        "residual": res.residual,
        "schur": schur,
        "perron_vector": None if res.perron_vector is None else [float(x) for x in res.perron_vector],
    }
    lines = [f"rho = {res.rho:.12g} ({res.method}, cross-check residual {res.residual:.2e})",
             f"Schur-stable (margin {args.margin:g}): {'yes' if schur else 'no'}"]
    if res.perron_vector is not None:
        lines.append(f"Perron vector: {_fmt(res.perron_vector)}")
    _emit(args, payload, lines)
    return EXIT_OK


def _resolve_flavor(family: Optional[str], flavor: Optional[str]) -> str:
    if family == "cdlf":
        if flavor in (None, "auto"):
            return "cdlf-auto"
        if flavor in ("stein", "lyapunov"):
            return f"cdlf-{flavor}"
        if flavor in ("cdlf-stein", "cdlf-lyapunov"):
            return flavor
        raise InputError(f"--flavor {flavor} does not apply to cdlf")
    if family in ("clclf", "jlclf"):
        if flavor not in (None, family):
            raise InputError(f"--flavor {flavor} conflicts with {family}")
        return family
    flavor = flavor or "auto"
    if flavor in ("stein", "lyapunov"):
        return f"cdlf-{flavor}"
    return flavor


def cmd_certify(args) -> int:
    a = _load(args.a, args.leslie)
    b = _load(args.b, args.leslie)
    if a.shape != b.shape:
        raise InputError(f"{args.a}, {args.b}: dimension mismatch {a.shape} vs {b.shape}")
    if args.verify:
        try:
            obj = json.loads(Path(args.verify).read_text(encoding="utf-8"))
            cert = rds.certificate_from_json(obj)
        except (OSError, json.JSONDecodeError, ValueError, KeyError, TypeError) as exc:
            raise InputError(f"{args.verify}: not a readable certificate ({exc})") from exc
        ok = rds.verify_certificate(a, b, cert)
        _emit(args, {"flavor": cert.flavor, "verified": ok},
              [f"{cert.flavor} certificate: {'verified' if ok else 'NOT verified'}"])
        return EXIT_OK if ok else EXIT_UNDECIDED

    which = _resolve_flavor(args.family, args.flavor)
    order = {
        "auto": ["clclf", "jlclf", "cdlf-lyapunov", "cdlf-stein"],
        "cdlf-auto": ["cdlf-lyapunov", "cdlf-stein"],
    }.get(which, [which])
    undecided = False
    for kind in order:
        if kind == "clclf":
            cert = certs.find_clclf(a, b)
        elif kind == "jlclf":
            cert = certs.find_jlclf(a, b)
        else:
            search = certs.find_cdlf(a, b, kind.split("-")[1])
            undecided |= search.status == "undecided"
            cert = search.certificate
        if cert is not None:
            payload = cert.to_json()
            vec = cert.v if isinstance(cert, certs.CopositiveCert) else cert.e
            label = "vector" if isinstance(cert, certs.CopositiveCert) else "diag"
            _emit(args, payload, [f"certificate found: {kind}",
                                  f"{label} = {_fmt(vec)}", f"margin = {cert.margin:.6g}"])
            return EXIT_OK
    status = "undecided" if undecided else "infeasible"
    _emit(args, {"flavor": which, "status": status, "certificate": None},
          [f"no {which} certificate ({status})"])
    return EXIT_UNDECIDED if undecided else EXIT_OK


def cmd_check_rds(args) -> int:
    pair = _pair(args, _load(args.a, args.leslie), _load(args.b, args.leslie))
    verdict = rds.decide_rds(pair, args.budget, args.seed)
    lines = [f"coupling class: {pair.coupling_class.value}", f"status: {verdict.status}"]
    if verdict.reason:
        lines.append(f"reason: {verdict.reason} ({verdict.explanation})")
    if verdict.certificate is not None:
        lines.append(f"certificate: {json.dumps(verdict.certificate.to_json())}")
    if verdict.witness_d is not None:
        lines.append(f"destabilising D: {_fmt(verdict.witness_d)}")
        lines.append(f"rho(M) = {verdict.rho_at_witness:.12g}")
    lines += [f"note: {n}" for n in verdict.notes]
    _emit(args, verdict.to_json(), lines)
    return EXIT_UNDECIDED if verdict.status == "undecided" else EXIT_OK


def cmd_find_destabilizer(args) -> int:
    if args.budget < 1:
        raise InputError("--budget must be at least 1")
    pair = _pair(args, _load(args.a, args.leslie), _load(args.b, args.leslie))
    hit = rds.find_destabilizer(pair, args.budget, args.seed)
    if hit is None:
        _emit(args, {"found": False, "witness_d": None, "rho_at_witness": None,
                     "seed": args.seed, "budget": args.budget},
              ["no destabilising coupling found (this is not a proof of stability)"])
        return EXIT_UNDECIDED
    d, rho = hit
    _emit(args, {"found": True, "witness_d": matrix_to_json(d), "rho_at_witness": rho,
                 "seed": args.seed, "budget": args.budget},
          [f"destabilising D: {_fmt(d)}", f"rho(M) = {rho:.12g}"])
    return EXIT_OK


def _pair_and_d(args):
    a = _load(args.a, args.leslie)
    b = _load(args.b, args.leslie)
    d = load_matrix(args.d)
    default = "diagonal"
    if args.coupling is None and not args.leslie:
        # infer the class from the shape of D when not given
        default = "diagonal" if np.count_nonzero(d - np.diag(np.diag(d))) == 0 else "leslie"
    pair = _pair(args, a, b, default)
    try:
        d = rds.check_coupling(pair, d)
    except MatrixError as exc:
        raise InputError(f"{args.d}: {exc}") from exc
    return pair, d


def cmd_rho_coupled(args) -> int:
    pair, d = _pair_and_d(args)
    rho = rds.rho_coupled(pair, d, args.tol)
    _emit(args, {"rho": rho, "schur": rho < 1.0 - args.margin},
          [f"rho(M) = {rho:.12g}", f"Schur-stable: {'yes' if rho < 1.0 - args.margin else 'no'}"])
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.steps < 1:
        raise InputError("--steps must be at least 1")
    pair, d = _pair_and_d(args)
    x0 = _vector(args.x0, pair.n, "x0")
    y0 = _vector(args.y0, pair.n, "y0")
    traj = rds.simulate_coupled(pair, d, x0, y0, args.steps)
    norms = traj.norms
    if args.out:
        n = pair.n
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"x_{i + 1}" for i in range(n)] + [f"y_{i + 1}" for i in range(n)] + ["norm"])
            for t, (state, nrm) in enumerate(zip(traj.states, norms)):
                w.writerow([t] + [repr(float(v)) for v in state] + [repr(float(nrm))])
    growth = traj.growth_estimate
    payload = {"steps": int(traj.states.shape[0] - 1), "growth_estimate": growth,
               "diverged": traj.diverged, "final_norm": float(norms[-1]), "out": args.out}
    _emit(args, payload, [f"steps: {payload['steps']}",
                          f"growth estimate (log-slope): {growth:.6g}",
                          f"final norm: {norms[-1]:.6g}"] + (["diverged: yes"] if traj.diverged else []))
    return EXIT_OK


def cmd_row_selections(args) -> int:
    a = _load(args.a, args.leslie)
    b = _load(args.b, args.leslie)
    if a.shape != b.shape:
        raise InputError(f"{args.a}, {args.b}: dimension mismatch {a.shape} vs {b.shape}")
    sels = leslie.row_selections(a, b)
    entries = []
    lines = []
    for sel in sels:
        rho = spectral_radius(sel.matrix, args.tol).rho
        src = "".join("A" if c else "B" for c in sel.chooser)
        entries.append({"rows_from": src, "rho": rho, "schur": rho < 1.0 - args.margin})
        lines.append(f"{src}: rho = {rho:.12g}")
    v = leslie.common_right_vector(a, b)
    all_schur = all(e["schur"] for e in entries)
    payload = {"selections": entries, "all_schur": all_schur,
               "common_right_vector": None if v is None else [float(x) for x in v]}
    lines.append(f"all selections Schur: {'yes' if all_schur else 'no'}")
    lines.append("common right vector: " + ("none" if v is None else _fmt(v)))
    _emit(args, payload, lines)
    return EXIT_OK


COMMANDS = {
    "spectral-radius": cmd_spectral_radius,
    "certify": cmd_certify,
    "check-rds": cmd_check_rds,
    "find-destabilizer": cmd_find_destabilizer,
    "rho-coupled": cmd_rho_coupled,
    "simulate": cmd_simulate,
    "row-selections": cmd_row_selections,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    if args.tol <= 0 or args.margin < 0:
        print("error: --tol must be positive and --margin nonnegative", file=sys.stderr)
        return EXIT_INPUT
    try:
        return COMMANDS[args.verb](args)
    except (InputError, MatrixError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
