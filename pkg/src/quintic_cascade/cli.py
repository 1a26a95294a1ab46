"""Command-line front end.

Every run echoes its resolved configuration (flat key=value lines, the same
format the --config file uses), writes outputs atomically, and exits with:
0 success, 2 invalid configuration, 3 numerical failure (diagnostics file
written next to the requested output), 4 certificate failure.

Output formats are documented in FORMATS.md at the repository root.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import galerkin, genset, lattice, localframe, reduced, resonance, toy

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_CERTIFICATE = 4


def _write_atomic(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".qc-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _echo_config(args: argparse.Namespace) -> None:
    for key in sorted(vars(args)):
        if key in ("func", "config"):
            continue
        print(f"{key}={getattr(args, key)}")


def _apply_config_file(args: argparse.Namespace, parser: argparse.ArgumentParser) -> None:
    """Flat key=value file; command-line flags win."""
    if not getattr(args, "config", None):
        return
    defaults = {}
    with open(args.config) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"bad config line: {line!r}")
            k, v = line.split("=", 1)
            defaults[k.strip().replace("-", "_")] = v.strip()
    for k, v in defaults.items():
        if not hasattr(args, k):
            raise ValueError(f"unknown config key: {k}")
        # flags given explicitly on the command line take precedence;
        # argparse stores them already, so only fill values equal to the
        # parser default
        if getattr(args, k) == parser.get_default(k):
            cur = parser.get_default(k)
            cast = type(cur) if cur is not None else str
            setattr(args, k, cast(v) if cast is not bool else v.lower() == "true")


def _float_fmt(x: float) -> str:
    return f"{x:.17g}"


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_build_set(args) -> int:
    gset, report = genset.build_for_target(
        K=args.K, delta=args.delta, min_norm=args.min_norm, s=Fraction(args.s),
        seed=args.seed,
    )
    lattice.save(gset, args.out)
    cert_lines = [
        f"N {report.N}",
        f"n {report.n}",
        f"scale {report.scale}",
        f"ratio {report.ratio}",
        f"target_ratio {report.target_ratio}",
        f"min_norm2 {report.min_norm2}",
        f"certified_nondegenerate {report.certified_nondegenerate}",
        f"complete {report.complete}",
    ]
    _write_atomic(args.out + ".cert", "\n".join(cert_lines) + "\n")
    print(f"ratio {report.ratio} (target {report.target_ratio})")
    return EXIT_OK


def cmd_certify(args) -> int:
    gset = lattice.load(args.set)
    comp = resonance.is_complete(gset)
    try:
        nd = resonance.check_nondegeneracy(gset)
        structural = None
    except lattice.StructuralError as exc:
        structural = str(exc)
        nd = resonance.check_nondegeneracy(gset, validate=False)
    vectors = resonance.enumerate_resonant_vectors(gset)
    classes = []
    for lam in vectors:
        try:
            classes.append(resonance.classify_resonant_vector(lam, gset))
        except ValueError:
            classes.append("other")
    text = resonance.certificate_text(gset, nd, comp, vectors, classes)
    if structural:
        text = f"structural_error {structural}\n" + text
    out = args.out or (args.set + ".cert")
    _write_atomic(out, text)
    bad = (
        structural is not None
        or not comp.ok
        or nd.status != "nondegenerate"
        or any(c == "other" for c in classes)
    )
    print(f"status {'FAIL' if bad else 'OK'}: {out}")
    return EXIT_CERTIFICATE if bad else EXIT_OK


def _parse_b0(spec: str, N: int) -> np.ndarray:
    """periodic:<mode 1-based> | heteroclinic:<I1> | comma-separated values."""
    if spec.startswith("periodic:"):
        j = int(spec.split(":", 1)[1])
        b = np.zeros(N, complex)
        b[j - 1] = 1.0
        return b
    if spec.startswith("heteroclinic:"):
        I1 = float(spec.split(":", 1)[1])
        if N < 2:
            raise ValueError("need N >= 2")
        b = np.zeros(N, complex)
        b[:2] = toy.two_generation_initial(int(spec.split(":")[2]) if spec.count(":") > 1 else 2, I1)[:2]
        return b
    vals = [complex(tok) for tok in spec.split(",")]
    if len(vals) != N:
        raise ValueError(f"b0 has {len(vals)} entries, expected {N}")
    return np.array(vals, complex)


def _toy_csv(traj: toy.Trajectory) -> str:
    N = traj.b.shape[1]
    cols = ["t"] + [f"re_b{k+1}" for k in range(N)] + [f"im_b{k+1}" for k in range(N)] + ["J", "h"]
    lines = [",".join(cols)]
    J = traj.J
    h = traj.h
    for i, t in enumerate(traj.t):
        row = [t] + list(traj.b[i].real) + list(traj.b[i].imag) + [J[i], h[i]]
        lines.append(",".join(_float_fmt(float(x)) for x in row))
    return "\n".join(lines) + "\n"


def cmd_simulate_toy(args) -> int:
    if args.set:
        gset = lattice.load(args.set)
        N, n = gset.N, gset.n
    else:
        N, n = args.N, args.n if args.n else 1 << (args.N - 1)
    b0 = _parse_b0(args.b0, N)
    precision = "double" if args.precision == "double" else int(args.precision)
    try:
        traj = toy.integrate(b0, args.T, n, tol=args.tol, precision=precision,
                             rescaled=args.rescaled)
    except toy.StepFailure as exc:
        _write_atomic(args.out + ".diag", f"step failure: {exc}\n")
        return EXIT_NUMERICAL
    _write_atomic(args.out, _toy_csv(traj))
    print(f"wrote {args.out} (J drift {traj.J_drift:.3e}, h drift {traj.h_drift:.3e})")
    return EXIT_OK


def cmd_slider_search(args) -> int:
    res = localframe.slider_shoot(
        N=args.N, eps=args.eps, sigma=args.sigma,
        rescaled=True, residual_tol=args.residual_tol,
    )
    _write_atomic(args.out, _toy_csv(res.traj))
    hops = [
        {
            "hop": h.hop,
            "from_mode": h.from_mode,
            "to_mode": h.to_mode,
            "injection": h.injection,
            "bisection_iters": h.bisection_iters,
            "residual": h.residual,
            "duration": h.duration,
            "precision": h.precision,
        }
        for h in res.hops
    ]
    _write_atomic(
        args.out + ".hops.jsonl", "".join(json.dumps(h) + "\n" for h in hops)
    )
    ok = res.ok and localframe.verify_slider(res.traj, args.eps)
    print(f"slider {'OK' if ok else 'FAIL'}: deepest mode {res.deepest_mode}, T0={res.T0}")
    return EXIT_OK if ok else EXIT_NUMERICAL


def cmd_compare_nls(args) -> int:
    gset = lattice.load(args.set)
    lambdas = [float(tok) for tok in args.lambda_ladder.split(",")]
    try:
        rep = galerkin.approximation_experiment(
            gset, lambdas, sigma=args.sigma, T0=args.T0
        )
    except ValueError as exc:
        _write_atomic(os.path.join(args.out, "diagnostics.txt"), str(exc) + "\n")
        return EXIT_NUMERICAL
    os.makedirs(args.out, exist_ok=True)
    for lam, ts, curve in zip(rep.lambdas, rep.times, rep.error_curves):
        lines = ["t,l1_error"]
        lines += [f"{_float_fmt(float(t))},{_float_fmt(float(e))}" for t, e in zip(ts, curve)]
        _write_atomic(os.path.join(args.out, f"error_lambda{lam:g}.csv"),
                      "\n".join(lines) + "\n")
    summary = [
        f"lambdas {rep.lambdas}",
        f"B {rep.B}",
        f"final_errors {rep.final_errors}",
        f"bound_curve {rep.bound_curve}",
        f"fitted_exponent {rep.fitted_exponent}",
        f"error_integrals {rep.error_integrals}",
        f"error_integral_leading {rep.error_integral_leading}",
        f"sigma {rep.sigma}",
        f"T0 {rep.T0}",
        f"C_N {rep.C_N}",
    ]
    _write_atomic(os.path.join(args.out, "summary.txt"), "\n".join(summary) + "\n")
    print(f"fitted exponent {rep.fitted_exponent:.3f}")
    return EXIT_OK


def _reduced_model(name: str, n: int) -> reduced.ReducedSystem:
    if name == "s2":
        return reduced.frakS2_system("display")
    if name == "s2-derived":
        return reduced.frakS2_system("derived")
    if name == "s3":
        return reduced.frakS3_system()
    raise ValueError(f"unknown model {name!r}")


def cmd_phase_portrait(args) -> int:
    if args.model == "s1":
        phis, I1s, H, sep = toy.phase_portrait_2g(args.n, args.grid, args.grid)
        lines = ["phi,I1,h2g"]
        for i, I1 in enumerate(I1s):
            for k, phi in enumerate(phis):
                lines.append(f"{_float_fmt(phi)},{_float_fmt(I1)},{_float_fmt(H[i,k])}")
        lines.append(f"# separatrix_level {sep}")
        _write_atomic(args.out, "\n".join(lines) + "\n")
        return EXIT_OK
    system = _reduced_model(args.model, args.n)
    rows = reduced.phase_portrait(system, args.grid, args.grid)
    lines = ["dtheta,I1,H"]
    lines += [f"{_float_fmt(a)},{_float_fmt(b)},{_float_fmt(c)}" for a, b, c in rows]
    _write_atomic(args.out, "\n".join(lines) + "\n")
    return EXIT_OK


def _scan_worker(task):
    model, n, I10, phase, T = task
    system = _reduced_model(model, n)
    ok, sup, rows = reduced.no_full_transfer_scan(
        system, I10, phases=[phase], T=T, margin=0.0
    )
    r = rows[0]
    return (phase, r.sup_I1, r.H_drift, r.J_drift)


def cmd_no_transfer_scan(args) -> int:
    phases = np.linspace(
        0.0,
        _reduced_model(args.model, args.n).angular_period,
        args.phases,
        endpoint=False,
    )
    tasks = [(args.model, args.n, args.I10, float(p), args.T) for p in phases]
    if args.workers > 1:
        import multiprocessing as mp

        with mp.Pool(args.workers) as pool:
            results = pool.map(_scan_worker, tasks)
    else:
        results = [_scan_worker(t) for t in tasks]
    lines = ["phase,sup_I1,H_drift,J_drift"]
    lines += [
        ",".join(_float_fmt(v) for v in row) for row in results
    ]
    sup = max(r[1] for r in results)
    lines.append(f"# sup_I1 {sup}")
    _write_atomic(args.out, "\n".join(lines) + "\n")
    ok = sup <= 1.0 - args.margin
    print(f"sup I1 = {sup:.6f} ({'OK' if ok else 'TRANSFER'})")
    return EXIT_OK if ok else EXIT_NUMERICAL


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="quintic-cascade")
    p.add_argument("--workers", type=int, default=1, help="parallelism budget")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build-set", help="construct a certified generation set")
    b.add_argument("--K", type=float, required=True)
    b.add_argument("--delta", type=float, required=True)
    b.add_argument("--s", type=str, default="2")
    b.add_argument("--min-norm", type=int, default=1000)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", required=True)
    b.add_argument("--config", default=None)
    b.set_defaults(func=cmd_build_set)

    c = sub.add_parser("certify", help="exhaustive certificates for a set file")
    c.add_argument("--set", required=True)
    c.add_argument("--out", default=None)
    c.add_argument("--config", default=None)
    c.set_defaults(func=cmd_certify)

    t = sub.add_parser("simulate-toy", help="integrate the toy model")
    t.add_argument("--set", default=None)
    t.add_argument("--N", type=int, default=6)
    t.add_argument("--n", type=int, default=0)
    t.add_argument("--b0", required=True)
    t.add_argument("--T", type=float, default=1.0)
    t.add_argument("--tol", type=float, default=1e-9)
    t.add_argument("--precision", default="double")
    t.add_argument("--rescaled", action="store_true")
    t.add_argument("--out", required=True)
    t.add_argument("--config", default=None)
    t.set_defaults(func=cmd_simulate_toy)

    s = sub.add_parser("slider-search", help="shoot the cascade orbit")
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--eps", type=float, default=0.1)
    s.add_argument("--sigma", type=float, default=1e-2)
    s.add_argument("--precision", default="double")
    s.add_argument("--max-hops", type=int, default=16)
    s.add_argument("--residual-tol", type=float, default=1e-4)
    s.add_argument("--out", required=True)
    s.add_argument("--config", default=None)
    s.set_defaults(func=cmd_slider_search)

    g = sub.add_parser("compare-nls", help="resonant-vs-full ladder experiment")
    g.add_argument("--set", required=True)
    g.add_argument("--lambda-ladder", default="8,16,32")
    g.add_argument("--sigma", type=float, default=0.5)
    g.add_argument("--T0", type=float, default=1e-3)
    g.add_argument("--out", required=True)
    g.add_argument("--config", default=None)
    g.set_defaults(func=cmd_compare_nls)

    ph = sub.add_parser("phase-portrait", help="level-set samples for contouring")
    ph.add_argument("--model", choices=["s1", "s2", "s2-derived", "s3"], required=True)
    ph.add_argument("--n", type=int, default=2)
    ph.add_argument("--grid", type=int, default=101)
    ph.add_argument("--out", required=True)
    ph.add_argument("--config", default=None)
    ph.set_defaults(func=cmd_phase_portrait)

    nt = sub.add_parser("no-transfer-scan", help="sup of transferred action")
    nt.add_argument("--model", choices=["s2", "s2-derived", "s3"], required=True)
    nt.add_argument("--n", type=int, default=2)
    nt.add_argument("--I10", type=float, default=1e-3)
    nt.add_argument("--phases", type=int, default=100)
    nt.add_argument("--T", type=float, default=100.0)
    nt.add_argument("--margin", type=float, default=0.1)
    nt.add_argument("--out", required=True)
    nt.add_argument("--config", default=None)
    nt.set_defaults(func=cmd_no_transfer_scan)

    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config_file(args, parser)
    except (OSError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _echo_config(args)
    try:
        return args.func(args)
    except (ValueError, lattice.StructuralError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RuntimeError, ArithmeticError, MemoryError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
