"""Command-line front end: reduce, benchmark, bode, verify, config.

Exit codes: 0 success (a non-converged run is data, not failure), 1 load or
validation error, 2 solver failure, 3 verification failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import benchmark as bench
from .cirka import CirkaOptions, cirka, verify_h2_optimality, verify_realization_equivalence
from .errors import ModelReductionError
from .interpolation import InterpolationData, verify_tangential_interpolation
from .irka import IrkaOptions, irka
from .linalg import ShiftedSolver, pencil_eigenvalues
from .metrics import bode_samples
from .mmio import find_manifest, load_model, load_rom_dir, save_rom_dir
from .model import DENSE_THRESHOLD

log = logging.getLogger("h2mor")

_STOP_NAMES = {"s0": "shifts_only", "s0+tanDir": "shifts_and_tangents"}
_STOP_LABELS = {v: k for k, v in _STOP_NAMES.items()}

EXIT_OK = 0
EXIT_LOAD = 1
EXIT_SOLVER = 2
EXIT_VERIFY = 3


def default_config() -> dict:
    """Effective defaults; these equal the reference experiment settings."""
    io = IrkaOptions()
    co = CirkaOptions()
    return {
        "tol": io.tol,
        "max_iter": io.max_iter,
        "irka_stop_criterion": _STOP_LABELS[io.stop_criterion],
        "cirka_stop_criterion": _STOP_LABELS[co.stop_criterion],
        "init_strategy": co.init_strategy,
        "update_strategy": co.update_strategy,
        "outer_tol": co.outer_tol,
        "outer_max_iter": co.outer_max_iter,
        "recycle_conjugates": io.recycle_conjugates,
    }


def _add_common(p):
    p.add_argument("--data-dir", default=None, help="directory holding benchmark matrix files")
    p.add_argument("-v", "--verbose", action="count", default=0)


def _setup_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity == 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="h2mor",
                                     description="H2-optimal model order reduction (IRKA / CIRKA)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reduce", help="reduce one model and report optimality data")
    p.add_argument("--model", required=True, help="manifest name or path")
    p.add_argument("--r", type=int, required=True, help="reduced order")
    p.add_argument("--algo", choices=["irka", "cirka"], default="cirka")
    p.add_argument("--init", choices=["zero", "eigs", "file"], default="zero")
    p.add_argument("--init-file", default=None, help="interpolation data JSON for --init file")
    p.add_argument("--tol", type=float, default=IrkaOptions().tol)
    p.add_argument("--max-iter", type=int, default=IrkaOptions().max_iter)
    p.add_argument("--stop-criterion", choices=sorted(_STOP_NAMES), default="s0")
    p.add_argument("--init-strategy", choices=["I1", "I2"], default="I2")
    p.add_argument("--update-strategy", choices=["U1", "U2", "U3"], default="U2")
    p.add_argument("--nm", type=int, default=None, help="initial model-function order (default 2r)")
    p.add_argument("--outer-tol", type=float, default=CirkaOptions().outer_tol)
    p.add_argument("--outer-max-iter", type=int, default=CirkaOptions().outer_max_iter)
    p.add_argument("--max-model-order", type=int, default=None)
    p.add_argument("--no-error", action="store_true", help="skip the H2 error computation")
    p.add_argument("--out", default=None, help="directory for rom matrices and result JSON")
    _add_common(p)

    p = sub.add_parser("benchmark", help="run IRKA and CIRKA over a model/order grid")
    p.add_argument("--models", required=True, help="comma-separated manifest names")
    p.add_argument("--r", required=True, help="comma-separated reduced orders")
    p.add_argument("--init", choices=["zero", "eigs"], default="zero")
    p.add_argument("--algos", default="irka,cirka")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--out", default=None, help="results file (default stdout)")
    p.add_argument("--compare", action="store_true",
                   help="print paired rows with speedup and the cost-comparison flag")
    p.add_argument("--no-error", action="store_true")
    _add_common(p)

    p = sub.add_parser("bode", help="emit magnitude samples |G(jw)| as CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--roms", default=None, help="comma-separated rom directories to overlay")
    p.add_argument("--wmin", type=float, default=None)
    p.add_argument("--wmax", type=float, default=None)
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--out", default=None, help="CSV path (default stdout)")
    _add_common(p)

    p = sub.add_parser("verify", help="check interpolation/optimality/equivalence residuals")
    p.add_argument("--model", required=True)
    p.add_argument("--rom", required=True, help="rom directory written by reduce --out")
    p.add_argument("--data", default=None, help="interpolation data JSON (default: rom dir)")
    p.add_argument("--check", choices=["interp", "optimality", "equivalence", "all"],
                   default="all")
    p.add_argument("--tol", type=float, default=1e-6)
    _add_common(p)

    p = sub.add_parser("config", help="dump the effective default configuration")
    _add_common(p)
    return parser


def _load(args):
    manifest = find_manifest(args.model)
    return load_model(manifest, data_dir=args.data_dir), manifest.name


def _fmt_shifts(data: InterpolationData) -> str:
    vals = sorted(set(np.round(data.shifts, 10)), key=lambda z: (z.real, abs(z.imag), z.imag))
    return ", ".join(f"{z.real:.4g}{z.imag:+.4g}j" if z.imag else f"{z.real:.4g}" for z in vals)


def cmd_reduce(args) -> int:
    if args.r < 1:
        print("error: --r must be >= 1", file=sys.stderr)
        return EXIT_LOAD
    if args.tol <= 0 or args.outer_tol <= 0:
        print("error: tolerances must be positive", file=sys.stderr)
        return EXIT_LOAD
    try:
        model, name = _load(args)
        if args.r >= model.n:
            print(f"error: r = {args.r} must be below the model order {model.n}",
                  file=sys.stderr)
            return EXIT_LOAD
        if args.init == "file":
            if not args.init_file:
                print("error: --init file requires --init-file", file=sys.stderr)
                return EXIT_LOAD
            data0 = InterpolationData.from_jsonable(
                json.loads(Path(args.init_file).read_text()))
        else:
            data0 = bench.initial_data(model, args.r, args.init)
    except (ModelReductionError, OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LOAD

    inner = IrkaOptions(tol=args.tol, max_iter=args.max_iter,
                        stop_criterion=_STOP_NAMES[args.stop_criterion])
    try:
        if args.algo == "irka":
            res = irka(model, data0, inner, ShiftedSolver(model))
            rom, data = res.rom, res.optimal_data
            counters, converged = res.counters, res.converged
            estimate = None
            k_line = f"k_IRKA = {res.iterations}"
            try:
                report = verify_h2_optimality(model, rom)
            except ModelReductionError:
                report = None
        else:
            opts = CirkaOptions(inner=inner, init_strategy=args.init_strategy,
                                update_strategy=args.update_strategy,
                                initial_nM=args.nm, outer_tol=args.outer_tol,
                                outer_max_iter=args.outer_max_iter,
                                max_model_order=args.max_model_order)
            res = cirka(model, data0, opts, ShiftedSolver(model))
            rom, data = res.rom, res.optimal_data
            counters, converged = res.counters, res.converged
            estimate = res.error_estimate
            report = res.optimality_report
            k_line = (f"k_CIRKA = {res.outer_iterations}, "
                      f"sum k_IRKA = {counters.irka_steps_total}")
    except ModelReductionError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER

    print(f"model {name}: n = {model.n}, m = {model.m}, p = {model.p}")
    print(f"algorithm {args.algo}, r = {args.r}, init = {args.init}: "
          f"converged = {str(converged).lower()}")
    print(k_line)
    print(f"n_LU (full order) = {counters.full_lu}"
          + (f", n_LU (surrogate) = {counters.surrogate_lu}" if args.algo == "cirka" else ""))
    rel = None if args.no_error else bench._rel_error(model, rom)
    if rel is not None:
        print(f"relative H2 error = {bench.format_float(rel)}")
    if estimate is not None:
        print(f"relative H2 estimate = {bench.format_float(estimate)}")
    if report is not None:
        print(f"optimality residual = {report.max_residual:.3e}")
    print(f"optimal shifts: {_fmt_shifts(data)}")

    if args.out:
        out = Path(args.out)
        save_rom_dir(rom, out)
        (out / "data.json").write_text(json.dumps(data.to_jsonable(), indent=2) + "\n")
        summary = {
            "model": name, "algorithm": args.algo, "r": args.r, "init": args.init,
            "converged": converged, "n_lu_full": counters.full_lu,
            "n_lu_surrogate": counters.surrogate_lu or None,
            "rel_h2_error": rel, "rel_h2_estimate": estimate,
            "optimality_residual": None if report is None else report.max_residual,
        }
        (out / "result.json").write_text(json.dumps(summary, indent=2) + "\n")
        print(f"wrote rom and results to {out}")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    names = [s for s in args.models.split(",") if s]
    try:
        r_values = sorted({int(s) for s in args.r.split(",") if s})
        if not names or not r_values or any(r < 1 for r in r_values):
            raise ValueError("need at least one model and positive orders")
        algos = tuple(s for s in args.algos.split(",") if s)
        for a in algos:
            if a not in ("irka", "cirka"):
                raise ValueError(f"unknown algorithm '{a}'")
        models = {}
        for name in names:
            manifest = find_manifest(name)
            models[manifest.name] = load_model(manifest, data_dir=args.data_dir)
    except (ModelReductionError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LOAD

    rows = bench.run_benchmark(models, r_values, init=args.init, algorithms=algos,
                               compute_errors=not args.no_error)
    if args.out:
        bench.write_results(rows, args.format, args.out)
        print(f"wrote {len(rows)} rows to {args.out}")
    else:
        print(bench.results_to_string(rows, args.format), end="")

    if args.compare:
        by_key = {(row.model, row.r, row.algorithm): row for row in rows}
        for name in sorted(models):
            for r in r_values:
                a = by_key.get((name, r, "irka"))
                b = by_key.get((name, r, "cirka"))
                if a is None or b is None:
                    continue
                speed = a.time_s / b.time_s if b.time_s else float("nan")
                cheaper = (b.n_lu_full or 0) < (a.n_lu_full or 0)
                print(f"{name} r={r}: n_LU {a.n_lu_full} (irka) vs {b.n_lu_full} (cirka), "
                      f"speedup {speed:.2f}x, cirka cheaper: {str(cheaper).lower()}")
    return EXIT_OK


def cmd_bode(args) -> int:
    try:
        model, name = _load(args)
        roms = []
        if args.roms:
            for d in args.roms.split(","):
                roms.append((Path(d).name or d, load_rom_dir(d)))
    except (ModelReductionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LOAD
    wmin, wmax = args.wmin, args.wmax
    if wmin is None or wmax is None:
        if model.n <= DENSE_THRESHOLD:
            mags = np.abs(pencil_eigenvalues(model))
            mags = mags[mags > 0]
            lo = 10 ** np.floor(np.log10(mags.min())) / 10 if mags.size else 1e-2
            hi = 10 ** np.ceil(np.log10(mags.max())) * 10 if mags.size else 1e4
        else:
            lo, hi = 1e-2, 1e4
        wmin = lo if wmin is None else wmin
        wmax = hi if wmax is None else wmax
    if not (0 < wmin < wmax) or args.points < 1:
        print(f"error: need 0 < wmin < wmax and points >= 1 "
              f"(got {wmin}, {wmax}, {args.points})", file=sys.stderr)
        return EXIT_LOAD

    freqs = np.logspace(np.log10(wmin), np.log10(wmax), args.points)
    tables = [(name, bode_samples(model, freqs))]
    for label, rom in roms:
        tables.append((label, bode_samples(rom, freqs)))

    header = ["omega"]
    for label, mags in tables:
        _, p, m = mags.shape
        header += [f"mag_{label}_{i + 1}{j + 1}" for i in range(p) for j in range(m)]
    lines = [",".join(header)]
    for k, w in enumerate(freqs):
        rec = [f"{w:.10g}"]
        for _, mags in tables:
            rec += [f"{v:.10g}" for v in mags[k].ravel()]
        lines.append(",".join(rec))
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.points} frequency samples to {args.out}")
    else:
        print(text, end="")
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        model, name = _load(args)
        rom = load_rom_dir(args.rom)
        data_path = Path(args.data) if args.data else Path(args.rom) / "data.json"
        data = None
        if data_path.exists():
            data = InterpolationData.from_jsonable(json.loads(data_path.read_text()))
            data.validate(model.m, model.p)
        elif args.check in ("interp", "equivalence", "all"):
            print(f"error: no interpolation data at {data_path}", file=sys.stderr)
            return EXIT_LOAD
        if rom.m != model.m or rom.p != model.p:
            raise ModelReductionError(
                f"rom I/O dimensions {(rom.p, rom.m)} do not match model {(model.p, model.m)}")
    except (ModelReductionError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LOAD

    failed = False
    try:
        if args.check in ("interp", "all"):
            rep = verify_tangential_interpolation(model, rom, data)
            ok = rep.passed(args.tol)
            failed |= not ok
            print(f"interpolation residual = {rep.max_residual:.3e} "
                  f"({'pass' if ok else 'FAIL'} at {args.tol:g})")
        if args.check in ("optimality", "all"):
            rep = verify_h2_optimality(model, rom)
            ok = rep.passed(args.tol)
            failed |= not ok
            print(f"optimality residual = {rep.max_residual:.3e} "
                  f"({'pass' if ok else 'FAIL'} at {args.tol:g})")
            for e in rep.entries:
                tag = "skipped (unstable)" if e.skipped_unstable else f"worst {e.worst:.3e}"
                print(f"  pole {e.pole:.6g}: {tag}")
        if args.check in ("equivalence", "all"):
            rep = verify_realization_equivalence(model, data, rom)
            ok = rep.passed(args.tol)
            failed |= not ok
            print(f"realization deviation = {rep.max_deviation:.3e} "
                  f"({'pass' if ok else 'FAIL'} at {args.tol:g})")
    except ModelReductionError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_VERIFY if failed else EXIT_OK


def cmd_config(_args) -> int:
    print(json.dumps(default_config(), indent=2))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(getattr(args, "verbose", 0))
    handler = {
        "reduce": cmd_reduce,
        "benchmark": cmd_benchmark,
        "bode": cmd_bode,
        "verify": cmd_verify,
        "config": cmd_config,
    }[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
