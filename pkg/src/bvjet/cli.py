"""Command-line front end: ``bvjet <command> <model> [options]``."""

from __future__ import annotations

import argparse
import sys
import time
from importlib import resources
from pathlib import Path

from . import psm
from .model_file import ModelError, parse_model, parse_model_text
from .report import Check, CheckReport

COMMANDS = ("check-jacobi", "euler-forms", "noether", "kt", "ce", "master", "differential", "all")
STAGES = ("S0", "S0+S1", "SBV")

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


def load_model(arg: str) -> psm.PoissonTensor:
    """A path, or the name of a bundled model (F1, F2.model, ...)."""
    path = Path(arg)
    if path.exists():
        return parse_model(path)
    stem = arg[:-6] if arg.endswith(".model") else arg
    if "/" not in arg and "\\" not in arg:
        res = resources.files("bvjet").joinpath("models", f"{stem}.model")
        if res.is_file():
            t = parse_model_text(res.read_text(encoding="utf-8"), f"{stem}.model")
            t.name = t.name or stem
            return t
    raise ModelError(f"no such model file or bundled model: {arg}")


def _precondition_failure(name: str, err: Exception) -> CheckReport:
    rep = CheckReport()
    rep.add(Check(name, False, "", f"precondition failed: {err}"))
    return rep


def _guarded(name: str, fn) -> CheckReport:
    try:
        return fn()
    except psm.PreconditionError as e:
        return _precondition_failure(name, e)


def jacobi_report(alpha: psm.PoissonTensor) -> CheckReport:
    t0 = time.perf_counter()
    v = psm.jacobi_check(alpha)
    rep = CheckReport()
    rep.add(Check("Jacobi identity", v.ok, v.witness.render() if v.witness is not None else "",
                  v.detail, time.perf_counter() - t0))
    return rep


def run_command(command: str, alpha: psm.PoissonTensor, stage: str = "SBV") -> CheckReport:
    P = psm.PSMComplex(alpha)
    rep = CheckReport()
    if command in ("check-jacobi", "all"):
        rep.extend(jacobi_report(alpha))
    if command in ("euler-forms", "all"):
        rep.extend(psm.euler_forms_report(P))
    if command in ("noether", "all"):
        rep.extend(_guarded("Noether identities", lambda: psm.noether_identity_check(P)))
    if command in ("kt", "all"):
        rep.extend(_guarded("Koszul-Tate differential", lambda: psm.kt_differential(P)[1]))
    if command in ("ce", "all"):
        rep.extend(psm.ce_delta(P)[1])
    if command == "all":
        stage = "SBV"
    if command in ("master", "all"):
        rep.extend(psm.action_report(P))
        rep.extend(psm.master_report(P, stage))
    if command in ("differential", "all"):
        rep.extend(psm.differential_report(P, stage))
        if stage == "SBV":
            rep.extend(psm.staged_action_report(P))
            rep.extend(_guarded("total differential", lambda: psm.total_differential_report(P)))
    return rep


def model_summary(alpha: psm.PoissonTensor) -> dict:
    return {
        "name": alpha.name,
        "description": alpha.description,
        "dim": alpha.k,
        "alpha": {f"{i},{j}": p.render() for (i, j), p in alpha.upper()},
    }


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="bvjet",
        description="Verify Noether identities and the BV construction for a Poisson sigma model.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("model", help="model file, or a bundled model name (F1..F4)")
    ap.add_argument("--format", choices=("text", "structured"), default="text")
    ap.add_argument("--verbosity", choices=("summary", "full"), default="summary")
    ap.add_argument("--stage", choices=STAGES, default="SBV",
                    help="action used by master and differential (all always uses SBV)")
    ap.add_argument("--timing", action="store_true", help="include runtimes (output is then not reproducible)")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_INPUT if e.code else EXIT_OK
    try:
        alpha = load_model(args.model)
    except ModelError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    t0 = time.perf_counter()
    rep = run_command(args.command, alpha, args.stage)
    elapsed = round((time.perf_counter() - t0) * 1000, 3)
    full = args.verbosity == "full"
    if args.format == "structured":
        out = rep.render_structured(model_summary(alpha), args.command,
                                    elapsed if args.timing else None, full, args.timing)
    else:
        header = [f"model: {alpha.name or '-'} ({alpha.render()})", f"command: {args.command}"]
        if args.command in ("master", "differential"):
            header.append(f"stage: {args.stage}")
        if args.timing:
            header.append(f"runtime_ms: {elapsed}")
        out = rep.render_text(full=full, header=header)
    sys.stdout.write(out)
    return EXIT_OK if rep.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
