"""``windex`` command line.

Every command writes one JSON report

    {"command": ..., "inputs_digest": ..., "results": ..., "residuals": ...}

with sorted keys and floats at 17 significant digits, so reruns are
byte-identical.  Exit status: 0 success, 1 computation error or failed check,
2 malformed input.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import time

import numpy as np

from . import suite as acceptance
from . import toeplitz as tp
from . import winding as wd
from . import zlab
from .centre import CentreElement, Strategy
from .errors import SpecError, WindexError
from .twisted import AlgebraContext, TwistedElement

COMMANDS = ("wind", "index", "fiber", "lab", "toeplitz-trace", "numeric-index", "numeric-wind",
            "suite", "validate")


# ---- deterministic JSON ----

def _key(k):
    try:
        return (0, int(k), "")
    except (TypeError, ValueError):
        return (1, 0, str(k))


def _num(x):
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    text = format(x + 0.0, ".17g")     # folds -0.0 into 0.0
    return text if any(ch in text for ch in ".e") else text + ".0"


def dumps(obj, indent=2, _level=0):
    """JSON with numerically sorted integer keys and 17-digit floats."""
    pad, inner = " " * (indent * _level), " " * (indent * (_level + 1))
    if isinstance(obj, (CentreElement, TwistedElement, wd.WindingResult, wd.FiberReport)):
        obj = obj.to_json()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = sorted(obj.items(), key=lambda kv: _key(kv[0]))
        body = ",\n".join(f"{inner}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in items)
        return "{\n" + body + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.number)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        body = ",\n".join(inner + dumps(v, indent, _level + 1) for v in obj)
        return "[\n" + body + "\n" + pad + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(float(obj))
    if isinstance(obj, (complex, np.complexfloating)):
        return dumps([obj.real, obj.imag], indent, _level)
    return json.dumps(str(obj))


# ---- inputs ----

def _load_json(path, field):
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise SpecError(field, f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(raw), raw
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise SpecError(field, f"invalid JSON in {path}: {exc}") from None


class Inputs:
    """Collects file contents so the digest covers what was actually read."""

    def __init__(self, args):
        self.args = args
        self.blobs = {}

    def json(self, path, field):
        obj, raw = _load_json(path, field)
        self.blobs[field] = hashlib.sha256(raw).hexdigest()
        return obj

    def digest(self):
        skip = {"output", "format", "timing", "func"}
        opts = {k: v for k, v in sorted(vars(self.args).items()) if k not in skip}
        payload = json.dumps({"options": opts, "files": self.blobs}, sort_keys=True, default=str)
        return "sha256:" + hashlib.sha256(payload.encode()).hexdigest()


def parse_element(obj, path=""):
    """An element document, optionally with ``factors`` (lists of terms in the same context)."""
    a = TwistedElement.from_json(obj, path)
    factors = obj.get("factors")
    if factors is None:
        return a, None
    if not isinstance(factors, list) or not factors:
        raise SpecError("factors", "expected a non-empty list of term lists")
    fs = [TwistedElement.terms_from_json(a.context, f, f"factors[{i}]") for i, f in enumerate(factors)]
    return a, fs


def _strategy(args):
    try:
        return Strategy(args.strategy)
    except ValueError:
        raise SpecError("--strategy", f"unknown strategy {args.strategy!r}") from None


# ---- commands ----

def cmd_wind(args, inputs, negate=False):
    a, factors = parse_element(inputs.json(args.input, "input"))
    res = wd.wind(a, _strategy(args), args.tolerance or 1e-10, factors)
    value = -res.value if negate else res.value
    results = {"value": value, "residual": res.inversion_residual, "strategy": res.strategy_used.value}
    return results, {"inversion": res.inversion_residual}, True


def cmd_index(args, inputs):
    return cmd_wind(args, inputs, negate=True)


def cmd_fiber(args, inputs):
    a, factors = parse_element(inputs.json(args.input, "input"))
    try:
        m = wd.Morphism.parse(a.context, args.morphism)
    except ValueError as exc:
        raise SpecError("--morphism", str(exc)) from None
    rep = wd.check_index_fibering(m, a, args.tolerance or 1e-9, _strategy(args), factors=factors)
    return rep.to_json(), {"deviation": rep.deviation}, rep.passed


def cmd_lab(args, inputs):
    if args.k < 1 or args.d < 1 or args.trials < 1:
        raise SpecError("--k/--d/--trials", "must be positive integers")
    rep = zlab.run_battery(args.k, args.d, args.trials, args.seed)
    checks = {name: {"pass": v["pass"], "max_residual": v["max_residual"]} for name, v in rep.to_json().items()}
    residuals = {name: v["max_residual"] for name, v in checks.items()}
    return checks, residuals, rep.passed


def _banded(inputs, path, field):
    return tp.BandedToeplitz.from_json(inputs.json(path, field), field)


def cmd_toeplitz_trace(args, inputs):
    a, b = _banded(inputs, args.a, "a"), _banded(inputs, args.b, "b")
    window = args.grid
    ct = tp.commutator_trace(a, b, window)
    formula = tp.trace_formula(a, b)
    results = {"trace": ct, "window": window or a.band + b.band + 1, "trace_formula": formula,
               "orientation": tp.ORIENTATION, "classical": tp.classical_commutator_trace(a, b)}
    return results, {"orientation_mismatch": abs(ct - tp.ORIENTATION * formula)}, True


def cmd_numeric_index(args, inputs):
    a, inv = _banded(inputs, args.symbol, "symbol"), _banded(inputs, args.inverse, "inverse")
    tol = args.tolerance or tp.INVERSE_TOL
    res = tp.symbol_residual(a, inv)
    value = tp.numeric_index(a, inv, tol)
    return {"index": value, "symbol_residual": res}, {"symbol": res}, True


def _grid_symbol(args, inputs):
    text = args.symbol
    if text.endswith(".json") or os.path.isfile(text):
        return tp.GridSymbol.from_json(inputs.json(text, "symbol"))
    return tp.GridSymbol.parse(text)


def cmd_numeric_wind(args, inputs):
    if args.mu is None:
        raise SpecError("--mu", "required")
    f = _grid_symbol(args, inputs)
    grid, step = args.grid or 256, args.step or 1e-3
    if grid < 2 or step <= 0:
        raise SpecError("--grid/--step", "grid must be >= 2 and step positive")
    rep = tp.numeric_wind_report(f, args.mu, step, grid)
    rep["symbol"] = f.source
    return rep, {"error_estimate": rep["error_estimate"]}, True


def cmd_suite(args, inputs):
    only = None
    if args.only:
        try:
            only = {int(v) for v in args.only.split(",")}
        except ValueError:
            raise SpecError("--only", "expected comma-separated criterion numbers") from None
    results = acceptance.run_suite(args.seed, only)
    for r in results:
        print(r.line(), file=sys.stderr)
    payload = [r.to_json(args.timing) for r in results]
    residuals = {str(r.id): r.residual for r in results}
    return payload, residuals, all(r.passed for r in results)


def _detect(obj):
    if isinstance(obj, dict):
        if "context" in obj:
            return "element"
        if "cocycle" in obj:
            return "context"
        if "coeffs" in obj and "model" not in obj:
            return "circle-symbol"
        if "model" in obj:
            return "centre"
        if "terms" in obj:
            return "torus-symbol"
    raise SpecError("", "unrecognised document: expected an element, context, centre element or symbol")


def cmd_validate(args, inputs):
    path = args.path or args.input
    if not path:
        raise SpecError("path", "nothing to validate")
    obj = inputs.json(path, "input")
    kind = _detect(obj)
    if kind == "element":
        parse_element(obj)
    elif kind == "context":
        AlgebraContext.from_json(obj, "")
    elif kind == "centre":
        CentreElement.from_json(obj, "")
    elif kind == "circle-symbol":
        tp.BandedToeplitz.from_json(obj)
    else:
        tp.GridSymbol.from_json(obj, "")
    return {"status": "ok", "kind": kind}, {}, True


HANDLERS = {
    "wind": cmd_wind, "index": cmd_index, "fiber": cmd_fiber, "lab": cmd_lab,
    "toeplitz-trace": cmd_toeplitz_trace, "numeric-index": cmd_numeric_index,
    "numeric-wind": cmd_numeric_wind, "suite": cmd_suite, "validate": cmd_validate,
}


# ---- parser ----

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", help="input JSON file")
    common.add_argument("--output", help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--tolerance", type=float, help="inversion (wind/index), fibering or inverse-residual tolerance")
    common.add_argument("--seed", type=int, default=7)
    common.add_argument("--grid", type=int, help="grid size (numeric-wind) or window (toeplitz-trace)")
    common.add_argument("--step", type=float, help="finite-difference step for numeric-wind")
    common.add_argument("--strategy", default="auto", help="auto | monomial | neumann | product")
    common.add_argument("--timing", action="store_true", help="add wall-clock times (breaks byte-determinism)")

    p = argparse.ArgumentParser(prog="windex", description="Centre-valued winding numbers and Toeplitz indices.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("wind", "index"):
        sub.add_parser(name, parents=[common], help=f"{name} of an element (--input el.json)")
    fib = sub.add_parser("fiber", parents=[common], help="check index fibering under a morphism")
    fib.add_argument("--morphism", required=True, help="quotient | identity | eval:<point index>")
    lab = sub.add_parser("lab", parents=[common], help="finite Z-Hilbert algebra battery")
    lab.add_argument("--k", type=int, default=2)
    lab.add_argument("--d", type=int, default=2)
    lab.add_argument("--trials", type=int, default=200)
    tt = sub.add_parser("toeplitz-trace", parents=[common], help="tr [T_a, T_b] for circle symbols")
    tt.add_argument("--a", required=True)
    tt.add_argument("--b", required=True)
    ni = sub.add_parser("numeric-index", parents=[common], help="tr [T_a, T_a^-1] with a certified inverse")
    ni.add_argument("--symbol", required=True)
    ni.add_argument("--inverse", required=True)
    nw = sub.add_parser("numeric-wind", parents=[common], help="grid winding of f(z, w) on the 2-torus")
    nw.add_argument("--symbol", required=True, help='expression such as "z^2*w" or a JSON terms file')
    nw.add_argument("--mu", type=float)
    st = sub.add_parser("suite", parents=[common], help="run the acceptance battery")
    st.add_argument("--only", help="comma-separated criterion numbers")
    va = sub.add_parser("validate", parents=[common], help="structural validation of an input file")
    va.add_argument("path", nargs="?")
    return p


def _csv(results):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id", "name", "pass", "residual", "tol"])
    for r in results:
        w.writerow([r["id"], r["name"], r["pass"], _num(r["residual"]), _num(r["tol"])])
    return buf.getvalue()


def _emit(text, args):
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def run(argv=None):
    args = build_parser().parse_args(argv)
    inputs = Inputs(args)
    start = time.perf_counter()
    report = {"command": args.command}
    try:
        if args.format == "csv" and args.command != "suite":
            raise SpecError("--format", "csv output is only available for suite")
        results, residuals, ok = HANDLERS[args.command](args, inputs)
        status = 0 if ok else 1
    except SpecError as exc:
        report.update(inputs_digest=inputs.digest(),
                      error={"kind": "input", "path": exc.path, "message": exc.message})
        _emit(dumps(report) + "\n", args)
        print(f"windex: {exc}", file=sys.stderr)
        return 2
    except WindexError as exc:
        report.update(inputs_digest=inputs.digest(),
                      error={"kind": type(exc).__name__, "message": str(exc)})
        _emit(dumps(report) + "\n", args)
        print(f"windex: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    report.update(inputs_digest=inputs.digest(), results=results, residuals=residuals)
    if args.timing:
        report["timing"] = {"seconds": time.perf_counter() - start}
    if args.format == "csv":
        _emit(_csv(results), args)
    else:
        _emit(dumps(report) + "\n", args)
    return status


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
