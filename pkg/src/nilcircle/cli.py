"""``nilcircle`` command-line runner.

Every subcommand resolves its parameters (flags, then ``--config`` JSON on
top), validates them, computes a table or a report and writes it as CSV or
JSON.  CSV output starts with ``# `` comment lines carrying the library
version, the subcommand and the resolved parameters; a timestamp is added
only with ``--timestamp``, so repeated runs give byte-identical files.

Exit codes: 0 success, 1 a self-check failed, 2 invalid parameters,
3 infeasible size, 4 I/O failure.  Failures print one JSON error record
on stderr.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import math
import os
import sys
from typing import Callable, Sequence

import numpy as np

from . import __version__

EXIT_OK, EXIT_CHECK_FAILED, EXIT_INVALID, EXIT_INFEASIBLE, EXIT_IO = 0, 1, 2, 3, 4

# problem-size caps; beyond these a run is refused with exit 3
MAX_GAUSS_TABLE = 20_000_000
MAX_NIL_TABLE = 2_000_000
MAX_WEYL_TERMS = 50_000_000
MAX_SYSTEM_POINTS = 200_000
MAX_VARIATION_LENGTH = 20_000

SCHEMA_VERSION = 1


class InvalidParameters(ValueError):
    pass


class Infeasible(RuntimeError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InvalidParameters(message)


# ---------------------------------------------------------------------------
# parameter parsing

def parse_int_range(text: str | Sequence[int] | int) -> list[int]:
    """"3..97", "3..97:2", "2,3,5" or a JSON list -> sorted distinct integers."""
    if isinstance(text, int):
        return [text]
    if not isinstance(text, str):
        return sorted({int(v) for v in text})
    out: set[int] = set()
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if ".." in part:
                span, _, step = part.partition(":")
                lo, hi = (int(v) for v in span.split(".."))
                step_i = int(step) if step else 1
                if step_i < 1:
                    raise InvalidParameters(f"step must be positive in {part!r}")
                out.update(range(lo, hi + 1, step_i))
            else:
                out.add(int(part))
        except ValueError as exc:
            if isinstance(exc, InvalidParameters):
                raise
            raise InvalidParameters(f"cannot read integer range {part!r}") from None
    if not out:
        raise InvalidParameters(f"empty range {text!r}")
    return sorted(out)


def parse_float_list(text: str | Sequence[float] | float) -> list[float]:
    if isinstance(text, (int, float)):
        return [float(text)]
    if not isinstance(text, str):
        return [float(v) for v in text]
    try:
        vals = [float(v) if v.strip() not in ("inf", "infinity") else math.inf
                for v in text.split(",") if v.strip()]
    except ValueError:
        raise InvalidParameters(f"cannot read number list {text!r}") from None
    if not vals:
        raise InvalidParameters(f"empty list {text!r}")
    return vals


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def next_prime(x: float) -> int:
    n = max(2, math.ceil(x))
    while not is_prime(n):
        n += 1
    return n


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.12g}"
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, complex):
        return {"re": v.real, "im": v.imag}
    return v


# ---------------------------------------------------------------------------
# subcommands.  Each returns (columns, rows, extra report dict, status).

def _require(cond: bool, message: str):
    if not cond:
        raise InvalidParameters(message)


def cmd_selfcheck(p: dict):
    from .selfcheck import run_all

    _require(p["d"] in (2, 3, 4), "selfcheck supports d in {2, 3, 4}")
    results = run_all(p["d"], seed=p["seed"], quick=p["quick"])
    rows = [[r.name, r.passed, r.cases] for r in results]
    status = EXIT_OK if all(r.passed for r in results) else EXIT_CHECK_FAILED
    extra = {"checks": [{k: v for k, v in r.as_dict().items() if k != "seconds"} for r in results]}
    return ["check", "passed", "cases"], rows, extra, status


def cmd_gauss_scan(p: dict):
    from .expsums import decay_fit, gauss_sums_all

    d = p["d"]
    _require(d >= 1, "d must be >= 1")
    qs = parse_int_range(p["q"])
    _require(min(qs) >= 1, "q must be >= 1")
    if p["primes_only"]:
        qs = [q for q in qs if is_prime(q)]
        _require(bool(qs), "no primes in the q range")
    if max(qs) ** d > MAX_GAUSS_TABLE:
        raise Infeasible(f"q^d = {max(qs) ** d} exceeds {MAX_GAUSS_TABLE}")
    rows = []
    for q in qs:
        A, vals, reduced = gauss_sums_all(q, d)
        mags = np.abs(vals)
        if not reduced.any():
            rows.append([q, 0, 0.0, ""])
            continue
        idx = np.flatnonzero(reduced)
        best = idx[np.argmax(mags[idx])]
        rows.append([q, int(reduced.sum()), float(mags[best]), " ".join(str(int(a)) for a in A[best])])
    extra = {}
    fit_pts = [(r[0], r[2]) for r in rows if r[0] > 1 and r[2] > 0]
    if len(fit_pts) >= 3:
        slope, intercept, rms = decay_fit(fit_pts)
        extra["decay_fit"] = {"slope": slope, "intercept": intercept, "rms": rms}
    return ["q", "a_count", "max_abs", "argmax"], rows, extra, EXIT_OK


def cmd_nilgauss_scan(p: dict):
    from .expsums import decay_fit, nil_gauss_table
    from .group import shape as make_shape

    d, r = p["d"], p["r"]
    _require(d >= 2, "nilpotent Gauss sums need d >= 2")
    _require(r >= 1, "r must be >= 1")
    _require(p["variant"] in ("G", "Gt"), "variant must be G or Gt")
    qs = parse_int_range(p["q"])
    _require(min(qs) >= 1, "q must be >= 1")
    size = make_shape(d).size
    if max(qs) ** size > MAX_NIL_TABLE:
        raise Infeasible(f"q^{size} = {max(qs) ** size} exceeds {MAX_NIL_TABLE}")
    rows = []
    for q in qs:
        table = np.abs(nil_gauss_table(q, r, d, p["variant"]))
        grids = np.indices(table.shape).reshape(size, -1)
        g = np.gcd.reduce(np.vstack([grids, np.full(grids.shape[1], q)]), axis=0)
        reduced = g == 1
        flat = table.reshape(-1)
        mx = float(flat[reduced].max()) if reduced.any() else 0.0
        rows.append([q, int(reduced.sum()), mx, float(flat.max())])
    extra = {}
    pts = [(row[0], row[2]) for row in rows if row[0] > 1 and row[2] > 0]
    if len(pts) >= 3:
        slope, intercept, rms = decay_fit(pts)
        extra["decay_fit"] = {"slope": slope, "intercept": intercept, "rms": rms}
    return ["q", "a_count", "max_abs_reduced", "max_abs_all"], rows, extra, EXIT_OK


def cmd_weyl_scan(p: dict):
    from .expsums import sharp_weights, smooth_weights, weyl_sum

    d = p["d"]
    _require(d >= 1, "d must be >= 1")
    Ps = parse_float_list(p["P"])
    _require(min(Ps) >= 1, "P must be >= 1")
    if 4 * max(Ps) + 1 > MAX_WEYL_TERMS:
        raise Infeasible(f"P = {max(Ps)} needs more than {MAX_WEYL_TERMS} terms")
    make = smooth_weights if p["weights"] == "smooth" else sharp_weights
    _require(p["weights"] in ("smooth", "sharp"), "weights must be smooth or sharp")
    rows = []
    for P in Ps:
        q = next_prime(math.sqrt(P))
        theta = np.full(d, 1.0 / q)
        S = weyl_sum(make(P), P, theta)
        rows.append([P, q, abs(S), abs(S) / P])
    return ["P", "q", "abs_S", "ratio"], rows, {}, EXIT_OK


def cmd_decompose(p: dict):
    from .circle import DecompositionParams, decompose_kernel

    try:
        params = DecompositionParams(d=p["d"], tau=p["tau"], delta=p["delta"], delta_p=p["delta_p"], k=p["k"])
    except ValueError as exc:
        raise InvalidParameters(str(exc)) from None
    _require(p["d"] == 2, "decompose is implemented for d = 2")
    _require(p["mode"] in ("central", "noncentral"), "mode must be central or noncentral")
    _require(p["route"] in ("analytic", "dft"), "route must be analytic or dft")
    _require(p["k"] <= 12, "k > 12 is outside desk scale")
    out = decompose_kernel(params, mode=p["mode"], route=p["route"])
    decs = {"all": out} if p["mode"] == "central" else {f"s={s}": dec for s, dec in out.items()}
    rows, reports, worst = [], {}, 0.0
    for label, dec in decs.items():
        rep = dec.report()
        rep.pop("params", None)
        reports[label] = rep
        worst = max(worst, rep["reconstruction_residual"])
        for name, c in sorted(rep["components"].items()):
            rows.append([label, name, c["support"], c["mass"], c["max_abs"]])
    extra = {"reconstruction_residual": worst, "decompositions": reports}
    return ["stage", "component", "support", "mass", "max_abs"], rows, extra, EXIT_OK


def _parse_polys(text, rank: int):
    from .ergodic import IntPolynomial

    if isinstance(text, str):
        parts = [s for s in text.split(";") if s.strip()]
        try:
            coeffs = [[int(c) for c in s.split(",")] for s in parts]
        except ValueError:
            raise InvalidParameters(f"cannot read polynomials {text!r}") from None
    else:
        coeffs = [list(c) for c in text]
    _require(len(coeffs) == rank, f"need one polynomial per generator ({rank})")
    try:
        return [IntPolynomial(tuple(c)) for c in coeffs]
    except ValueError as exc:
        raise InvalidParameters(str(exc)) from None


def cmd_ergodic_run(p: dict):
    from .ergodic import build_nilsystem, ergodic_average

    spec = p["system"]
    if isinstance(spec, str):
        try:
            spec = json.loads(spec)
        except json.JSONDecodeError:
            raise InvalidParameters(f"system must be a JSON object, got {spec!r}") from None
    _require(isinstance(spec, dict), "system must be a JSON object")
    est = spec.get("M") or (spec.get("Q", 1) ** (spec.get("d", 2) * (spec.get("d", 2) + 1) // 2)
                            if spec.get("kind") == "heisenberg_quotient" else 0)
    if isinstance(est, int) and est > MAX_SYSTEM_POINTS:
        raise Infeasible(f"system with {est} points exceeds {MAX_SYSTEM_POINTS}")
    try:
        system = build_nilsystem(spec)
    except (ValueError, KeyError, TypeError) as exc:
        raise InvalidParameters(f"bad system: {exc}") from None
    polys = _parse_polys(p["polys"] if p["polys"] is not None else ";".join(["0,1"] * system.rank), system.rank)
    exps = parse_int_range(p["log2N"])
    _require(0 <= min(exps) and max(exps) <= 22, "log2N must lie in [0, 22]")
    _require(p["f"] in ("delta", "random"), "f must be delta or random")
    if p["f"] == "delta":
        f = np.zeros(system.size)
        f[0] = 1.0
    else:
        f = np.random.default_rng(p["seed"]).standard_normal(system.size)
    _require(p["smooth"] in ("none", "chi"), "smooth must be none or chi")
    smooth = None if p["smooth"] == "none" else "chi"
    mean = float(np.mean(f))
    fn = float(np.linalg.norm(f))
    rows = []
    for e in exps:
        N = 2**e
        avg = np.asarray(ergodic_average(system, f, polys, N, smooth=smooth), dtype=float)
        rows.append([N, float(np.linalg.norm(avg)) / fn, float(np.max(np.abs(avg - mean)))])
    extra = {"points": system.size, "mean": mean}
    return ["N", "norm_ratio", "convergence_error"], rows, extra, EXIT_OK


def cmd_variation(p: dict):
    from .variation import IndexedSequence, sup_norm, variation

    rhos = parse_float_list(p["rho"])
    _require(all(r >= 1 for r in rhos), "rho must be >= 1")
    if p["values"] is not None:
        vals = parse_float_list(p["values"])
    else:
        _require(p["length"] >= 1, "length must be >= 1")
        if p["length"] > MAX_VARIATION_LENGTH:
            raise Infeasible(f"length {p['length']} exceeds {MAX_VARIATION_LENGTH}")
        rng = np.random.default_rng(p["seed"])
        vals = np.cumsum(rng.choice([-1.0, 1.0], size=p["length"])).tolist()
    if len(vals) > MAX_VARIATION_LENGTH:
        raise Infeasible(f"sequence length {len(vals)} exceeds {MAX_VARIATION_LENGTH}")
    seq = IndexedSequence.of(vals)
    # rho = inf is not a variation; that row carries sup |a_t| and says so
    rows = [[rho, sup_norm(seq), "sup_norm"] if math.isinf(rho) else [rho, variation(seq, rho), "variation"]
            for rho in rhos]
    return ["rho", "value", "kind"], rows, {"length": len(vals)}, EXIT_OK


def cmd_quasi_geometry(p: dict):
    from .quasi import EnumerationOverflow, QuasiGeometry, ball_count

    d, Q, w = p["d"], p["Q"], p["w"]
    _require(d >= 1 and Q >= 1 and w >= 0, "need d >= 1, Q >= 1, w >= 0")
    try:
        geom = (QuasiGeometry.uniform(d, Q) if w == 0
                else QuasiGeometry.from_scale(d, w, Q, p["delta"], p["delta_p"]))
    except ValueError as exc:
        raise InvalidParameters(str(exc)) from None
    radii = parse_float_list(p["r"])
    _require(min(radii) > 0, "radii must be positive")
    rows = []
    for r in radii:
        try:
            count = ball_count(geom, np.zeros(geom.shape.size), r)
        except EnumerationOverflow as exc:
            raise Infeasible(str(exc)) from None
        vol = geom.volume(r)
        rows.append([r, count, vol, count / vol])
    return ["r", "count", "volume", "ratio"], rows, {}, EXIT_OK


COMMANDS: dict[str, tuple[Callable, str]] = {
    "selfcheck": (cmd_selfcheck, "exact-identity suite"),
    "gauss-scan": (cmd_gauss_scan, "max |S(a/q)| over reduced a, per q"),
    "nilgauss-scan": (cmd_nilgauss_scan, "max |G(a/q)| over reduced a, per q"),
    "weyl-scan": (cmd_weyl_scan, "|S| / P at the minor-arc point (1/q, ..., 1/q)"),
    "decompose": (cmd_decompose, "major/minor arc split of K_k and its residual"),
    "ergodic-run": (cmd_ergodic_run, "polynomial ergodic averages on a finite nilsystem"),
    "variation": (cmd_variation, "rho-variation of a sequence across rho"),
    "quasi-geometry": (cmd_quasi_geometry, "quasi-ball counts against the volume formula"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="nilcircle", description="Experiments on the step-two group G0(d).")
    parser.add_argument("--version", action="version", version=f"nilcircle {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def add(name: str) -> argparse.ArgumentParser:
        sp = sub.add_parser(name, help=COMMANDS[name][1])
        sp.add_argument("--config", help="JSON file whose keys override the flags")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", help="output path (default: stdout)")
        sp.add_argument("--format", choices=["csv", "json"], default="csv")
        sp.add_argument("--timestamp", action="store_true", help="record the run time in the header")
        sp.add_argument("--gnuplot", help="also write a gnuplot script plotting the CSV at --out")
        return sp

    sp = add("selfcheck")
    sp.add_argument("--d", type=int, default=2)
    sp.add_argument("--quick", action="store_true")

    sp = add("gauss-scan")
    sp.add_argument("--d", type=int, default=2)
    sp.add_argument("--q", default="2..30")
    sp.add_argument("--primes-only", action="store_true")

    sp = add("nilgauss-scan")
    sp.add_argument("--d", type=int, default=2)
    sp.add_argument("--q", default="2..12")
    sp.add_argument("--r", type=int, default=1)
    sp.add_argument("--variant", default="G")

    sp = add("weyl-scan")
    sp.add_argument("--d", type=int, default=2)
    sp.add_argument("--P", default="64,256,1024,4096,16384")
    sp.add_argument("--weights", default="smooth")

    sp = add("decompose")
    sp.add_argument("--d", type=int, default=2)
    sp.add_argument("--k", type=int, default=6)
    sp.add_argument("--tau", type=float, default=2.0)
    sp.add_argument("--delta", type=float, default=0.4)
    sp.add_argument("--delta-p", type=float, default=0.6)
    sp.add_argument("--mode", default="central")
    sp.add_argument("--route", default="analytic")

    sp = add("ergodic-run")
    sp.add_argument("--system", default='{"kind": "cyclic", "M": 101}', help="JSON system description")
    sp.add_argument("--polys", default=None, help='coefficient lists per generator, e.g. "0,1;0,0,1"')
    sp.add_argument("--log2N", default="2..12")
    sp.add_argument("--f", default="delta")
    sp.add_argument("--smooth", default="none")

    sp = add("variation")
    sp.add_argument("--rho", default="1,1.5,2,3,4,inf")
    sp.add_argument("--length", type=int, default=256)
    sp.add_argument("--values", default=None, help="comma-separated sequence (default: random walk)")

    sp = add("quasi-geometry")
    sp.add_argument("--d", type=int, default=2)
    sp.add_argument("--Q", type=int, default=1)
    sp.add_argument("--w", type=int, default=0)
    sp.add_argument("--delta", type=float, default=0.4)
    sp.add_argument("--delta-p", type=float, default=0.6)
    sp.add_argument("--r", default="1,2,4,8,16")
    return parser


_IO_KEYS = ("config", "out", "format", "timestamp", "gnuplot", "command")


def resolve(args: argparse.Namespace) -> tuple[dict, dict]:
    """Split parsed flags into (run parameters, io options), applying --config on top."""
    values = vars(args).copy()
    if values.get("config"):
        try:
            with open(values["config"], encoding="utf-8") as fh:
                overrides = json.load(fh)
        except OSError as exc:
            raise exc
        except json.JSONDecodeError as exc:
            raise InvalidParameters(f"config is not valid JSON: {exc}") from None
        if not isinstance(overrides, dict):
            raise InvalidParameters("config must hold a JSON object")
        for key, val in overrides.items():
            norm = key.replace("-", "_")
            if norm not in values or norm in ("config", "command"):
                raise InvalidParameters(f"unknown config key {key!r} for {args.command}")
            values[norm] = val
    io_opts = {k: values.pop(k) for k in _IO_KEYS if k in values}
    threads = os.environ.get("NILCIRCLE_THREADS")
    if threads is not None:
        try:
            if int(threads) < 1:
                raise ValueError
        except ValueError:
            raise InvalidParameters(f"NILCIRCLE_THREADS must be a positive integer, got {threads!r}") from None
    if io_opts["format"] not in ("csv", "json"):
        raise InvalidParameters("format must be csv or json")
    return values, io_opts


def render(command: str, params: dict, columns, rows, extra: dict, io_opts: dict) -> str:
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds") if io_opts["timestamp"] else None
    if io_opts["format"] == "json":
        doc = {"tool": "nilcircle", "version": __version__, "schema": SCHEMA_VERSION, "command": command,
               "params": _jsonable(params), "columns": list(columns),
               "rows": _jsonable(rows), **_jsonable(extra)}
        if stamp:
            doc["timestamp"] = stamp
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    buf.write(f"# nilcircle {__version__} schema {SCHEMA_VERSION}\n")
    buf.write(f"# command: {command}\n")
    buf.write(f"# params: {json.dumps(_jsonable(params), sort_keys=True)}\n")
    for key in sorted(extra):
        if not isinstance(extra[key], (dict, list)) or key == "decay_fit":
            buf.write(f"# {key}: {json.dumps(_jsonable(extra[key]), sort_keys=True)}\n")
    if stamp:
        buf.write(f"# timestamp: {stamp}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def gnuplot_script(data_path: str, columns: Sequence[str], command: str, rows=()) -> str:
    """Plot every numeric column against the first; label columns are skipped."""
    first = rows[0] if rows else [0.0] * len(columns)
    ys = " , ".join(f"'{data_path}' using 1:{i + 1} with linespoints title '{c}'"
                    for i, c in enumerate(columns) if i > 0 and not isinstance(first[i], str))
    return (f"# gnuplot script for nilcircle {command}\n"
            "set datafile separator ','\n"
            "set datafile commentschars '#'\n"
            "set key autotitle columnhead\n"
            f"set xlabel '{columns[0]}'\n"
            "set logscale y\n"
            f"plot {ys}\n")


def _fail(code: int, kind: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": kind, "exit_code": code, "message": message}) + "\n")
    return code


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise InvalidParameters("a subcommand is required: " + ", ".join(COMMANDS))
        params, io_opts = resolve(args)
        if io_opts["gnuplot"] and not io_opts["out"]:
            raise InvalidParameters("--gnuplot needs --out so the script can refer to the data file")
        fn = COMMANDS[args.command][0]
        columns, rows, extra, status = fn(params)
        text = render(args.command, params, columns, rows, extra, io_opts)
        if io_opts["out"]:
            with open(io_opts["out"], "w", encoding="utf-8") as fh:
                fh.write(text)
            if io_opts["gnuplot"]:
                with open(io_opts["gnuplot"], "w", encoding="utf-8") as fh:
                    fh.write(gnuplot_script(io_opts["out"], columns, args.command, rows))
        else:
            sys.stdout.write(text)
        return status
    except InvalidParameters as exc:
        return _fail(EXIT_INVALID, "invalid_parameters", str(exc))
    except Infeasible as exc:
        return _fail(EXIT_INFEASIBLE, "infeasible", str(exc))
    except OSError as exc:
        return _fail(EXIT_IO, "io_error", str(exc))
    except (ValueError, TypeError) as exc:
        return _fail(EXIT_INVALID, "invalid_parameters", str(exc))
    except MemoryError:
        return _fail(EXIT_INFEASIBLE, "infeasible", "out of memory")


if __name__ == "__main__":
    sys.exit(main())
