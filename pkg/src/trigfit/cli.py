"""Command line front end.

Subcommands: ``generate``, ``fit``, ``decompose``, ``synth``, ``eval``.
Exit codes: 0 success, 2 argument error, 3 numerical failure, 4 I/O or
format error.  Every artifact is written next to a manifest recording the
arguments, seeds, input digests and output files; passing a manifest (or any
JSON object of option values) to ``--config`` re-runs with those values.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .audioio import compute_time_normalization, load_wav_left, write_wav
from .errors import (
    DomainError, EmptyDesignError, ParseError, RankDeficiencyError, TrigfitError,
    WavFormatError,
)
from .exprgen import format_expression, gen_mixed_function, gen_trig_function, parse_expression
from .featurize import build_design_matrix, linear_spec, poly_spec, product_spec, trig_spec
from .linreg import (
    DEFAULT_RIDGE_FALLBACK, absolute_error, make_dataset, reports_to_json, run_comparison,
    split_indices, write_error_table,
)
from .sinefit import (
    FitConfig, Mode, WaveParams, decompose, fits_from_dict, fits_to_dict, resynthesize,
    write_trace_csv,
)

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _real(text: str) -> float:
    """Float that also accepts ``pi`` multiples such as ``-pi`` or ``2pi``."""
    s = text.strip().lower().replace("*", "")
    if s.endswith("pi"):
        head = s[:-2]
        factor = {"": 1.0, "-": -1.0, "+": 1.0}.get(head)
        if factor is None:
            factor = float(head)
        return factor * math.pi
    return float(s)


def _numeric_range_args(argv):
    # argparse takes "-pi" for an option, so rewrite --range values as plain numbers
    argv = list(argv)
    for i, tok in enumerate(argv[:-2]):
        if tok == "--range":
            for j in (i + 1, i + 2):
                try:
                    argv[j] = repr(_real(argv[j]))
                except ValueError:
                    pass
    return argv


def parse_spec_token(token: str):
    """``linear``, ``trig``, ``poly:D`` or ``product:D:M`` to a FeatureSpec."""
    parts = token.split(":")
    try:
        if parts == ["linear"]:
            return linear_spec()
        if parts == ["trig"]:
            return trig_spec()
        if parts[0] == "poly" and len(parts) == 2:
            return poly_spec(int(parts[1]))
        if parts[0] == "product" and len(parts) == 3:
            return product_spec(int(parts[1]), int(parts[2]))
    except ValueError as exc:
        raise UsageError(f"bad spec {token!r}: {exc}") from exc
    raise UsageError(f"unknown spec {token!r}; use linear, trig, poly:D or product:D:M")


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path: Path, command: str, args: dict, seeds: dict, inputs, outputs) -> None:
    manifest = {
        "command": command,
        "arguments": args,
        "seeds": seeds,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": [str(p) for p in outputs],
        "tool": "trigfit",
        "version": __version__,
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _manifest_for(out: Path) -> Path:
    return out.with_name(out.name + ".manifest.json")


def _arg_map(ns: argparse.Namespace) -> dict:
    skip = {"func", "config"}
    return {k: v for k, v in vars(ns).items() if k not in skip}


# -- commands -------------------------------------------------------------------

def cmd_generate(ns) -> int:
    if ns.kind == "trig":
        expr = gen_trig_function(ns.seed, ns.terms)
    else:
        expr = gen_mixed_function(ns.seed, ns.max_terms, ns.degree)
    text = format_expression(expr)
    if ns.out is None:
        print(text)
        return EXIT_OK
    out = Path(ns.out)
    out.write_text(text + "\n")
    write_manifest(_manifest_for(out), "generate", _arg_map(ns), {"seed": ns.seed}, [], [out])
    return EXIT_OK


def _fit_specs(tokens):
    specs = [parse_spec_token(t) for t in tokens]
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise UsageError("duplicate spec tokens")
    return specs


def cmd_fit(ns) -> int:
    if ns.expr is None:
        raise UsageError("--expr is required")
    specs = _fit_specs(ns.specs)
    expr = parse_expression(Path(ns.expr).read_text().strip())
    lo, hi = ns.range
    fallback = None if ns.no_ridge_fallback else DEFAULT_RIDGE_FALLBACK
    reports = run_comparison(expr, lo, hi, ns.step, specs, ns.split_seed, ns.test_fraction,
                             ns.guard, ns.ridge, fallback)

    out_dir = Path(ns.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = [out_dir / "errors.csv", out_dir / "reports.json"]
    write_error_table(reports, outputs[0])
    payload = json.loads(reports_to_json(reports))
    for entry in payload:
        entry["manifest"] = "manifest.json"
    outputs[1].write_text(json.dumps(payload, indent=2) + "\n")

    data = make_dataset(expr, lo, hi, ns.step, ns.guard)
    train_idx, test_idx = split_indices(len(data), ns.test_fraction, ns.split_seed)
    split = np.empty(len(data), dtype=object)
    split[train_idx] = "train"
    split[test_idx] = "test"
    for report in reports:
        model = report.model
        dm = build_design_matrix(model.spec, data.xs, ns.guard)
        pred = dm.values @ model.weights + model.intercept
        path = out_dir / f"predictions_{model.spec.name.replace(':', '_')}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "y_true", "y_pred", "split"])
            for i, p in zip(dm.kept_row_indices, pred):
                w.writerow([format(data.xs[i], ".17g"), format(data.ys[i], ".17g"),
                            format(p, ".17g"), split[i]])
        outputs.append(path)
    write_manifest(out_dir / "manifest.json", "fit", _arg_map(ns), {"split_seed": ns.split_seed},
                   [ns.expr], outputs)
    for r in reports:
        flag = " (ridge fallback)" if r.ridge_fallback else ""
        print(f"{r.spec_name}\t{r.test_abs_error:.17g}{flag}")
    return EXIT_OK


def _threads(ns) -> int | None:
    if ns.threads:
        return ns.threads
    env = os.environ.get("TRIGFIT_THREADS")
    if env:
        try:
            return int(env)
        except ValueError as exc:
            raise UsageError(f"TRIGFIT_THREADS must be an integer, got {env!r}") from exc
    return None


def cmd_decompose(ns) -> int:
    if ns.wav is None:
        raise UsageError("--wav is required")
    cfg = FitConfig(n_waves=ns.waves, passes=ns.passes, step=ns.step, mode=Mode(ns.mode),
                    init=WaveParams(*ns.init), update_order=ns.update_order, backend=ns.backend)
    signal = load_wav_left(ns.wav)
    needed = ns.frames * ns.frame_len
    if needed > len(signal):
        raise UsageError(f"{ns.frames} frames of {ns.frame_len} samples need {needed} samples; "
                         f"{ns.wav} has {len(signal)}")
    divisor = float(signal.sample_rate) if ns.use_header_rate else ns.rate_divisor
    fits = decompose(signal, cfg, ns.frames, ns.frame_len, divisor, ns.per_frame_norm, _threads(ns))
    norm = compute_time_normalization(needed, divisor)

    out_dir = Path(ns.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    data = fits_to_dict(fits, cfg, norm, ns.frame_len, signal.sample_rate, ns.per_frame_norm)
    data["manifest"] = "manifest.json"
    fits_path = out_dir / "fits.json"
    fits_path.write_text(json.dumps(data, indent=1) + "\n")
    trace_path = out_dir / "trace.csv"
    write_trace_csv(fits, trace_path)
    write_manifest(out_dir / "manifest.json", "decompose", _arg_map(ns), {}, [ns.wav],
                   [fits_path, trace_path])
    n_bad = sum(f.diverged for f in fits)
    print(f"{len(fits)} frames fitted, {n_bad} diverged")
    return EXIT_OK


def cmd_synth(ns) -> int:
    if ns.fits is None or ns.out is None:
        raise UsageError("--fits and --out are required")
    try:
        data = json.loads(Path(ns.fits).read_text())
        fits, cfg, rate = fits_from_dict(data)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise WavFormatError(f"{ns.fits}: not a valid fits file ({exc})") from exc
    cfg = FitConfig(include_amplitude_in_resynthesis=ns.amplitude, divide_by_n_waves=ns.divide)
    signal, n_clamped = resynthesize(fits, cfg, rate)
    out = Path(ns.out)
    write_wav(signal, out)
    write_manifest(_manifest_for(out), "synth", _arg_map(ns), {}, [ns.fits], [out])
    print(f"clamped {n_clamped} samples")
    return EXIT_OK


def _read_column(path, column):
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        return np.array([])
    header = None
    try:
        [float(v) for v in rows[0]]
    except ValueError:
        header, rows = rows[0], rows[1:]
    if column is None:
        j = -1
    elif header is not None and column in header:
        j = header.index(column)
    else:
        try:
            j = int(column)
        except ValueError as exc:
            raise UsageError(f"{path}: no column {column!r}") from exc
    try:
        return np.array([float(r[j]) for r in rows])
    except (ValueError, IndexError) as exc:
        raise UsageError(f"{path}: non-numeric or missing column ({exc})") from exc


def cmd_eval(ns) -> int:
    pred = _read_column(ns.pred_csv, ns.pred_column)
    true = _read_column(ns.true_csv, ns.true_column)
    if pred.size != true.size or pred.size == 0:
        raise UsageError(f"misaligned inputs: {pred.size} predictions vs {true.size} targets")
    print(format(absolute_error(pred, true), ".17g"))
    return EXIT_OK


# -- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="trigfit", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"trigfit {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="JSON file of option values (a manifest works too)")

    g = sub.add_parser("generate", help="random expression")
    common(g)
    g.add_argument("kind", choices=["trig", "mixed"])
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--terms", type=int, default=4, help="term count (trig)")
    g.add_argument("--max-terms", type=int, default=10, help="term count upper bound (mixed)")
    g.add_argument("--degree", type=int, default=2, help="highest power of x in the pool (mixed)")
    g.add_argument("--out", help="output file (default: print)")
    g.set_defaults(func=cmd_generate)

    f = sub.add_parser("fit", help="compare least-squares fits over feature specs")
    common(f)
    f.add_argument("--expr", help="expression text file")
    f.add_argument("--range", nargs=2, type=_real, default=[-math.pi, math.pi], metavar=("LO", "HI"))
    f.add_argument("--step", type=float, default=0.01)
    f.add_argument("--specs", nargs="+", default=["linear", "poly:2", "trig"])
    f.add_argument("--split-seed", type=int, default=0)
    f.add_argument("--test-fraction", type=float, default=0.2)
    f.add_argument("--guard", type=float, default=0.01)
    f.add_argument("--ridge", type=float, default=0.0)
    f.add_argument("--no-ridge-fallback", action="store_true")
    f.add_argument("--out-dir", default="fit_out")
    f.set_defaults(func=cmd_fit)

    d = sub.add_parser("decompose", help="fit sinusoids to WAV frames")
    common(d)
    d.add_argument("--wav")
    d.add_argument("--frames", type=int, default=800)
    d.add_argument("--frame-len", type=int, default=1000)
    d.add_argument("--waves", type=int, default=20)
    d.add_argument("--passes", type=int, default=10)
    d.add_argument("--step", type=float, default=1.0)
    d.add_argument("--mode", choices=[m.value for m in Mode], default="independent")
    d.add_argument("--init", nargs=3, type=float, default=[1.0, 1.0, 0.0], metavar=("A", "F", "P"))
    d.add_argument("--update-order", choices=["simultaneous", "sequential"], default="simultaneous")
    d.add_argument("--backend", choices=["numba", "python"], default="numba")
    d.add_argument("--rate-divisor", type=float, default=44100.0)
    d.add_argument("--use-header-rate", action="store_true")
    d.add_argument("--per-frame-norm", action="store_true")
    d.add_argument("--threads", type=int, default=None)
    d.add_argument("--out-dir", default="decompose_out")
    d.set_defaults(func=cmd_decompose)

    s = sub.add_parser("synth", help="resynthesize a WAV from fitted frames")
    common(s)
    s.add_argument("--fits")
    s.add_argument("--out")
    s.add_argument("--no-amplitude", dest="amplitude", action="store_false")
    s.add_argument("--divide", action="store_true", help="divide by the wave count")
    s.set_defaults(func=cmd_synth)

    e = sub.add_parser("eval", help="sum of absolute deviations between two CSV columns")
    common(e)
    e.add_argument("pred_csv")
    e.add_argument("true_csv")
    e.add_argument("--pred-column", help="header name or index (default: last column)")
    e.add_argument("--true-column", help="header name or index (default: last column)")
    e.set_defaults(func=cmd_eval)
    return p


def _load_config(path) -> dict:
    data = json.loads(Path(path).read_text())
    if isinstance(data, dict) and "arguments" in data and "command" in data:
        data = data["arguments"]
    if not isinstance(data, dict):
        raise UsageError(f"{path}: config must be a JSON object")
    return data


def parse_args(argv) -> argparse.Namespace:
    argv = _numeric_range_args(argv)
    parser = build_parser()
    ns = parser.parse_args(argv)
    if getattr(ns, "config", None):
        config = _load_config(ns.config)
        sp = parser._subparsers._group_actions[0].choices[ns.command]
        known = {a.dest for a in sp._actions}
        unknown = set(config) - known - {"command"}
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        sp.set_defaults(**{k: v for k, v in config.items() if k != "command"})
        ns = parser.parse_args(argv)
    return ns


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        ns = parse_args(argv)
        return ns.func(ns)
    except UsageError as exc:
        print(f"trigfit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, DomainError) as exc:
        print(f"trigfit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RankDeficiencyError, EmptyDesignError, ArithmeticError) as exc:
        print(f"trigfit: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (WavFormatError, OSError) as exc:
        print(f"trigfit: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (TrigfitError, ValueError) as exc:
        print(f"trigfit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
