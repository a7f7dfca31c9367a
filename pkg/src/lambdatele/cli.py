"""Command-line driver: ``lambdatele {epr,teleport,sweep,bell-check,compare-models}``.

Exit codes: 0 success, 1 check failure, 2 truncation error, 3 protocol or
post-selection failure, 64 usage error. Reports are CSV (default) or JSON
lines, preceded by the resolved configuration.
"""

from __future__ import annotations

import argparse
import cmath
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence, TextIO

import numpy as np

from . import __version__
from .errors import DomainError, ModelMismatchError, PostSelectionError, SimulationError, TruncationError
from .fockspace import default_n_max
from .protocols import (
    ENUMERATE,
    SAMPLE,
    BellVariant,
    TeleportConfig,
    bell_checks,
    prepare_epr,
    probe_pulse_heuristic,
    probe_pulse_optimize,
    teleport,
)
from .qubitmodel import compare_models

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_TRUNCATION = 2
EXIT_PROTOCOL = 3
EXIT_USAGE = 64

EPR_COLUMNS = ("variant", "alpha", "gt", "success_probability", "fidelity_to_ideal", "tail_mass", "n_max")
TELEPORT_COLUMNS = ("kind", "outcome", "probability", "fidelity_before_correction", "fidelity_after_correction", "correction")
SWEEP_COLUMNS = ("index", "variable", "value", "alpha", "gt", "n_max", "success_probability", "fidelity_to_ideal", "status")
BELL_COLUMNS = ("item", "expected", "observed", "deviation", "passed")
COMPARE_COLUMNS = (
    "stage", "outcome", "physical_probability", "qubit_probability", "probability_deviation",
    "physical_fidelity", "qubit_fidelity", "fidelity_deviation",
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# -- value parsing and formatting -------------------------------------------------


def parse_complex(text: str) -> complex:
    try:
        return complex(str(text).replace(" ", "").replace("i", "j"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def parse_nmax(text: str) -> int | None:
    if str(text).lower() == "auto":
        return None
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"n_max must be an integer or 'auto', got {text!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError("n_max must be >= 1")
    return n


def parse_gt(text: str) -> str | float:
    t = str(text).lower()
    if t in ("heuristic", "optimize"):
        return t
    try:
        return float(eval_pi(t))
    except ValueError:
        raise argparse.ArgumentTypeError(f"gt must be 'heuristic', 'optimize' or a number, got {text!r}") from None


def eval_pi(text: str) -> float:
    """Accept plain floats and the forms ``pi``, ``pi/8``, ``3*pi/4``."""
    t = text.replace(" ", "")
    if "pi" not in t:
        return float(t)
    num, _, den = t.partition("/")
    factor = num.replace("pi", "").rstrip("*") or "1"
    return float(factor) * math.pi / (float(den) if den else 1.0)


def fmt(value) -> str:
    """Full-precision text form used in every report."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    if isinstance(value, (complex, np.complexfloating)):
        z = complex(value)
        if z.imag == 0:
            return format(z.real, ".17g")
        return f"{z.real:.17g}{z.imag:+.17g}j"
    return str(value)


def _json_value(value):
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, (complex, np.complexfloating)):
        z = complex(value)
        return fmt(z) if z.imag else float(z.real)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else fmt(v)
    if isinstance(value, np.integer):
        return int(value)
    return value


class Report:
    """Buffered CSV or JSON-lines table with the configuration echoed first."""

    def __init__(self, columns: Sequence[str], config: dict, fmt_name: str):
        self.columns = tuple(columns)
        self.config = config
        self.format = fmt_name
        self.rows: list[dict] = []
        self.summary: dict = {}

    def add(self, **row):
        self.rows.append(row)

    def render(self) -> str:
        lines = []
        if self.format == "json":
            lines.append(json.dumps({"config": {k: _json_value(v) for k, v in self.config.items()}}, sort_keys=True))
            for r in self.rows:
                lines.append(json.dumps({c: _json_value(r.get(c)) for c in self.columns}))
            if self.summary:
                lines.append(json.dumps({"summary": {k: _json_value(v) for k, v in self.summary.items()}}, sort_keys=True))
        else:
            lines += [f"# {k}={fmt(v)}" for k, v in sorted(self.config.items())]
            lines.append(",".join(self.columns))
            lines += [",".join(_csv_cell(fmt(r.get(c))) for c in self.columns) for r in self.rows]
            lines += [f"# summary {k}={fmt(v)}" for k, v in sorted(self.summary.items())]
        return "\n".join(lines) + "\n"


def _csv_cell(text: str) -> str:
    return f'"{text}"' if ("," in text or '"' in text) else text


# -- config file ---------------------------------------------------------------------


def read_config_file(path: str) -> dict[str, str]:
    """Parse a flat ``key = value`` file. ``#`` starts a comment; keys use dashes or underscores."""
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path!r}: {exc.strerror}") from None
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"{path}:{lineno}: expected key=value")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


# -- parser --------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat key=value file; flags override its values")
    p.add_argument("--output", help="write the report here instead of standard output")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--nmax", type=parse_nmax, default=None, help="Fock cutoff or 'auto' (default)")
    p.add_argument("--tail-tolerance", type=float, default=1e-10)


def _add_input(p: argparse.ArgumentParser):
    p.add_argument("--zeta", type=parse_complex, help="amplitude on |b> of the teleported atom")
    p.add_argument("--xi", type=parse_complex, help="amplitude on |c> of the teleported atom")
    p.add_argument("--theta", type=float, help="Bloch polar angle (alternative to --zeta/--xi)")
    p.add_argument("--phi", type=float, default=0.0, help="Bloch azimuth, used with --theta")
    p.add_argument("--random-input", action="store_true", help="draw the input qubit from --seed")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = _Parser(prog="lambdatele", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    subs = {}

    p = sub.add_parser("epr", help="prepare a Bell pair of lambda atoms")
    _add_common(p)
    p.add_argument("--variant", choices=[v.value for v in BellVariant], default="psi-plus")
    p.add_argument("--alpha", type=parse_complex, default=2.0)
    p.add_argument("--gt", type=parse_gt, default="heuristic")
    subs["epr"] = p

    p = sub.add_parser("teleport", help="teleport an atomic qubit")
    _add_common(p)
    _add_input(p)
    p.add_argument("--alpha", type=parse_complex, default=2.0)
    p.add_argument("--gt", type=parse_gt, default="heuristic")
    p.add_argument("--mode", choices=(ENUMERATE, SAMPLE), default=ENUMERATE)
    subs["teleport"] = p

    p = sub.add_parser("sweep", help="scan alpha or the probe interaction")
    _add_common(p)
    p.add_argument("--variable", choices=("alpha", "probe_gt", "gt"), required=True)
    p.add_argument("--start", type=eval_pi, required=True)
    p.add_argument("--stop", type=eval_pi, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--alpha", type=parse_complex, default=2.0)
    p.add_argument("--gt", type=parse_gt, default="heuristic")
    p.add_argument("--variant", choices=[v.value for v in BellVariant], default="psi-plus")
    p.add_argument("--jobs", type=int, default=1)
    subs["sweep"] = p

    p = sub.add_parser("bell-check", help="verify Bell-basis orthonormality and the R mapping")
    p.add_argument("--config", help=argparse.SUPPRESS)
    p.add_argument("--output")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    subs["bell-check"] = p

    p = sub.add_parser("compare-models", help="physical model against the qubit abstraction")
    _add_common(p)
    _add_input(p)
    p.add_argument("--alpha", type=parse_complex, default=2.0)
    p.add_argument("--gt", type=parse_gt, default="heuristic")
    subs["compare-models"] = p
    return parser, subs


def parse_args(argv: Sequence[str]) -> argparse.Namespace:
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError(parser.format_usage().strip())
    if getattr(args, "config", None):
        values = read_config_file(args.config)
        sp = subs[args.command]
        known = {a.dest for a in sp._actions}
        unknown = sorted(set(values) - known - {"command"})
        if unknown:
            raise UsageError(f"unknown config keys for {args.command}: {', '.join(unknown)}")
        values.pop("command", None)
        flags = {a.dest: a for a in sp._actions}
        for k, v in values.items():
            if isinstance(flags[k], argparse._StoreTrueAction):
                values[k] = v.lower() in ("1", "true", "yes", "on")
        sp.set_defaults(**values)
        args = parser.parse_args(argv)
    _validate(args)
    return args


def _validate(args: argparse.Namespace):
    if args.command == "sweep":
        if args.steps < 2:
            raise UsageError("sweep: --steps must be >= 2")
        if not args.start < args.stop:
            raise UsageError("sweep: --start must be smaller than --stop")
        if args.jobs < 1:
            raise UsageError("sweep: --jobs must be >= 1")
        if args.variable == "gt":
            args.variable = "probe_gt"
    if args.command in ("teleport", "compare-models"):
        given = [args.zeta is not None or args.xi is not None, args.theta is not None, args.random_input]
        if sum(given) > 1:
            raise UsageError("give only one of --zeta/--xi, --theta/--phi, --random-input")
        if args.zeta is not None or args.xi is not None:
            if args.zeta is None or args.xi is None:
                raise UsageError("--zeta and --xi go together")
            norm = abs(args.zeta) ** 2 + abs(args.xi) ** 2
            if abs(norm - 1.0) > 1e-12:
                raise UsageError(f"|zeta|^2 + |xi|^2 = {norm!r}, expected 1")


def resolve_input(args: argparse.Namespace) -> tuple[complex, complex]:
    if args.random_input:
        rng = np.random.default_rng(args.seed)
        v = rng.normal(size=2) + 1j * rng.normal(size=2)
        v /= np.linalg.norm(v)
        return complex(v[0]), complex(v[1])
    if args.theta is not None:
        return complex(math.cos(args.theta / 2)), cmath.exp(1j * args.phi) * math.sin(args.theta / 2)
    if args.zeta is not None:
        return complex(args.zeta), complex(args.xi)
    return complex(1.0), complex(0.0)


def resolve_gt(gt, alpha: complex, n_max: int | None) -> float:
    if gt == "heuristic":
        return probe_pulse_heuristic(alpha)
    if gt == "optimize":
        return probe_pulse_optimize(alpha, n_max).gt
    return float(gt)


def _nmax(args, alpha) -> int:
    return default_n_max(alpha) if args.nmax is None else args.nmax


# -- commands ------------------------------------------------------------------------


def cmd_epr(args) -> tuple[int, Report]:
    n_max = _nmax(args, args.alpha)
    config = {"command": "epr", "variant": args.variant, "alpha": args.alpha, "gt": args.gt, "n_max": n_max,
              "tail_tolerance": args.tail_tolerance}
    report = Report(EPR_COLUMNS, config, args.format)
    gt = resolve_gt(args.gt, args.alpha, n_max)
    config["gt_resolved"] = gt
    res = prepare_epr(args.alpha, gt, args.variant, n_max, args.tail_tolerance)
    report.add(variant=res.variant.value, alpha=res.alpha, gt=res.gt, success_probability=res.success_probability,
               fidelity_to_ideal=res.fidelity_to_ideal, tail_mass=res.diagnostics["tail_mass"], n_max=res.n_max)
    return EXIT_OK, report


def cmd_teleport(args) -> tuple[int, Report]:
    zeta, xi = resolve_input(args)
    n_max = _nmax(args, args.alpha)
    config = {"command": "teleport", "zeta": zeta, "xi": xi, "alpha": args.alpha, "gt": args.gt, "n_max": n_max,
              "mode": args.mode, "seed": args.seed, "tail_tolerance": args.tail_tolerance}
    report = Report(TELEPORT_COLUMNS, config, args.format)
    gt = resolve_gt(args.gt, args.alpha, n_max)
    config["gt_resolved"] = gt
    res = teleport(TeleportConfig(zeta, xi, args.alpha, gt, n_max, args.mode, args.seed, args.tail_tolerance))
    report.add(kind="e3", outcome="e", probability=res.e3_probability)
    for o in res.outcomes:
        report.add(kind="outcome", outcome=o.outcome, probability=o.probability,
                   fidelity_before_correction=o.fidelity_before_correction,
                   fidelity_after_correction=o.fidelity_to_input, correction=o.correction)
    if res.sampled_path is not None:
        path = res.sampled_path
        if path.e3_detected:
            o = res.outcome(path.outcome)
            report.add(kind="sampled", outcome=o.outcome, probability=o.probability,
                       fidelity_before_correction=o.fidelity_before_correction,
                       fidelity_after_correction=o.fidelity_to_input, correction=o.correction)
        else:
            report.add(kind="sampled", outcome="f", probability=1.0 - res.e3_probability, correction="failed")
    return EXIT_OK, report


def _sweep_point(task) -> dict:
    index, variable, value, alpha, gt_spec, variant, n_max_flag, tail_tolerance = task
    if variable == "alpha":
        alpha = complex(value)
    row = {"index": index, "variable": variable, "value": value, "alpha": alpha}
    try:
        n_max = default_n_max(alpha) if n_max_flag is None else n_max_flag
        row["n_max"] = n_max
        gt = float(value) if variable == "probe_gt" else resolve_gt(gt_spec, alpha, n_max)
        row["gt"] = gt
        res = prepare_epr(alpha, gt, variant, n_max, tail_tolerance)
        row.update(success_probability=res.success_probability, fidelity_to_ideal=res.fidelity_to_ideal, status="ok")
    except TruncationError:
        row["status"] = "truncation-error"
    except PostSelectionError:
        row["status"] = "post-selection-failed"
    except SimulationError as exc:
        row["status"] = f"error: {type(exc).__name__}"
    return row


def cmd_sweep(args) -> tuple[int, Report]:
    config = {"command": "sweep", "variable": args.variable, "start": args.start, "stop": args.stop,
              "steps": args.steps, "alpha": args.alpha, "gt": args.gt, "variant": args.variant,
              "n_max": "auto" if args.nmax is None else args.nmax, "tail_tolerance": args.tail_tolerance}
    report = Report(SWEEP_COLUMNS, config, args.format)
    grid = np.linspace(args.start, args.stop, args.steps)
    tasks = [(i, args.variable, float(v), args.alpha, args.gt, args.variant, args.nmax, args.tail_tolerance)
             for i, v in enumerate(grid)]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_point, tasks))
    else:
        rows = [_sweep_point(t) for t in tasks]
    for r in rows:
        report.add(**r)
    return EXIT_OK, report


def cmd_bell_check(args) -> tuple[int, Report]:
    report = Report(BELL_COLUMNS, {"command": "bell-check"}, args.format)
    gram, checks = bell_checks()
    names = [v.value for v in BellVariant]
    for i, a in enumerate(names):
        for j, b in enumerate(names):
            expected = 1.0 if i == j else 0.0
            dev = abs(gram[i, j] - expected)
            report.add(item=f"gram {a}/{b}", expected=expected, observed=complex(gram[i, j]), deviation=dev, passed=dev <= 1e-12)
    targets = {"R(psi-plus)=phi-minus": "phi-minus", "R(psi-minus)=phi-plus": "phi-plus"}
    for c in checks:
        if c.name in targets:
            report.add(item=c.name.split("=")[0], expected=targets[c.name],
                       observed=targets[c.name] if c.passed else "mismatch", deviation=c.value, passed=c.passed)
    failed = [c for c in checks if not c.passed]
    if failed:
        print(f"bell-check: identity {failed[0].name} failed (deviation {failed[0].value:.3g})", file=sys.stderr)
        return EXIT_CHECK_FAILED, report
    return EXIT_OK, report


def cmd_compare_models(args) -> tuple[int, Report]:
    zeta, xi = resolve_input(args)
    n_max = _nmax(args, args.alpha)
    config = {"command": "compare-models", "zeta": zeta, "xi": xi, "alpha": args.alpha, "gt": args.gt,
              "n_max": n_max, "tail_tolerance": args.tail_tolerance}
    report = Report(COMPARE_COLUMNS, config, args.format)
    gt = resolve_gt(args.gt, args.alpha, n_max)
    config["gt_resolved"] = gt
    cmp = compare_models(zeta, xi, args.alpha, n_max, gt, check=False)
    for r in cmp.rows:
        report.add(**r)
    report.summary = {"max_probability_deviation": cmp.max_probability_deviation, "bound": cmp.bound,
                      "max_fidelity_deviation": cmp.max_fidelity_deviation, "within_bound": cmp.within_bound}
    if not cmp.within_bound:
        print(f"compare-models: deviation {cmp.max_probability_deviation:.3g} exceeds bound {cmp.bound:.3g}",
              file=sys.stderr)
        return EXIT_CHECK_FAILED, report
    return EXIT_OK, report


COMMANDS: dict[str, Callable] = {
    "epr": cmd_epr,
    "teleport": cmd_teleport,
    "sweep": cmd_sweep,
    "bell-check": cmd_bell_check,
    "compare-models": cmd_compare_models,
}


def _emit(report: Report, output: str | None, stream: TextIO):
    text = report.render()
    if output:
        with open(output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        stream.write(text)


def main(argv: Sequence[str] | None = None, stdout: TextIO | None = None) -> int:
    stdout = stdout or sys.stdout
    try:
        args = parse_args(sys.argv[1:] if argv is None else list(argv))
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE
    try:
        code, report = COMMANDS[args.command](args)
    except TruncationError as exc:
        print(f"truncation error: {exc}", file=sys.stderr)
        return EXIT_TRUNCATION
    except ModelMismatchError as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    except (PostSelectionError, DomainError, SimulationError) as exc:
        print(f"protocol failure: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    _emit(report, args.output, stdout)
    return code


if __name__ == "__main__":
    sys.exit(main())
