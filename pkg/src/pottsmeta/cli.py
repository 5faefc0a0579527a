"""Command-line front end ``potts``.

Subcommands: ``landscape``, ``critical``, ``phases``, ``predict``,
``simulate``, ``validate`` and ``rerun``.  Tables are written as CSV with 17
significant digits, documents as JSON with a ``schema_version`` field.
Every run writes a manifest (parameters, seed, version and the argument
vector) next to its output, or to standard error when writing to standard
output; ``potts rerun --manifest FILE`` replays it.

Exit codes: 0 success, 1 validation failure, 2 usage error, 3 refusal at a
degenerate critical value, 4 size limit exceeded.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import re
import sys

import click
import numpy as np

from . import __version__
from .errors import DegenerateRegime, EpsilonTooLarge, NoValleys, PottsError, SizeLimit
from .kinetics import predict_transition
from .landscape import classify_regime, critical_points, phase_diagram
from .model import ModelParams, potential
from .simulator import SimulationConfig, hitting_experiment, run_trajectory
from .validation import run_suite

SCHEMA_VERSION = 1

EXIT_OK, EXIT_VALIDATION, EXIT_USAGE, EXIT_DEGENERATE, EXIT_SIZE = 0, 1, 2, 3, 4

_THETA_RE = re.compile(r"^\s*([+-]?\d*\.?\d*)\s*\*?\s*pi\s*(?:/\s*(\d+(?:\.\d*)?))?\s*$")


def parse_theta(text: str) -> float:
    """Angle from ``"pi"``, ``"2pi/3"``, ``"5*pi/3"`` or plain radians, reduced to ``[0, 2 pi)``."""
    s = text.strip().lower().replace("π", "pi")
    m = _THETA_RE.match(s)
    if m:
        coef = m.group(1)
        c = 1.0 if coef in ("", "+") else -1.0 if coef == "-" else float(coef)
        d = float(m.group(2)) if m.group(2) else 1.0
        value = c * math.pi / d
    else:
        try:
            value = float(s)
        except ValueError:
            raise click.BadParameter(f"cannot read angle {text!r}") from None
    value = math.fmod(value, 2.0 * math.pi)
    if value < 0.0:
        value += 2.0 * math.pi
    return 0.0 if value >= 2.0 * math.pi else value


def parse_range(text: str) -> tuple:
    """``"2..4"`` to ``(2.0, 4.0)``."""
    parts = text.split("..")
    if len(parts) != 2:
        raise click.BadParameter(f"expected a range like 2..4, got {text!r}")
    try:
        lo, hi = float(parts[0]), float(parts[1])
    except ValueError:
        raise click.BadParameter(f"expected a range like 2..4, got {text!r}") from None
    if not lo < hi:
        raise click.BadParameter("range must be increasing")
    return lo, hi


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _to_json(v):
    if isinstance(v, dict):
        return {str(k): _to_json(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_to_json(x) for x in v]
    if isinstance(v, np.ndarray):
        return _to_json(v.tolist())
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if math.isfinite(f) else str(f)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


class _Out:
    """Destination of a command's main output plus its manifest."""

    def __init__(self, path: str | None, command: str, arguments: dict) -> None:
        self.path = path
        self.manifest = {
            "schema_version": SCHEMA_VERSION,
            "tool": "pottsmeta",
            "version": __version__,
            "command": command,
            "arguments": _to_json(arguments),
            "argv": [command] + _argv_from(arguments),
        }

    def write_text(self, text: str) -> None:
        if self.path in (None, "-"):
            click.echo(text, nl=False)
            click.echo(json.dumps(self.manifest, sort_keys=True), err=True)
        else:
            with open(self.path, "w", newline="") as fh:
                fh.write(text)
            with open(self.path + ".manifest.json", "w") as fh:
                json.dump(self.manifest, fh, indent=2, sort_keys=True)
                fh.write("\n")

    def write_csv(self, header: list, rows) -> None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
        self.write_text(buf.getvalue())

    def write_json(self, doc: dict) -> None:
        doc = {"schema_version": SCHEMA_VERSION, **_to_json(doc)}
        self.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _argv_from(arguments: dict) -> list:
    argv = []
    for k, v in arguments.items():
        if v is None or k == "out":
            continue
        flag = "--" + k.replace("_", "-")
        if isinstance(v, bool):
            if v:
                argv.append(flag)
        elif isinstance(v, (list, tuple)):
            for item in v:
                argv += [flag, str(item)]
        else:
            argv += [flag, str(v)]
    return argv


def _params(beta: float, r: float, theta: str, N: int | None = None) -> ModelParams:
    try:
        return ModelParams(beta, r, parse_theta(theta), N)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from None


def _run(fn):
    """Map library errors to exit codes."""
    try:
        return fn()
    except DegenerateRegime as exc:
        click.echo(f"refused: {exc}", err=True)
        sys.exit(EXIT_DEGENERATE)
    except SizeLimit as exc:
        click.echo(f"size limit: {exc}", err=True)
        sys.exit(EXIT_SIZE)
    except (NoValleys, EpsilonTooLarge, PottsError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_USAGE)


_common = [
    click.option("--beta", type=float, required=True, help="Inverse temperature."),
    click.option("--r", "r", type=float, default=0.0, show_default=True, help="Field strength."),
    click.option("--theta", default="0", show_default=True, help="Field angle: radians or a multiple of pi such as pi/3."),
]


def _with_params(f):
    for opt in reversed(_common):
        f = opt(f)
    return f


_out_option = click.option("--out", type=click.Path(dir_okay=False), default=None, help="Output file (default: standard output).")
_format_option = click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="json", show_default=True)


@click.group(context_settings={"help_option_names": ["--help"]})
@click.version_option(__version__, "--version")
def main() -> None:
    """Metastability toolkit for the three-state mean-field Potts model with cyclic dynamics."""


@main.command()
@_with_params
@click.option("--grid", type=int, default=101, show_default=True, help="Points per axis (2 to 2000).")
@_out_option
def landscape(beta: float, r: float, theta: str, grid: int, out: str | None) -> None:
    """Potential on a square grid of (x1, x2); NaN outside the simplex."""
    if not 2 <= grid <= 2000:
        raise click.UsageError("--grid must lie between 2 and 2000")
    params = _params(beta, r, theta)
    ticks = np.linspace(0.0, 1.0, grid)
    x1, x2 = np.meshgrid(ticks, ticks, indexing="ij")
    x1, x2 = x1.ravel(), x2.ravel()
    inside = x1 + x2 <= 1.0 + 1e-12
    F = np.full(len(x1), np.nan)
    X = np.column_stack([x1, x2])[inside]
    F[inside] = potential(np.column_stack([X[:, 0], np.minimum(X[:, 1], 1.0 - X[:, 0])]), params)
    args = {"beta": beta, "r": r, "theta": theta, "grid": grid}
    _Out(out, "landscape", args).write_csv(["x1", "x2", "F"], zip(x1, x2, F))


@main.command()
@_with_params
@click.option("--method", type=click.Choice(["auto", "multistart"]), default="auto", show_default=True)
@_format_option
@_out_option
def critical(beta: float, r: float, theta: str, method: str, fmt: str, out: str | None) -> None:
    """Critical points with their classification, plus the regime."""
    params = _params(beta, r, theta)

    def go():
        cps = critical_points(params, method=method)
        args = {"beta": beta, "r": r, "theta": theta, "method": method, "format": fmt}
        o = _Out(out, "critical", args)
        if fmt == "csv":
            rows = [
                (c.label, c.kind, c.location.x1, c.location.x2, c.height, c.hessian_eigs[0], c.hessian_eigs[1], c.det, c.degenerate)
                for c in cps
            ]
            o.write_csv(["label", "kind", "x1", "x2", "height", "eig1", "eig2", "det", "degenerate"], rows)
        else:
            report = classify_regime(params)
            o.write_json({"params": params.as_dict(), "regime": report.regime, "critical_points": [c.as_dict() for c in cps], "report": report.as_dict()})

    _run(go)


@main.command()
@click.option("--theta", default="pi", show_default=True, help="Field family: pi (or any odd multiple of pi/3) or 0.")
@click.option("--beta", "beta_range", default="2..4", show_default=True, help="Range of beta, as lo..hi.")
@click.option("--r", "r_range", default="0..0.3", show_default=True, help="Range of r, as lo..hi.")
@click.option("--resolution", type=int, default=101, show_default=True)
@_format_option
@_out_option
def phases(theta: str, beta_range: str, r_range: str, resolution: int, fmt: str, out: str | None) -> None:
    """Regime labels on a (beta, r) grid."""
    k = parse_theta(theta) / (math.pi / 3.0)
    if abs(k - round(k)) > 1e-12:
        raise click.UsageError("--theta must be a multiple of pi/3 for the phase diagram")
    family = "pi-family" if round(k) % 2 == 1 else "zero-family"
    b, rr = parse_range(beta_range), parse_range(r_range)
    if not 2 <= resolution <= 2000:
        raise click.UsageError("--resolution must lie between 2 and 2000")

    def go():
        pd = phase_diagram(b, rr, family, resolution)
        args = {"theta": theta, "beta": beta_range, "r": r_range, "resolution": resolution, "format": fmt}
        o = _Out(out, "phases", args)
        if fmt == "csv":
            o.write_csv(["beta", "r", "regime"], pd.rows())
        else:
            o.write_json({
                "theta_class": family,
                "betas": pd.betas,
                "rs": pd.rs,
                "labels": pd.labels.tolist(),
                "boundaries": {k: v.tolist() for k, v in pd.boundaries.items()},
            })

    _run(go)


@main.command()
@_with_params
@click.option("--n", "N", type=int, required=True, help="Number of sites.")
@click.option("--from", "start", type=int, default=0, show_default=True, help="Starting valley index.")
@_out_option
def predict(beta: float, r: float, theta: str, N: int, start: int, out: str | None) -> None:
    """Eyring-Kramers mean exit time and landing distribution."""
    params = _params(beta, r, theta)

    def go():
        report = classify_regime(params)
        if report.degenerate:
            raise DegenerateRegime(
                f"{report.regime}: degenerate critical value (beta = beta1 = 2 at zero field, or r = r1 of the field family)"
            )
        pred = predict_transition(report, params, N, start)
        args = {"beta": beta, "r": r, "theta": theta, "n": N, "from": start}
        _Out(out, "predict", args).write_json({"params": params.as_dict(), "regime": report.regime, "prediction": pred.as_dict()})

    _run(go)


@main.command()
@_with_params
@click.option("--n", "N", type=int, required=True, help="Number of sites.")
@click.option("--seed", type=int, required=True, help="Master seed.")
@click.option("--replicas", type=int, default=100, show_default=True)
@click.option("--from", "start", type=int, default=0, show_default=True, help="Starting valley index.")
@click.option("--to", "targets", type=int, multiple=True, help="Target valley (repeatable); default all others.")
@click.option("--epsilon", type=float, default=None, help="Margin of the metastable sets (default 0.1 * min gap).")
@click.option("--max-events", type=int, default=None, help="Event budget per replica.")
@click.option("--budget-factor", type=float, default=5.0, show_default=True)
@click.option("--threads", type=int, default=None, help="Worker threads (default POTTS_THREADS or the core count).")
@click.option("--event-log", type=click.Path(dir_okay=False), default=None, help="Also write the visit sequence of replica 0.")
@_format_option
@_out_option
def simulate(beta, r, theta, N, seed, replicas, start, targets, epsilon, max_events, budget_factor, threads, event_log, fmt, out) -> None:
    """Hitting times of the target metastable sets by exact simulation."""
    params = _params(beta, r, theta)
    if threads is None and os.environ.get("POTTS_THREADS"):
        threads = int(os.environ["POTTS_THREADS"])

    def go():
        report = classify_regime(params)
        if report.degenerate:
            raise DegenerateRegime(
                f"{report.regime}: degenerate critical value (beta = beta1 = 2 at zero field, or r = r1 of the field family)"
            )
        cfg = SimulationConfig(
            params, N, seed, replicas, start, tuple(targets) or None, epsilon, max_events, budget_factor, threads=threads
        )
        stats = hitting_experiment(cfg, report)
        args = {
            "beta": beta, "r": r, "theta": theta, "n": N, "seed": seed, "replicas": replicas, "from": start,
            "to": list(targets), "epsilon": epsilon, "max_events": max_events, "budget_factor": budget_factor,
            "format": fmt,
        }
        o = _Out(out, "simulate", args)
        if fmt == "csv":
            o.write_csv(["replica", "hitting_time", "target", "events", "censored"], stats.rows())
        else:
            o.write_json({"params": params.as_dict(), "regime": report.regime, "stats": stats.as_dict()})
        if event_log:
            from .errors import EventBudgetExceeded

            try:
                tr = run_trajectory(cfg, 0, report=report)
            except EventBudgetExceeded as exc:
                tr = exc.partial
            with open(event_log, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["label", "entry_time", "sojourn"])
                for row in zip(tr.labels, tr.entry_times, tr.sojourns):
                    w.writerow([_fmt(v) for v in row])

    _run(go)


@main.command()
@click.option("--level", type=click.Choice(["fast", "full"]), default="fast", show_default=True)
@_out_option
def validate(level: str, out: str | None) -> None:
    """Run the self-check suite; exit 1 if any check fails."""
    results = run_suite(level)
    for res in results:
        click.echo(f"{'PASS' if res.passed else 'FAIL'} {res.name}: {res.detail}", err=True)
    doc = {"level": level, "passed": all(r.passed for r in results), "checks": [r.as_dict() for r in results]}
    _Out(out, "validate", {"level": level}).write_json(doc)
    if not doc["passed"]:
        sys.exit(EXIT_VALIDATION)


@main.command()
@click.option("--manifest", "manifest", type=click.Path(exists=True, dir_okay=False), required=True)
@_out_option
@click.pass_context
def rerun(ctx: click.Context, manifest: str, out: str | None) -> None:
    """Replay the command recorded in a manifest."""
    with open(manifest) as fh:
        doc = json.load(fh)
    argv = list(doc["argv"])
    if out:
        argv += ["--out", out]
    cmd = main.get_command(ctx, argv[0])
    if cmd is None:
        raise click.UsageError(f"unknown command in manifest: {argv[0]!r}")
    with cmd.make_context(argv[0], argv[1:], parent=ctx.parent) as sub:
        cmd.invoke(sub)


if __name__ == "__main__":  # pragma: no cover
    main()
