"""Command-line interface.

Subcommands::

    wignerframes run CONFIG [--exact] [--mc] [--trials N] [--seed S] [--out PATH] [--format json|csv]
    wignerframes compare-frames CONFIG --beta-list 0 0.2 0.5
    wignerframes signalling-test CONFIG
    wignerframes sweep CONFIG --theta-grid N [--beta-prime B] [--mc]
    wignerframes validate-geometry CONFIG

Results are written as a JSON tree or as CSV. For tree-shaped documents the
CSV has one ``field,value`` row per leaf with dotted paths; the sweep is a
plain table. Floats are written with ``repr`` so both encodings carry the
same 17 significant digits, and reruns are byte-identical.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 internal
invariant violation. Diagnostics go to standard error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import __version__
from .config import config_values, parse_config_document
from .engine import Mode, ProtocolConfig, Scheme, max_difference, run_exact, run_monte_carlo, signalling_witness
from .errors import ConfigurationError, InvariantViolation, WignerFramesError
from .relativity import TIE_TOL, validate_geometry
from .streams import STREAM_DESCRIPTION

SCHEMA_ID = "wignerframes.result/1"
EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_INTERNAL = 0, 2, 3, 4
FRAME_DEPENDENCE_TOL = 1e-9
POINTER_K = 0.25
ALTERNATIVE_K = 1.0


# ---------------------------------------------------------------- encoding


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": float(value.real), "im": float(value.imag)}
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not math.isfinite(value):
            raise InvariantViolation(f"non-finite value {value!r} in result document")
        return value
    if value is None or isinstance(value, str):
        return value
    raise InvariantViolation(f"cannot encode {type(value).__name__} in result document")


def _scalar_text(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def flatten(tree, prefix: str = ""):
    """Yield ``(dotted_path, leaf)`` pairs of a JSON-compatible tree in order."""
    if isinstance(tree, dict):
        for k, v in tree.items():
            yield from flatten(v, f"{prefix}.{k}" if prefix else k)
    elif isinstance(tree, list):
        for i, v in enumerate(tree):
            yield from flatten(v, f"{prefix}[{i}]")
    else:
        yield prefix, tree


def to_json(doc: dict) -> str:
    return json.dumps(_jsonable(doc), indent=2, allow_nan=False) + "\n"


def _write_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_scalar_text(v) for v in row])
    return buf.getvalue()


def to_csv(doc: dict) -> str:
    """One ``field,value`` row per leaf; a ``rows`` table is written as-is."""
    doc = _jsonable(doc)
    if doc.get("table") is not None:
        table = doc["table"]
        return _write_csv(table["columns"], table["rows"])
    return _write_csv(["field", "value"], flatten(doc))


def encode(doc: dict, fmt: str) -> str:
    if fmt == "json":
        return to_json(doc)
    if fmt == "csv":
        return to_csv(doc)
    raise ConfigurationError(f"unknown output format {fmt!r}")


# ---------------------------------------------------------------- documents


def _config_echo(config: ProtocolConfig) -> dict:
    echo: dict = {}
    for full, value in config_values(config).items():
        section, key = full.split(".")
        echo.setdefault(section, {})[key] = value
    return echo


def _base_document(command: str, config: ProtocolConfig, defaulted) -> dict:
    return {
        "schema": SCHEMA_ID,
        "version": __version__,
        "command": command,
        "config": _config_echo(config),
        "defaulted": list(defaulted),
        "geometry": validate_geometry(config.events).as_dict(),
        "seed": config.seed,
        "rng": STREAM_DESCRIPTION,
    }


def closed_form(config: ProtocolConfig) -> dict | None:
    """Closed-form unnormalized moment for the configurations where one is known.

    Known for the ``WEAK`` scheme with equal-weight amplitudes: frame-R order
    (or collapse, or Alice measuring z) gives ``(g^2/4)(1 + c1 c2)``; unitary
    lab with Alice measuring x before the emission gives ``k g^2 c1 c2``.
    """
    if config.scheme is not Scheme.WEAK:
        return None
    if abs(abs(config.alpha) ** 2 - 0.5) > 1e-12:
        return None
    g2, c12 = config.g**2, math.cos(config.theta1) * math.cos(config.theta2)
    beta_star = config.beta_star
    inverted = beta_star is not None and config.boost > beta_star
    if config.mode is Mode.OBJECTIVE_COLLAPSE or not inverted or abs(config.alice_angle) <= 1e-15:
        return {"formula": "(g^2/4)(1 + cos(theta1) cos(theta2))", "value": g2 / 4 * (1 + c12)}
    if abs(config.alice_angle - math.pi / 2) > 1e-15:
        return None
    return {
        "formula": "k g^2 cos(theta1) cos(theta2)",
        "k": POINTER_K,
        "value": POINTER_K * g2 * c12,
        "alternative": {
            "k": ALTERNATIVE_K,
            "value": ALTERNATIVE_K * g2 * c12,
            "note": (
                "normalization without the 1/4 from the pointer overlaps; "
                "direct quadrature of the pointer wavefunctions gives k = 1/4"
            ),
        },
    }


def run_document(
    config: ProtocolConfig,
    defaulted=(),
    exact: bool = True,
    mc: bool = False,
    workers: int | None = None,
) -> dict:
    doc = _base_document("run", config, defaulted)
    doc["exact"] = run_exact(config).as_dict() if exact else None
    if mc:
        doc["monte_carlo"] = run_monte_carlo(config, workers=workers).as_dict()
    else:
        doc["monte_carlo"] = None
    doc["closed_form"] = closed_form(config)
    return doc


def _check_not_threshold(config: ProtocolConfig, beta: float):
    beta_star = config.beta_star
    if beta_star is not None and abs(beta - beta_star) <= TIE_TOL:
        raise ConfigurationError(
            f"beta-list: beta = {beta!r} is at the ordering threshold beta* = {beta_star!r} (simultaneity)"
        )


def compare_frames_document(config: ProtocolConfig, betas, defaulted=()) -> dict:
    """Exact results per frame velocity plus pairwise differences."""
    betas = [float(b) for b in betas]
    if not betas:
        raise ConfigurationError("beta-list: at least one velocity is required")
    for b in betas:
        if not abs(b) < 1:
            raise ConfigurationError(f"beta-list: |beta| must be < 1, got {b!r}")
        _check_not_threshold(config, b)
    results = [run_exact(config.with_(boost=b)) for b in betas]
    doc = _base_document("compare-frames", config, defaulted)
    doc["frames"] = [{"beta": b, "exact": r.as_dict()} for b, r in zip(betas, results)]
    pairs = []
    for i in range(len(betas)):
        for j in range(i + 1, len(betas)):
            ri, rj = results[i], results[j]
            md = None
            if ri.joint_moment is not None and rj.joint_moment is not None:
                md = ri.joint_moment - rj.joint_moment
            worst = max_difference(ri, rj)
            pairs.append(
                {
                    "beta_a": betas[i],
                    "beta_b": betas[j],
                    "momentDifference": md,
                    "maxFieldDifference": worst if math.isfinite(worst) else None,
                    "frame_dependent": bool(worst > FRAME_DEPENDENCE_TOL),
                }
            )
    doc["pairs"] = pairs
    return doc


def signalling_document(config: ProtocolConfig, defaulted=()) -> dict:
    doc = _base_document("signalling-test", config, defaulted)
    w = signalling_witness(config)
    main_run, control = w[Mode.UNITARY_LAB.value], w[Mode.OBJECTIVE_COLLAPSE.value]
    doc["signalling"] = {
        "difference": main_run["difference"],
        "signalling": main_run["signalling"],
        "control": {"mode": Mode.OBJECTIVE_COLLAPSE.value, **control},
        **w,
    }
    return doc


SWEEP_COLUMNS = ["theta1", "theta2", "moment_R", "moment_Rprime", "difference"]
SWEEP_MC_COLUMNS = ["mc_R", "mc_R_se", "mc_Rprime", "mc_Rprime_se", "mc_trials"]


def sweep_document(
    config: ProtocolConfig,
    n: int,
    beta_prime: float | None = None,
    mc: bool = False,
    workers: int | None = None,
    defaulted=(),
) -> dict:
    """Exact moments in R (beta = 0) and R' on an ``n x n`` grid over [0, pi]^2."""
    if n < 2:
        raise ConfigurationError(f"theta-grid: N must be >= 2, got {n}")
    beta_star = config.beta_star
    if beta_prime is None:
        beta_prime = config.boost if beta_star is not None and config.boost > beta_star else None
    if beta_prime is None:
        if beta_star is None:
            raise ConfigurationError("beta-prime: geometry admits no ordering inversion")
        beta_prime = (beta_star + 1) / 2
    if not abs(beta_prime) < 1:
        raise ConfigurationError(f"beta-prime: |beta| must be < 1, got {beta_prime!r}")
    _check_not_threshold(config, beta_prime)
    base = config.with_(scheme=Scheme.WEAK)
    grid = np.linspace(0.0, math.pi, n)
    rows = []
    for t1 in grid:
        for t2 in grid:
            c = base.with_(theta1=float(t1), theta2=float(t2))
            r = run_exact(c.with_(boost=0.0)).joint_moment
            rp = run_exact(c.with_(boost=beta_prime)).joint_moment
            row = [float(t1), float(t2), r, rp, r - rp]
            if mc:
                er = run_monte_carlo(c.with_(boost=0.0), workers=workers).moment
                ep = run_monte_carlo(c.with_(boost=beta_prime), workers=workers).moment
                row += [er.value, er.se, ep.value, ep.se, er.n]
            rows.append(row)
    doc = _base_document("sweep", base, defaulted)
    doc["beta_R"] = 0.0
    doc["beta_Rprime"] = beta_prime
    doc["table"] = {"columns": SWEEP_COLUMNS + (SWEEP_MC_COLUMNS if mc else []), "rows": rows}
    return doc


def geometry_document(config: ProtocolConfig, defaulted=()) -> dict:
    return _base_document("validate-geometry", config, defaulted)


# ---------------------------------------------------------------- CLI


def _load(path: str, trials=None, seed=None):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    doc = parse_config_document(text)
    config, defaulted = doc.config, list(doc.defaulted)
    changes = {}
    if trials is not None:
        changes["trials"] = trials
    if seed is not None:
        changes["seed"] = seed
    if changes:
        config = config.with_(**changes)
    return config, defaulted


def _emit(text: str, out: str | None):
    if out is None or out == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _beta_list(values):
    out = []
    for v in values:
        for part in v.split(","):
            if part.strip():
                try:
                    out.append(float(part))
                except ValueError:
                    raise ConfigurationError(f"beta-list: not a number: {part!r}") from None
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wignerframes", description="Frame-dependent Wigner-friend protocol simulator.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, fmt_default="json"):
        sp.add_argument("config", help="configuration document")
        sp.add_argument("--out", default=None, help="output path (default: standard output)")
        sp.add_argument("--format", choices=("json", "csv"), default=fmt_default)

    def sampling(sp):
        sp.add_argument("--trials", type=int, default=None, help="Monte Carlo trials (overrides [runs] trials)")
        sp.add_argument("--seed", type=int, default=None, help="64-bit seed (overrides [runs] seed)")
        sp.add_argument("--workers", type=int, default=None, help="Monte Carlo worker threads; never changes results")

    sp = sub.add_parser("run", help="run one configuration exactly and/or by Monte Carlo")
    common(sp)
    sampling(sp)
    sp.add_argument("--exact", action="store_true", help="exact branch enumeration (default if --mc is absent)")
    sp.add_argument("--mc", action="store_true", help="Monte Carlo sampling")

    sp = sub.add_parser("compare-frames", help="exact results across frame velocities")
    common(sp)
    sp.add_argument("--beta-list", nargs="+", required=True, help="frame velocities, space or comma separated")

    sp = sub.add_parser("signalling-test", help="toggle Alice's basis in an inverted frame")
    common(sp)

    sp = sub.add_parser("sweep", help="exact moments in R and R' over a theta grid")
    common(sp, fmt_default="csv")
    sampling(sp)
    sp.add_argument("--theta-grid", type=int, required=True, metavar="N")
    sp.add_argument("--beta-prime", type=float, default=None, help="velocity of R' (default: config beta if inverted)")
    sp.add_argument("--mc", action="store_true", help="add Monte Carlo estimates per grid point")

    sp = sub.add_parser("validate-geometry", help="check the event geometry and print beta*")
    sp.add_argument("config")
    sp.add_argument("--format", choices=("text", "json", "csv"), default="text")
    sp.add_argument("--out", default=None)
    return p


def _geometry_text(report) -> str:
    lines = [f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}" for c in report.checks]
    lines.append(f"beta* = {report.beta_star!r}")
    return "\n".join(lines) + "\n"


def _dispatch(args) -> int:
    if args.command == "run":
        config, defaulted = _load(args.config, args.trials, args.seed)
        exact = args.exact or not args.mc
        doc = run_document(config, defaulted, exact=exact, mc=args.mc, workers=args.workers)
        _emit(encode(doc, args.format), args.out)
    elif args.command == "compare-frames":
        config, defaulted = _load(args.config)
        doc = compare_frames_document(config, _beta_list(args.beta_list), defaulted)
        _emit(encode(doc, args.format), args.out)
    elif args.command == "signalling-test":
        config, defaulted = _load(args.config)
        _emit(encode(signalling_document(config, defaulted), args.format), args.out)
    elif args.command == "sweep":
        config, defaulted = _load(args.config, args.trials, args.seed)
        doc = sweep_document(config, args.theta_grid, args.beta_prime, args.mc, args.workers, defaulted)
        _emit(encode(doc, args.format), args.out)
    elif args.command == "validate-geometry":
        config, defaulted = _load(args.config)
        report = validate_geometry(config.events)
        if args.format == "text":
            _emit(_geometry_text(report), args.out)
        else:
            _emit(encode(geometry_document(config, defaulted), args.format), args.out)
        return EXIT_OK if report.ok else EXIT_CONFIG
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except InvariantViolation as exc:
        print(f"wignerframes: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except WignerFramesError as exc:
        print(f"wignerframes: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"wignerframes: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
