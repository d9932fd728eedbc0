"""Command-line interface: fit, residuals, simulate.

Exit codes: 0 success, 1 domain/model errors (non-convergence, bad data
values, non-positive variances), 2 usage or config errors.
"""
import argparse
import csv
import io
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__, residuals, simulate
from .errors import ConfigError, DomainError, EfnlmError, ParseError
from .families import get_family
from .fitting import ModelSpec, fit_at, irls_fit
from .links import get_link
from .predictor import Dataset, make_predictor

EXPRESSION_HELP = (
    "Predictor: 'linear', 'power_plus_linear', or an arithmetic expression "
    "over covariate and parameter names using + - * / ^ and log()/exp() "
    "(parameter names given via --params)."
)


def load_dataset(path, family=None):
    """Read a CSV with a header row; the response column must be named 'y'."""
    try:
        with open(path, newline="") as handle:
            reader = csv.reader(handle)
            try:
                header = next(reader)
            except StopIteration:
                raise ParseError(f"{path}: empty file") from None
            header = [h.strip() for h in header]
            if "y" not in header:
                raise ParseError(f"{path}: no response column named 'y' in header")
            y_col = header.index("y")
            cov_names = [h for i, h in enumerate(header) if i != y_col]
            rows = []
            for lineno, row in enumerate(reader, start=2):
                if not row or (len(row) == 1 and not row[0].strip()):
                    continue
                if len(row) != len(header):
                    raise ParseError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
                try:
                    rows.append([float(v) for v in row])
                except ValueError as exc:
                    raise ParseError(f"{path}:{lineno}: {exc}") from None
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    if not rows:
        raise ParseError(f"{path}: no data rows")
    arr = np.asarray(rows, dtype=float)
    y = arr[:, y_col]
    x = np.delete(arr, y_col, axis=1)
    if family is not None and family.name in ("gamma", "inverse_gaussian"):
        bad = np.nonzero(y <= 0)[0]
        if bad.size:
            raise DomainError(
                f"{path}: row {bad[0] + 2}: response must be positive for the {family.name} family"
            )
    return Dataset(x=x, y=y, columns=tuple(cov_names))


def _build_predictor(args, data):
    name = args.predictor
    if name == "linear":
        return make_predictor("linear", q=data.q)
    if name == "power_plus_linear":
        pred = make_predictor("power_plus_linear")
        pred.validate(data.x)
        return pred
    params = [p.strip() for p in (args.params or "").split(",") if p.strip()]
    if not params:
        raise ConfigError("an expression predictor needs --params")
    return make_predictor(
        "expression", expression=name, params=params, covariates=data.columns
    )


def _parse_floats(text):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"bad numeric list {text!r}: {exc}") from None


def _default_init(model, data):
    """Linearized-model heuristic for linear predictors, small constants otherwise."""
    if model.predictor.kind == "linear":
        y_adj = np.asarray(data.y, dtype=float)
        if model.family.name in ("gamma", "inverse_gaussian"):
            y_adj = np.clip(y_adj, np.min(y_adj[y_adj > 0]) if np.any(y_adj > 0) else 1e-8, None)
        eta = model.link.eta_of_mu(y_adj)
        beta, *_ = np.linalg.lstsq(data.x, eta, rcond=None)
        return beta
    return np.full(model.predictor.p, 0.1)


def _write_atomic(path, text):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=str(path.parent) or ".", prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fit_to_json(model, fit, args):
    return {
        "family": model.family.name,
        "link": model.link.name,
        "predictor": {
            "kind": model.predictor.kind,
            **(
                {"expression": model.predictor.expression, "params": list(model.predictor.params)}
                if model.predictor.kind == "expression"
                else {}
            ),
        },
        "beta": [float(b) for b in fit.beta],
        "phi": float(fit.phi),
        "phi_method": fit.phi_method,
        "converged": bool(fit.converged),
        "iterations": fit.iterations,
        "score_norm": float(fit.score_norm),
        "bias": [float(b) for b in fit.bias],
        "dispersion": 1.0 / float(fit.phi),
    }


def cmd_fit(args):
    family = get_family(args.family)
    link = get_link(args.link)
    data = load_dataset(args.data, family)
    model = ModelSpec(family=family, link=link, predictor=None)
    pred = _build_predictor(args, data)
    model = ModelSpec(family=family, link=link, predictor=pred)
    beta_init = _parse_floats(args.init) if args.init else _default_init(model, data)
    fit = irls_fit(model, data, beta_init, phi_method=args.phi_method)
    payload = json.dumps(_fit_to_json(model, fit, args), indent=2) + "\n"
    if args.out:
        _write_atomic(args.out, payload)
    else:
        sys.stdout.write(payload)
    if not fit.converged:
        print("error: fit did not converge", file=sys.stderr)
        return 1
    return 0


def cmd_residuals(args):
    try:
        with open(args.model) as handle:
            spec = json.load(handle)
    except OSError as exc:
        raise ParseError(f"cannot read {args.model}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{args.model}: {exc}") from None
    family = get_family(spec["family"])
    link = get_link(spec["link"])
    data = load_dataset(args.data, family)
    pd = dict(spec["predictor"])
    kind = pd.pop("kind")
    if kind == "linear":
        pd["q"] = data.q
    if kind == "expression":
        pd["covariates"] = data.columns
    pred = make_predictor(kind, **pd)
    model = ModelSpec(family=family, link=link, predictor=pred)
    fit = fit_at(model, data, np.asarray(spec["beta"], dtype=float), phi=spec.get("phi"))
    rep = residuals.residual_report(fit, data)

    buf = io.StringIO()
    buf.write("i,pearson,corrected,expected,variance,adjusted,pca,pca_scaled\n")
    for i in range(data.n):
        buf.write(
            f"{i + 1},{rep.pearson[i]:.10g},{rep.corrected[i]:.10g},"
            f"{rep.expected[i]:.10g},{rep.variances[i]:.10g},{rep.adjusted[i]:.10g},"
            f"{rep.pca[i]:.10g},{rep.pca_scaled[i]:.10g}\n"
        )
    _write_atomic(args.out, buf.getvalue())
    sidecar = {
        "eigenvalues": [float(v) for v in rep.eigenvalues],
        "eigenvectors": [[float(v) for v in row] for row in rep.eigenvectors],
        "truncation": rep.truncation,
        "corrected_failures": rep.corrected_failures,
    }
    _write_atomic(Path(args.out).with_suffix(".json"), json.dumps(sidecar, indent=2) + "\n")
    return 0


def cmd_simulate(args):
    try:
        with open(args.config) as handle:
            raw = json.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read {args.config}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{args.config}: {exc}") from None
    if args.seed is not None:
        raw["master_seed"] = args.seed
    if args.workers is not None:
        raw["workers"] = args.workers
    config = simulate.SimulationConfig.from_dict(raw)
    formats = tuple(f.strip() for f in args.formats.split(",") if f.strip())
    bad = set(formats) - {"csv", "markdown"}
    if bad:
        raise ConfigError(f"unknown output formats: {sorted(bad)}")
    report = simulate.run_monte_carlo(config)
    simulate.emit_report(report, args.out, formats=formats)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="efnlm",
        description="Exponential family nonlinear models: fitting and residual diagnostics.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit a model by reweighted least squares")
    fit.add_argument("--family", required=True, choices=["normal", "gamma", "inverse_gaussian"])
    fit.add_argument("--link", required=True, choices=["identity", "log", "reciprocal", "inverse_square"])
    fit.add_argument("--predictor", required=True, help=EXPRESSION_HELP)
    fit.add_argument("--params", help="comma-separated parameter names for expression predictors")
    fit.add_argument("--data", required=True, help="CSV with header row; response column 'y'")
    fit.add_argument("--init", help="comma-separated starting values for beta")
    fit.add_argument("--phi-method", default="pearson", choices=["pearson", "mle"])
    fit.add_argument("--out", help="write the fitted-model JSON here (default: stdout)")
    fit.set_defaults(func=cmd_fit)

    res = sub.add_parser("residuals", help="compute residual vectors for a fitted model")
    res.add_argument("--model", required=True, help="fitted-model JSON from `efnlm fit`")
    res.add_argument("--data", required=True, help="CSV with header row; response column 'y'")
    res.add_argument("--out", required=True, help="output CSV (a .json sidecar is written alongside)")
    res.set_defaults(func=cmd_residuals)

    sim = sub.add_parser("simulate", help="run a seeded Monte Carlo study")
    sim.add_argument("--config", required=True, help="simulation config JSON")
    sim.add_argument("--out", required=True, help="output directory for the report tables")
    sim.add_argument("--seed", type=int, help="override the master seed")
    sim.add_argument(
        "--workers",
        type=int,
        help="worker count (default from config or EFNLM_WORKERS)",
    )
    sim.add_argument("--formats", default="csv", help="comma-separated: csv,markdown")
    sim.set_defaults(func=cmd_simulate)
    return parser


def parse_and_dispatch(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "command", None) == "simulate" and args.workers is None:
            env = os.environ.get("EFNLM_WORKERS")
            if env:
                try:
                    args.workers = int(env)
                except ValueError:
                    raise ConfigError(f"EFNLM_WORKERS={env!r} is not an integer") from None
        return args.func(args)
    except (ConfigError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except EfnlmError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(parse_and_dispatch())


if __name__ == "__main__":
    main()
