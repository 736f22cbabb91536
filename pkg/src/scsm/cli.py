"""Command-line interface: ``scsm fit``, ``scsm test``, ``scsm simulate``.

Exit codes: 0 on success, 2 for input problems (bad files, bad options,
bad configurations), 3 for numerical failures (weak instruments, singular
systems, non-convergence).  All randomized commands accept ``--seed``;
when it is absent the ``SCSM_SEED`` environment variable (and for
``simulate``, an explicit seed in the configuration file, which takes
precedence over the environment) fills in, defaulting to 0.
"""

import argparse
import csv
import dataclasses
import json
import os
import sys
from importlib import resources

import numpy as np

from ._version import __version__
from .dataset import COMPETING_RISK, SINGLE_CAUSE, load_csv
from .errors import ConfigError, InputError, NumericalError, ScsmError
from .estimators import constant_effect, fit_recursive, piecewise_effect
from .inference import (
    competing_risk_test,
    constant_effect_se,
    iid_decomposition,
    test_causal_null,
    test_constant_effect,
    test_piecewise_gof,
    variance_bands,
)
from .instrument import InstrumentModelSpec, fit_instrument_model
from .simulation import SimConfig, run_study

__all__ = ["main"]


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except NumericalError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3
    except ScsmError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="scsm",
        description=(
            "Instrumental-variable estimation of cumulative exposure "
            "effects for right-censored survival data."
        ),
    )
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser(
        "fit", help="estimate the cumulative exposure coefficient",
        description=(
            "Fit the recursive instrumental-variable estimator on a CSV "
            "file (columns time,status,exposure,instrument,covariates...) "
            "and report the coefficient path with confidence bands."
        ),
    )
    _add_data_options(fit)
    fit.add_argument("--level", type=float, default=0.95,
                     help="confidence level for the bands (default 0.95)")
    fit.add_argument("--tau", type=float, default=None,
                     help="horizon of the constant-effect summary; enables it")
    fit.add_argument("--changepoint", type=float, default=None,
                     help="with --tau, switch to a two-slope summary split here")
    fit.add_argument("--format", choices=("json", "csv"), default="json",
                     help="output format (default json)")
    fit.add_argument("--out", default=None,
                     help="write the output here instead of stdout")
    fit.set_defaults(handler=_cmd_fit)

    test = sub.add_parser(
        "test", help="multiplier sup-tests on the fitted coefficient path",
        description=(
            "Fit the estimator, then run a resampling sup-test: "
            "'causal-null' (no effect), 'constant' (a single slope fits), "
            "'piecewise' (a two-slope fit is adequate) or 'competing' "
            "(competing events carry no instrument signal)."
        ),
    )
    _add_data_options(test)
    test.add_argument("--test", required=True, dest="test_kind",
                      choices=("causal-null", "constant", "piecewise",
                               "competing"),
                      help="which hypothesis to test")
    test.add_argument("--tau", type=float, default=None,
                      help="summary horizon (required for constant/piecewise)")
    test.add_argument("--changepoint", type=float, default=None,
                      help="changepoint of the piecewise summary")
    test.add_argument("--sup-window", default=None, metavar="LO,HI",
                      help="restrict the piecewise sup statistic to a window")
    test.add_argument("-M", "--draws", type=int, default=1000,
                      help="number of multiplier draws (default 1000)")
    test.add_argument("--seed", type=int, default=None,
                      help="resampling seed (default: SCSM_SEED or 0)")
    test.add_argument("--level", type=float, default=0.95,
                      help="level used to report a reject/accept line")
    test.add_argument("--out", default=None,
                      help="write the JSON report here instead of stdout")
    test.set_defaults(handler=_cmd_test)

    sim = sub.add_parser(
        "simulate", help="run a replication study from a configuration",
        description=(
            "Run a replication study described by a JSON configuration "
            "(a file path or the name of a packaged configuration) and "
            "write the aggregated report as JSON."
        ),
    )
    sim.add_argument("--config", required=True,
                     help="path to a config file, or a packaged config name")
    sim.add_argument("--out", default=None,
                     help="write the JSON report here (default stdout)")
    sim.add_argument("--seed", type=int, default=None,
                     help="override the study seed")
    sim.add_argument("--jobs", type=int, default=1,
                     help="worker processes for replicates (default 1)")
    sim.add_argument("--quiet", action="store_true",
                     help="suppress the summary table on stdout")
    sim.set_defaults(handler=_cmd_simulate)
    return parser


def _add_data_options(cmd):
    cmd.add_argument("data", help="CSV file with the subject records")
    cmd.add_argument("--cause-mode", choices=(SINGLE_CAUSE, COMPETING_RISK),
                     default=SINGLE_CAUSE,
                     help="status-code vocabulary (default single-cause)")
    cmd.add_argument("--instrument-model",
                     choices=("mean", "linear", "logistic"), default="mean",
                     help="instrument centering model (default mean)")
    cmd.add_argument("--instrument-covariates", default=None, metavar="A,B",
                     help="comma-separated covariates of the instrument model")


def _env_seed():
    raw = os.environ.get("SCSM_SEED")
    if raw is None:
        return None
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"SCSM_SEED must be an integer, got {raw!r}") from None
    if value < 0:
        raise ConfigError("SCSM_SEED must be non-negative")
    return value


def _resolve_seed(explicit, config_seed=None):
    """Seed precedence: --seed, then the config file, then SCSM_SEED, then 0."""
    for value in (explicit, config_seed, _env_seed()):
        if value is not None:
            if value < 0:
                raise ConfigError("the seed must be non-negative")
            return int(value)
    return 0


def _instrument_spec(args):
    covariates = ()
    if args.instrument_covariates:
        covariates = tuple(
            name.strip() for name in args.instrument_covariates.split(",")
            if name.strip()
        )
    return InstrumentModelSpec(kind=args.instrument_model,
                               covariates=covariates)


def _fit_pipeline(args):
    """Shared fit stage: dataset, instrument fit, recursion, influence."""
    data = load_csv(args.data, cause_mode=args.cause_mode)
    inst = fit_instrument_model(data, _instrument_spec(args))
    b_hat, trace = fit_recursive(data, inst)
    dec = iid_decomposition(trace, data, inst)
    return data, inst, b_hat, trace, dec


def _write_output(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def _json_dump(payload):
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _cmd_fit(args):
    if not 0.0 < args.level < 1.0:
        raise ConfigError("--level must be strictly between 0 and 1")
    if args.changepoint is not None and args.tau is None:
        raise ConfigError("--changepoint requires --tau")
    data = load_csv(args.data, cause_mode=args.cause_mode)
    inst = fit_instrument_model(data, _instrument_spec(args))

    notes = []
    b_hat, trace = fit_recursive(data, inst)
    if trace.m == 0:
        payload = _fit_payload(
            grid=np.empty(0), b=np.empty(0), se=np.empty(0),
            lower=np.empty(0), upper=np.empty(0), level=args.level,
            effect=None, data=data, inst=inst, min_den=None, events=0,
            notes=["NoEvents: no cause-1 events in the dataset; "
                   "returning the null fit"],
        )
        _emit_fit(payload, args)
        return 0

    dec = iid_decomposition(trace, data, inst)
    bands = variance_bands(dec, level=args.level)

    effect = None
    if args.tau is not None:
        if args.changepoint is None:
            summary = constant_effect(b_hat, data, args.tau)
            effect = {
                "kind": "constant", "tau": summary.tau, "beta": summary.beta,
                "se": constant_effect_se(dec, summary),
            }
        else:
            summary = piecewise_effect(b_hat, data, args.changepoint, args.tau)
            effect = {
                "kind": "piecewise", "tau": summary.tau,
                "changepoint": summary.changepoint,
                "beta0": summary.beta0, "beta1": summary.beta1,
            }

    payload = _fit_payload(
        grid=b_hat.grid, b=b_hat.values, se=bands.se, lower=bands.lower,
        upper=bands.upper, level=args.level, effect=effect, data=data,
        inst=inst, min_den=trace.min_den_over_n,
        events=int(np.count_nonzero(data.status == 1)), notes=notes,
    )
    _emit_fit(payload, args)
    return 0


def _fit_payload(grid, b, se, lower, upper, level, effect, data, inst,
                 min_den, events, notes):
    return {
        "grid": [float(v) for v in grid],
        "b_hat": [float(v) for v in b],
        "se": [float(v) for v in se],
        "ci_lower": [float(v) for v in lower],
        "ci_upper": [float(v) for v in upper],
        "exp_b": [float(v) for v in np.exp(np.asarray(b))],
        "level": float(level),
        "effect": effect,
        "diagnostics": {
            "n": data.n,
            "events": events,
            "censoring_rate": data.censoring_rate,
            "min_den_over_n": min_den,
            "instrument_model": inst.spec.kind,
        },
        "notes": notes,
        "version": __version__,
    }


def _emit_fit(payload, args):
    if args.format == "json":
        _write_output(_json_dump(payload), args.out)
        return
    rows = zip(payload["grid"], payload["b_hat"], payload["se"],
               payload["ci_lower"], payload["ci_upper"], payload["exp_b"])
    out = args.out
    fh = sys.stdout if out is None else open(out, "w", newline="")
    try:
        writer = csv.writer(fh)
        writer.writerow(["time", "b_hat", "se", "ci_lower", "ci_upper",
                         "exp_b"])
        for row in rows:
            writer.writerow([repr(float(v)) for v in row])
    finally:
        if out is not None:
            fh.close()


def _parse_sup_window(raw):
    parts = raw.split(",")
    if len(parts) != 2:
        raise ConfigError("--sup-window must be LO,HI")
    try:
        lo, hi = float(parts[0]), float(parts[1])
    except ValueError:
        raise ConfigError("--sup-window must be two numbers LO,HI") from None
    if not lo < hi:
        raise ConfigError("--sup-window must satisfy LO < HI")
    return lo, hi


def _cmd_test(args):
    if args.draws < 1:
        raise ConfigError("--draws must be at least 1")
    if not 0.0 < args.level < 1.0:
        raise ConfigError("--level must be strictly between 0 and 1")
    seed = _resolve_seed(args.seed)
    data, inst, b_hat, trace, dec = _fit_pipeline(args)

    kind = args.test_kind
    if kind == "causal-null":
        report = test_causal_null(b_hat, dec, m_draws=args.draws, seed=seed,
                                  tau=args.tau)
    elif kind == "constant":
        if args.tau is None:
            raise ConfigError("--test constant requires --tau")
        summary = constant_effect(b_hat, data, args.tau)
        report = test_constant_effect(b_hat, summary, dec,
                                      m_draws=args.draws, seed=seed)
    elif kind == "piecewise":
        if args.tau is None or args.changepoint is None:
            raise ConfigError(
                "--test piecewise requires --tau and --changepoint"
            )
        summary = piecewise_effect(b_hat, data, args.changepoint, args.tau)
        window = (_parse_sup_window(args.sup_window)
                  if args.sup_window is not None else None)
        report = test_piecewise_gof(b_hat, summary, dec, m_draws=args.draws,
                                    seed=seed, sup_window=window)
    else:
        report = competing_risk_test(data, b_hat, dec, m_draws=args.draws,
                                     seed=seed)

    alpha = 1.0 - args.level
    payload = {
        "test": report.kind,
        "statistic": report.statistic,
        "p_value": report.p_value,
        "draws": report.m_draws,
        "seed": report.seed,
        "level": args.level,
        "reject": bool(report.p_value < alpha),
        "process": {
            "grid": [float(v) for v in report.process.grid],
            "values": [float(v) for v in report.process.values],
        },
        "version": __version__,
    }
    _write_output(_json_dump(payload), args.out)
    return 0


def _load_config(raw_name):
    """A config is a JSON file path or the name of a packaged study."""
    if os.path.exists(raw_name):
        with open(raw_name) as fh:
            try:
                return json.load(fh)
            except json.JSONDecodeError as err:
                raise ConfigError(f"{raw_name}: invalid JSON ({err})") from None
    base = raw_name[:-5] if raw_name.endswith(".json") else raw_name
    pkg = resources.files("scsm") / "configs" / f"{base}.json"
    if pkg.is_file():
        return json.loads(pkg.read_text())
    available = sorted(
        p.name[:-5] for p in (resources.files("scsm") / "configs").iterdir()
        if p.name.endswith(".json")
    )
    raise ConfigError(
        f"no such config file or packaged config: {raw_name!r} "
        f"(packaged: {', '.join(available)})"
    )


def _cmd_simulate(args):
    if args.jobs < 1:
        raise ConfigError("--jobs must be a positive integer")
    raw = _load_config(args.config)
    if not isinstance(raw, dict):
        raise ConfigError("the configuration must be a JSON object")
    config_seed = raw.get("seed")
    if config_seed is not None and not isinstance(config_seed, int):
        raise ConfigError("config field 'seed' must be an integer")
    cfg = SimConfig.from_dict(raw)
    seed = _resolve_seed(args.seed, config_seed)
    if seed != cfg.seed:
        cfg = dataclasses.replace(cfg, seed=seed)

    report = run_study(cfg, jobs=args.jobs)
    text = report.to_json()
    if args.out is None:
        sys.stdout.write(text)
    else:
        with open(args.out, "w") as fh:
            fh.write(text)
        if not args.quiet:
            sys.stdout.write(report.render_table())
    return 0


if __name__ == "__main__":
    sys.exit(main())
