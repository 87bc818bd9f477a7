"""Command-line front end.

Every command writes one CSV table. The table is preceded by ``#`` lines
holding the run manifest (command, fully resolved options, seed, version),
so a table can always be regenerated from its own header. Options come from,
in increasing priority: command defaults, ``--preset``, ``--config`` (flat
``key = value`` file using the long option names), explicit flags.

Exit codes: 0 success / verification passed, 1 verification failed,
2 usage or config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
import time

import numpy as np

from . import __version__, lemmas, theory
from .errors import BatchMNError, DomainError, SingularGram
from .estimators import EstimatorSpec
from .model import BetaMode, make_params
from .montecarlo import SweepConfig, row_fields, sweep, tune_ridge
from .presets import PRESETS

log = logging.getLogger("batchmn")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class ConfigError(Exception):
    pass


# --- value parsing --------------------------------------------------------


def parse_grid(text: str, kind=float) -> list:
    """Comma-separated values; each item may be ``start:stop:step`` (inclusive)."""
    out = []
    for item in str(text).split(","):
        item = item.strip()
        if not item:
            continue
        if ":" in item:
            parts = item.split(":")
            if len(parts) != 3:
                raise ValueError(f"range {item!r} must be start:stop:step")
            start, stop, step = (float(v) for v in parts)
            if step <= 0 or stop < start:
                raise ValueError(f"bad range {item!r}")
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            vals = [round(start + i * step, 12) for i in range(count)]
        else:
            vals = [float(item)]
        for v in vals:
            if kind is int:
                if v != int(v):
                    raise ValueError(f"{v} is not an integer")
                v = int(v)
            out.append(v)
    if not out:
        raise ValueError("grid is empty")
    return out


def parse_bool(text) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_threads(text):
    if str(text).strip().lower() == "auto":
        return "auto"
    v = int(text)
    if v < 1:
        raise ValueError("threads must be >= 1")
    return v


def parse_seed(text) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return v


def parse_estimators(text):
    return [EstimatorSpec.parse(t) for t in str(text).split(",") if t.strip()]


def positive_int(text):
    v = int(text)
    if v < 1:
        raise ValueError("must be a positive integer")
    return v


def _float_grid(t):
    return parse_grid(t, float)


def _int_grid(t):
    return parse_grid(t, int)


COMMON = {
    "seed": (parse_seed, "0"),
    "trials": (positive_int, None),
    "threads": (parse_threads, "1"),
}

OPTIONS = {
    "bounds": {
        "gamma-grid": (_float_grid, "1.1:4:0.1"),
        "xi-grid": (_float_grid, "0.8"),
        "b-grid": (_int_grid, "1,2,4,10"),
    },
    "opt-batch": {
        "gamma-grid": (_float_grid, "1.1:4:0.1"),
        "xi-grid": (_float_grid, "0.7,0.8,0.9"),
        "family": (str, "bmn"),
        "n": (positive_int, "400"),
        "divisors-only": (parse_bool, "true"),
    },
    "risk-curve": {
        "estimators": (parse_estimators, "mn,bmn:2"),
        "gamma-grid": (_float_grid, "1.5,2,3"),
        "xi-grid": (_float_grid, "0.8"),
        "b-grid": (_int_grid, "1"),
        "n": (positive_int, "400"),
        "n-rule": (str, "fixed"),
        "r": (float, "1"),
        "beta-mode": (BetaMode, "uniform"),
        "with-theory": (parse_bool, "false"),
    },
    "verify": {
        "p": (positive_int, "2000"),
        "p-list": (_int_grid, "250,500,1000,2000,4000"),
        "b": (positive_int, None),
        "delta": (float, "0.7"),
        "alpha": (float, "0.5"),
        "xi": (float, None),
        "r": (float, "1"),
        "method": (str, "direct"),
        "tolerance": (float, None),
    },
    "tune-ridge": {
        "n": (positive_int, "400"),
        "gamma": (float, "1.5"),
        "xi": (float, "0.5"),
        "r": (float, "1"),
        "beta-mode": (BetaMode, "uniform"),
    },
}

# command-specific default trial counts
DEFAULT_TRIALS = {"risk-curve": "200", "tune-ridge": "200", "verify": None, "bounds": "1", "opt-batch": "1"}
VERIFY_DEFAULTS = {
    "lemma1": {"b": "3", "xi": "0.8", "trials": "2000", "tolerance": "0.05"},
    "qcov": {"b": "1", "xi": "0.5", "trials": "100000", "tolerance": None},
    "convergence": {"b": "1", "xi": "0.8", "trials": "200", "tolerance": "0.1"},
}
QCOV_TOL = {"diag": 0.02, "offdiag": 0.03}


def read_config_file(path) -> dict:
    """Parse a flat ``key = value`` file. ``#`` starts a comment."""
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc}") from exc
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[(key.replace("_", "-"), lineno)] = value
    return out


def resolve_options(command: str, args: argparse.Namespace, extra_defaults=None) -> dict:
    """Merge defaults < preset < config file < flags and convert every value."""
    table = {**COMMON, **OPTIONS[command]}
    raw = {k: (d, "default") for k, (_, d) in table.items()}
    raw["trials"] = (DEFAULT_TRIALS.get(command), "default")
    for k, v in (extra_defaults or {}).items():
        raw[k] = (v, "default")
    if args.preset:
        if args.preset not in PRESETS:
            raise ConfigError(f"unknown preset {args.preset!r}; choose from {', '.join(PRESETS)}")
        preset = PRESETS[args.preset]
        if preset["command"] != command:
            raise ConfigError(f"preset {args.preset!r} belongs to command {preset['command']!r}")
        for k, v in preset.items():
            if k != "command":
                raw[k] = (v, f"preset {args.preset}")
    if args.config:
        for (k, lineno), v in read_config_file(args.config).items():
            if k not in table:
                raise ConfigError(f"{args.config}:{lineno}: unknown key {k!r} for {command}")
            raw[k] = (v, f"{args.config}:{lineno}")
    for k in table:
        v = getattr(args, k.replace("-", "_"), None)
        if v is not None:
            raw[k] = (v, f"--{k}")
    out = {}
    for k, (conv, _) in table.items():
        v, src = raw[k]
        if v is None:
            out[k] = None
            continue
        try:
            out[k] = conv(v)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{src}: invalid value {v!r} for '{k}': {exc}") from exc
    return out


# --- output ---------------------------------------------------------------


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def _manifest_value(v):
    if isinstance(v, list):
        return [_manifest_value(x) for x in v]
    if isinstance(v, EstimatorSpec):
        return v.label
    if isinstance(v, BetaMode):
        return v.value
    return v


def render_csv(command: str, options: dict, fields, rows) -> str:
    buf = io.StringIO()
    # threads is excluded: it never changes results
    cfg = {k: _manifest_value(v) for k, v in sorted(options.items()) if k != "threads"}
    buf.write(f"# command: {command}\n")
    buf.write(f"# version: batchmn {__version__}\n")
    buf.write(f"# seed: {options.get('seed')}\n")
    buf.write(f"# config: {json.dumps(cfg, sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for row in rows:
        w.writerow([fmt(row.get(f)) for f in fields])
    return buf.getvalue()


def write_output(text: str, out: str | None):
    """Write atomically: temp file in the target directory, then rename."""
    if out is None or out == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    d = os.path.dirname(os.path.abspath(out))
    fd, tmp = tempfile.mkstemp(prefix=".batchmn-", suffix=".csv", dir=d)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, out)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --- commands -------------------------------------------------------------


def cmd_bounds(opts):
    rows = []
    for gamma in opts["gamma-grid"]:
        for xi in opts["xi-grid"]:
            for b in opts["b-grid"]:
                row = {"gamma": gamma, "xi": xi, "b": b}
                errors = []
                try:
                    ub = theory.bmn_upper_bound(b, gamma, xi)
                    row.update(bmn_ub_bias=ub.bias_term, bmn_ub_noise=ub.noise_term, bmn_ub=ub.total,
                               bmn_lb=theory.bmn_lower_bound(b, gamma, xi).total,
                               sbmn_ub=theory.sbmn_upper_bound(b, gamma, xi).total,
                               sbmn_lb=theory.sbmn_lower_bound(b, gamma, xi).total)
                except DomainError as exc:
                    errors.append(str(exc))
                try:
                    row["mn_risk"] = theory.mn_asymptotic_risk(gamma, xi)
                except DomainError as exc:
                    errors.append(f"mn_risk: {exc}")
                row["error"] = "; ".join(errors)
                rows.append(row)
    fields = ("gamma", "xi", "b", "bmn_ub_bias", "bmn_ub_noise", "bmn_ub", "bmn_lb", "sbmn_ub", "sbmn_lb",
              "mn_risk", "error")
    return fields, rows, EXIT_OK


def cmd_opt_batch(opts):
    family = opts["family"].replace("-", "_")
    if family not in ("bmn", "sbmn", "server_avg"):
        raise ConfigError(f"family must be bmn, sbmn or server_avg, got {opts['family']!r}")
    rows = []
    for gamma in opts["gamma-grid"]:
        for xi in opts["xi-grid"]:
            row = {"gamma": gamma, "xi": xi, "error": ""}
            try:
                if family == "bmn":
                    choice = theory.bmn_optimal_batch(gamma, xi)
                    row["b_opt"] = str(choice)
                    row["risk_bound"] = (theory.bmn_upper_bound_limit(gamma, xi).total if choice.is_infinite
                                         else theory.bmn_upper_bound(choice.value, gamma, xi).total)
                elif family == "sbmn":
                    choice = theory.sbmn_optimal_batch(gamma, xi)
                    row["b_opt"] = str(choice)
                    row["risk_bound"] = (theory.sbmn_upper_bound_limit(gamma, xi).total if choice.is_infinite
                                         else theory.sbmn_upper_bound(choice.value, gamma, xi).total)
                else:
                    n = opts["n"]
                    b = theory.server_avg_optimal_batch(gamma, xi, n, divisors_only=opts["divisors-only"])
                    row["b_opt"] = b
                    row["risk_bound"] = theory.server_avg_asymptotic_risk(gamma, xi, gamma * n / b)
            except DomainError as exc:
                row["error"] = str(exc)
            rows.append(row)
    return ("gamma", "xi", "b_opt", "risk_bound", "error"), rows, EXIT_OK


def sweep_config_from(opts) -> SweepConfig:
    try:
        return SweepConfig(
            estimators=opts["estimators"], gamma_grid=opts["gamma-grid"], xi_grid=opts["xi-grid"],
            b_grid=opts["b-grid"], n=opts["n"], n_rule=opts["n-rule"], trials=opts["trials"],
            seed=opts["seed"], beta_mode=opts["beta-mode"], r=opts["r"], with_theory=opts["with-theory"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_risk_curve(opts):
    config = sweep_config_from(opts)
    rows = sweep(config, threads=opts["threads"])
    numeric = any(r["error"].startswith("SingularGram") for r in rows)
    return row_fields(config), rows, EXIT_NUMERIC if numeric else EXIT_OK


def cmd_tune_ridge(opts):
    try:
        params = make_params(opts["n"], opts["gamma"], opts["xi"], opts["r"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    lam, est = tune_ridge(params, opts["beta-mode"], opts["trials"], opts["seed"], opts["threads"])
    row = {"n": params.n, "p": params.p, "gamma": opts["gamma"], "xi": opts["xi"], "lambda": lam,
           "mean": est.mean, "stderr": est.stderr, "trials": est.trials, "seed": opts["seed"]}
    return ("n", "p", "gamma", "xi", "lambda", "mean", "stderr", "trials", "seed"), [row], EXIT_OK


def _sigma(xi, r):
    if not 0 < xi <= 1:
        raise ConfigError(f"xi must lie in (0, 1], got {xi}")
    return 0.0 if xi == 1 else r * math.sqrt((1 - xi) / xi)


def cmd_verify(opts, which):
    tol = opts["tolerance"]
    r, b, trials, seed = opts["r"], opts["b"], opts["trials"], opts["seed"]
    sigma = _sigma(opts["xi"], r)
    rows = []

    def add(quantity, empirical, predicted, rel_err, tolerance):
        rows.append({"check": which, "quantity": quantity, "empirical": empirical, "predicted": predicted,
                     "rel_err": rel_err, "tolerance": tolerance, "pass": rel_err <= tolerance})

    try:
        if which == "lemma1":
            s = lemmas.ProjectionScenario(p=opts["p"], b=b, delta=opts["delta"], alpha=opts["alpha"], r=r,
                                          sigma=sigma, trials=trials, seed=seed)
            res = lemmas.check_noisy_projection(s, method=opts["method"])
            add("p*E[stat]", res.empirical, res.predicted, res.rel_err, tol)
        elif which == "qcov":
            res = lemmas.check_q_covariance(lemmas.ModifiedNoiseScenario(b=b, r=r, sigma=sigma, trials=trials,
                                                                         seed=seed))
            add("E[Q_j^2]", res.diag.empirical, res.diag.predicted, res.diag.rel_err,
                QCOV_TOL["diag"] if tol is None else tol)
            add("E[Q_iQ_j]", res.offdiag.empirical, res.offdiag.predicted, res.offdiag.rel_err,
                QCOV_TOL["offdiag"] if tol is None else tol)
        else:
            table = lemmas.check_modified_convergence(opts["p-list"], b=b, r=r, sigma=sigma, trials=trials,
                                                      seed=seed)
            prev = math.inf
            for row in table:
                # must decrease in p; the final p must also be under the tolerance
                ok = row.coef_rel_err < prev
                prev = row.coef_rel_err
                rows.append({"check": which, "quantity": f"||pA-y||/||y|| @ p={row.p}", "empirical":
                             row.coef_rel_err, "predicted": 0.0, "rel_err": row.coef_rel_err,
                             "tolerance": tol if row is table[-1] else None,
                             "pass": ok and (row is not table[-1] or row.coef_rel_err <= tol)})
                rows.append({"check": which, "quantity": f"|pY'-||y||^2|/||y||^2 @ p={row.p}",
                             "empirical": row.yprime_rel_err, "predicted": 0.0, "rel_err": row.yprime_rel_err,
                             "tolerance": None, "pass": None})
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    passed = all(row["pass"] is not False for row in rows)
    fields = ("check", "quantity", "empirical", "predicted", "rel_err", "tolerance", "pass")
    return fields, rows, EXIT_OK if passed else EXIT_FAIL


# --- argument parsing -----------------------------------------------------


def _add_common(p):
    g = p.add_argument_group("common")
    g.add_argument("--seed", help="base seed (unsigned 64-bit)")
    g.add_argument("--trials", help="Monte Carlo trials")
    g.add_argument("--out", help="output CSV path (default: stdout)")
    g.add_argument("--threads", help="worker threads, integer or 'auto'")
    g.add_argument("--preset", help="named scenario: " + ", ".join(PRESETS))
    g.add_argument("--config", help="flat key = value config file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="batchmn", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "bounds": "asymptotic risk bounds over a (gamma, xi, b) grid",
        "opt-batch": "optimal batch size over a (gamma, xi) grid",
        "risk-curve": "Monte Carlo risk sweep",
        "verify": "Monte Carlo checks of the supporting lemmas",
        "tune-ridge": "tune the ridge penalty by Monte Carlo",
    }
    for name, help_ in helps.items():
        p = sub.add_parser(name, help=help_)
        if name == "verify":
            p.add_argument("which", choices=("lemma1", "qcov", "convergence"))
        for key in OPTIONS[name]:
            p.add_argument(f"--{key}", dest=key.replace("-", "_"))
        _add_common(p)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    command = args.command
    t0 = time.perf_counter()
    try:
        extra = VERIFY_DEFAULTS[args.which] if command == "verify" else None
        opts = resolve_options(command, args, extra)
        if command == "bounds":
            fields, rows, code = cmd_bounds(opts)
        elif command == "opt-batch":
            fields, rows, code = cmd_opt_batch(opts)
        elif command == "risk-curve":
            fields, rows, code = cmd_risk_curve(opts)
        elif command == "tune-ridge":
            fields, rows, code = cmd_tune_ridge(opts)
        else:
            opts["which"] = args.which
            fields, rows, code = cmd_verify(opts, args.which)
    except ConfigError as exc:
        print(f"batchmn {command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SingularGram, BatchMNError, ArithmeticError) as exc:
        print(f"batchmn {command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except KeyboardInterrupt:
        print(f"batchmn {command}: interrupted, no output written", file=sys.stderr)
        return 130
    write_output(render_csv(command, opts, fields, rows), args.out)
    elapsed = time.perf_counter() - t0
    log.info("%s finished in %.2fs with threads=%s", command, elapsed, opts["threads"])
    if args.out and args.out != "-":
        run_info = {"command": command, "wall_clock_seconds": round(elapsed, 3), "threads": opts["threads"]}
        with open(args.out + ".run.json", "w", encoding="utf-8") as fh:
            json.dump(run_info, fh, indent=2)
            fh.write("\n")
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
