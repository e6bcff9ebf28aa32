"""Command-line front end.

::

    slicequad run         --config FILE [--out DIR]
    slicequad sweep       --config FILE --axis KEY --values V1,V2,... [--jobs N] [--out DIR]
    slicequad check-gains --config FILE
    slicequad selftest    [PYTEST ARGS...]

Output directories default to ``--out``, then the config's ``output`` key,
then ``$SLICEQUAD_OUT/<name>``, then ``./runs/<name>``.

Exit codes
----------
0  success (for ``check-gains``: every condition holds)
1  bad invocation, unreadable or invalid config, empty sweep
2  at least one simulation diverged
3  ``check-gains`` ran but a condition fails
"""

import argparse
from concurrent.futures import ProcessPoolExecutor
import csv
import json
import math
import os
from pathlib import Path
import re
import sys

import numpy as np
import yaml

from . import lyapunov as lyap
from .config import ConfigError, ScenarioConfig, load_config
from .harness import METRIC_COLUMNS, SimDiverged, run_scenario
from .telemetry import IoError, write_log

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DIVERGED = 2
EXIT_CHECK_FAILED = 3

OUT_ENV = "SLICEQUAD_OUT"

# rows of the printed run summary
_SUMMARY_FIELDS = [("terminal_rms_e_x", "m"), ("rms_e_x", "m"), ("max_e_x", "m"),
                   ("rms_e_R", ""), ("clamp_fraction", ""), ("nes_beta", "1/s"),
                   ("nes_epsilon", ""), ("M_positive_definite", "")]


def _err(msg):
    print("slicequad: " + msg, file=sys.stderr)


def _out_dir(cfg, out):
    if out:
        return Path(out)
    if cfg.output:
        return Path(cfg.output)
    root = os.environ.get(OUT_ENV) or "runs"
    return Path(root) / cfg.name


def _cr_warning(cfg):
    g = cfg.gains
    v = lyap.check_cR_bound(g.k_R, g.k_Omega, g.c_R, cfg.psi_bound)
    if not v.passed:
        _err("warning: c_R=%g is not below the bound %.4g (binding term %s); "
             "running anyway, the condition is only sufficient" % (g.c_R, v.bound, v.binding))
    return v


def _write_run(res, cfg, out):
    out.mkdir(parents=True, exist_ok=True)
    write_log(res.log, out / "telemetry.csv")
    with open(out / "diagnostics.json", "w", encoding="utf-8") as fh:
        json.dump(res.report.to_dict(), fh, indent=2, allow_nan=True)
        fh.write("\n")
    with open(out / "config.yaml", "w", encoding="utf-8") as fh:
        yaml.safe_dump(cfg.to_dict(), fh, sort_keys=False)
    with open(out / "metrics.csv", "w", encoding="ascii", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(METRIC_COLUMNS)
        w.writerow(_metric_values(res.metrics))


def _metric_values(metrics):
    row = metrics.to_row()
    return [row[c] for c in METRIC_COLUMNS]


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "yes" if v else "no"
    return "%.4g" % v


def _summary(name, metrics):
    lines = ["%s" % name]
    for key, unit in _SUMMARY_FIELDS:
        lines.append("  %-22s %12s %s" % (key, _fmt(getattr(metrics, key)), unit))
    lines.append("  %-22s %s" % ("m_hat", " ".join("%.4g" % x for x in metrics.m_hat)))
    lines.append("  %-22s %s" % ("J_hat", " ".join("%.4g" % x for x in metrics.J_hat)))
    return "\n".join(lines)


# -- run ----------------------------------------------------------------------

def cmd_run(config, outdir=None):
    try:
        cfg = load_config(config)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    _cr_warning(cfg)
    out = _out_dir(cfg, outdir)
    try:
        res = run_scenario(cfg, with_report=True)
    except SimDiverged as exc:
        _err("simulation diverged: %s" % exc)
        if exc.log is not None and len(exc.log):
            try:
                out.mkdir(parents=True, exist_ok=True)
                write_log(exc.log, out / "telemetry.csv")
            except (OSError, IoError) as werr:
                _err(str(werr))
        return EXIT_DIVERGED
    try:
        _write_run(res, cfg, out)
    except (OSError, IoError) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    print(_summary(cfg.name, res.metrics))
    print("wrote %s" % out)
    return EXIT_OK


# -- sweep --------------------------------------------------------------------

def _parse_values(text):
    vals = []
    for tok in (text or "").split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            vals.append(float(tok))
        except ValueError:
            raise ConfigError("sweep value %r is not a number" % tok) from None
    return vals


def _slug(axis, value):
    return re.sub(r"[^A-Za-z0-9_.=-]", "_", "%s=%s" % (axis, repr(value)))


def _sweep_child(job):
    source, value, out = job
    cfg = ScenarioConfig.from_dict(source)
    try:
        res = run_scenario(cfg, with_report=True)
    except SimDiverged as exc:
        return value, "diverged: %s" % exc, None
    _write_run(res, cfg, Path(out))
    return value, "ok", _metric_values(res.metrics)


def cmd_sweep(config, axis, values, jobs=1, outdir=None):
    try:
        base = load_config(config)
        vals = _parse_values(values)
        if not vals:
            raise ConfigError("the sweep needs at least one value")
        cfgs = [base.with_value(axis, v) for v in vals]
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    _cr_warning(base)
    root = _out_dir(base, outdir)
    root.mkdir(parents=True, exist_ok=True)
    work = [(c.to_dict(), v, str(root / _slug(axis, v))) for c, v in zip(cfgs, vals)]
    jobs = max(1, int(jobs or 1))
    if jobs == 1:
        results = [_sweep_child(w) for w in work]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_sweep_child, work))

    nan_row = [math.nan] * len(METRIC_COLUMNS)
    with open(root / "summary.csv", "w", encoding="ascii", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["axis", "value", "status"] + METRIC_COLUMNS)
        for value, status, row in results:
            w.writerow([axis, repr(value), status] + (row if row is not None else nan_row))
    failed = [v for v, s, _ in results if s != "ok"]
    for value, status, _ in results:
        print("%s=%s  %s" % (axis, repr(value), status))
    print("wrote %s" % (root / "summary.csv"))
    return EXIT_DIVERGED if failed else EXIT_OK


# -- check-gains ------------------------------------------------------------

def gain_report(cfg, bounds):
    """Evaluate the gain conditions for ``cfg`` under the given bound inputs.

    Returns ``(passed, lines)``.
    """
    g = cfg.gains
    cr = lyap.check_cR_bound(g.k_R, g.k_Omega, g.c_R, cfg.psi_bound)
    P = lyap.lyapunov_matrices(g)
    asm = lyap.assemble_M(g.k_R, g.k_Omega, g.c_R, P, g.Q, cfg.vehicle.m, g.m_max,
                          bounds["eps_u"], bounds["eps_c"])
    xi_ok = asm.Xi < asm.Xi_bound
    lines = [
        "c_R bound    %s  c_R=%g < %.6g (margin %.4g, binding %s)"
        % ("pass" if cr.passed else "FAIL", g.c_R, cr.bound, cr.margin, cr.binding),
        "coupling     %s  Xi=%.6g vs bound %.6g (eps_u=%.4g, eps_c=%.4g)"
        % ("pass" if xi_ok else "FAIL", asm.Xi, asm.Xi_bound, bounds["eps_u"], bounds["eps_c"]),
        "Schur        %s" % ("pass" if asm.schur_verdict else "FAIL"),
        "eigenvalues  %s  %s" % ("pass" if asm.eig_verdict else "FAIL",
                                  " ".join("%.4g" % e for e in asm.eigenvalues)),
    ]
    if asm.schur_verdict != asm.eig_verdict:
        lines.append("note: Schur and eigenvalue verdicts disagree")
    return cr.passed and xi_ok and asm.schur_verdict and asm.eig_verdict, lines


def cmd_check_gains(config):
    try:
        cfg = load_config(config)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    if cfg.bounds == "measure":
        print("bounds: measured from a %.3g s run of %s" % (cfg.duration, cfg.name))
        try:
            bounds = run_scenario(cfg, with_report=True).report.bound_inputs
        except SimDiverged as exc:
            _err("cannot measure bounds, simulation diverged: %s" % exc)
            return EXIT_DIVERGED
    else:
        bounds = cfg.bounds
    passed, lines = gain_report(cfg, bounds)
    print("\n".join(lines))
    return EXIT_OK if passed else EXIT_CHECK_FAILED


# -- selftest -----------------------------------------------------------------

def _tests_dir():
    here = Path(__file__).resolve()
    for parent in here.parents:
        cand = parent / "tests"
        if (cand / "test_acceptance.py").exists():
            return cand
    return None


def cmd_selftest(extra=()):
    try:
        import pytest
    except ImportError:
        _err("selftest needs pytest (pip install slicequad[test])")
        return EXIT_CONFIG
    tests = _tests_dir()
    if tests is None:
        _err("test suite not found next to the package (selftest needs a source checkout)")
        return EXIT_CONFIG
    code = pytest.main([str(tests), "-q", "-s"] + list(extra))
    return EXIT_OK if code == 0 else int(code)


# -- entry point --------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="slicequad", description=__doc__.split("\n\n")[0],
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate one scenario")
    r.add_argument("--config", required=True)
    r.add_argument("--out")

    s = sub.add_parser("sweep", help="simulate one scenario over a list of values of one key")
    s.add_argument("--config", required=True)
    s.add_argument("--axis", required=True, help="dotted config key, e.g. gains.k_R")
    s.add_argument("--values", required=True, help="comma-separated numbers")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out")

    c = sub.add_parser("check-gains", help="evaluate the gain conditions for a config")
    c.add_argument("--config", required=True)

    t = sub.add_parser("selftest", help="run the test suite, acceptance scenarios included")
    t.add_argument("pytest_args", nargs=argparse.REMAINDER)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if args.command == "run":
        return cmd_run(args.config, args.out)
    if args.command == "sweep":
        return cmd_sweep(args.config, args.axis, args.values, args.jobs, args.out)
    if args.command == "check-gains":
        return cmd_check_gains(args.config)
    return cmd_selftest(args.pytest_args)


if __name__ == "__main__":
    sys.exit(main())
