"""Command-line front end.

Subcommands: ``params``, ``simulate``, ``verify``, ``sweep``, ``selftest``.
Exit status is 0 on success, 1 when a check fails and 2 for invalid usage.
Data goes to stdout or ``--out``; diagnostics go to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import bounds, checks, experiments, sde

log = logging.getLogger("zeronoise")

# flag name -> (SimConfig field, type)
CONFIG_KEYS = {
    "gamma": ("gamma", float),
    "epsilon": ("epsilon", float),
    "a": ("a", float),
    "T": ("T", float),
    "dt": ("dt", float),
    "paths": ("n_paths", int),
    "seed": ("seed", int),
    "antithetic": ("antithetic", lambda v: str(v).strip().lower() in ("1", "true", "yes", "on")),
}
DEFAULTS = {"gamma": 0.0, "epsilon": 0.05, "a": 0.5, "T": 1.0, "dt": 1e-4, "paths": 10_000,
            "seed": 42, "antithetic": False}


class UsageError(Exception):
    pass


def read_config_file(path) -> dict:
    """Parse flat ``key = value`` lines; ``#`` starts a comment.

    A JSON experiment report is accepted too: its echoed ``config`` is used,
    so feeding a report back in reproduces the run.
    """
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        echoed = json.loads(text).get("config")
        if not isinstance(echoed, dict):
            raise UsageError(f"{path}: JSON file has no 'config' object")
        return {("paths" if k == "n_paths" else k): v for k, v in echoed.items()}
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key == "n_paths":
            key = "paths"
        if key not in CONFIG_KEYS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def effective_config(args) -> sde.SimConfig:
    values = dict(DEFAULTS)
    if args.config:
        values.update(read_config_file(args.config))
    for flag in CONFIG_KEYS:
        v = getattr(args, flag, None)
        if v is not None and v is not False:
            values[flag] = v
    kwargs = {CONFIG_KEYS[k][0]: CONFIG_KEYS[k][1](v) for k, v in values.items()}
    try:
        return sde.SimConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def _add_verbose(p):
    # also accepted after the subcommand; SUPPRESS keeps the top-level value otherwise
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)


def _add_config_flags(p, with_run=True):
    _add_verbose(p)
    p.add_argument("--config", help="flat key = value config file; flags override it")
    p.add_argument("--gamma", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--a", type=float, help="deviation exponent, eta = epsilon^a")
    p.add_argument("--T", type=float, help="horizon")
    if with_run:
        p.add_argument("--dt", type=float)
        p.add_argument("--paths", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--antithetic", action="store_true", default=None)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--calib-paths", type=int, default=64)
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=("json", "csv", "text"), default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zeronoise",
                                     description="Zero-noise selection laboratory")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("params", help="print the explicit theorem constants")
    _add_config_flags(p, with_run=False)

    p = sub.add_parser("simulate", help="run one experiment and write its report")
    _add_config_flags(p)
    p.add_argument("--dump-paths", type=int, default=0, metavar="N",
                   help="write the first N paths as per-path CSV files")
    p.add_argument("--plot-out", help="write the plot-ready quantile table here")

    p = sub.add_parser("verify", help="gamma = 0 quantitative suite + gamma > 0 property suite")
    _add_config_flags(p)
    p.add_argument("--pos-epsilon", type=float, default=0.1)
    p.add_argument("--pos-gamma", type=float, default=0.5)
    p.add_argument("--pos-a", type=float, default=0.8)
    p.add_argument("--pos-dt", type=float, default=1e-5)
    p.add_argument("--pos-paths", type=int, default=1000)

    p = sub.add_parser("sweep", help="run the experiment for a decreasing list of epsilons")
    _add_config_flags(p)
    p.add_argument("--epsilons", type=float, nargs="+", required=True)

    p = sub.add_parser("selftest", help="deterministic oracles only (no Monte Carlo)")
    _add_verbose(p)
    return parser


def _write(args, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_params(args) -> int:
    values = dict(DEFAULTS)
    if args.config:
        values.update(read_config_file(args.config))
    for k in ("gamma", "epsilon", "a", "T"):
        if getattr(args, k) is not None:
            values[k] = getattr(args, k)
    try:
        p = bounds.theorem_params(float(values["gamma"]), float(values["epsilon"]),
                                  float(values["a"]), float(values["T"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _write(args, p.to_json() + "\n" if args.format == "json" else p.to_text())
    if not p.informative:
        log.warning("explicit constants are vacuous at these parameters")
    return 0


def _timing_note(report) -> None:
    t = report.timing
    log.info("wall %.2fs, %.3g steps/s, workers=%d", t["wall_seconds"], t["steps_per_second"],
             t["workers"])


def cmd_simulate(args) -> int:
    cfg = effective_config(args)
    report = experiments.run_experiment(cfg, workers=args.workers, calib_paths=args.calib_paths)
    _timing_note(report)
    if args.format == "csv":
        res = experiments.SweepResult([experiments.report_row(cfg, report)], [report])
        _write(args, res.to_csv())
    else:
        _write(args, report.to_json())
    if args.plot_out:
        Path(args.plot_out).write_text(report.plot_csv())
    if args.dump_paths:
        stem = Path(args.out).with_suffix("") if args.out else Path("path")
        params = bounds.theorem_params(cfg.gamma, cfg.epsilon, cfg.a, cfg.T)
        for i in range(min(args.dump_paths, cfg.n_paths)):
            path = sde.simulate_path(cfg, experiments.path_delta(params), i)
            with open(f"{stem}_path{i}.csv", "w") as fh:
                path.to_csv(fh)
    return 0


def cmd_verify(args) -> int:
    cfg = effective_config(args)
    if cfg.gamma != 0:
        raise UsageError("verify runs its quantitative suite at --gamma 0")
    rep0 = experiments.run_experiment(cfg, workers=args.workers)
    _timing_note(rep0)
    found = checks.gamma0_run_checks(rep0)
    try:
        pos_cfg = sde.SimConfig(gamma=args.pos_gamma, epsilon=args.pos_epsilon, a=args.pos_a,
                                T=cfg.T, dt=args.pos_dt, n_paths=args.pos_paths, seed=cfg.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    rep1 = experiments.run_experiment(pos_cfg, workers=args.workers,
                                      calib_paths=args.calib_paths)
    _timing_note(rep1)
    found += checks.gamma_pos_run_checks(rep1)
    found += checks.mollifier_checks() + checks.comparison_checks() + checks.balance_checks()
    for c in found:
        print(c.line(), file=sys.stderr)
    results = {
        "schema_version": experiments.SCHEMA_VERSION,
        "ok": all(c.ok for c in found),
        "checks": [c.as_dict() for c in found],
        "gamma0_report": rep0.content,
        "gamma_pos_report": rep1.content,
    }
    _write(args, json.dumps(results, indent=2, allow_nan=False) + "\n")
    return 0 if results["ok"] else 1


def cmd_sweep(args) -> int:
    base = effective_config(args)
    res = experiments.sweep(base, args.epsilons, workers=args.workers,
                            calib_paths=args.calib_paths)
    _write(args, res.to_json() if args.format == "json" else res.to_csv())
    return 1 if any(r.get("error") for r in res.rows) else 0


def cmd_selftest(args) -> int:
    found = checks.selftest_checks()
    for c in found:
        print(c.line(), file=sys.stderr)
    return 0 if all(c.ok for c in found) else 1


COMMANDS = {"params": cmd_params, "simulate": cmd_simulate, "verify": cmd_verify,
            "sweep": cmd_sweep, "selftest": cmd_selftest}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"zeronoise: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
