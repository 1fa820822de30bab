"""Command-line interface: experiment runner over the config format.

Every command is a pure function of (config file, seed): reports and
CSV artifacts are byte-identical across reruns.  Exit codes: 0 for
success (and passing verdicts), 1 for a failing or undecided verdict,
2 for usage or config errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import warnings

import numpy as np

from .config import Config, ConfigError
from .discrete import (ancestral_trajectories, forward_trajectories,
                       sampling_duality_check)
from .dual_chain import (_run_chain, moment_duality_check, recurrence_probe,
                         stationary_estimate)
from .limit_sde import simulate_batch
from .mc import McEstimate
from .simplex import LambdaDirac, as_atoms
from .threshold import fixation_probability, kappa_star_dirac, kappa_star_mc

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

_MAX_EXACT_POP = 6
_MAX_EXACT_SUPPORT = 3


def _py(obj):
    """Recursively convert numpy scalars/arrays for JSON reports."""
    if isinstance(obj, dict):
        return {str(k): _py(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_py(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_py(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _estimate_dict(est: McEstimate) -> dict:
    return {"mean": est.mean, "std_error": est.std_error,
            "replicates": est.replicates,
            "interval": list(est.interval)}


# ---------------------------------------------------------------------------
# command handlers: (config, rng) -> (exit code, results, diagnostics, tables)
# tables map file stem -> (header columns, row iterable)


def _cmd_forward(cfg: Config, rng: np.random.Generator):
    params = cfg.discrete_params()
    run = cfg.run
    traj = forward_trajectories(params, run.x0, run.generations,
                                run.replicates, rng)
    finals = traj[:, -1]
    est = McEstimate.from_samples(finals)
    results = {"final_mean": _estimate_dict(est),
               "fixed_fraction": float((finals == 1.0).mean()),
               "lost_fraction": float((finals == 0.0).mean())}
    diagnostics = {"pop_size": params.pop_size, "generations": run.generations,
                   "replicates": run.replicates, "x0": run.x0}
    rows = [(r, g, traj[r, g]) for r in range(traj.shape[0])
            for g in range(traj.shape[1])]
    return EXIT_OK, results, diagnostics, {
        "forward": (("replicate", "generation", "frequency"), rows)}


def _cmd_ancestry(cfg: Config, rng: np.random.Generator):
    params = cfg.discrete_params()
    run = cfg.run
    traj = ancestral_trajectories(params, run.sample_size, run.generations,
                                  run.replicates, rng)
    finals = traj[:, -1]
    est = McEstimate.from_samples(finals.astype(float))
    results = {"final_mean": _estimate_dict(est),
               "single_ancestor_fraction": float((finals == 1).mean())}
    diagnostics = {"pop_size": params.pop_size, "generations": run.generations,
                   "replicates": run.replicates, "sample_size": run.sample_size}
    rows = [(r, g, int(traj[r, g])) for r in range(traj.shape[0])
            for g in range(traj.shape[1])]
    return EXIT_OK, results, diagnostics, {
        "ancestry": (("replicate", "generation", "lineages"), rows)}


def _duality_mode(params) -> str:
    if params.pop_size > _MAX_EXACT_POP:
        return "mc"
    if params.extreme_prob > 0.0:
        atoms = as_atoms(params.xi_hat)
        if atoms is None or any(len(z) > _MAX_EXACT_SUPPORT for _, z in atoms):
            return "mc"
    return "exact"


def _cmd_duality_discrete(cfg: Config, rng: np.random.Generator):
    params = cfg.discrete_params()
    run = cfg.run
    mode = _duality_mode(params)
    report = sampling_duality_check(params, run.x, run.sample_size,
                                    run.generations, mode=mode,
                                    replicates=run.replicates, rng=rng)
    results = {"verdict": report.verdict, "mode": report.mode,
               "lhs": report.lhs, "rhs": report.rhs, "gap": report.gap,
               "tolerance": report.tolerance}
    diagnostics = {"lhs_se": report.lhs_se, "rhs_se": report.rhs_se,
                   "x": run.x, "sample_size": run.sample_size,
                   "generations": run.generations}
    return (EXIT_OK if report.passed else EXIT_FAIL), results, diagnostics, {}


def _cmd_sde(cfg: Config, rng: np.random.Generator):
    params = cfg.limit_params()
    run = cfg.run
    finals, diag = simulate_batch(params, run.x0, run.time, run.dt,
                                  run.replicates, rng, return_diagnostics=True)
    est = McEstimate.from_samples(finals)
    results = {"final_mean": _estimate_dict(est),
               "near_zero_fraction": float((finals < 0.01).mean()),
               "near_one_fraction": float((finals > 0.99).mean())}
    diagnostics = dict(diag)
    diagnostics.update({"time": run.time, "dt": run.dt,
                        "replicates": run.replicates, "x0": run.x0})
    rows = [(r, finals[r]) for r in range(finals.size)]
    return EXIT_OK, results, diagnostics, {
        "sde_finals": (("replicate", "final_frequency"), rows)}


def _cmd_dual_ctmc(cfg: Config, rng: np.random.Generator):
    params = cfg.limit_params()
    run = cfg.run
    rows = []
    finals = np.empty(run.replicates)
    escapes = 0
    for r in range(run.replicates):
        final, esc, _, returns, _ = _run_chain(params, run.n0, run.time, rng,
                                               cap=run.cap)
        finals[r] = final
        escapes += esc
        rows.append((r, final, returns, int(esc)))
    est = McEstimate.from_samples(finals)
    results = {"final_mean": _estimate_dict(est),
               "escape_fraction": escapes / run.replicates}
    diagnostics = {"n0": run.n0, "time": run.time, "cap": run.cap,
                   "replicates": run.replicates}
    return EXIT_OK, results, diagnostics, {
        "dual_ctmc": (("replicate", "final_state", "returns_to_one",
                       "escaped"), rows)}


def _cmd_duality_limit(cfg: Config, rng: np.random.Generator):
    params = cfg.limit_params()
    run = cfg.run
    report = moment_duality_check(params, run.x, run.sample_size, run.time,
                                  run.dt, run.replicates, rng)
    results = {"verdict": report.verdict,
               "lhs": _estimate_dict(report.lhs),
               "rhs": _estimate_dict(report.rhs),
               "gap": report.gap, "tolerance": report.tolerance}
    diagnostics = {"combined_se": report.combined_se, "x": run.x,
                   "order": run.sample_size, "time": run.time, "dt": run.dt}
    return (EXIT_OK if report.passed else EXIT_FAIL), results, diagnostics, {}


def _cmd_kappa_star(cfg: Config, rng: np.random.Generator):
    params = cfg.limit_params()
    run = cfg.run
    if params.xi is None:
        raise ConfigError("kappa-star needs a jump measure "
                          "(model.xi.family != none)", key="model.xi.family")
    beta = params.offspring.mean_extra
    mc_diag: dict = {}
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        est = kappa_star_mc(params.xi, beta, run.replicates, rng, mc_diag)
    results = {"estimate": _estimate_dict(est), "mean_extra": beta}
    diagnostics = dict(mc_diag)
    diagnostics["warnings"] = [str(w.message) for w in caught]
    code = EXIT_OK
    if isinstance(params.xi, LambdaDirac):
        closed = kappa_star_dirac(params.xi.y, beta)
        gap = abs(est.mean - closed)
        within = gap <= 3.0 * est.std_error
        results.update({"closed_form": closed, "gap": gap,
                        "verdict": "pass" if within else "fail"})
        code = EXIT_OK if within else EXIT_FAIL
    return code, results, diagnostics, {}


def _cmd_recurrence(cfg: Config, rng: np.random.Generator):
    params = cfg.limit_params()
    run = cfg.run
    report = recurrence_probe(params, run.n0, run.time, run.cap,
                              run.replicates, rng)
    results = {"verdict": report.verdict,
               "escape_fraction": report.escape_fraction,
               "mean_returns_to_one": report.mean_returns_to_one,
               "mean_return_time": report.mean_return_time}
    diagnostics = {"n0": run.n0, "horizon": run.time, "cap": run.cap,
                   "replicates": run.replicates}
    code = EXIT_FAIL if report.verdict == "inconclusive" else EXIT_OK
    return code, results, diagnostics, {}


def _cmd_fixation(cfg: Config, rng: np.random.Generator):
    params = cfg.limit_params()
    run = cfg.run
    probe = recurrence_probe(params, run.n0, run.time, run.cap,
                             run.replicates, rng)
    diagnostics = {"regime": probe.verdict,
                   "escape_fraction": probe.escape_fraction,
                   "mean_returns_to_one": probe.mean_returns_to_one,
                   "x": run.x, "n0": run.n0, "horizon": run.time}
    if probe.verdict == "inconclusive":
        results = {"verdict": "inconclusive"}
        return EXIT_FAIL, results, diagnostics, {}
    stationary = None
    if probe.verdict == "recurrent-looking":
        if run.time <= run.burn_in:
            raise ConfigError("fixation needs run.time > run.burn_in to "
                              "average the occupation measure", key="run.time")
        stationary = stationary_estimate(params, run.n0, run.burn_in,
                                         run.time, run.replicates, rng,
                                         cap=run.cap)
    est = fixation_probability(params, run.x, probe=probe,
                               stationary=stationary)
    results = {"probability": _estimate_dict(est), "regime": probe.verdict}
    return EXIT_OK, results, diagnostics, {}


_HANDLERS = {
    "forward": _cmd_forward,
    "ancestry": _cmd_ancestry,
    "duality-discrete": _cmd_duality_discrete,
    "sde": _cmd_sde,
    "dual-ctmc": _cmd_dual_ctmc,
    "duality-limit": _cmd_duality_limit,
    "kappa-star": _cmd_kappa_star,
    "fixation": _cmd_fixation,
    "recurrence": _cmd_recurrence,
}

_COMMAND_HELP = {
    "forward": "simulate forward frequency trajectories of the finite model",
    "ancestry": "simulate backward lineage-count trajectories",
    "duality-discrete": "check the finite-model sampling duality",
    "sde": "simulate the limit jump-diffusion",
    "dual-ctmc": "simulate the dual branching-coalescing chain",
    "duality-limit": "check the limit moment duality by Monte Carlo",
    "kappa-star": "estimate the fixation threshold for the selection rate",
    "fixation": "estimate fixation probabilities through the dual chain",
    "recurrence": "probe the dual chain for recurrence vs escape",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cannings",
        description="Simulation and duality checks for two-type Cannings "
                    "models with selection and extreme reproduction.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _HANDLERS:
        p = sub.add_parser(name, help=_COMMAND_HELP[name])
        p.add_argument("--config", required=True,
                       help="path to the experiment config file")
        p.add_argument("--seed", type=int, default=None,
                       help="override run.seed")
        p.add_argument("--out", default=None,
                       help="directory for CSV/JSON artifacts "
                            "(overrides output.dir)")
        p.add_argument("--replicates", type=int, default=None,
                       help="override run.replicates")
        p.add_argument("--format", choices=("csv", "json"), default="json",
                       help="stdout format (default json report)")
    return parser


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def _report_csv(report: dict) -> str:
    rows = []

    def flatten(prefix, obj):
        if isinstance(obj, dict):
            for k in sorted(obj):
                flatten(f"{prefix}.{k}" if prefix else str(k), obj[k])
        elif isinstance(obj, list):
            rows.append((prefix, " ".join(_cell(v) for v in obj)))
        else:
            rows.append((prefix, _cell(obj)))

    flatten("", report)
    return _csv_text(("key", "value"), rows)


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        if code is None:
            return EXIT_OK
        return code if isinstance(code, int) else EXIT_USAGE
    overrides = {}
    if args.seed is not None:
        overrides["run.seed"] = str(args.seed)
    if args.replicates is not None:
        overrides["run.replicates"] = str(args.replicates)
    try:
        cfg = Config.from_file(args.config, overrides)
        rng = np.random.default_rng(cfg.run.seed)
        code, results, diagnostics, tables = _HANDLERS[args.command](cfg, rng)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = _py({"command": args.command, "config_hash": cfg.hash(),
                  "seed": cfg.run.seed, "results": results,
                  "diagnostics": diagnostics})
    report_text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    if args.format == "json":
        sys.stdout.write(report_text)
    else:
        sys.stdout.write(_report_csv(report))
    out_dir = args.out or cfg.output_dir
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "report.json"), "w",
                  encoding="utf-8", newline="\n") as fh:
            fh.write(report_text)
        for stem, (header, rows) in tables.items():
            with open(os.path.join(out_dir, f"{stem}.csv"), "w",
                      encoding="utf-8", newline="\n") as fh:
                fh.write(_csv_text(header, rows))
    return code


if __name__ == "__main__":
    sys.exit(main())
