"""Command-line interface: generate / fit / experiment / diagnose / cv.

Configuration can come from a JSON file (--config) with flags overriding
it; every subcommand resolves one seed, writes its outputs under --out
(default: <output root>/<command>, where the root is the DATAENRICH_OUT_ROOT
environment variable or "runs"), and emits a meta document describing the
run. Exit codes: 0 success, 1 usage or configuration error, 2 numerical
failure; errors print one tagged line on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import asdict, fields, replace

import numpy as np

from . import __version__, _kernels
from . import io as _io
from .diagnostics import (
    FullSpace,
    contraction_probe,
    deic_probe,
    DiagnosticsReport,
    gaussian_width_mc,
    re_probe,
    samplers_for,
)
from .errors import ConfigError, DataEnrichError, NumericalDivergence
from .model import Constraint, ConstraintSpec, residuals
from .model_selection import CvPlan, kfold_cv
from .solver import FitConfig, StepSizes, convergence_rate, default_step_sizes, fit
from .synthesis import PRESET_NAMES, SynthesisSpec, generate, preset, run_experiment

OUT_ROOT_ENV = "DATAENRICH_OUT_ROOT"

_TOP_KEYS = {"seed", "out", "threads", "synthesis", "fit", "experiment",
             "diagnose", "cv"}
_SYNTH_KEYS = {f.name for f in fields(SynthesisSpec)}
_FIT_KEYS = {"data", "max_iters", "stop_tol", "step_mode", "update_order",
             "tau", "widths", "width_constants", "mu0", "mus", "unconstrained"}
_EXP_KEYS = {"name", "reps", "iters", "update_order"}
_DIAG_KEYS = {"data", "widths", "p", "trials", "n_directions",
              "contraction_trials", "threshold"}
_CV_KEYS = {"data", "k", "scale0_grid", "scale_ind_grid", "per_group_points",
            "base_radii", "folds_seed", "max_iters", "stop_tol"}


class _Parser(argparse.ArgumentParser):
    """argparse's default usage-error exit code collides with the numeric
    failure code, so usage errors are rethrown as config errors."""

    def error(self, message):
        raise ConfigError(message)


def _check_keys(section, allowed, where):
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(
            f"unknown {where} config keys: {', '.join(sorted(unknown))}"
        )


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from e
    if not isinstance(cfg, dict):
        raise ConfigError("config document must be a JSON object")
    _check_keys(cfg, _TOP_KEYS, "top-level")
    return cfg


def _section(cfg, name, allowed):
    section = cfg.get(name, {})
    if not isinstance(section, dict):
        raise ConfigError(f"config section {name!r} must be an object")
    _check_keys(section, allowed, name)
    return section


def _resolve_out(args, cfg, command):
    out = args.out or cfg.get("out")
    if out is None:
        root = os.environ.get(OUT_ROOT_ENV, "runs")
        out = os.path.join(root, command)
    os.makedirs(out, exist_ok=True)
    return out


def _resolve_seed(args, cfg, fallback=0):
    if args.seed is not None:
        return args.seed
    if "seed" in cfg:
        return int(cfg["seed"])
    return fallback


def _resolve_threads(args, cfg):
    if args.threads is not None:
        return args.threads
    if "threads" in cfg:
        return int(cfg["threads"])
    return None


def _versions():
    return {
        "dataenrich": __version__,
        "numpy": np.__version__,
        "backend": _kernels.BACKEND,
    }


def _write_meta(out_dir, command, payload, volatile=True):
    meta = {"command": command, "versions": _versions()}
    meta.update(payload)
    if volatile:
        meta["wall_time_s"] = round(time.perf_counter() - _write_meta.t0, 3)
    _io.write_json(os.path.join(out_dir, "meta.json"), meta)


def _fit_config_from(section, args_iters=None, args_stop_tol=None,
                     args_order=None, record_truth=None):
    kwargs = {}
    if "max_iters" in section:
        kwargs["max_iters"] = int(section["max_iters"])
    if args_iters is not None:
        kwargs["max_iters"] = args_iters
    if "stop_tol" in section:
        kwargs["stop_tol"] = float(section["stop_tol"])
    if args_stop_tol is not None:
        kwargs["stop_tol"] = args_stop_tol
    if "update_order" in section:
        kwargs["update_order"] = section["update_order"]
    if args_order is not None:
        kwargs["update_order"] = args_order
    mode = section.get("step_mode", "simplified")
    kwargs["step_mode"] = mode
    if mode == "theoretical":
        kwargs["widths"] = tuple(section.get("widths", ()))
        kwargs["width_constants"] = tuple(section.get("width_constants", ()))
        kwargs["tau"] = float(section.get("tau", 1.0))
    elif mode == "manual":
        if "mu0" not in section or "mus" not in section:
            raise ConfigError("manual step mode needs mu0 and mus in the config")
        kwargs["manual_steps"] = StepSizes(section["mu0"], tuple(section["mus"]))
    return FitConfig(record_truth=record_truth, **kwargs)


def cmd_generate(args, cfg):
    synth = _section(cfg, "synthesis", _SYNTH_KEYS)
    if args.preset is not None and synth:
        raise ConfigError("give either --preset or a synthesis config section")
    if args.preset is not None:
        spec = preset(args.preset).spec
    elif synth:
        spec = SynthesisSpec(**synth)
    else:
        raise ConfigError("generate needs --preset or a synthesis config section")
    seed = _resolve_seed(args, cfg, fallback=spec.seed)
    spec = replace(spec, seed=seed)
    out = _resolve_out(args, cfg, "generate")
    instance = generate(spec)
    sigma = spec.noise_sigma if spec.noise_sigma > 0 else None
    _io.save_dataset(
        out,
        instance.dataset,
        truth=instance.truth,
        constraints=instance.constraints,
        sigma=sigma,
        seed=seed,
    )
    _write_meta(out, "generate", {"seed": seed, "spec": asdict(spec)},
                volatile=False)
    print(f"dataset written to {out} (G={spec.G}, p={spec.p}, n={spec.n})")
    return 0


def _load_for_fit(args, section):
    data_dir = args.data or section.get("data")
    if data_dir is None:
        raise ConfigError("fit needs --data pointing at a dataset directory")
    dataset, truth, constraints, manifest = _io.load_dataset(data_dir)
    if args.unconstrained or section.get("unconstrained"):
        constraints = None
    if constraints is None:
        constraints = ConstraintSpec.all_unconstrained(dataset.n_groups)
    return data_dir, dataset, truth, constraints, manifest


def cmd_fit(args, cfg):
    section = _section(cfg, "fit", _FIT_KEYS)
    data_dir, dataset, truth, constraints, _ = _load_for_fit(args, section)
    config = _fit_config_from(
        section,
        args_iters=args.iters,
        args_stop_tol=args.stop_tol,
        args_order=args.order,
        record_truth=truth,
    )
    out = _resolve_out(args, cfg, "fit")
    result = fit(dataset, constraints, config)
    _io.save_params(os.path.join(out, "params.csv"), result.estimate)
    _io.write_trace_csv(
        os.path.join(out, "trace.csv"),
        result.trace.iterations,
        result.trace.objective,
        result.trace.rel_errors,
        result.trace.weighted,
    )
    _write_meta(
        out,
        "fit",
        {
            "data": data_dir,
            "converged": result.converged,
            "iterations_run": result.iterations_run,
            "max_violation": result.max_violation,
            "final_objective": float(result.trace.objective[-1]),
            "mu0": result.steps.mu0,
        },
    )
    print(
        f"fit finished: {result.iterations_run} iterations, "
        f"final objective {result.trace.objective[-1]:.6g}, results in {out}"
    )
    return 0


def cmd_experiment(args, cfg):
    section = _section(cfg, "experiment", _EXP_KEYS)
    name = args.name or section.get("name")
    if name is None:
        raise ConfigError(f"experiment needs --name (one of {PRESET_NAMES})")
    reps = args.reps if args.reps is not None else int(section.get("reps", 10))
    iters = args.iters if args.iters is not None else section.get("iters")
    seed = _resolve_seed(args, cfg)
    threads = _resolve_threads(args, cfg)
    out = _resolve_out(args, cfg, "experiment")
    result = run_experiment(
        name,
        repetitions=reps,
        seed=seed,
        max_iters=iters,
        threads=threads,
        update_order=section.get("update_order"),
    )
    result.save(out)
    _write_meta(
        out,
        "experiment",
        {
            "seed": seed,
            "name": name,
            "repetitions": reps,
            "max_violation": result.max_violation,
            "final_weighted_error": float(result.weighted[-1]),
        },
    )
    print(
        f"experiment {name}: {reps} repetitions, final weighted error "
        f"{result.weighted[-1]:.3e}, traces in {out}"
    )
    return 0


def cmd_diagnose(args, cfg):
    section = _section(cfg, "diagnose", _DIAG_KEYS)
    trials = args.trials if args.trials is not None else int(section.get("trials", 1000))
    seed = _resolve_seed(args, cfg)
    out = _resolve_out(args, cfg, "diagnose")
    data_dir = args.data or section.get("data")
    widths_only = args.widths or bool(section.get("widths"))

    if widths_only:
        dims_raw = args.p or section.get("p") or "1,100"
        if isinstance(dims_raw, str):
            dims = [int(v) for v in dims_raw.split(",") if v.strip()]
        else:
            dims = [int(v) for v in dims_raw]
        rows = []
        for p in dims:
            est = gaussian_width_mc(FullSpace(p), n_gaussians=trials, seed=seed)
            rows.append({"p": p, "width": est.value, "std_error": est.std_error})
            print(f"FullSpace p={p}: width {est}")
        with open(os.path.join(out, "widths.csv"), "w", newline="",
                  encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=["p", "width", "std_error"])
            writer.writeheader()
            writer.writerows(rows)
        _write_meta(out, "diagnose", {"seed": seed, "trials": trials,
                                      "mode": "widths"})
        return 0

    if data_dir is None:
        raise ConfigError("diagnose needs --widths or --data DIR")
    dataset, truth, constraints, _ = _io.load_dataset(data_dir)
    if truth is None or constraints is None:
        raise ConfigError(
            "dataset probes need stored ground truth and constraints "
            "(generate writes both)"
        )
    samplers = samplers_for(truth, constraints)
    n_directions = int(section.get("n_directions", 128))
    c_trials = int(section.get("contraction_trials", min(trials, 200)))
    threshold = float(section.get("threshold", 0.05))

    ss = np.random.SeedSequence(seed)
    sub = [int(s.generate_state(1, dtype=np.uint64)[0]) for s in ss.spawn(4)]
    widths = tuple(
        gaussian_width_mc(s, n_gaussians=trials, n_directions=n_directions,
                          seed=sub[0])
        for s in samplers
    )
    kappa_sq = re_probe(dataset, samplers, trials=trials, seed=sub[1])
    deic = deic_probe(samplers[0], samplers[1:], dataset.counts, trials=trials,
                      lambda_threshold=threshold, seed=sub[2])
    noise = residuals(dataset, truth)
    if all(not np.any(v != 0) for v in noise):
        noise = None
    contraction = contraction_probe(
        dataset, samplers, default_step_sizes(dataset), noise=noise,
        trials=c_trials, seed=sub[3],
    )
    gamma = dataset.n / min(dataset.counts)
    report = DiagnosticsReport(
        widths=widths,
        re_kappa_sq=kappa_sq,
        deic=deic,
        contraction=contraction,
        gamma=gamma,
        trials=trials,
        seed=seed,
    )
    _io.write_json(os.path.join(out, "report.json"), report.to_dict())
    _write_meta(out, "diagnose", {"seed": seed, "trials": trials, "data": data_dir,
                                  "mode": "probes"})
    print(report.table())
    print(f"report written to {out}")
    return 0


def cmd_cv(args, cfg):
    section = _section(cfg, "cv", _CV_KEYS)
    data_dir = args.data or section.get("data")
    if data_dir is None:
        raise ConfigError("cv needs --data pointing at a dataset directory")
    dataset, truth, constraints, _ = _io.load_dataset(data_dir)
    if constraints is None:
        entries = [Constraint.unconstrained()]
        entries += [Constraint.l1(1.0) for _ in range(dataset.n_groups)]
        constraints = ConstraintSpec(tuple(entries))
    seed = _resolve_seed(args, cfg)
    threads = _resolve_threads(args, cfg)
    k = args.k if args.k is not None else int(section.get("k", 10))
    plan_kwargs = {"k": k, "folds_seed": int(section.get("folds_seed", seed))}
    if "scale0_grid" in section:
        plan_kwargs["scale0_grid"] = tuple(section["scale0_grid"])
    if "scale_ind_grid" in section:
        plan_kwargs["scale_ind_grid"] = tuple(section["scale_ind_grid"])
    if "per_group_points" in section:
        plan_kwargs["per_group_points"] = tuple(
            tuple(p) for p in section["per_group_points"]
        )
    if "base_radii" in section:
        plan_kwargs["base_radii"] = tuple(section["base_radii"])
    plan = CvPlan(**plan_kwargs)
    fit_cfg = FitConfig(
        max_iters=args.iters or int(section.get("max_iters", 500)),
        stop_tol=float(section.get("stop_tol", 1e-9)),
    )
    out = _resolve_out(args, cfg, "cv")
    result = kfold_cv(dataset, constraints, plan, fit_cfg, threads=threads)
    with open(os.path.join(out, "cv_table.csv"), "w", newline="",
              encoding="utf-8") as fh:
        writer = csv.DictWriter(
            fh,
            fieldnames=["scale0", "scale_ind", "radii", "mean_mse", "std_mse",
                        "best"],
        )
        writer.writeheader()
        writer.writerows(result.rows())
    _io.save_params(os.path.join(out, "params.csv"), result.refit.estimate)
    best = result.best_point
    _write_meta(
        out,
        "cv",
        {
            "data": data_dir,
            "seed": seed,
            "k": k,
            "best_index": result.best_index,
            "best_scale0": best.scale0,
            "best_scale_ind": best.scale_ind,
            "best_mean_mse": float(result.mean_mse[result.best_index]),
        },
    )
    print(
        f"cv best point: scale0={best.scale0} scale_ind={best.scale_ind} "
        f"mean MSE {result.mean_mse[result.best_index]:.6g}; table in {out}"
    )
    return 0


def _build_parser():
    parser = _Parser(
        prog="dataenrich",
        description="Constrained shared/individual linear model toolkit.",
        epilog=(
            f"The default output root is 'runs', overridable via the "
            f"{OUT_ROOT_ENV} environment variable; --out always wins."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--seed", type=int, help="master seed (default 0)")
        p.add_argument(
            "--out",
            help=f"output directory (default <root>/<command>; root from "
                 f"{OUT_ROOT_ENV} or 'runs')",
        )
        p.add_argument("--threads", type=int,
                       help="worker thread cap (default: available cores)")

    g = sub.add_parser("generate", help="write a synthetic dataset directory")
    common(g)
    g.add_argument("--preset", choices=PRESET_NAMES,
                   help="use a reference configuration")

    f = sub.add_parser("fit", help="fit a dataset directory")
    common(f)
    f.add_argument("--data", help="dataset directory (from generate)")
    f.add_argument("--iters", type=int, help="iteration budget")
    f.add_argument("--stop-tol", type=float, dest="stop_tol",
                   help="early-stop tolerance (0 disables)")
    f.add_argument("--order", choices=("jacobi", "gauss_seidel"),
                   help="block update order")
    f.add_argument("--unconstrained", action="store_true",
                   help="ignore constraints stored in the manifest")

    e = sub.add_parser("experiment", help="run an averaged preset experiment")
    common(e)
    e.add_argument("--name", choices=PRESET_NAMES, help="preset name")
    e.add_argument("--reps", type=int, help="repetition count (default 10)")
    e.add_argument("--iters", type=int, help="override the preset budget")

    d = sub.add_parser("diagnose", help="geometric Monte-Carlo probes")
    common(d)
    d.add_argument("--widths", action="store_true",
                   help="width calibration on the full sphere (no data)")
    d.add_argument("--p", help="comma-separated dimensions for --widths")
    d.add_argument("--trials", type=int, help="Monte-Carlo trials (default 1000)")
    d.add_argument("--data", help="dataset directory for instance probes")

    c = sub.add_parser("cv", help="cross-validate constraint radii")
    common(c)
    c.add_argument("--data", help="dataset directory")
    c.add_argument("--k", type=int, help="fold count (default 10)")
    c.add_argument("--iters", type=int, help="fit budget per fold")

    return parser


_COMMANDS = {
    "generate": cmd_generate,
    "fit": cmd_fit,
    "experiment": cmd_experiment,
    "diagnose": cmd_diagnose,
    "cv": cmd_cv,
}


def main(argv=None):
    parser = _build_parser()
    _write_meta.t0 = time.perf_counter()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:  # --help
        return int(e.code or 0)
    except ConfigError as e:
        print(f"[dataenrich:config] {e}", file=sys.stderr)
        return 1
    try:
        cfg = _load_config(args.config)
        return _COMMANDS[args.command](args, cfg)
    except NumericalDivergence as e:
        print(f"[dataenrich:numeric] {e}", file=sys.stderr)
        return 2
    except (ConfigError, OSError) as e:
        print(f"[dataenrich:config] {e}", file=sys.stderr)
        return 1
    except DataEnrichError as e:
        if isinstance(e, ArithmeticError) or isinstance(e, RuntimeError):
            print(f"[dataenrich:numeric] {e}", file=sys.stderr)
            return 2
        print(f"[dataenrich:config] {e}", file=sys.stderr)
        return 1


def entry():
    sys.exit(main())
