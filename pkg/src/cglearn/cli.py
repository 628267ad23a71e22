"""Command-line entry points for the experiment protocols.

Subcommands: ``generate`` (ground truths + signals), ``fit`` (one solver
run), ``eval`` (metrics row), ``experiment`` (full family x ratio x method
x trial sweep with aggregation), ``crossval`` (grid search).  Every run
stamps its resolved configuration next to its outputs.  Exit codes:
0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import datagen, metrics, serialize, solver


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's default 2
        raise UsageError(message)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", type=str, default=None, help="JSON config; flags override its entries")
    p.add_argument("--out", type=str, required=True, help="output directory or file")


def _add_hyper(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--c1", type=float, default=None)
    p.add_argument("--c2", type=float, default=None)
    p.add_argument("--max-outer-iters", type=int, default=None)
    p.add_argument("--rel-tol", type=float, default=None)
    p.add_argument("--w-steps", type=int, default=None)


def build_parser() -> _Parser:
    parser = _Parser(prog="cglearn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write ground truths and signal matrices")
    _add_common(p)
    p.add_argument("--family", choices=["er", "sphere"], default="er")
    p.add_argument("--v", type=int, default=30)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--k", type=int, default=4, help="sphere k-NN neighborhood size")
    p.add_argument("--p-scale", type=float, default=1.1, help="ER edge probability scale on log(v)/v")
    p.add_argument("--w-lo", type=float, default=0.2)
    p.add_argument("--w-hi", type=float, default=3.0)
    p.add_argument("--ratios", type=str, default="1.5,5,15", help="comma-separated sampling ratios")
    p.add_argument("--samples", type=int, default=None, help="fixed M overriding --ratios")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--test-samples", type=int, default=1000)

    p = sub.add_parser("fit", help="fit one covariance with SCGL or KRON")
    _add_common(p)
    _add_hyper(p)
    p.add_argument("--signals", type=str, required=True)
    p.add_argument("--method", choices=list(solver.MODES), default="scgl")
    p.add_argument("--verbose", action="store_true")

    p = sub.add_parser("eval", help="score a fit against ground truth")
    _add_common(p)
    p.add_argument("--fit", dest="fit_dir", type=str, required=True)
    p.add_argument("--truth", type=str, required=True)
    p.add_argument("--test-signals", type=str, required=True)
    p.add_argument("--eps-edge", type=float, default=metrics.DEFAULT_EDGE_EPS)
    p.add_argument("--method", type=str, default=None, help="method label for the CSV row")
    p.add_argument("--family", type=str, default="", help="family label for the CSV row")
    p.add_argument("--ratio", type=float, default=0.0)
    p.add_argument("--wall-time", type=float, default=0.0)

    p = sub.add_parser("experiment", help="full sweep with per-trial fits and aggregation")
    _add_common(p)
    _add_hyper(p)
    p.add_argument("--family", choices=["er", "sphere"], default="er")
    p.add_argument("--v", type=int, default=30)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--p-scale", type=float, default=1.1)
    p.add_argument("--w-lo", type=float, default=0.2)
    p.add_argument("--w-hi", type=float, default=3.0)
    p.add_argument("--ratios", type=str, default="1.5,5,15")
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--test-samples", type=int, default=1000)
    p.add_argument("--methods", type=str, default="scgl,kron")
    p.add_argument("--grid", type=str, default=None, help="alpha:beta pairs, e.g. 0.02:5,0.1:5; >1 entry turns on CV")
    p.add_argument("--folds", type=int, default=3)
    p.add_argument("--eps-edge", type=float, default=metrics.DEFAULT_EDGE_EPS)
    p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("crossval", help="pick hyperparameters by k-fold cross-validation")
    _add_common(p)
    _add_hyper(p)
    p.add_argument("--signals", type=str, required=True)
    p.add_argument("--method", choices=list(solver.MODES), default="scgl")
    p.add_argument("--grid", type=str, required=True)
    p.add_argument("--folds", type=int, default=3)
    return parser


def _load_config(args: argparse.Namespace, parser_defaults: dict) -> dict:
    """Merge config-file values under explicit CLI flags."""
    resolved = vars(args).copy()
    if args.config:
        file_conf = serialize.load_json(args.config)
        for key, value in file_conf.items():
            attr = key.replace("-", "_")
            if attr not in resolved:
                raise UsageError(f"unknown config key {key!r}")
            # A flag left at its parser default is overridden by the file.
            if resolved[attr] == parser_defaults.get(attr):
                resolved[attr] = value
    return resolved


def _hyperparams(conf: dict) -> solver.Hyperparams:
    hp = solver.Hyperparams()
    overrides = {}
    for name in ("alpha", "beta", "c1", "c2", "max_outer_iters", "rel_tol", "w_steps"):
        if conf.get(name) is not None:
            overrides[name] = conf[name]
    return replace(hp, **overrides)


def _parse_grid(text: str) -> list[tuple[float, float]]:
    grid = []
    for item in text.split(","):
        a, _, b = item.partition(":")
        if not b:
            raise UsageError(f"bad grid entry {item!r}; expected alpha:beta")
        grid.append((float(a), float(b)))
    if not grid:
        raise UsageError("empty hyperparameter grid")
    return grid


def _ratio_list(conf: dict) -> list[float]:
    return [float(x) for x in str(conf["ratios"]).split(",") if x]


def _stamp_config(out_dir: Path, conf: dict) -> None:
    # The output path is not a parameter: leaving it out keeps re-runs into
    # different directories byte-identical.
    clean = {k: v for k, v in conf.items() if k not in ("command", "config", "out")}
    serialize.save_json(out_dir / "resolved_config.json", clean)


def _make_ground_truth(conf: dict, seed: int) -> datagen.GroundTruth:
    if conf["family"] == "er":
        p = min(1.0, conf["p_scale"] * np.log(conf["v"]) / conf["v"])
        return datagen.sample_er_cg(
            v=conf["v"], n=conf["n"], p=p, w_lo=conf["w_lo"], w_hi=conf["w_hi"], seed=seed
        )
    return datagen.spherical_cg(count=conf["v"], k=conf["k"], seed=seed)


def _trial_seeds(seed: int, trials: int) -> list[int]:
    # Independent per-trial streams, reproducible across runs and schedulers.
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(trials)]


def cmd_generate(conf: dict) -> int:
    out = Path(conf["out"])
    out.mkdir(parents=True, exist_ok=True)
    _stamp_config(out, conf)
    ratios = _ratio_list(conf) if conf["samples"] is None else []
    manifest = {"family": conf["family"], "seed": conf["seed"], "trials": []}
    for trial, trial_seed in enumerate(_trial_seeds(conf["seed"], conf["trials"])):
        gt = _make_ground_truth(conf, trial_seed)
        trial_dir = out / f"trial{trial:03d}"
        serialize.save_ground_truth(trial_dir, gt)
        entry = {"trial": trial, "seed": trial_seed, "dir": trial_dir.name, "signals": []}
        sizes = (
            [(None, conf["samples"])]
            if conf["samples"] is not None
            else [(r, datagen.samples_for_ratio(r, gt.v)) for r in ratios]
        )
        for r, m in sizes:
            sig = datagen.sample_signals(gt, m, seed=trial_seed + 1)
            name = f"signals_M{m}.csv"
            serialize.save_signals(trial_dir / name, sig)
            entry["signals"].append({"ratio": r, "M": m, "file": name, "seed": trial_seed + 1})
        test = datagen.sample_signals(gt, conf["test_samples"], seed=trial_seed + 2)
        serialize.save_signals(trial_dir / "signals_test.csv", test)
        entry["test"] = {"M": conf["test_samples"], "file": "signals_test.csv", "seed": trial_seed + 2}
        manifest["trials"].append(entry)
    serialize.save_json(out / "manifest.json", manifest)
    print(f"generate: wrote {conf['trials']} trials to {out}")
    return 0


def cmd_fit(conf: dict) -> int:
    out = Path(conf["out"])
    out.mkdir(parents=True, exist_ok=True)
    _stamp_config(out, conf)
    signals = serialize.load_signals(conf["signals"])
    hp = _hyperparams(conf)
    started = time.perf_counter()
    result = solver.fit(
        signals.covariance(), signals.v, signals.n, hp, mode=conf["method"], verbose=conf["verbose"]
    )
    elapsed = time.perf_counter() - started
    serialize.save_fit_result(out, result, training_samples=signals.M)
    serialize.save_json(out / "timing.json", {"wall_time_s": elapsed})
    print(
        f"fit: method={conf['method']} iters={result.state.iteration} "
        f"converged={result.converged} objective={result.objective_trace[-1]:.6g} "
        f"wall_time={elapsed:.2f}s out={out}"
    )
    return 0


def cmd_eval(conf: dict) -> int:
    fit_meta = serialize.load_fit_summary(conf["fit_dir"])
    gt = serialize.load_ground_truth(conf["truth"])
    test = serialize.load_signals(conf["test_signals"])
    report = metrics.evaluate(
        fit_meta["weights"],
        fit_meta["laplacian"],
        gt.cg.weight_vector(),
        gt.laplacian,
        test,
        eps=conf["eps_edge"],
    )
    hp = fit_meta["hyperparams"]
    training_samples = fit_meta.get("training_samples") or test.M
    row = {
        "seed": gt.seed,
        "method": conf["method"] or fit_meta["mode"],
        "family": conf["family"] or gt.provenance.get("family", ""),
        "v": gt.v,
        "n": gt.n,
        "M": training_samples,
        "r": conf["ratio"],
        "alpha": hp["alpha"],
        "beta": hp["beta"],
        **report.as_dict(),
        "wall_time_s": conf["wall_time"],
    }
    serialize.append_results_row(conf["out"], row)
    print(json.dumps(report.as_dict()))
    print(f"eval: appended row to {conf['out']}")
    return 0


def _failure_row(conf: dict, seed: int, method: str, ratio, m: int, v: int, err: Exception) -> dict:
    return {
        "seed": seed,
        "method": f"{method}:failed:{type(err).__name__}",
        "family": conf["family"],
        "v": v,
        "n": conf["n"],
        "M": m,
        "r": ratio if ratio is not None else m / (2 * v),
        "alpha": 0.0,
        "beta": 0.0,
        "f1": 0.0,
        "weight_mse": 0.0,
        "empirical_tv": 0.0,
        "spectral_dist": 0.0,
        "heat_dist": 0.0,
        "kernel_dim_est": 0,
        "kernel_dim_true": 0,
        "wall_time_s": 0.0,
    }


def _run_trial(job: dict) -> list[dict]:
    """One (trial x ratio x method) batch; executed in a worker process.

    Failures are recorded as rows with a ``<method>:failed:<error>`` flag so
    the sweep continues.
    """
    conf = job["conf"]
    seed = job["trial_seed"]
    try:
        gt = _make_ground_truth(conf, seed)
    except Exception as err:
        return [
            _failure_row(conf, seed, method, ratio, m, conf["v"], err)
            for ratio, m in job["sizes"]
            for method in job["methods"]
        ]
    w_true = gt.cg.weight_vector()
    test = datagen.sample_signals(gt, conf["test_samples"], seed=seed + 2)
    rows = []
    for ratio, m in job["sizes"]:
        sig = datagen.sample_signals(gt, m, seed=seed + 1)
        for method in job["methods"]:
            started = time.perf_counter()
            try:
                hp = _hyperparams(conf)
                if len(job["grid"]) > 1:
                    hp = solver.cross_validate(
                        sig.X, gt.v, gt.n, job["grid"], conf["folds"],
                        base=hp, mode=method, seed=seed,
                    )
                elif job["grid"]:
                    hp = replace(hp, alpha=job["grid"][0][0], beta=job["grid"][0][1])
                result = solver.fit(sig.covariance(), gt.v, gt.n, hp, mode=method)
                elapsed = time.perf_counter() - started
                report = metrics.evaluate(
                    result.weights, result.laplacian, w_true, gt.laplacian, test,
                    eps=conf["eps_edge"],
                )
                rows.append(
                    {
                        "seed": seed,
                        "method": method,
                        "family": conf["family"],
                        "v": gt.v,
                        "n": gt.n,
                        "M": m,
                        "r": ratio if ratio is not None else m / (2 * gt.v),
                        "alpha": hp.alpha,
                        "beta": hp.beta,
                        **report.as_dict(),
                        "wall_time_s": round(elapsed, 3),
                    }
                )
            except Exception as err:
                rows.append(_failure_row(conf, seed, method, ratio, m, gt.v, err))
    return rows


def cmd_experiment(conf: dict) -> int:
    out = Path(conf["out"])
    out.mkdir(parents=True, exist_ok=True)
    _stamp_config(out, conf)
    grid = _parse_grid(conf["grid"]) if conf["grid"] else []
    methods = [m.strip() for m in conf["methods"].split(",") if m.strip()]
    for m in methods:
        if m not in solver.MODES:
            raise UsageError(f"unknown method {m!r}")
    if conf["samples"] is not None:
        sizes = [(None, conf["samples"])]
    else:
        sizes = [(r, datagen.samples_for_ratio(r, conf["v"])) for r in _ratio_list(conf)]
    jobs = [
        {"conf": conf, "trial_seed": seed, "sizes": sizes, "methods": methods, "grid": grid}
        for seed in _trial_seeds(conf["seed"], conf["trials"])
    ]
    if conf["threads"] > 1:
        with ProcessPoolExecutor(max_workers=conf["threads"]) as pool:
            per_trial = list(pool.map(_run_trial, jobs))
    else:
        per_trial = [_run_trial(job) for job in jobs]

    # Deterministic output order regardless of scheduling.
    rows = [row for batch in per_trial for row in batch]
    rows.sort(key=lambda r: (r["method"], float(r["r"]), int(r["seed"])))
    results_path = out / "results.csv"
    if results_path.exists():
        results_path.unlink()
    for row in rows:
        serialize.append_results_row(results_path, row)

    summary: dict = {}
    for method in sorted({r["method"] for r in rows}):
        for ratio in sorted({float(r["r"]) for r in rows}):
            bucket = [r for r in rows if r["method"] == method and float(r["r"]) == ratio]
            if not bucket:
                continue
            stats = {}
            for col in ("f1", "weight_mse", "empirical_tv", "spectral_dist", "heat_dist"):
                values = np.array([float(r[col]) for r in bucket])
                stats[col] = {"mean": float(values.mean()), "std": float(values.std())}
            summary[f"{method}@r={ratio:g}"] = stats
    serialize.save_json(out / "summary.json", summary)
    print(f"experiment: {len(rows)} rows -> {results_path}")
    return 0


def cmd_crossval(conf: dict) -> int:
    signals = serialize.load_signals(conf["signals"])
    grid = _parse_grid(conf["grid"])
    best = solver.cross_validate(
        signals.X, signals.v, signals.n, grid, conf["folds"],
        base=_hyperparams(conf), mode=conf["method"], seed=conf["seed"],
    )
    payload = {"alpha": best.alpha, "beta": best.beta, "folds": conf["folds"], "method": conf["method"]}
    out = Path(conf["out"])
    out.mkdir(parents=True, exist_ok=True)
    _stamp_config(out, conf)
    serialize.save_json(out / "crossval.json", payload)
    print(f"crossval: alpha={best.alpha} beta={best.beta}")
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "fit": cmd_fit,
    "eval": cmd_eval,
    "experiment": cmd_experiment,
    "crossval": cmd_crossval,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        defaults = {
            key: parser._subparsers._group_actions[0].choices[args.command].get_default(key)
            for key in vars(args)
        }
        conf = _load_config(args, defaults)
        return COMMANDS[args.command](conf)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 1
    except (SystemExit, KeyboardInterrupt):
        raise
    except Exception as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
