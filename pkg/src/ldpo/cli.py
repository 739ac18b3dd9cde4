"""Command-line surface: train, eval, fit-scheduler, sample-lambda, report.

Every computing command materializes its full configuration (flags over
environment over defaults), writes a run manifest before doing any work,
and then emits its artifacts. Reruns with identical inputs and seed produce
byte-identical output files; `--from-manifest` replays a previous run's
resolved configuration verbatim.

Exit codes: 0 success, 1 configuration error, 2 data/I-O error,
3 training divergence.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import load_jsonl, ratings_to_targets
from .errors import DivergenceDetectedError, LdpoError, ParseError
from .policy import LogLinearPolicy, ReferencePolicy, TabularPolicy, load_checkpoint, save_checkpoint
from .scheduler import (
    PolyFeatureMap,
    build_candidates,
    fit,
    load_model,
    load_observations,
    make_distribution,
    predict,
    sample,
    save_model,
    scores_to_probs,
)
from .simplex import grid as simplex_grid, uniform_weights, validate
from .trainer import TrainConfig, evaluate, train
from . import report as report_mod

_U64 = (1 << 64) - 1
_CANDIDATE_STREAM_TAG = 0x3D
_DRAW_STREAM_TAG = 0x4D


class CliConfigError(Exception):
    """Bad flags or unusable configuration; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    # argparse's default error() exits with status 2, which collides with
    # the data-error code; route usage problems through exit code 1 instead
    def error(self, message):
        raise CliConfigError(message)


def _resolve_seed(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get("LDPO_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise CliConfigError(f"LDPO_SEED={env!r} is not an integer") from None


def _parse_lambda_spec(spec: str) -> dict:
    spec = spec.strip()
    if spec == "uniform":
        return {"mode": "uniform"}
    if spec == "scheduler":
        return {"mode": "scheduler"}
    if spec.startswith("fixed:"):
        body = spec[len("fixed:"):]
    else:
        body = spec  # bare comma-separated weights are treated as fixed
    try:
        weights = [float(x) for x in body.split(",")]
    except ValueError:
        raise CliConfigError(f"cannot parse lambda spec {spec!r}") from None
    try:
        lam = validate(weights)
    except LdpoError as exc:
        raise CliConfigError(f"invalid fixed lambda {spec!r}: {exc}") from exc
    return {"mode": "fixed", "weights": lam.tolist()}


def _file_digest(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_dir: Path, command: str, cfg: dict, inputs: list[str], outputs: list[str]) -> None:
    manifest = {
        "tool": "ldpo",
        "version": __version__,
        "command": command,
        "config": cfg,
        "inputs": {p: _file_digest(Path(p)) for p in inputs},
        "outputs": outputs,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True), encoding="utf-8")


def _load_manifest_config(path: str, command: str) -> dict:
    try:
        manifest = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CliConfigError(f"cannot read manifest {path}: {exc}") from exc
    if manifest.get("command") != command:
        raise CliConfigError(f"manifest {path} is for {manifest.get('command')!r}, not {command!r}")
    return manifest["config"]


def _stream(seed: int, tag: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed & _U64, tag]))


# --- train -------------------------------------------------------------------

def _resolve_train(args) -> dict:
    if args.from_manifest:
        return _load_manifest_config(args.from_manifest, "train")
    if not args.data:
        raise CliConfigError("train requires --data (or --from-manifest)")
    lam = _parse_lambda_spec(args.lam)
    if lam["mode"] == "scheduler" and not (args.observations or args.scheduler_model):
        raise CliConfigError("--lambda scheduler needs --observations or --scheduler-model")
    if args.policy not in ("tabular", "log-linear"):
        raise CliConfigError(f"unknown policy kind {args.policy!r}")
    cfg = {
        "data": args.data,
        "dims": args.dims.split(",") if args.dims else None,
        "lambda": lam,
        "lambda_granularity": args.lambda_granularity,
        "beta": args.beta,
        "learning_rate": args.lr,
        "epochs": args.epochs,
        "batch_size": args.batch_size,
        "optimizer": args.optimizer,
        "lr_schedule": args.lr_schedule,
        "pref_temperature": args.pref_temperature,
        "pref_mode": args.pref_mode,
        "policy": args.policy,
        "features": args.features,
        "feature_seed": args.feature_seed,
        "reference": args.reference,
        "seed": _resolve_seed(args.seed),
        "scheduler": {
            "model": args.scheduler_model,
            "observations": args.observations,
            "degree": args.degree,
            "ridge": args.ridge,
            "tau": args.tau,
            "k": args.k,
            "alpha": args.alpha,
        },
    }
    _train_config_from(cfg, scheduler_dist=None)  # validates the numeric fields now
    return cfg


def _train_config_from(cfg: dict, scheduler_dist) -> TrainConfig:
    lam = cfg["lambda"]
    fixed = validate(lam["weights"]) if lam["mode"] == "fixed" else None
    try:
        return TrainConfig(
            beta=cfg["beta"],
            learning_rate=cfg["learning_rate"],
            epochs=cfg["epochs"],
            batch_size=cfg["batch_size"],
            lambda_mode=lam["mode"],
            fixed_lambda=fixed,
            scheduler_dist=scheduler_dist,
            lambda_granularity=cfg["lambda_granularity"],
            optimizer=cfg["optimizer"],
            lr_schedule=cfg["lr_schedule"],
            seed=cfg["seed"],
            pref_temperature=cfg["pref_temperature"],
            pref_mode=cfg.get("pref_mode", "softmax"),
            dimensions=tuple(cfg["dims"]) if cfg["dims"] else None,
        )
    except ValueError as exc:
        raise CliConfigError(str(exc)) from exc


def _execute_train(cfg: dict, out_dir: Path) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    inputs = [cfg["data"]]
    sched_cfg = cfg["scheduler"]
    if cfg["lambda"]["mode"] == "scheduler":
        inputs.append(sched_cfg["model"] or sched_cfg["observations"])
    outputs = ["manifest.json", "report.json", "loss.csv", "loss_curve.svg", "policy.json"]
    _write_manifest(out_dir, "train", cfg, inputs, outputs)

    groups = load_jsonl(cfg["data"], cfg["dims"])
    dims = cfg["dims"] or groups[0].dimension_names()

    scheduler_dist = None
    if cfg["lambda"]["mode"] == "scheduler":
        if sched_cfg["model"]:
            model = load_model(sched_cfg["model"])
        else:
            obs = load_observations(sched_cfg["observations"])
            fmap = PolyFeatureMap.build(d=obs[0].lam.m, p=sched_cfg["degree"])
            model = fit(obs, fmap, ridge=sched_cfg["ridge"])
        rng = _stream(cfg["seed"], _CANDIDATE_STREAM_TAG)
        candidates = build_candidates(
            "dirichlet", model.feature_map.d, alpha=sched_cfg["alpha"], k=sched_cfg["k"], rng=rng
        )
        scheduler_dist = make_distribution(model, candidates, sched_cfg["tau"])

    reference = ReferencePolicy(cfg["reference"])
    if cfg["policy"] == "tabular":
        policy = TabularPolicy.for_groups(groups)
    else:
        policy = LogLinearPolicy(n_features=cfg["features"], feature_seed=cfg["feature_seed"])

    config = _train_config_from(cfg, scheduler_dist)
    result = train(groups, policy, reference, config)

    report_mod.write_report_json(result, out_dir / "report.json")
    report_mod.write_loss_csv(result.steps, out_dir / "loss.csv")
    report_mod.plot_loss_curve(result.steps, out_dir / "loss_curve.svg")
    save_checkpoint(policy, out_dir / "policy.json")

    metrics = "  ".join(f"{k}={v:.6f}" for k, v in sorted(result.final_metrics.items()))
    print(f"trained {len(result.steps)} steps over {config.epochs} epochs "
          f"in {result.wall_clock_seconds:.2f} s")
    print(f"final loss: {result.steps[-1].loss:.6f} nats")
    print(f"final metrics: {metrics}")
    print(f"artifacts in {out_dir}: {', '.join(outputs)}")
    return 0


# --- fit-scheduler -----------------------------------------------------------

def _resolve_fit_scheduler(args) -> dict:
    if args.from_manifest:
        return _load_manifest_config(args.from_manifest, "fit-scheduler")
    if not args.observations:
        raise CliConfigError("fit-scheduler requires --observations")
    if args.degree < 1:
        raise CliConfigError(f"--degree must be >= 1, got {args.degree}")
    if args.ridge < 0:
        raise CliConfigError(f"--ridge must be >= 0, got {args.ridge}")
    if args.grid_resolution < 1:
        raise CliConfigError(f"--grid-resolution must be >= 1, got {args.grid_resolution}")
    return {
        "observations": args.observations,
        "degree": args.degree,
        "dims": args.dims,
        "ridge": args.ridge,
        "grid_resolution": args.grid_resolution,
        "seed": _resolve_seed(args.seed),
    }


def _execute_fit_scheduler(cfg: dict, out_dir: Path) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = ["manifest.json", "model.json", "predictions.csv"]
    _write_manifest(out_dir, "fit-scheduler", cfg, [cfg["observations"]], outputs)

    observations = load_observations(cfg["observations"])
    d = observations[0].lam.m
    if cfg["dims"] is not None and cfg["dims"] != d:
        raise ParseError(f"{cfg['observations']}: has {d} weight columns, --dims said {cfg['dims']}")
    fmap = PolyFeatureMap.build(d=d, p=cfg["degree"])
    model = fit(observations, fmap, ridge=cfg["ridge"])
    save_model(model, out_dir / "model.json")

    with (out_dir / "predictions.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"lambda_{i + 1}" for i in range(d)] + ["f"])
        for lam in simplex_grid(d, cfg["grid_resolution"]):
            writer.writerow([repr(v) for v in lam.tolist()] + [repr(predict(model, lam))])

    residual = max(abs(predict(model, obs.lam) - obs.y) for obs in observations)
    print(f"fitted degree-{cfg['degree']} surface over {d} dimensions: "
          f"{fmap.n_features} features, {len(observations)} observations")
    print(f"max training residual: {residual:.3e}")
    print(f"artifacts in {out_dir}: {', '.join(outputs)}")
    return 0


# --- sample-lambda -----------------------------------------------------------

def _resolve_sample_lambda(args) -> dict:
    if args.from_manifest:
        return _load_manifest_config(args.from_manifest, "sample-lambda")
    if not args.model and not args.scores_file:
        raise CliConfigError("sample-lambda requires --model or --scores-file")
    if args.tau <= 0:
        raise CliConfigError(f"--tau must be > 0, got {args.tau}")
    if args.k < 1:
        raise CliConfigError(f"--k must be >= 1, got {args.k}")
    if args.draws < 0:
        raise CliConfigError(f"--draws must be >= 0, got {args.draws}")
    return {
        "model": args.model,
        "scores_file": args.scores_file,
        "k": args.k,
        "tau": args.tau,
        "alpha": args.alpha,
        "draws": args.draws,
        "seed": _resolve_seed(args.seed),
    }


def _read_scores_file(path: str) -> tuple[list[list[float]] | None, np.ndarray]:
    p = Path(path)
    with p.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or "f" not in header:
            raise ParseError(f"{p}: expected a CSV with an 'f' column")
        f_col = header.index("f")
        lam_cols = [i for i, name in enumerate(header) if name.startswith("lambda_")]
        lams, scores = [], []
        for row in reader:
            if not row:
                continue
            try:
                scores.append(float(row[f_col]))
                if lam_cols:
                    lams.append([float(row[i]) for i in lam_cols])
            except (ValueError, IndexError) as exc:
                raise ParseError(f"{p}: malformed row {row!r}") from exc
    if not scores:
        raise ParseError(f"{p}: no score rows")
    return (lams if lam_cols else None), np.array(scores)


def _execute_sample_lambda(cfg: dict, out_dir: Path) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    inputs = [p for p in (cfg["model"], cfg["scores_file"]) if p]
    outputs = ["manifest.json", "table.csv"] + (["draws.csv"] if cfg["draws"] else [])
    _write_manifest(out_dir, "sample-lambda", cfg, inputs, outputs)

    if cfg["scores_file"]:
        lams, scores = _read_scores_file(cfg["scores_file"])
        probs = scores_to_probs(scores, cfg["tau"])
        candidates = [validate(w) for w in lams] if lams else None
    else:
        model = load_model(cfg["model"])
        rng = _stream(cfg["seed"], _CANDIDATE_STREAM_TAG)
        candidates = build_candidates(
            "dirichlet", model.feature_map.d, alpha=cfg["alpha"], k=cfg["k"], rng=rng
        )
        dist = make_distribution(model, candidates, cfg["tau"])
        scores, probs = dist.scores, dist.probs

    d = candidates[0].m if candidates else 0
    header = [f"lambda_{i + 1}" for i in range(d)] + ["f", "p"]
    with (out_dir / "table.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for j in range(len(scores)):
            lam_cells = [repr(v) for v in candidates[j].tolist()] if candidates else []
            writer.writerow(lam_cells + [repr(float(scores[j])), repr(float(probs[j]))])

    print("  ".join(header))
    for j in range(len(scores)):
        lam_cells = [f"{v:.3f}" for v in candidates[j].tolist()] if candidates else []
        print("  ".join(lam_cells + [f"{scores[j]:.4f}", f"{probs[j]:.4f}"]))
    print(f"probability column sums to {float(np.sum(probs)):.12f}")

    if cfg["draws"]:
        if candidates is None:
            raise CliConfigError("--draws needs candidate weight vectors (model mode or lambda_* columns)")
        from .scheduler import SchedulerDist

        dist = SchedulerDist(candidates=candidates, scores=np.asarray(scores, dtype=float),
                             probs=probs, tau=cfg["tau"])
        draw_rng = _stream(cfg["seed"], _DRAW_STREAM_TAG)
        with (out_dir / "draws.csv").open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"lambda_{i + 1}" for i in range(d)])
            for _ in range(cfg["draws"]):
                writer.writerow([repr(v) for v in sample(dist, draw_rng).tolist()])
    print(f"artifacts in {out_dir}: {', '.join(outputs)}")
    return 0


# --- eval --------------------------------------------------------------------

def _resolve_eval(args) -> dict:
    if args.from_manifest:
        return _load_manifest_config(args.from_manifest, "eval")
    if not args.data or not args.checkpoint:
        raise CliConfigError("eval requires --data and --checkpoint")
    if args.sweep and args.lam:
        raise CliConfigError("--lambda and --sweep are mutually exclusive")
    sweep = None
    lam = None
    if args.sweep:
        spec = args.sweep.strip()
        if spec == "vertices":
            sweep = 1
        elif spec.startswith("grid:"):
            try:
                sweep = int(spec[len("grid:"):])
            except ValueError:
                raise CliConfigError(f"cannot parse sweep spec {spec!r}") from None
            if sweep < 1:
                raise CliConfigError(f"sweep resolution must be >= 1, got {sweep}")
        else:
            raise CliConfigError(f"--sweep must be 'vertices' or 'grid:R', got {spec!r}")
    else:
        lam = _parse_lambda_spec(args.lam or "uniform")
        if lam["mode"] == "scheduler":
            raise CliConfigError("eval needs a concrete lambda; 'scheduler' is a training mode")
    if args.beta <= 0:
        raise CliConfigError(f"--beta must be > 0, got {args.beta}")
    return {
        "data": args.data,
        "checkpoint": args.checkpoint,
        "dims": args.dims.split(",") if args.dims else None,
        "lambda": lam,
        "sweep": sweep,
        "beta": args.beta,
        "pref_temperature": args.pref_temperature,
        "pref_mode": args.pref_mode,
        "reference": args.reference,
        "seed": _resolve_seed(args.seed),
    }


def _execute_eval(cfg: dict, out_dir: Path) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = ["manifest.json", "metrics.json"] + (["sweep.csv"] if cfg["sweep"] else [])
    _write_manifest(out_dir, "eval", cfg, [cfg["data"], cfg["checkpoint"]], outputs)

    groups = load_jsonl(cfg["data"], cfg["dims"])
    policy = load_checkpoint(cfg["checkpoint"])
    reference = ReferencePolicy(cfg["reference"])
    targets = [
        ratings_to_targets(g, temperature=cfg["pref_temperature"], dims=cfg["dims"],
                           mode=cfg.get("pref_mode", "softmax"))
        for g in groups
    ]
    m = targets[0].m

    if cfg["sweep"]:
        lams = simplex_grid(m, cfg["sweep"])
    else:
        spec = cfg["lambda"]
        lams = [uniform_weights(m) if spec["mode"] == "uniform" else validate(spec["weights"])]

    rows = []
    for lam in lams:
        metrics = evaluate(groups, policy, reference, targets, lam, cfg["beta"])
        rows.append({"lambda": tuple(lam.tolist()), **metrics})

    if cfg["sweep"]:
        report_mod.write_sweep_csv(rows, out_dir / "sweep.csv")
        payload = [{"lambda": list(r["lambda"]), **{k: r[k] for k in report_mod.SWEEP_METRICS}} for r in rows]
    else:
        payload = {"lambda": list(rows[0]["lambda"]), **{k: rows[0][k] for k in report_mod.SWEEP_METRICS}}
    (out_dir / "metrics.json").write_text(json.dumps(payload, indent=1, sort_keys=True), encoding="utf-8")

    for row in rows:
        lam_str = ",".join(f"{v:.4f}" for v in row["lambda"])
        metr = "  ".join(f"{k}={row[k]:.6f}" for k in report_mod.SWEEP_METRICS)
        print(f"lambda=[{lam_str}]  {metr}")
    print(f"artifacts in {out_dir}: {', '.join(outputs)}")
    return 0


# --- report ------------------------------------------------------------------

def _resolve_report(args) -> dict:
    return {"run": args.run}


def _execute_report(cfg: dict, out_dir: Path) -> int:
    run_dir = Path(cfg["run"])
    if not run_dir.is_dir():
        raise FileNotFoundError(f"run directory not found: {run_dir}")
    out_dir.mkdir(parents=True, exist_ok=True)
    produced = []

    loss_csv = run_dir / "loss.csv"
    if loss_csv.exists():
        steps = report_mod.read_loss_csv(loss_csv)
        report_mod.plot_loss_curve(steps, out_dir / "loss_curve.svg")
        produced.append("loss_curve.svg")

    report_json = run_dir / "report.json"
    if report_json.exists():
        payload = report_mod.read_report_json(report_json)
        report_mod.write_summary_csv(payload, out_dir / "summary.csv")
        produced.append("summary.csv")
        if payload.get("lambda_draws"):
            report_mod.plot_lambda_trace(payload["lambda_draws"], out_dir / "lambda_trace.svg")
            produced.append("lambda_trace.svg")

    sweep_csv = run_dir / "sweep.csv"
    if sweep_csv.exists():
        rows = report_mod.read_sweep_csv(sweep_csv)
        report_mod.plot_sweep(rows, out_dir / "eval_sweep.svg")
        produced.append("eval_sweep.svg")

    if not produced:
        raise ParseError(f"{run_dir}: no run artifacts (loss.csv, report.json, or sweep.csv) found")
    print(f"rendered {', '.join(produced)} in {out_dir}")
    return 0


# --- wiring ------------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="ldpo", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"ldpo {__version__}")
    sub = parser.add_subparsers(dest="command")

    def add_common(p, default_out):
        p.add_argument("--seed", type=int, default=None, help="random seed (fallback: LDPO_SEED, then 0)")
        p.add_argument("--out", default=default_out, help="output directory")
        p.add_argument("--from-manifest", default=None, help="replay a previous run's resolved config")

    p = sub.add_parser("train", help="optimize a toy policy against blended listwise targets")
    p.add_argument("--data", help="JSONL dataset path")
    p.add_argument("--dims", default=None, help="comma-separated dimension names (default: inferred)")
    p.add_argument("--lambda", dest="lam", default="uniform",
                   help="'uniform', 'scheduler', or 'fixed:w1,...,wm'")
    p.add_argument("--lambda-granularity", choices=("per_prompt", "per_batch"), default="per_prompt")
    p.add_argument("--beta", type=float, default=0.1)
    p.add_argument("--lr", type=float, default=5e-3)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")
    p.add_argument("--lr-schedule", choices=("constant", "cosine"), default="constant")
    p.add_argument("--pref-temperature", type=float, default=1.0)
    p.add_argument("--pref-mode", choices=("softmax", "normalized"), default="softmax",
                   help="ratings-to-distribution map (normalized needs nonnegative scores)")
    p.add_argument("--policy", choices=("tabular", "log-linear"), default="tabular")
    p.add_argument("--features", type=int, default=256, help="feature count for log-linear policies")
    p.add_argument("--feature-seed", type=int, default=0)
    p.add_argument("--reference", choices=("uniform", "from_data"), default="uniform")
    p.add_argument("--scheduler-model", default=None, help="fitted model file for --lambda scheduler")
    p.add_argument("--observations", default=None, help="observations CSV to fit the scheduler from")
    p.add_argument("--degree", type=int, default=2)
    p.add_argument("--ridge", type=float, default=1e-8)
    p.add_argument("--tau", type=float, default=100.0)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--alpha", type=float, default=1.0)
    add_common(p, "runs/train")

    p = sub.add_parser("fit-scheduler", help="fit the polynomial performance surface")
    p.add_argument("--observations", help="CSV with header lambda_1,...,lambda_d,score")
    p.add_argument("--degree", type=int, default=2)
    p.add_argument("--dims", type=int, default=None, help="expected weight dimension (checked against the CSV)")
    p.add_argument("--ridge", type=float, default=1e-8)
    p.add_argument("--grid-resolution", type=int, default=4)
    add_common(p, "runs/scheduler")

    p = sub.add_parser("sample-lambda", help="tabulate and sample the scheduling distribution")
    p.add_argument("--model", default=None, help="fitted model file")
    p.add_argument("--scores-file", default=None, help="CSV with an 'f' column to softmax directly")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--tau", type=float, default=100.0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--draws", type=int, default=0, help="additionally sample this many weight vectors")
    add_common(p, "runs/sample")

    p = sub.add_parser("eval", help="evaluate a checkpoint at one or many weight vectors")
    p.add_argument("--data", help="JSONL dataset path")
    p.add_argument("--checkpoint", help="policy checkpoint file")
    p.add_argument("--dims", default=None)
    p.add_argument("--lambda", dest="lam", default=None, help="'uniform' or 'fixed:w1,...,wm'")
    p.add_argument("--sweep", default=None, help="'vertices' or 'grid:R' for a per-lambda CSV")
    p.add_argument("--beta", type=float, default=0.1)
    p.add_argument("--pref-temperature", type=float, default=1.0)
    p.add_argument("--pref-mode", choices=("softmax", "normalized"), default="softmax")
    p.add_argument("--reference", choices=("uniform", "from_data"), default="uniform")
    add_common(p, "runs/eval")

    p = sub.add_parser("report", help="render figures and summaries from run artifacts")
    p.add_argument("--run", required=True, help="directory holding loss.csv / report.json / sweep.csv")
    p.add_argument("--out", default=None, help="output directory (default: the run directory)")
    return parser


_COMMANDS = {
    "train": (_resolve_train, _execute_train),
    "fit-scheduler": (_resolve_fit_scheduler, _execute_fit_scheduler),
    "sample-lambda": (_resolve_sample_lambda, _execute_sample_lambda),
    "eval": (_resolve_eval, _execute_eval),
    "report": (_resolve_report, _execute_report),
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise CliConfigError("a command is required (train, eval, fit-scheduler, sample-lambda, report)")
        resolve, execute = _COMMANDS[args.command]
        cfg = resolve(args)
    except CliConfigError as exc:
        print(f"ldpo: config error: {exc}", file=sys.stderr)
        return 1

    if args.command == "report":
        out_dir = Path(args.out) if args.out else Path(args.run)
    else:
        out_dir = Path(args.out)
    try:
        return execute(cfg, out_dir)
    except DivergenceDetectedError as exc:
        print(f"ldpo: divergence: {exc}", file=sys.stderr)
        return 3
    except CliConfigError as exc:
        print(f"ldpo: config error: {exc}", file=sys.stderr)
        return 1
    except (OSError, LdpoError, ValueError) as exc:
        # config was validated up front; ValueError here stems from data content
        print(f"ldpo: data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
