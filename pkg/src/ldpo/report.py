"""Run-artifact rendering: CSV tables and matplotlib figures.

Figures are written as SVG with a fixed hash salt and no embedded date, so
rerunning a seeded command reproduces the files byte for byte.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import ParseError
from .trainer import StepRecord, TrainReport

SVG_HASHSALT = "ldpo"


def save_figure(fig, path: str | Path) -> None:
    """Deterministic SVG export; identical figures yield identical bytes."""
    with plt.rc_context({"svg.hashsalt": SVG_HASHSALT}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# --- loss trace --------------------------------------------------------------

def write_loss_csv(steps: list[StepRecord], path: str | Path) -> None:
    """Per-step trace: step, epoch, loss_nats, lambda_1..lambda_m."""
    if not steps:
        raise ValueError("no steps to write")
    m = len(steps[0].lam)
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "epoch", "loss_nats"] + [f"lambda_{k + 1}" for k in range(m)])
        for rec in steps:
            writer.writerow([rec.step, rec.epoch, repr(float(rec.loss))] + [repr(float(w)) for w in rec.lam])


def read_loss_csv(path: str | Path) -> list[StepRecord]:
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:3] != ["step", "epoch", "loss_nats"]:
            raise ParseError(f"{path}: not a loss trace CSV")
        m = len(header) - 3
        records = []
        for row in reader:
            if not row:
                continue
            records.append(
                StepRecord(
                    step=int(row[0]),
                    epoch=int(row[1]),
                    loss=float(row[2]),
                    lam=tuple(float(x) for x in row[3:3 + m]),
                )
            )
    return records


def plot_loss_curve(steps: list[StepRecord], path: str | Path) -> None:
    """Loss in nats against optimizer step."""
    xs = [rec.step for rec in steps]
    ys = [rec.loss for rec in steps]
    fig, ax = plt.subplots(figsize=(7, 4.2))
    ax.plot(xs, ys, lw=1.2, color="tab:blue")
    ax.set_xlabel("optimizer step")
    ax.set_ylabel("loss (nats)")
    ax.set_title("training loss")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    save_figure(fig, path)


def plot_lambda_trace(draws: list[dict], path: str | Path) -> None:
    """Each weight coordinate of the drawn vectors over draw index."""
    weights = np.array([d["weights"] for d in draws])
    fig, ax = plt.subplots(figsize=(7, 4.2))
    for k in range(weights.shape[1]):
        ax.plot(weights[:, k], lw=0.9, alpha=0.85, label=f"weight {k + 1}")
    ax.set_xlabel("draw")
    ax.set_ylabel("weight")
    ax.set_ylim(-0.02, 1.02)
    ax.set_title("sampled preference weights")
    ax.legend(loc="upper right", fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    save_figure(fig, path)


# --- evaluation sweeps -------------------------------------------------------

SWEEP_METRICS = ("mean_loss_nats", "top1_agreement", "mean_tv", "kendall_tau")


def write_sweep_csv(rows: list[dict], path: str | Path) -> None:
    """One row per weight vector: lambda_1..lambda_m plus every metric."""
    if not rows:
        raise ValueError("no sweep rows to write")
    m = len(rows[0]["lambda"])
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"lambda_{k + 1}" for k in range(m)] + list(SWEEP_METRICS))
        for row in rows:
            writer.writerow([repr(float(w)) for w in row["lambda"]]
                            + [repr(float(row[name])) for name in SWEEP_METRICS])


def read_sweep_csv(path: str | Path) -> list[dict]:
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[-len(SWEEP_METRICS):] != list(SWEEP_METRICS):
            raise ParseError(f"{path}: not an evaluation sweep CSV")
        m = len(header) - len(SWEEP_METRICS)
        rows = []
        for row in reader:
            if not row:
                continue
            entry = {"lambda": tuple(float(x) for x in row[:m])}
            for name, cell in zip(SWEEP_METRICS, row[m:]):
                entry[name] = float(cell)
            rows.append(entry)
    return rows


def plot_sweep(rows: list[dict], path: str | Path) -> None:
    """Metric trade-off curves across the sweep's weight vectors."""
    fig, axes = plt.subplots(2, 2, figsize=(9, 6), sharex=True)
    xs = np.arange(len(rows))
    for ax, name in zip(axes.ravel(), SWEEP_METRICS):
        ax.plot(xs, [row[name] for row in rows], marker="o", ms=3, lw=1.0)
        ax.set_title(name)
        ax.grid(True, alpha=0.3)
    for ax in axes[1]:
        ax.set_xlabel("sweep index")
    fig.suptitle("evaluation across preference weights")
    fig.tight_layout()
    save_figure(fig, path)


# --- train report JSON -------------------------------------------------------

def report_to_dict(report: TrainReport) -> dict:
    """JSON-ready view of a report; timing is deliberately left out so
    artifact bytes depend only on (data, config, seed)."""
    return {
        "loss_per_epoch": report.loss_per_epoch,
        "final_loss": report.steps[-1].loss if report.steps else None,
        "n_steps": len(report.steps),
        "final_metrics": report.final_metrics,
        "lambda_draws": [
            {"step": d.step, "prompt_id": d.prompt_id, "weights": list(d.weights)} for d in report.lambda_draws
        ],
    }


def write_report_json(report: TrainReport, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report_to_dict(report), indent=1, sort_keys=True), encoding="utf-8")


def read_report_json(path: str | Path) -> dict:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON ({exc.msg})") from exc
    if not isinstance(payload, dict) or "loss_per_epoch" not in payload:
        raise ParseError(f"{path}: not a training report")
    return payload


def write_summary_csv(report_dict: dict, path: str | Path) -> None:
    """Small flat table of headline numbers for a finished run."""
    rows = [
        ("n_steps", report_dict.get("n_steps")),
        ("n_epochs", len(report_dict.get("loss_per_epoch", []))),
        ("final_loss_nats", report_dict.get("final_loss")),
    ]
    for name, value in sorted((report_dict.get("final_metrics") or {}).items()):
        rows.append((name, value))
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        for name, value in rows:
            writer.writerow([name, repr(value) if isinstance(value, float) else value])
