"""Seeded training loop and evaluation metrics for toy policies.

Each optimizer step draws a weight vector per prompt (or one per batch),
blends the per-dimension targets with it, accumulates the exact analytic
gradient over the batch in data order, and applies an SGD or Adam update.
Every source of randomness is derived from the config seed; in particular,
weight-vector draws for a prompt come from a stream keyed by
(seed, prompt_id), so results do not depend on evaluation order. Identical
(data, config, seed) triples produce identical reports.
"""

from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .dataset import PreferenceTargets, PromptGroup, mix_targets, ratings_to_targets
from .errors import DimensionMismatchError, DivergenceDetectedError, NonFiniteLogRatioError
from .losses import lambda_dpo_grad, lambda_dpo_loss, listwise_loss
from .policy import Policy, ReferencePolicy, listwise_distribution
from .scheduler import SchedulerDist, sample as sample_scheduler
from .simplex import SimplexVector, sample_uniform, uniform_weights

LAMBDA_MODES = ("fixed", "uniform", "scheduler")
GRANULARITIES = ("per_prompt", "per_batch")
OPTIMIZERS = ("sgd", "adam")
LR_SCHEDULES = ("constant", "cosine")

_U64 = (1 << 64) - 1
_PROMPT_STREAM_TAG = 0x1D
_BATCH_STREAM_TAG = 0x2D


@dataclass
class TrainConfig:
    """Everything that determines a run; validated on construction."""

    beta: float = 0.1
    learning_rate: float = 5e-3
    epochs: int = 100
    batch_size: int = 16
    lambda_mode: str = "uniform"
    fixed_lambda: SimplexVector | None = None
    scheduler_dist: SchedulerDist | None = None
    lambda_granularity: str = "per_prompt"
    optimizer: str = "adam"
    lr_schedule: str = "constant"
    warmup_ratio: float = 0.1
    seed: int = 0
    pref_temperature: float = 1.0
    pref_mode: str = "softmax"
    dimensions: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.beta <= 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.pref_temperature <= 0:
            raise ValueError(f"pref_temperature must be > 0, got {self.pref_temperature}")
        if self.pref_mode not in ("softmax", "normalized"):
            raise ValueError(f"pref_mode must be 'softmax' or 'normalized', got {self.pref_mode!r}")
        if self.lambda_mode not in LAMBDA_MODES:
            raise ValueError(f"lambda_mode must be one of {LAMBDA_MODES}, got {self.lambda_mode!r}")
        if self.lambda_granularity not in GRANULARITIES:
            raise ValueError(f"lambda_granularity must be one of {GRANULARITIES}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if self.lr_schedule not in LR_SCHEDULES:
            raise ValueError(f"lr_schedule must be one of {LR_SCHEDULES}")
        if not 0.0 <= self.warmup_ratio < 1.0:
            raise ValueError(f"warmup_ratio must be in [0, 1), got {self.warmup_ratio}")
        if self.lambda_mode == "fixed" and self.fixed_lambda is None:
            raise ValueError("lambda_mode 'fixed' requires fixed_lambda")
        # a scheduler_dist is required only at train time (it is usually
        # built from files after the numeric config has been validated)


@dataclass
class StepRecord:
    """One optimizer step: mean batch loss and the mean of the step's draws."""

    step: int
    epoch: int
    loss: float
    lam: tuple[float, ...]


@dataclass
class LambdaDraw:
    step: int
    prompt_id: str
    weights: tuple[float, ...]


@dataclass
class TrainReport:
    """Run outcome. Wall-clock time is excluded from equality comparisons."""

    loss_per_epoch: list[float]
    steps: list[StepRecord]
    lambda_draws: list[LambdaDraw]
    final_metrics: dict[str, float]
    wall_clock_seconds: float = field(default=0.0, compare=False)


class Sgd:
    def step(self, values: np.ndarray, grad: np.ndarray, lr: float) -> None:
        values -= lr * grad


class Adam:
    """Adam with bias correction; beta1=0.9, beta2=0.999, eps=1e-8."""

    BETA1 = 0.9
    BETA2 = 0.999
    EPS = 1e-8

    def __init__(self, n_params: int):
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)
        self.t = 0

    def step(self, values: np.ndarray, grad: np.ndarray, lr: float) -> None:
        self.t += 1
        self.m = self.BETA1 * self.m + (1.0 - self.BETA1) * grad
        self.v = self.BETA2 * self.v + (1.0 - self.BETA2) * grad * grad
        m_hat = self.m / (1.0 - self.BETA1 ** self.t)
        v_hat = self.v / (1.0 - self.BETA2 ** self.t)
        values -= lr * m_hat / (np.sqrt(v_hat) + self.EPS)


def _prompt_stream_key(pid: str) -> int:
    # sha256, not hash(): stable across processes and PYTHONHASHSEED
    return int.from_bytes(hashlib.sha256(pid.encode("utf-8")).digest()[:8], "big")


def _lr_at(config: TrainConfig, step: int, total_steps: int) -> float:
    if config.lr_schedule == "constant":
        return config.learning_rate
    warmup = int(math.ceil(config.warmup_ratio * total_steps))
    if step < warmup:
        return config.learning_rate * (step + 1) / warmup
    span = max(total_steps - warmup, 1)
    return config.learning_rate * 0.5 * (1.0 + math.cos(math.pi * (step - warmup) / span))


class _LambdaSource:
    """Per-config draw machinery with reproducible per-prompt streams."""

    def __init__(self, config: TrainConfig, m: int):
        self.config = config
        self.m = m
        seed_u = config.seed & _U64
        self._seed_u = seed_u
        self._prompt_streams: dict[str, np.random.Generator] = {}
        self._batch_stream = np.random.default_rng(np.random.SeedSequence([seed_u, _BATCH_STREAM_TAG]))
        if config.lambda_mode == "fixed" and config.fixed_lambda.m != m:
            raise DimensionMismatchError(
                f"fixed lambda has {config.fixed_lambda.m} entries, targets have {m} dimensions"
            )
        if config.lambda_mode == "scheduler":
            if config.scheduler_dist is None:
                raise ValueError("lambda_mode 'scheduler' requires scheduler_dist")
            cand_m = config.scheduler_dist.candidates[0].m
            if cand_m != m:
                raise DimensionMismatchError(
                    f"scheduler candidates have {cand_m} entries, targets have {m} dimensions"
                )

    def _stream_for(self, prompt_id: str) -> np.random.Generator:
        if prompt_id not in self._prompt_streams:
            seq = np.random.SeedSequence([self._seed_u, _prompt_stream_key(prompt_id), _PROMPT_STREAM_TAG])
            self._prompt_streams[prompt_id] = np.random.default_rng(seq)
        return self._prompt_streams[prompt_id]

    def _draw(self, rng: np.random.Generator) -> SimplexVector:
        if self.config.lambda_mode == "uniform":
            return sample_uniform(self.m, rng)
        return sample_scheduler(self.config.scheduler_dist, rng)

    def for_batch(self, batch: list[PromptGroup]) -> list[SimplexVector]:
        if self.config.lambda_mode == "fixed":
            return [self.config.fixed_lambda] * len(batch)
        if self.config.lambda_granularity == "per_batch":
            lam = self._draw(self._batch_stream)
            return [lam] * len(batch)
        return [self._draw(self._stream_for(g.prompt_id)) for g in batch]


def train(
    data: list[PromptGroup],
    policy: Policy,
    reference: ReferencePolicy,
    config: TrainConfig,
) -> TrainReport:
    """Optimize the policy in place and return the run report.

    Groups are visited in data order within fixed contiguous batches every
    epoch; per-group gradients are averaged in that order, so reruns are
    bit-reproducible. A non-finite batch loss aborts the run, restores the
    parameters that produced the last finite loss, and raises
    DivergenceDetectedError.
    """
    if not data:
        raise ValueError("training data must be nonempty")
    targets_per_group = [
        ratings_to_targets(g, temperature=config.pref_temperature, dims=config.dimensions,
                           mode=config.pref_mode)
        for g in data
    ]
    m = targets_per_group[0].m
    for g, t in zip(data, targets_per_group):
        if t.m != m:
            raise DimensionMismatchError(f"group {g.prompt_id!r} has {t.m} dimensions, expected {m}")

    lam_source = _LambdaSource(config, m)
    optimizer = Adam(policy.n_params) if config.optimizer == "adam" else Sgd()
    batches = [
        list(range(start, min(start + config.batch_size, len(data))))
        for start in range(0, len(data), config.batch_size)
    ]
    total_steps = config.epochs * len(batches)

    steps: list[StepRecord] = []
    draws: list[LambdaDraw] = []
    loss_per_epoch: list[float] = []
    last_good = policy.values.copy()
    step = 0
    start_time = time.perf_counter()

    for epoch in range(config.epochs):
        epoch_losses = []
        for batch_idx in batches:
            batch = [data[i] for i in batch_idx]
            lams = lam_source.for_batch(batch)
            grad_dense = np.zeros(policy.n_params)
            losses = []
            try:
                for g_idx, group, lam in zip(batch_idx, batch, lams):
                    tg = targets_per_group[g_idx]
                    losses.append(lambda_dpo_loss(policy, reference, group, tg, lam, config.beta).value)
                    grad_dense += lambda_dpo_grad(policy, reference, group, tg, lam, config.beta).to_dense(
                        policy.n_params
                    )
                    draws.append(
                        LambdaDraw(step=step, prompt_id=group.prompt_id, weights=tuple(lam.tolist()))
                    )
                batch_loss = float(np.mean(losses))
            except NonFiniteLogRatioError as exc:
                # runaway parameters overflow the log-ratios before the loss
                # itself can go non-finite; same failure, same handling
                policy.values[:] = last_good
                raise DivergenceDetectedError(
                    f"non-finite log-ratio at step {step} (epoch {epoch}); "
                    "policy restored to its last finite state",
                    step=step,
                    epoch=epoch,
                ) from exc
            if not np.isfinite(batch_loss):
                policy.values[:] = last_good
                raise DivergenceDetectedError(
                    f"non-finite loss {batch_loss!r} at step {step} (epoch {epoch}); "
                    "policy restored to its last finite state",
                    step=step,
                    epoch=epoch,
                )
            last_good = policy.values.copy()
            grad_dense /= len(batch)
            optimizer.step(policy.values, grad_dense, _lr_at(config, step, total_steps))
            lam_mean = tuple(np.mean([l.weights for l in lams], axis=0).tolist())
            steps.append(StepRecord(step=step, epoch=epoch, loss=batch_loss, lam=lam_mean))
            epoch_losses.append(batch_loss)
            step += 1
        loss_per_epoch.append(float(np.mean(epoch_losses)))

    eval_lambda = config.fixed_lambda if config.lambda_mode == "fixed" else uniform_weights(m)
    metrics = evaluate(data, policy, reference, targets_per_group, eval_lambda, config.beta)
    return TrainReport(
        loss_per_epoch=loss_per_epoch,
        steps=steps,
        lambda_draws=draws,
        final_metrics=metrics,
        wall_clock_seconds=time.perf_counter() - start_time,
    )


def kendall_tau(a: np.ndarray, b: np.ndarray) -> float:
    """Rank correlation over all pairs; ties count as neither concordant nor discordant."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = a.size
    if n < 2:
        return 1.0
    total = 0
    for i in range(n):
        for j in range(i + 1, n):
            total += int(np.sign((a[i] - a[j]) * (b[i] - b[j])))
    return total / (n * (n - 1) / 2)


def evaluate(
    data: list[PromptGroup],
    policy: Policy,
    reference: ReferencePolicy,
    targets_per_group: list[PreferenceTargets],
    lam: SimplexVector,
    beta: float,
) -> dict[str, float]:
    """Alignment metrics of the policy against the lam-blended targets.

    Returns the mean blended-target loss (nats), the fraction of groups whose
    model argmax matches the target argmax (ties break toward the lowest
    index), the mean total-variation distance, and the mean pairwise rank
    correlation between model and target orderings.
    """
    losses, agree, tvs, taus = [], [], [], []
    for group, tg in zip(data, targets_per_group):
        mixed = mix_targets(tg, lam).mixed
        model_dist = listwise_distribution(policy, reference, group, beta)
        losses.append(listwise_loss(policy, reference, group, mixed, beta).value)
        agree.append(1.0 if int(np.argmax(model_dist)) == int(np.argmax(mixed)) else 0.0)
        tvs.append(0.5 * float(np.abs(model_dist - mixed).sum()))
        taus.append(kendall_tau(model_dist, mixed))
    return {
        "mean_loss_nats": float(np.mean(losses)),
        "top1_agreement": float(np.mean(agree)),
        "mean_tv": float(np.mean(tvs)),
        "kendall_tau": float(np.mean(taus)),
    }
