"""Objectives and gradients for listwise preference optimization.

All losses are cross-entropies in nats between a target distribution over a
group's candidates and the model's beta-scaled log-ratio softmax. The mixed
objective is affine in the weight vector: computing the loss of the blended
target equals blending the per-dimension losses, and both paths are kept
side by side as a standing correctness check.

The analytic gradient of the mixed loss is

    -beta * sum_i (mixed_i - P_i) * d log pi(y_i | x) / d theta,

where P is the model distribution. The beta factor and the within-group
normalization of log pi both come straight from differentiating the
implemented loss; agreement with central finite differences is the ground
truth, enforced by :func:`finite_diff_grad`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import PreferenceTargets, PromptGroup, mix_targets
from .errors import (
    DimensionMismatchError,
    IndexOutOfRangeError,
    InvalidTargetError,
    NonFiniteLogRatioError,
    UnsupportedNError,
)
from .numerics import log_sigmoid, log_softmax, sigmoid
from .policy import Policy, ReferencePolicy
from .simplex import SimplexVector


@dataclass
class LossValue:
    """A scalar loss in nats plus its per-prompt contributions (value = mean)."""

    value: float
    per_group: list[float]


class GradientVector(dict):
    """Sparse gradient: flat parameter index -> partial derivative."""

    def add_scaled(self, other: dict[int, float], scale: float = 1.0) -> None:
        for pid, g in other.items():
            self[pid] = self.get(pid, 0.0) + scale * g

    def max_norm(self) -> float:
        return max((abs(v) for v in self.values()), default=0.0)

    def to_dense(self, n_params: int) -> np.ndarray:
        dense = np.zeros(n_params)
        for pid, g in self.items():
            dense[pid] = g
        return dense


def bt_prob(r_w: float, r_l: float) -> float:
    """Probability that the first item wins under latent scores (r_w, r_l).

    Equals sigmoid(r_w - r_l); evaluated on the non-overflowing branch.
    """
    return float(sigmoid(r_w - r_l))


def _log_model_dist(policy: Policy, reference: ReferencePolicy, group: PromptGroup, beta: float) -> np.ndarray:
    if beta <= 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    ratios = policy.group_logprobs(group) - reference.group_logprobs(group)
    if not np.all(np.isfinite(ratios)):
        raise NonFiniteLogRatioError(f"non-finite log-ratio in group {group.prompt_id!r}")
    with np.errstate(over="ignore"):  # beta*ratio may overflow; the trainer's divergence guard owns that
        return log_softmax(beta * ratios)


def _check_target(target: np.ndarray, n: int) -> np.ndarray:
    target = np.asarray(target, dtype=float)
    if target.shape != (n,):
        raise DimensionMismatchError(f"target has shape {target.shape}, group has {n} candidates")
    if not np.all(np.isfinite(target)) or np.any(target < -1e-12) or abs(target.sum() - 1.0) > 1e-9:
        raise InvalidTargetError(f"target is not a probability distribution: {target.tolist()}")
    return np.clip(target, 0.0, None)


def listwise_loss(
    policy: Policy,
    reference: ReferencePolicy,
    group: PromptGroup,
    target: np.ndarray,
    beta: float,
) -> LossValue:
    """Cross-entropy (nats) between a target distribution and the model distribution."""
    target = _check_target(target, group.n)
    logp = _log_model_dist(policy, reference, group, beta)
    v = float(-(target @ logp))
    return LossValue(value=v, per_group=[v])


def pairwise_dpo_loss(
    policy: Policy,
    reference: ReferencePolicy,
    group: PromptGroup,
    winner: int,
    beta: float,
) -> LossValue:
    """Two-candidate preference loss: -log sigmoid(beta * (ratio_w - ratio_l)).

    Identical to :func:`listwise_loss` with a one-hot target on the winner;
    the two code paths are kept separate precisely so that reduction can be
    asserted rather than assumed.
    """
    if group.n != 2:
        raise UnsupportedNError(f"pairwise loss needs exactly 2 candidates, got {group.n}")
    if winner not in (0, 1):
        raise IndexOutOfRangeError(f"winner index {winner} outside {{0, 1}}")
    if beta <= 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    ratios = policy.group_logprobs(group) - reference.group_logprobs(group)
    if not np.all(np.isfinite(ratios)):
        raise NonFiniteLogRatioError(f"non-finite log-ratio in group {group.prompt_id!r}")
    margin = beta * (ratios[winner] - ratios[1 - winner])
    v = -log_sigmoid(float(margin))
    return LossValue(value=v, per_group=[v])


def lambda_dpo_loss(
    policy: Policy,
    reference: ReferencePolicy,
    group: PromptGroup,
    targets: PreferenceTargets,
    lam: SimplexVector,
    beta: float,
) -> LossValue:
    """Cross-entropy against the lambda-blended target distribution."""
    mixed = mix_targets(targets, lam).mixed
    return listwise_loss(policy, reference, group, mixed, beta)


def listwise_grad(
    policy: Policy,
    reference: ReferencePolicy,
    group: PromptGroup,
    target: np.ndarray,
    beta: float,
) -> GradientVector:
    """Exact gradient of :func:`listwise_loss` w.r.t. the policy parameters."""
    target = _check_target(target, group.n)
    logp = _log_model_dist(policy, reference, group, beta)
    model_dist = np.exp(logp)
    grad = GradientVector()
    for i in range(group.n):
        coeff = -beta * (target[i] - model_dist[i])
        grad.add_scaled(policy.grad_logprob(group, i), coeff)
    return grad


def lambda_dpo_grad(
    policy: Policy,
    reference: ReferencePolicy,
    group: PromptGroup,
    targets: PreferenceTargets,
    lam: SimplexVector,
    beta: float,
) -> GradientVector:
    """Exact gradient of :func:`lambda_dpo_loss`; vanishes where P matches the blend."""
    mixed = mix_targets(targets, lam).mixed
    return listwise_grad(policy, reference, group, mixed, beta)


def finite_diff_grad(loss_fn, policy: Policy, step: float = 1e-5) -> GradientVector:
    """Central-difference gradient of `loss_fn(policy)` over every parameter.

    The verification oracle: it perturbs `policy.values` in place one
    coordinate at a time and restores it afterward. `loss_fn` may return a
    float or a :class:`LossValue`.
    """
    if step <= 0:
        raise ValueError(f"step must be > 0, got {step}")

    def evaluate() -> float:
        out = loss_fn(policy)
        return out.value if isinstance(out, LossValue) else float(out)

    grad = GradientVector()
    theta = policy.values
    for j in range(theta.size):
        orig = theta[j]
        theta[j] = orig + step
        plus = evaluate()
        theta[j] = orig - step
        minus = evaluate()
        theta[j] = orig
        grad[j] = (plus - minus) / (2.0 * step)
    return grad
