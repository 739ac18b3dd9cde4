"""Toy trainable policies and the beta-scaled listwise model distribution.

Policies here are normalized within each candidate group rather than over an
open-ended output space: only within-group log-ratios against the reference
enter the objective, so nothing the loss consumes is lost. Two kinds exist:

* `TabularPolicy` stores one free logit per (prompt, candidate) pair and can
  therefore represent any listwise distribution exactly, which makes it the
  testbed for exact-convergence and stationarity checks.
* `LogLinearPolicy` scores candidates with a weight vector over hashed
  character-trigram features; its capacity is deliberately limited.

Both expose a flat `values` array (the trainable parameters), per-group
log-probabilities, and the exact analytic gradient of a single candidate's
log-probability, keyed by flat parameter index.
"""

from __future__ import annotations

import json
import zlib
from pathlib import Path
from typing import Callable

import numpy as np

from .dataset import PromptGroup
from .errors import (
    IndexOutOfRangeError,
    MissingParameterError,
    NonFiniteLogRatioError,
    ParseError,
)
from .numerics import log_softmax, softmax

CHECKPOINT_FORMAT = "ldpo-policy"

FeatureFn = Callable[[str, str], np.ndarray]


def char_trigram_features(prompt: str, text: str, n_features: int = 256, seed: int = 0) -> np.ndarray:
    """Hashed bag of character trigrams of `text`, l2-normalized.

    The hash is seeded CRC32, so features depend only on (seed, text) and are
    stable across processes. An empty or too-short text maps to the zero
    vector. `prompt` is accepted for signature compatibility but unused.
    """
    del prompt
    counts = np.zeros(n_features)
    for i in range(len(text) - 2):
        bucket = zlib.crc32(f"{seed}:{text[i:i + 3]}".encode("utf-8")) % n_features
        counts[bucket] += 1.0
    norm = np.linalg.norm(counts)
    if norm > 0:
        counts /= norm
    return counts


class TabularPolicy:
    """One unnormalized log-score per (prompt_id, candidate_id) pair."""

    kind = "tabular"

    def __init__(self, entries: dict[tuple[str, str], float]):
        if not entries:
            raise MissingParameterError("tabular policy needs at least one entry")
        self._keys = list(entries.keys())
        self._index = {key: i for i, key in enumerate(self._keys)}
        self.values = np.array([float(entries[k]) for k in self._keys])

    @classmethod
    def for_groups(cls, groups: list[PromptGroup], init: float = 0.0) -> "TabularPolicy":
        """A fresh policy with one parameter per candidate, all set to `init`."""
        return cls({(g.prompt_id, c.id): init for g in groups for c in g.candidates})

    @property
    def n_params(self) -> int:
        return self.values.size

    def param_names(self) -> list[str]:
        return [f"{pid}/{cid}" for pid, cid in self._keys]

    def group_indices(self, group: PromptGroup) -> np.ndarray:
        try:
            return np.array([self._index[(group.prompt_id, c.id)] for c in group.candidates])
        except KeyError as exc:
            raise MissingParameterError(f"no stored logit for (prompt, candidate) {exc.args[0]!r}") from exc

    def group_logprobs(self, group: PromptGroup) -> np.ndarray:
        """log pi(y_i | x) for every candidate: logits normalized within the group."""
        return log_softmax(self.values[self.group_indices(group)])

    def grad_logprob(self, group: PromptGroup, i: int) -> dict[int, float]:
        """d log pi(y_i | x) / d theta: indicator minus the within-group softmax."""
        idx = self.group_indices(group)
        s = softmax(self.values[idx])
        return {int(idx[a]): (1.0 if a == i else 0.0) - float(s[a]) for a in range(len(idx))}


class LogLinearPolicy:
    """Candidate scores w . phi(x, y), normalized within each group."""

    kind = "log_linear"

    def __init__(
        self,
        n_features: int = 256,
        feature_seed: int = 0,
        weights: np.ndarray | None = None,
        feature_fn: FeatureFn | None = None,
    ):
        if n_features < 1:
            raise ValueError(f"n_features must be >= 1, got {n_features}")
        self.n_features = int(n_features)
        self.feature_seed = int(feature_seed)
        if weights is None:
            self.values = np.zeros(self.n_features)
        else:
            self.values = np.array(weights, dtype=float)
            if self.values.shape != (self.n_features,):
                raise ValueError(f"weights shape {self.values.shape} != ({self.n_features},)")
        if feature_fn is None:
            self._feature_fn: FeatureFn = lambda prompt, text: char_trigram_features(
                prompt, text, self.n_features, self.feature_seed
            )
            self._default_features = True
        else:
            self._feature_fn = feature_fn
            self._default_features = False
        self._cache: dict[tuple[str, str], np.ndarray] = {}

    @property
    def n_params(self) -> int:
        return self.values.size

    def param_names(self) -> list[str]:
        return [f"w{j}" for j in range(self.n_features)]

    def features(self, group: PromptGroup) -> np.ndarray:
        """(N, F) feature matrix; memoized since the feature map is pure."""
        rows = []
        for cand in group.candidates:
            key = (group.prompt, cand.text)
            if key not in self._cache:
                phi = np.asarray(self._feature_fn(group.prompt, cand.text), dtype=float)
                if phi.shape != (self.n_features,):
                    raise ValueError(f"feature_fn returned shape {phi.shape}, expected ({self.n_features},)")
                self._cache[key] = phi
            rows.append(self._cache[key])
        return np.vstack(rows)

    def group_logprobs(self, group: PromptGroup) -> np.ndarray:
        return log_softmax(self.features(group) @ self.values)

    def grad_logprob(self, group: PromptGroup, i: int) -> dict[int, float]:
        """phi(x, y_i) minus the softmax-weighted mean feature vector."""
        phi = self.features(group)
        s = softmax(phi @ self.values)
        g = phi[i] - s @ phi
        return {j: float(g[j]) for j in range(self.n_features)}


class ReferencePolicy:
    """Frozen baseline; only log-ratios against it enter the objective.

    `uniform` mode assigns every candidate in a group the same probability,
    so the model distribution reduces to a softmax of beta-scaled policy
    log-probabilities. `from_data` mode reads the per-candidate
    `ref_logprob` values stored in the dataset (raw, not renormalized:
    only differences matter downstream, and a common rescaling of all
    reference probabilities in a group provably cancels).
    """

    MODES = ("uniform", "from_data")

    def __init__(self, mode: str = "uniform"):
        if mode not in self.MODES:
            raise ValueError(f"mode must be one of {self.MODES}, got {mode!r}")
        self.mode = mode

    def group_logprobs(self, group: PromptGroup) -> np.ndarray:
        if self.mode == "uniform":
            return np.full(group.n, -np.log(group.n))
        out = np.empty(group.n)
        for i, cand in enumerate(group.candidates):
            if cand.ref_logprob is None:
                raise MissingParameterError(
                    f"candidate {cand.id!r} in group {group.prompt_id!r} has no ref_logprob"
                )
            out[i] = cand.ref_logprob
        return out


Policy = TabularPolicy | LogLinearPolicy


def logprob(policy: Policy, group: PromptGroup, candidate_index: int) -> float:
    """log pi(y_i | x) for one candidate under the policy's within-group normalization."""
    if not 0 <= candidate_index < group.n:
        raise IndexOutOfRangeError(f"candidate index {candidate_index} outside [0, {group.n})")
    return float(policy.group_logprobs(group)[candidate_index])


def grad_logprob(policy: Policy, group: PromptGroup, candidate_index: int) -> dict[int, float]:
    """Exact gradient of :func:`logprob` w.r.t. every policy parameter (sparse)."""
    if not 0 <= candidate_index < group.n:
        raise IndexOutOfRangeError(f"candidate index {candidate_index} outside [0, {group.n})")
    return policy.grad_logprob(group, candidate_index)


def listwise_distribution(
    policy: Policy, reference: ReferencePolicy, group: PromptGroup, beta: float
) -> np.ndarray:
    """Model distribution over a group: softmax of beta-scaled log-ratios.

    P(y_i | x) proportional to (pi(y_i|x) / pi_ref(y_i|x)) ** beta, computed
    entirely in log space so only |log-ratio| > ~700/beta could overflow.
    Adding a constant to every candidate's policy (or reference) log-prob
    leaves the result unchanged.
    """
    if beta <= 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    ratios = policy.group_logprobs(group) - reference.group_logprobs(group)
    if not np.all(np.isfinite(ratios)):
        raise NonFiniteLogRatioError(f"non-finite log-ratio in group {group.prompt_id!r}: {ratios.tolist()}")
    return softmax(beta * ratios)


def save_checkpoint(policy: Policy, path: str | Path) -> None:
    """Write parameters plus a small header; the round-trip is bit-exact.

    JSON serializes floats with shortest round-trip repr, so reloading
    reproduces every parameter bit for bit.
    """
    if isinstance(policy, TabularPolicy):
        payload = {
            "format": CHECKPOINT_FORMAT,
            "version": 1,
            "kind": policy.kind,
            "entries": [[pid, cid, float(v)] for (pid, cid), v in zip(policy._keys, policy.values)],
        }
    elif isinstance(policy, LogLinearPolicy):
        if not policy._default_features:
            raise ValueError("checkpoints support only the built-in trigram feature map")
        payload = {
            "format": CHECKPOINT_FORMAT,
            "version": 1,
            "kind": policy.kind,
            "n_features": policy.n_features,
            "feature_seed": policy.feature_seed,
            "weights": [float(v) for v in policy.values],
        }
    else:
        raise TypeError(f"cannot checkpoint {type(policy).__name__}")
    Path(path).write_text(json.dumps(payload, indent=1), encoding="utf-8")


def load_checkpoint(path: str | Path) -> Policy:
    """Rebuild a policy from :func:`save_checkpoint` output."""
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON ({exc.msg})") from exc
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise ParseError(f"{path}: not an ldpo policy checkpoint")
    kind = payload.get("kind")
    if kind == TabularPolicy.kind:
        entries = {(str(pid), str(cid)): float(v) for pid, cid, v in payload["entries"]}
        return TabularPolicy(entries)
    if kind == LogLinearPolicy.kind:
        return LogLinearPolicy(
            n_features=int(payload["n_features"]),
            feature_seed=int(payload["feature_seed"]),
            weights=np.array(payload["weights"], dtype=float),
        )
    raise ParseError(f"{path}: unknown policy kind {kind!r}")
