"""Multi-dimensional preference data and listwise target construction.

The on-disk format is JSONL: one prompt group per line, each group holding a
prompt and N >= 2 candidate completions scored along the same named
dimensions, e.g.

    {"prompt_id": "p0", "prompt": "...", "candidates": [
        {"id": "a", "text": "...", "scores": {"helpfulness": 4, "honesty": 5},
         "ref_logprob": -12.3},
        ...]}

Unknown top-level fields are ignored. Per-dimension ratings become listwise
target distributions via a temperature softmax, and a simplex weight vector
mixes those per-dimension distributions into a single training target.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatchError,
    DuplicateCandidateIdError,
    IndexOutOfRangeError,
    MissingDimensionError,
    NonFiniteScoreError,
    ParseError,
    TooFewCandidatesError,
    UnsupportedNError,
)
from .numerics import softmax
from .simplex import SimplexVector

# Default dimension names for four-way rated preference data.
DEFAULT_DIMENSIONS = ("helpfulness", "honesty", "instruction_following", "fluency")


@dataclass
class Candidate:
    """One completion: an id, its per-dimension ratings, and optional metadata."""

    id: str
    scores: dict[str, float]
    text: str = ""
    ref_logprob: float | None = None


@dataclass
class PromptGroup:
    """One prompt with its N >= 2 candidate completions."""

    prompt_id: str
    prompt: str
    candidates: list[Candidate]

    def __post_init__(self) -> None:
        if len(self.candidates) < 2:
            raise TooFewCandidatesError(
                f"group {self.prompt_id!r} has {len(self.candidates)} candidate(s); need >= 2"
            )
        ids = [c.id for c in self.candidates]
        if len(set(ids)) != len(ids):
            dup = next(i for i in ids if ids.count(i) > 1)
            raise DuplicateCandidateIdError(f"group {self.prompt_id!r} repeats candidate id {dup!r}")

    @property
    def n(self) -> int:
        return len(self.candidates)

    def dimension_names(self) -> list[str]:
        """Score keys of the first candidate, in insertion order."""
        return list(self.candidates[0].scores.keys())


@dataclass
class PreferenceTargets:
    """Per-dimension listwise distributions and, once mixed, their blend.

    `per_dim` is an (m, N) array whose rows are probability distributions
    over the group's candidates; `mixed` is filled by :func:`mix_targets`.
    """

    dimensions: list[str]
    per_dim: np.ndarray
    mixed: np.ndarray | None = None

    @property
    def m(self) -> int:
        return int(self.per_dim.shape[0])

    @property
    def n(self) -> int:
        return int(self.per_dim.shape[1])


def load_jsonl(path: str | Path, declared_dims: Sequence[str] | None = None) -> list[PromptGroup]:
    """Parse a JSONL dataset, validating each line against the declared dimensions.

    With `declared_dims=None` the dimension names are inferred from the first
    candidate of the first line (JSON key order). Extra score keys are
    dropped; a missing declared dimension is an error.
    """
    path = Path(path)
    groups: list[PromptGroup] = []
    dims = list(declared_dims) if declared_dims is not None else None
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            groups.append(_parse_group(raw, lineno, dims, path))
            if dims is None:
                dims = groups[-1].dimension_names()
    return groups


def _parse_group(raw: object, lineno: int, dims: list[str] | None, path: Path) -> PromptGroup:
    if not isinstance(raw, dict):
        raise ParseError(f"{path}:{lineno}: expected a JSON object")
    try:
        prompt_id = str(raw["prompt_id"])
        prompt = str(raw.get("prompt", ""))
        raw_candidates = raw["candidates"]
    except KeyError as exc:
        raise ParseError(f"{path}:{lineno}: missing field {exc.args[0]!r}") from exc
    if not isinstance(raw_candidates, list):
        raise ParseError(f"{path}:{lineno}: 'candidates' must be a list")
    if len(raw_candidates) < 2:
        raise TooFewCandidatesError(f"{path}:{lineno}: group {prompt_id!r} needs >= 2 candidates")

    candidates: list[Candidate] = []
    seen_ids: set[str] = set()
    for c in raw_candidates:
        if not isinstance(c, dict) or "id" not in c or "scores" not in c:
            raise ParseError(f"{path}:{lineno}: each candidate needs 'id' and 'scores'")
        cid = str(c["id"])
        if cid in seen_ids:
            raise DuplicateCandidateIdError(f"{path}:{lineno}: duplicate candidate id {cid!r}")
        seen_ids.add(cid)
        raw_scores = c["scores"]
        if not isinstance(raw_scores, dict):
            raise ParseError(f"{path}:{lineno}: candidate {cid!r} 'scores' must be an object")
        wanted = dims if dims is not None else list(raw_scores.keys())
        scores: dict[str, float] = {}
        for d in wanted:
            if d not in raw_scores:
                raise MissingDimensionError(f"{path}:{lineno}: candidate {cid!r} lacks dimension {d!r}")
            try:
                scores[d] = float(raw_scores[d])
            except (TypeError, ValueError) as exc:
                raise ParseError(f"{path}:{lineno}: score {d!r} of candidate {cid!r} is not numeric") from exc
        ref_logprob = c.get("ref_logprob")
        if ref_logprob is not None:
            ref_logprob = float(ref_logprob)
            if not np.isfinite(ref_logprob):
                raise ParseError(f"{path}:{lineno}: ref_logprob of candidate {cid!r} is not finite")
        candidates.append(Candidate(id=cid, scores=scores, text=str(c.get("text", "")), ref_logprob=ref_logprob))
    return PromptGroup(prompt_id=prompt_id, prompt=prompt, candidates=candidates)


def ratings_to_targets(
    group: PromptGroup,
    temperature: float = 1.0,
    dims: Sequence[str] | None = None,
    mode: str = "softmax",
) -> PreferenceTargets:
    """Turn per-dimension ratings into per-dimension listwise distributions.

    The default map is a temperature softmax over each dimension's scores,
    p_i = exp(s_i / T) / sum_j exp(s_j / T), computed with max-subtraction.
    It is order-preserving, invariant to shifting all scores in a dimension,
    and approaches a one-hot distribution on the argmax as T -> 0.

    `mode="normalized"` instead divides nonnegative scores by their sum; it
    exists for sensitivity experiments and is not shift-invariant.
    """
    if temperature <= 0:
        raise ValueError(f"temperature must be > 0, got {temperature}")
    if mode not in ("softmax", "normalized"):
        raise ValueError(f"unknown mode {mode!r}")
    names = list(dims) if dims is not None else group.dimension_names()
    if not names:
        raise MissingDimensionError(f"group {group.prompt_id!r} declares no dimensions")
    rows = np.empty((len(names), group.n))
    for k, name in enumerate(names):
        for i, cand in enumerate(group.candidates):
            if name not in cand.scores:
                raise MissingDimensionError(
                    f"group {group.prompt_id!r} candidate {cand.id!r} lacks dimension {name!r}"
                )
            rows[k, i] = cand.scores[name]
    if not np.all(np.isfinite(rows)):
        raise NonFiniteScoreError(f"group {group.prompt_id!r} has non-finite scores")
    if mode == "softmax":
        per_dim = np.vstack([softmax(rows[k] / temperature) for k in range(len(names))])
    else:
        if np.any(rows < 0):
            raise ValueError("normalized mode requires nonnegative scores")
        sums = rows.sum(axis=1, keepdims=True)
        if np.any(sums <= 0):
            raise ValueError("normalized mode requires a positive score sum per dimension")
        per_dim = rows / sums
    return PreferenceTargets(dimensions=names, per_dim=per_dim)


def mix_targets(targets: PreferenceTargets, lam: SimplexVector) -> PreferenceTargets:
    """Blend the per-dimension distributions with simplex weights.

    mixed_i = sum_k lam_k * per_dim[k, i]. A convex combination of
    distributions is again a distribution, and a one-hot lam reproduces the
    corresponding per-dimension row bit for bit.
    """
    if lam.m != targets.m:
        raise DimensionMismatchError(f"lambda has {lam.m} entries, targets have {targets.m} dimensions")
    mixed = lam.weights @ targets.per_dim
    return PreferenceTargets(dimensions=list(targets.dimensions), per_dim=targets.per_dim, mixed=mixed)


def pairwise_target(winner_index: int, n: int) -> np.ndarray:
    """Hard winner/loser supervision as a degenerate two-candidate distribution."""
    if n != 2:
        raise UnsupportedNError(f"pairwise targets are defined for exactly 2 candidates, got {n}")
    if winner_index not in (0, 1):
        raise IndexOutOfRangeError(f"winner index {winner_index} outside {{0, 1}}")
    target = np.zeros(2)
    target[winner_index] = 1.0
    return target
