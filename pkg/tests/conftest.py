"""Shared fixtures and synthetic-data builders for the test suite."""

import json
from pathlib import Path

import numpy as np
import pytest

from ldpo.dataset import Candidate, PromptGroup, ratings_to_targets
from ldpo.policy import LogLinearPolicy, ReferencePolicy, TabularPolicy

DIMS4 = ("helpfulness", "honesty", "instruction_following", "fluency")

_WORDS = (
    "river stone cloud ember quartz willow falcon harbor meadow lantern "
    "cinder orchard thistle breeze summit hollow"
).split()


def make_group(rng, prompt_id="p0", n=4, dims=DIMS4, with_ref=False, score_lo=1.0, score_hi=5.0):
    """One synthetic prompt group with random ratings (and texts for features)."""
    candidates = []
    for i in range(n):
        words = rng.choice(_WORDS, size=5, replace=True)
        scores = {d: float(rng.uniform(score_lo, score_hi)) for d in dims}
        ref = float(rng.uniform(-6.0, -1.0)) if with_ref else None
        candidates.append(
            Candidate(id=f"c{i}", scores=scores, text=" ".join(words.tolist()), ref_logprob=ref)
        )
    return PromptGroup(prompt_id=prompt_id, prompt=f"prompt {prompt_id}", candidates=candidates)


def make_groups(rng, count=10, n=4, dims=DIMS4, with_ref=False):
    return [make_group(rng, prompt_id=f"p{j}", n=n, dims=dims, with_ref=with_ref) for j in range(count)]


def group_to_json(group):
    return {
        "prompt_id": group.prompt_id,
        "prompt": group.prompt,
        "candidates": [
            {
                "id": c.id,
                "text": c.text,
                "scores": c.scores,
                **({"ref_logprob": c.ref_logprob} if c.ref_logprob is not None else {}),
            }
            for c in group.candidates
        ],
    }


def write_jsonl(path, groups):
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for g in groups:
            fh.write(json.dumps(group_to_json(g)) + "\n")
    return path


def random_tabular_instance(rng, m=4, n=4, with_ref=False, logit_scale=2.0):
    """A (group, targets, policy, reference) quadruple with random logits."""
    dims = DIMS4[:m]
    group = make_group(rng, n=n, dims=dims, with_ref=with_ref)
    targets = ratings_to_targets(group)
    policy = TabularPolicy.for_groups([group])
    policy.values[:] = rng.uniform(-logit_scale, logit_scale, size=policy.n_params)
    reference = ReferencePolicy("from_data" if with_ref else "uniform")
    return group, targets, policy, reference


def random_loglinear_instance(rng, m=4, n=4, n_features=32):
    dims = DIMS4[:m]
    group = make_group(rng, n=n, dims=dims)
    targets = ratings_to_targets(group)
    policy = LogLinearPolicy(n_features=n_features, feature_seed=7)
    policy.values[:] = rng.normal(0.0, 0.5, size=policy.n_params)
    return group, targets, policy, ReferencePolicy("uniform")


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
