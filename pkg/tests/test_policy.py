"""Policies, the model distribution, and gradient correctness."""

import numpy as np
import pytest

from ldpo.dataset import Candidate, PromptGroup
from ldpo.errors import MissingParameterError, NonFiniteLogRatioError
from ldpo.losses import finite_diff_grad
from ldpo.policy import (
    LogLinearPolicy,
    ReferencePolicy,
    TabularPolicy,
    char_trigram_features,
    grad_logprob,
    listwise_distribution,
    load_checkpoint,
    logprob,
    save_checkpoint,
)

from conftest import make_group, random_loglinear_instance, random_tabular_instance


def two_candidate_group(ref=(None, None)):
    return PromptGroup(
        prompt_id="p",
        prompt="",
        candidates=[
            Candidate(id="a", scores={"d": 1.0}, ref_logprob=ref[0]),
            Candidate(id="b", scores={"d": 0.0}, ref_logprob=ref[1]),
        ],
    )


class TestLogprob:
    def test_tabular_equal_logits_are_uniform(self, rng):
        group = make_group(rng, n=4)
        policy = TabularPolicy.for_groups([group])
        for i in range(4):
            assert logprob(policy, group, i) == pytest.approx(np.log(0.25), abs=1e-15)

    def test_loglinear_zero_weights_are_uniform(self, rng):
        group = make_group(rng, n=5)
        policy = LogLinearPolicy(n_features=16)
        for i in range(5):
            assert logprob(policy, group, i) == pytest.approx(np.log(0.2), abs=1e-15)

    def test_tabular_two_logits_log_sum_exp(self):
        # logits (0, 1): log-probs are (-log(1+e), 1-log(1+e))
        group = two_candidate_group()
        policy = TabularPolicy({("p", "a"): 0.0, ("p", "b"): 1.0})
        assert logprob(policy, group, 0) == pytest.approx(-1.3132616875182228, abs=1e-12)
        assert logprob(policy, group, 1) == pytest.approx(-0.3132616875182228, abs=1e-12)

    def test_missing_tabular_entry(self, rng):
        group = make_group(rng)
        policy = TabularPolicy({("other", "c0"): 0.0})
        with pytest.raises(MissingParameterError):
            logprob(policy, group, 0)


class TestListwiseDistribution:
    def test_policy_equals_reference_gives_uniform(self, rng):
        group = make_group(rng, n=4, with_ref=True)
        policy = TabularPolicy.for_groups([group])
        # make the policy match the stored reference exactly
        idx = policy.group_indices(group)
        for i, c in enumerate(group.candidates):
            policy.values[idx[i]] = c.ref_logprob
        for beta in (0.05, 0.1, 1.0, 7.0):
            dist = listwise_distribution(policy, ReferencePolicy("from_data"), group, beta)
            np.testing.assert_allclose(dist, 0.25, atol=1e-12)

    def test_two_way_closed_form(self, rng):
        group = two_candidate_group()
        d = 0.8
        policy = TabularPolicy({("p", "a"): d, ("p", "b"): 0.0})
        for beta in (0.1, 1.0, 3.0):
            dist = listwise_distribution(policy, ReferencePolicy("uniform"), group, beta)
            sig = 1.0 / (1.0 + np.exp(-beta * d))
            np.testing.assert_allclose(dist, [sig, 1.0 - sig], atol=1e-12)

    def test_shift_invariance_in_policy_logits(self, rng):
        group, _, policy, reference = random_tabular_instance(rng)
        base = listwise_distribution(policy, reference, group, 0.7)
        policy.values[policy.group_indices(group)] += 13.5
        shifted = listwise_distribution(policy, reference, group, 0.7)
        np.testing.assert_allclose(shifted, base, atol=1e-12)

    def test_sums_to_one(self, rng):
        for _ in range(20):
            group, _, policy, reference = random_tabular_instance(
                rng, n=int(rng.integers(2, 7)), logit_scale=5.0
            )
            dist = listwise_distribution(policy, reference, group, 0.3)
            assert abs(dist.sum() - 1.0) <= 1e-12

    def test_beta_monotonicity_on_argmax(self, rng):
        for _ in range(10):
            group, _, policy, reference = random_tabular_instance(rng)
            ratios = policy.group_logprobs(group) - reference.group_logprobs(group)
            best = int(np.argmax(ratios))
            last = 0.0
            for beta in (0.1, 0.5, 1.0, 2.0, 4.0):
                dist = listwise_distribution(policy, reference, group, beta)
                assert dist[best] > last
                last = dist[best]

    def test_non_finite_ratio_rejected(self, rng):
        group = make_group(rng)
        policy = TabularPolicy.for_groups([group])
        policy.values[0] = np.inf
        with pytest.raises(NonFiniteLogRatioError):
            listwise_distribution(policy, ReferencePolicy("uniform"), group, 0.1)


class TestGradLogprob:
    def test_tabular_uniform_two_candidates(self):
        group = two_candidate_group()
        policy = TabularPolicy({("p", "a"): 0.0, ("p", "b"): 0.0})
        grad = grad_logprob(policy, group, 0)
        assert grad[0] == pytest.approx(0.5, abs=1e-15)
        assert grad[1] == pytest.approx(-0.5, abs=1e-15)

    def test_loglinear_one_hot_features(self):
        group = two_candidate_group()
        policy = LogLinearPolicy(
            n_features=2,
            feature_fn=lambda prompt, text: np.array([1.0, 0.0]) if text == "" else np.array([0.0, 1.0]),
        )
        group.candidates[1].text = "x"
        grad = grad_logprob(policy, group, 0)
        assert grad[0] == pytest.approx(0.5, abs=1e-15)
        assert grad[1] == pytest.approx(-0.5, abs=1e-15)

    def test_matches_finite_differences(self, rng):
        # central-difference oracle over randomized instances of both kinds
        for trial in range(100):
            n = int(rng.integers(2, 7))
            if trial % 2 == 0:
                group, _, policy, _ = random_tabular_instance(rng, n=n)
            else:
                group, _, policy, _ = random_loglinear_instance(rng, n=n, n_features=12)
            i = int(rng.integers(0, n))
            analytic = grad_logprob(policy, group, i)
            numeric = finite_diff_grad(lambda pol: logprob(pol, group, i), policy, step=1e-5)
            dense_a = np.zeros(policy.n_params)
            for j, g in analytic.items():
                dense_a[j] = g
            dense_n = numeric.to_dense(policy.n_params)
            scale = max(np.max(np.abs(dense_n)), 1e-8)
            assert np.max(np.abs(dense_a - dense_n)) / scale <= 1e-6


class TestTrigramFeatures:
    def test_deterministic(self):
        a = char_trigram_features("p", "hello world", 64, seed=3)
        b = char_trigram_features("p", "hello world", 64, seed=3)
        assert a.tobytes() == b.tobytes()

    def test_l2_normalized(self):
        phi = char_trigram_features("p", "some candidate text", 128)
        assert np.linalg.norm(phi) == pytest.approx(1.0, abs=1e-12)

    def test_short_text_is_zero_vector(self):
        assert not char_trigram_features("p", "ab", 64).any()

    def test_seed_changes_hash(self):
        a = char_trigram_features("p", "hello world", 256, seed=0)
        b = char_trigram_features("p", "hello world", 256, seed=1)
        assert a.tobytes() != b.tobytes()


class TestCheckpoints:
    def test_tabular_round_trip_bit_exact(self, rng, tmp_path):
        group, _, policy, _ = random_tabular_instance(rng)
        path = tmp_path / "policy.json"
        save_checkpoint(policy, path)
        loaded = load_checkpoint(path)
        assert isinstance(loaded, TabularPolicy)
        assert loaded.values.tobytes() == policy.values.tobytes()
        assert loaded.param_names() == policy.param_names()
        save_checkpoint(loaded, tmp_path / "again.json")
        assert (tmp_path / "again.json").read_bytes() == path.read_bytes()

    def test_loglinear_round_trip_bit_exact(self, rng, tmp_path):
        _, _, policy, _ = random_loglinear_instance(rng, n_features=32)
        path = tmp_path / "policy.json"
        save_checkpoint(policy, path)
        loaded = load_checkpoint(path)
        assert isinstance(loaded, LogLinearPolicy)
        assert loaded.values.tobytes() == policy.values.tobytes()
        assert loaded.n_features == policy.n_features
        assert loaded.feature_seed == policy.feature_seed

    def test_loaded_policy_reproduces_logprobs(self, rng, tmp_path):
        group, _, policy, _ = random_loglinear_instance(rng, n_features=32)
        save_checkpoint(policy, tmp_path / "p.json")
        loaded = load_checkpoint(tmp_path / "p.json")
        assert loaded.group_logprobs(group).tobytes() == policy.group_logprobs(group).tobytes()

    def test_rejects_foreign_json(self, tmp_path):
        path = tmp_path / "other.json"
        path.write_text('{"kind": "tabular"}', encoding="utf-8")
        from ldpo.errors import ParseError

        with pytest.raises(ParseError):
            load_checkpoint(path)


class TestReferencePolicy:
    def test_uniform_logprobs(self, rng):
        group = make_group(rng, n=5)
        np.testing.assert_allclose(
            ReferencePolicy("uniform").group_logprobs(group), np.log(0.2), atol=1e-15
        )

    def test_from_data_requires_ref_logprob(self, rng):
        group = make_group(rng, with_ref=False)
        with pytest.raises(MissingParameterError):
            ReferencePolicy("from_data").group_logprobs(group)

    def test_from_data_returns_stored_values(self, rng):
        group = make_group(rng, with_ref=True)
        out = ReferencePolicy("from_data").group_logprobs(group)
        assert out.tolist() == [c.ref_logprob for c in group.candidates]

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError):
            ReferencePolicy("other")
