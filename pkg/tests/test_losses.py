"""Loss functions, gradients, and their verification oracles."""

import numpy as np
import pytest

from ldpo.dataset import mix_targets, pairwise_target, ratings_to_targets
from ldpo.errors import (
    DimensionMismatchError,
    InvalidTargetError,
    UnsupportedNError,
)
from ldpo.losses import (
    GradientVector,
    bt_prob,
    finite_diff_grad,
    lambda_dpo_grad,
    lambda_dpo_loss,
    listwise_loss,
    pairwise_dpo_loss,
)
from ldpo.policy import ReferencePolicy, TabularPolicy, listwise_distribution
from ldpo.simplex import one_hot, uniform_weights, validate

from conftest import (
    make_group,
    random_loglinear_instance,
    random_tabular_instance,
)


def random_instance(rng, trial, m=None, n=None):
    m = m if m is not None else int(rng.integers(1, 5))
    n = n if n is not None else int(rng.integers(2, 7))
    if trial % 3 == 2:
        return random_loglinear_instance(rng, m=m, n=n, n_features=12)
    with_ref = trial % 2 == 1
    return random_tabular_instance(rng, m=m, n=n, with_ref=with_ref)


class TestBtProb:
    def test_equal_scores_give_half(self):
        assert bt_prob(3.7, 3.7) == pytest.approx(0.5, abs=1e-15)

    def test_unit_margin(self):
        assert bt_prob(1.0, 0.0) == pytest.approx(0.7310585786300049, abs=1e-12)

    def test_complement_identity(self, rng):
        for _ in range(100):
            a, b = rng.normal(0, 10, size=2)
            assert bt_prob(a, b) + bt_prob(b, a) == pytest.approx(1.0, abs=1e-12)

    def test_extreme_margins_do_not_overflow(self):
        assert bt_prob(1000.0, -1000.0) == 1.0
        assert bt_prob(-1000.0, 1000.0) == 0.0


class TestPairwiseDpoLoss:
    def test_matched_policies_give_log_two(self, rng):
        group = make_group(rng, n=2)
        policy = TabularPolicy.for_groups([group])
        loss = pairwise_dpo_loss(policy, ReferencePolicy("uniform"), group, winner=0, beta=0.1)
        assert loss.value == pytest.approx(0.6931471805599453, abs=1e-12)

    def test_closed_form_with_advantage(self, rng):
        group = make_group(rng, n=2)
        policy = TabularPolicy.for_groups([group])
        idx = policy.group_indices(group)
        d = 1.7
        policy.values[idx[0]] = d
        # within-group normalization preserves the logit difference d
        loss = pairwise_dpo_loss(policy, ReferencePolicy("uniform"), group, winner=0, beta=0.1)
        assert loss.value == pytest.approx(np.log(1.0 + np.exp(-0.1 * d)), abs=1e-12)

    def test_reduction_to_listwise_with_one_hot_target(self, rng):
        for trial in range(100):
            group, _, policy, reference = random_instance(rng, trial, n=2)
            winner = int(rng.integers(0, 2))
            beta = float(rng.choice([0.05, 0.1, 1.0]))
            pw = pairwise_dpo_loss(policy, reference, group, winner, beta)
            lw = listwise_loss(policy, reference, group, pairwise_target(winner, 2), beta)
            assert abs(pw.value - lw.value) <= 1e-12

    def test_rejects_other_group_sizes(self, rng):
        group = make_group(rng, n=3)
        policy = TabularPolicy.for_groups([group])
        with pytest.raises(UnsupportedNError):
            pairwise_dpo_loss(policy, ReferencePolicy("uniform"), group, 0, 0.1)


class TestListwiseLoss:
    def test_uniform_target_matched_policy_gives_log_n(self, rng):
        for n in (2, 3, 4, 6):
            group = make_group(rng, n=n)
            policy = TabularPolicy.for_groups([group])
            loss = listwise_loss(policy, ReferencePolicy("uniform"), group, np.full(n, 1.0 / n), 0.1)
            assert loss.value == pytest.approx(np.log(n), abs=1e-12)

    def test_one_hot_target_gives_negative_log_prob(self, rng):
        group, _, policy, reference = random_tabular_instance(rng)
        dist = listwise_distribution(policy, reference, group, 0.5)
        target = np.zeros(group.n)
        target[2] = 1.0
        loss = listwise_loss(policy, reference, group, target, 0.5)
        assert loss.value == pytest.approx(-np.log(dist[2]), abs=1e-10)

    def test_matches_straight_line_recomputation(self, rng):
        # independent scalar oracle straight from raw log-probs
        for trial in range(50):
            group, targets, policy, reference = random_instance(rng, trial)
            target = mix_targets(targets, validate(rng.dirichlet(np.ones(targets.m)))).mixed
            beta = float(rng.choice([0.05, 0.1, 1.0]))
            ell = policy.group_logprobs(group)
            ref = reference.group_logprobs(group)
            u = beta * (ell - ref)
            expected = -sum(
                target[i] * (u[i] - np.log(np.sum(np.exp(u)))) for i in range(group.n)
            )
            got = listwise_loss(policy, reference, group, target, beta)
            assert got.value == pytest.approx(expected, abs=1e-10)
            assert got.per_group == [got.value]

    def test_bounded_below_by_target_entropy(self, rng):
        for trial in range(50):
            group, targets, policy, reference = random_instance(rng, trial)
            target = mix_targets(targets, validate(rng.dirichlet(np.ones(targets.m)))).mixed
            entropy = -float(np.sum(target * np.log(target)))
            loss = listwise_loss(policy, reference, group, target, 0.1)
            assert loss.value >= entropy - 1e-9

    def test_invalid_target_rejected(self, rng):
        group, _, policy, reference = random_tabular_instance(rng)
        with pytest.raises(InvalidTargetError):
            listwise_loss(policy, reference, group, np.array([0.9, 0.3, -0.1, -0.1]), 0.1)
        with pytest.raises(DimensionMismatchError):
            listwise_loss(policy, reference, group, np.array([0.5, 0.5]), 0.1)


class TestLambdaDpoLoss:
    def test_one_hot_lambda_reduces_to_single_dimension(self, rng):
        for k in range(4):
            group, targets, policy, reference = random_tabular_instance(rng)
            full = lambda_dpo_loss(policy, reference, group, targets, one_hot(4, k), 0.1)
            single = listwise_loss(policy, reference, group, targets.per_dim[k], 0.1)
            assert full.value == single.value

    def test_identical_rows_make_lambda_irrelevant(self, rng):
        group, targets, policy, reference = random_tabular_instance(rng)
        targets.per_dim = np.vstack([targets.per_dim[0]] * 4)
        common = listwise_loss(policy, reference, group, targets.per_dim[0], 0.1)
        mixed = lambda_dpo_loss(policy, reference, group, targets, uniform_weights(4), 0.1)
        assert mixed.value == pytest.approx(common.value, abs=1e-12)

    def test_mix_then_loss_equals_weighted_sum_of_losses(self, rng):
        # the summation-order identity, both orderings computed independently
        for trial in range(100):
            group, targets, policy, reference = random_instance(rng, trial)
            lam = validate(rng.dirichlet(np.ones(targets.m)))
            beta = float(rng.choice([0.05, 0.1, 1.0]))
            mixed_path = lambda_dpo_loss(policy, reference, group, targets, lam, beta).value
            weighted_sum = sum(
                lam[k] * listwise_loss(policy, reference, group, targets.per_dim[k], beta).value
                for k in range(targets.m)
            )
            assert abs(mixed_path - weighted_sum) <= 1e-12

    def test_affine_in_lambda_along_segments(self, rng):
        # three collinear weight vectors give collinear losses
        for _ in range(30):
            group, targets, policy, reference = random_tabular_instance(rng)
            l0 = rng.dirichlet(np.ones(4))
            l1 = rng.dirichlet(np.ones(4))
            a = float(rng.uniform())
            lmid = a * l0 + (1 - a) * l1
            v0 = lambda_dpo_loss(policy, reference, group, targets, validate(l0), 0.1).value
            v1 = lambda_dpo_loss(policy, reference, group, targets, validate(l1), 0.1).value
            vmid = lambda_dpo_loss(policy, reference, group, targets, validate(lmid), 0.1).value
            assert abs(vmid - (a * v0 + (1 - a) * v1)) <= 1e-10

    def test_dimension_mismatch(self, rng):
        group, targets, policy, reference = random_tabular_instance(rng)
        with pytest.raises(DimensionMismatchError):
            lambda_dpo_loss(policy, reference, group, targets, validate([1.0]), 0.1)


class TestLambdaDpoGrad:
    def test_zero_gradient_at_matched_distribution(self, rng):
        # tabular policies can represent the blended target exactly
        for _ in range(10):
            group, targets, policy, reference = random_tabular_instance(rng, with_ref=False)
            lam = validate(rng.dirichlet(np.ones(4)))
            mixed = mix_targets(targets, lam).mixed
            beta = float(rng.choice([0.05, 0.1, 1.0]))
            idx = policy.group_indices(group)
            policy.values[idx] = np.log(mixed) / beta
            grad = lambda_dpo_grad(policy, reference, group, targets, lam, beta)
            assert grad.max_norm() <= 1e-10

    def test_matches_finite_differences(self, rng):
        for trial in range(100):
            m = int(rng.integers(1, 5))
            n = int(rng.integers(2, 7))
            group, targets, policy, reference = random_instance(rng, trial, m=m, n=n)
            lam = validate(rng.dirichlet(np.ones(m)))
            beta = float(rng.choice([0.05, 0.1, 1.0]))
            analytic = lambda_dpo_grad(policy, reference, group, targets, lam, beta)
            numeric = finite_diff_grad(
                lambda pol: lambda_dpo_loss(pol, reference, group, targets, lam, beta),
                policy,
                step=1e-5,
            )
            dense_a = analytic.to_dense(policy.n_params)
            dense_n = numeric.to_dense(policy.n_params)
            scale = max(np.max(np.abs(dense_n)), 1e-8)
            assert np.max(np.abs(dense_a - dense_n)) / scale <= 1e-6

    def test_beta_scaling_at_matched_reference(self, rng):
        # at matching policy and reference the (target - P) factor is
        # beta-independent, so the gradient scales exactly with beta
        group = make_group(rng)
        targets = ratings_to_targets(group)
        lam = validate(rng.dirichlet(np.ones(4)))
        policy = TabularPolicy.for_groups([group])
        g1 = lambda_dpo_grad(policy, ReferencePolicy("uniform"), group, targets, lam, 0.1)
        g2 = lambda_dpo_grad(policy, ReferencePolicy("uniform"), group, targets, lam, 0.2)
        for j in g1:
            assert abs(2.0 * g1[j] - g2[j]) <= 1e-10

    def test_reference_rescaling_leaves_loss_and_grad_unchanged(self, rng):
        # multiplying all reference probabilities in a group by a constant
        # shifts every log-ratio equally and cancels in the softmax
        for _ in range(50):
            group, targets, policy, _ = random_tabular_instance(rng, with_ref=True)
            reference = ReferencePolicy("from_data")
            lam = validate(rng.dirichlet(np.ones(4)))
            base_loss = lambda_dpo_loss(policy, reference, group, targets, lam, 0.1).value
            base_grad = lambda_dpo_grad(policy, reference, group, targets, lam, 0.1)
            shift = float(np.log(rng.uniform(0.1, 10.0)))
            for c in group.candidates:
                c.ref_logprob += shift
            new_loss = lambda_dpo_loss(policy, reference, group, targets, lam, 0.1).value
            new_grad = lambda_dpo_grad(policy, reference, group, targets, lam, 0.1)
            assert abs(new_loss - base_loss) <= 1e-12
            for j in base_grad:
                assert abs(new_grad[j] - base_grad[j]) <= 1e-12


class TestFiniteDiffGrad:
    def test_quadratic(self):
        class Point:
            def __init__(self):
                self.values = np.array([3.0])

        grad = finite_diff_grad(lambda p: float(p.values[0] ** 2), Point(), step=1e-5)
        assert grad[0] == pytest.approx(6.0, abs=1e-8)

    def test_constant_loss_gives_zero(self, rng):
        group, _, policy, _ = random_tabular_instance(rng)
        grad = finite_diff_grad(lambda p: 4.2, policy, step=1e-5)
        assert grad.max_norm() == 0.0

    def test_two_step_sizes_agree(self, rng):
        group, targets, policy, reference = random_tabular_instance(rng)
        lam = uniform_weights(4)
        loss_fn = lambda pol: lambda_dpo_loss(pol, reference, group, targets, lam, 0.1)
        g5 = finite_diff_grad(loss_fn, policy, step=1e-5)
        g6 = finite_diff_grad(loss_fn, policy, step=1e-6)
        for j in g5:
            assert g5[j] == pytest.approx(g6[j], abs=1e-7)

    def test_restores_parameters(self, rng):
        group, targets, policy, reference = random_tabular_instance(rng)
        before = policy.values.copy()
        finite_diff_grad(
            lambda pol: lambda_dpo_loss(pol, reference, group, targets, uniform_weights(4), 0.1),
            policy,
        )
        assert policy.values.tobytes() == before.tobytes()


class TestGradientVector:
    def test_add_scaled_and_max_norm(self):
        g = GradientVector()
        g.add_scaled({0: 1.0, 2: -3.0}, 2.0)
        g.add_scaled({0: 0.5}, -1.0)
        assert g[0] == pytest.approx(1.5)
        assert g[2] == pytest.approx(-6.0)
        assert g.max_norm() == pytest.approx(6.0)

    def test_to_dense(self):
        g = GradientVector({1: 2.0})
        np.testing.assert_allclose(g.to_dense(3), [0.0, 2.0, 0.0])
