import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from llp_lab.data import Bag, ConstantHypothesis, FunctionHypothesis, MarginalInfo, Mode
from llp_lab.errors import DimensionMismatch, MissingMarginal, ThetaOutOfRange
from llp_lab.losses import (
    DEFAULT_CLAMP_EPS,
    EASYLLP,
    LI_ET_AL,
    OURS_UNCLIPPED,
    VANILLA_SQ,
    LossKind,
    ThresholdMode,
    bag_losses,
    bag_stat,
    clipping_threshold,
    easyllp_example_terms,
    easyllp_loss,
    li_loss,
    linear_bag_loss_and_grad,
    ours_clipped,
    ours_clipped_kind,
    ours_unclipped,
    vanilla_ce,
    vanilla_sq,
)

IDENTITY = FunctionHypothesis(lambda X: X[:, 0], id=1)


@pytest.fixture
def worked():
    """k=2, alpha=0.5, p=0.4, h-values (0.2, 0.6), E[h]=0.3."""
    return IDENTITY, Bag([[0.2], [0.6]], 0.5), MarginalInfo(0.4, {1: 0.3})


class TestBagStat:
    def test_worked_example(self, worked):
        ka, e = bag_stat(*worked)
        assert ka == pytest.approx(0.2, abs=1e-15)
        assert e == pytest.approx(0.2, abs=1e-15)

    def test_centered_at_marginal(self):
        h = ConstantHypothesis(0.5, id=2)
        ka, e = bag_stat(h, Bag([[0.0], [1.0]], 0.5), MarginalInfo(0.5, {2: 0.5}))
        assert (ka, e) == (0.0, 0.0)

    def test_single_example(self):
        ka, e = bag_stat(IDENTITY, Bag([[0.3]], 1.0), MarginalInfo(0.0, {1: 0.0}))
        assert (ka, e) == pytest.approx((1.0, 0.3))

    def test_missing_marginal(self):
        with pytest.raises(MissingMarginal):
            bag_stat(IDENTITY, Bag([[0.3]], 1.0), MarginalInfo(0.0))


class TestOurs:
    def test_worked_example(self, worked):
        assert ours_unclipped(*worked).value == pytest.approx(0.01, abs=1e-15)

    def test_perfect_bag(self):
        h = FunctionHypothesis(lambda X: X[:, 0], id=4)
        bag = Bag([[1.0], [0.0], [1.0]], 2 / 3)
        assert ours_unclipped(h, bag, MarginalInfo(0.5, {4: 0.5})).value == pytest.approx(0.0, abs=1e-15)

    @pytest.mark.parametrize("y,hx", [(0.0, 0.3), (1.0, 0.3), (1.0, 0.9)])
    def test_single_example_is_square_loss(self, y, hx):
        info = MarginalInfo(0.42, {1: 0.42})
        assert ours_unclipped(IDENTITY, Bag([[hx]], y), info).value == pytest.approx((y - hx) ** 2)

    def test_clipped_keeps_value_below_threshold(self, worked):
        assert clipping_threshold(2, 0.5) == pytest.approx(math.sqrt(16 * math.log(4)))
        assert clipping_threshold(2, 0.5) == pytest.approx(4.710, abs=5e-4)
        out = ours_clipped(*worked, theta=0.5)
        assert out.value == pytest.approx(0.01) and not out.clipped

    def test_clipped_drops_quadratic_term(self):
        # gap k(alpha-p) - (sum h - k E[h]) = 10 > 4.710 with k=2
        h, info = ConstantHypothesis(0.0, id=1), MarginalInfo(0.0, {1: 0.0})
        values, clipped = bag_losses(ours_clipped_kind(0.5), [[-5.0, -5.0]], [0.0], 0.0, 0.0)
        assert clipped[0] and values[0] == 0.0
        values, clipped = bag_losses(ours_clipped_kind(0.5), [[-5.0, -5.0]], [0.0], 0.0, 0.3)
        assert clipped[0] and values[0] == pytest.approx(0.09)
        assert not ours_clipped(h, Bag([[0.0], [0.0]], 0.0), info, 0.5).clipped

    def test_threshold_is_inclusive(self):
        t = clipping_threshold(1, 0.5)
        _, clipped = bag_losses(ours_clipped_kind(0.5), [[0.0]], [t], 0.0, 0.0)
        assert not clipped[0]

    def test_estimated_threshold(self):
        assert clipping_threshold(3, 0.1, ThresholdMode.ESTIMATED) == pytest.approx(math.sqrt(54 * math.log(60)))

    def test_tiny_default_theta_accepted(self):
        kind = ours_clipped_kind(0.1 / (16 * 4))
        assert kind.theta == pytest.approx(0.0015625)

    @pytest.mark.parametrize("theta", [0.0, 1.0, 1.5, -0.1])
    def test_theta_out_of_range(self, theta, worked):
        with pytest.raises(ThetaOutOfRange):
            ours_clipped(*worked, theta=theta)


class TestLi:
    def test_worked_example(self, worked):
        assert li_loss(*worked).value == pytest.approx(0.01, abs=1e-15)

    def test_single_example(self):
        assert li_loss(IDENTITY, Bag([[0.3]], 1.0), MarginalInfo(0.9, {1: 0.1})).value == pytest.approx(0.49)

    def test_negative_on_perfect_bag(self):
        out = li_loss(IDENTITY, Bag([[0.25], [0.75]], 0.5), MarginalInfo(0.4, {1: 0.3}))
        assert out.value == pytest.approx(-0.01)


class TestEasyLLP:
    def test_single_example_is_cross_entropy(self):
        info = MarginalInfo(0.37)
        for y, hx in [(1.0, 0.8), (0.0, 0.8)]:
            expected = -math.log(hx) if y else -math.log(1 - hx)
            assert easyllp_loss(IDENTITY, Bag([[hx]], y), info).value == pytest.approx(expected)

    def test_balanced_pair(self):
        out = easyllp_loss(ConstantHypothesis(0.5, id=1), Bag([[0.0], [1.0]], 0.5), MarginalInfo(0.5))
        assert out.value == pytest.approx(math.log(2))

    def test_clamped_is_finite(self):
        h = ConstantHypothesis(1.0, id=1)
        out = easyllp_loss(h, Bag([[0.0], [1.0]], 0.0), MarginalInfo(0.5))
        assert math.isfinite(out.value) and out.value > 5

    def test_example_terms_average_to_bag_loss(self):
        rng = np.random.default_rng(0)
        hv = rng.uniform(size=(5, 4))
        alphas = rng.integers(0, 5, size=5) / 4
        for kind, squared in ((EASYLLP, False), (LossKind("easyllp_sq"), True)):
            values, _ = bag_losses(kind, hv, alphas, 0.3)
            terms = easyllp_example_terms(hv, alphas, 0.3, squared=squared)
            np.testing.assert_allclose(terms.mean(axis=1), values, rtol=1e-14)


class TestVanilla:
    def test_square(self):
        assert vanilla_sq(IDENTITY, Bag([[0.25], [0.75]], 0.5)).value == 0.0
        assert vanilla_sq(IDENTITY, Bag([[0.2], [0.6]], 0.5)).value == pytest.approx(0.01)
        assert vanilla_sq(IDENTITY, Bag([[0.3]], 1.0)).value == pytest.approx(0.49)

    def test_cross_entropy(self):
        assert vanilla_ce(IDENTITY, Bag([[0.2], [0.8]], 0.5)).value == pytest.approx(math.log(2))
        eps = DEFAULT_CLAMP_EPS
        low = vanilla_ce(ConstantHypothesis(eps, id=1), Bag([[0.0]], 0.0)).value
        assert low == pytest.approx(eps, rel=1e-6)
        high = vanilla_ce(ConstantHypothesis(1 - eps, id=1), Bag([[0.0]], 0.0)).value
        assert math.isfinite(high) and high > 15


class TestLossKind:
    @pytest.mark.parametrize("kind", [OURS_UNCLIPPED, LI_ET_AL, EASYLLP, VANILLA_SQ,
                                      ours_clipped_kind(0.1), ours_clipped_kind(0.25, ThresholdMode.ESTIMATED)])
    def test_label_round_trip(self, kind):
        assert LossKind.parse(kind.label) == kind


class TestLinear:
    def test_gradient_example(self):
        # xbar - mu_x = 0.1, alpha - mu_y = 0.2, mu_x = 0.5, mu_y = 0.3
        bag = Bag([[0.5], [0.7]], 0.5, Mode.REGRESSION)
        value, grad = linear_bag_loss_and_grad(np.zeros(1), bag, [0.5], 0.3)
        np.testing.assert_allclose(grad, [-0.38], atol=1e-15)
        assert value == pytest.approx(2 * 0.04 + 0.09)

    def test_minimum(self):
        w = np.array([2.0])
        # choose mu so that both residuals vanish: w.mu_x = mu_y and w.(xbar-mu_x) = alpha - mu_y
        mu_x, mu_y = np.array([0.25]), 0.5
        bag = Bag([[0.5], [0.7]], mu_y + 2.0 * (0.6 - 0.25), Mode.REGRESSION)
        value, grad = linear_bag_loss_and_grad(w, bag, mu_x, mu_y)
        assert value == pytest.approx(0.0, abs=1e-24)
        np.testing.assert_allclose(grad, 0.0, atol=1e-12)

    def test_k1_collapse(self):
        w = np.array([0.3, -0.2])
        bag = Bag([[1.0, 2.0]], 0.9, Mode.REGRESSION)
        value, _ = linear_bag_loss_and_grad(w, bag, [0.0, 0.0], 0.0)
        assert value == pytest.approx((w @ [1.0, 2.0] - 0.9) ** 2)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            linear_bag_loss_and_grad(np.zeros(2), Bag([[0.5]], 0.5, Mode.REGRESSION), [0.5], 0.3)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 6), st.floats(0.01, 0.99), st.integers(0, 10**6))
def test_clipped_pair_difference_is_bounded(k, theta, seed):
    rng = np.random.default_rng(seed)
    hv = rng.uniform(size=(2, k))
    alpha = rng.integers(0, k + 1) / k
    p, means = rng.uniform(size=3)[0], rng.uniform(size=2)
    kind = ours_clipped_kind(theta)
    a, _ = bag_losses(kind, hv[:1], [alpha], p, means[0])
    b, _ = bag_losses(kind, hv[1:], [alpha], p, means[1])
    assert abs(a[0] - b[0]) <= 8 * math.log(2 / theta) + 1 + 1e-12


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 8), st.integers(0, 10**6))
def test_permuting_a_bag_keeps_every_loss(k, seed):
    rng = np.random.default_rng(seed)
    hv = rng.uniform(size=(1, k))
    alpha = [rng.integers(0, k + 1) / k]
    perm = rng.permutation(k)
    for kind in (OURS_UNCLIPPED, LI_ET_AL, EASYLLP, VANILLA_SQ):
        a, _ = bag_losses(kind, hv, alpha, 0.4, 0.3)
        b, _ = bag_losses(kind, hv[:, perm], alpha, 0.4, 0.3)
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-15)
