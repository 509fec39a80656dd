import numpy as np
import pytest

from llp_lab.bagging import BaggedSample, batch_bags, partition_into_bags
from llp_lab.data import (
    Bag,
    ConstantHypothesis,
    FunctionHypothesis,
    Provenance,
    TabularHypothesis,
    make_rng,
    sample_dataset,
)
from llp_lab.errors import EmptySample, HypothesisUndefinedOnSupport, InvalidSplit, SingleBagBatch
from llp_lab.marginals import (
    estimate_p_from_bags,
    exact_label_marginal,
    exact_marginals,
    exact_prediction_mean,
    loo_prediction_mean,
    loo_prediction_means,
    split_sample_estimates,
)
from llp_lab.synthetic import grid_distribution, two_atom_construction

IDENTITY = FunctionHypothesis(lambda X: X[:, 0], id=0)


def _bags_from_values(values, k):
    """Bags whose single feature equals the wanted h-value under IDENTITY."""
    values = np.asarray(values, dtype=float).reshape(-1, k, 1)
    return BaggedSample(values, np.zeros(values.shape[0]))


class TestExact:
    def test_two_atom_label_marginal(self):
        dist, _, _ = two_atom_construction(0.04)
        assert exact_label_marginal(dist) == pytest.approx(0.5, abs=1e-15)

    def test_eta_zero(self):
        assert exact_label_marginal(grid_distribution(5, eta=lambda x: 0 * x)) == 0.0

    def test_grid_square(self):
        dist = grid_distribution(101, closed=True)
        x = np.linspace(0, 1, 101)
        # independent Riemann sum of x^2 on the same grid
        assert exact_label_marginal(dist) == pytest.approx(np.mean(x * x), abs=1e-14)
        assert exact_label_marginal(dist) == pytest.approx(0.3350, abs=5e-5)

    def test_prediction_means(self):
        dist = grid_distribution(101, closed=True)
        assert exact_prediction_mean(dist, ConstantHypothesis(0.3)) == pytest.approx(0.3)
        assert exact_prediction_mean(dist, IDENTITY) == pytest.approx(0.5, abs=1e-14)
        eta = FunctionHypothesis(lambda X: X[:, 0] ** 2)
        assert exact_prediction_mean(dist, eta) == pytest.approx(exact_label_marginal(dist), abs=1e-15)

    def test_undefined_hypothesis(self):
        dist, _, _ = two_atom_construction(0.04)
        with pytest.raises(HypothesisUndefinedOnSupport):
            exact_prediction_mean(dist, TabularHypothesis([[0.0]], [0.5]))

    def test_exact_marginals_provenance(self):
        dist, h1, h2 = two_atom_construction(0.04)
        info = exact_marginals(dist, [h1, h2])
        assert info.provenance is Provenance.EXACT
        assert info.mean_for(h1) == pytest.approx(0.5)


class TestEstimateP:
    def test_examples(self):
        assert estimate_p_from_bags(BaggedSample(np.zeros((2, 2, 1)), [0.5, 0.5])) == 0.5
        assert estimate_p_from_bags(BaggedSample(np.zeros((4, 1, 1)), [0, 1, 1, 0])) == 0.5

    def test_empty(self):
        with pytest.raises(EmptySample):
            estimate_p_from_bags(BaggedSample(np.zeros((0, 2, 1)), []))

    def test_concentration(self):
        dist = grid_distribution(4, eta=lambda x: 0 * x + 0.3)
        sample = partition_into_bags(sample_dataset(dist, 4000, 9), 4, 10)
        assert abs(estimate_p_from_bags(sample) - 0.3) <= 0.03

    def test_equals_prefix_label_mean(self):
        dist = grid_distribution(8)
        data = sample_dataset(dist, 103, 1)
        sample = partition_into_bags(data, 5, 2)
        keep = make_rng(2).permutation(103)[:100]
        assert estimate_p_from_bags(sample) == pytest.approx(data.y[keep].mean(), abs=1e-15)


class TestLeaveOneBagOut:
    def test_two_bags(self):
        batch = [Bag([[0.9], [0.1]], 0.5), Bag([[0.2], [0.6]], 0.5)]
        assert loo_prediction_mean(batch, 0, IDENTITY) == pytest.approx(0.4)

    def test_constant(self):
        batch = [Bag([[0.1], [0.2]], 0.5), Bag([[0.3], [0.4]], 0.5), Bag([[0.5], [0.6]], 0.5)]
        for j in range(3):
            assert loo_prediction_mean(batch, j, ConstantHypothesis(0.7)) == pytest.approx(0.7)

    def test_four_bags(self):
        sample = _bags_from_values([0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8], 2)
        assert loo_prediction_mean(sample.bags, 0, IDENTITY) == pytest.approx(0.55)

    def test_single_bag(self):
        with pytest.raises(SingleBagBatch):
            loo_prediction_mean([Bag([[0.1]], 0.0)], 0, IDENTITY)

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(5)
        sample = _bags_from_values(rng.uniform(size=7 * 3), 3)
        batches = batch_bags(sample, 9)  # bags (0,1,2), (3,4,5), (6)
        fast = loo_prediction_means(sample.hypothesis_values(IDENTITY), batches)
        for idx in batches[:2]:
            bags = [sample[int(j)] for j in idx]
            for pos, j in enumerate(idx):
                assert fast[j] == pytest.approx(loo_prediction_mean(bags, pos, IDENTITY), abs=1e-15)
        assert np.isnan(fast[6])

    def test_unbiased(self):
        dist = grid_distribution(16)
        target = exact_prediction_mean(dist, IDENTITY)
        estimates = []
        for seed in range(10**4):
            sample = partition_into_bags(sample_dataset(dist, 8, seed), 2, seed)
            estimates.append(loo_prediction_mean(sample.bags, 0, IDENTITY))
        estimates = np.array(estimates)
        se = estimates.std(ddof=1) / np.sqrt(estimates.size)
        assert abs(estimates.mean() - target) <= 4 * se


class TestSplitSample:
    def test_bookkeeping(self):
        sample = BaggedSample(np.zeros((4, 2, 1)), [0.0, 0.5, 1.0, 0.5])
        info, train = split_sample_estimates(sample, 2, [ConstantHypothesis(0.7, id=3)])
        assert train.m == 2
        assert info.p == pytest.approx(0.75)
        assert info.mean_for(3) == 0.7
        assert info.provenance is Provenance.SPLIT_SAMPLE

    def test_disjoint(self):
        sample = _bags_from_values(np.arange(10) / 10, 1)
        info, train = split_sample_estimates(sample, None, [IDENTITY])
        assert train.m == 5
        assert info.mean_for(IDENTITY) == pytest.approx(np.mean(np.arange(5, 10) / 10))
        assert set(train.features.ravel()).isdisjoint(np.arange(5, 10) / 10)

    def test_concentration(self):
        dist = grid_distribution(4, eta=lambda x: 0 * x + 0.5)
        sample = partition_into_bags(sample_dataset(dist, 4000, 2), 4, 3)
        info, _ = split_sample_estimates(sample, 500, [IDENTITY])
        assert abs(info.p - 0.5) <= 0.05

    @pytest.mark.parametrize("m2", [0, 4, 5])
    def test_invalid(self, m2):
        with pytest.raises(InvalidSplit):
            split_sample_estimates(BaggedSample(np.zeros((4, 1, 1)), np.zeros(4)), m2, [])
