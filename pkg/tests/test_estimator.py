import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from klentropy.core_math import EULER_GAMMA, Metric, gaussian_entropy, unit_ball_volume
from klentropy.errors import ArityError, DegenerateDataError, DomainError
from klentropy.estimator import EstimatorConfig, kl_entropy, mutual_information, plug_in_entropy
from klentropy.neighbors import Dataset
from klentropy.processes import RngSeed, sample_iid_gaussian

# High-precision reference values (mpmath, 30 digits).
KL_TWO_POINTS = 1.27036284546147817  # log 2 + gamma
KL_THREE_POINTS = 2.1945590862080719159  # log 4 + gamma + log(2)/3
GAUSS_MI_HALF = 0.14384103622589046372  # -log(0.75) / 2


def random_data(seed, n, d):
    return np.random.default_rng(seed).normal(size=(n, d))


class TestKlEntropyExamples:
    def test_two_points(self):
        assert abs(kl_entropy(Dataset([0.0, 1.0])).value - KL_TWO_POINTS) < 1e-12

    def test_three_points(self):
        assert abs(kl_entropy(Dataset([0.0, 1.0, 3.0])).value - KL_THREE_POINTS) < 1e-12

    def test_three_points_by_hand(self):
        # rho = (1, 1, 2), N = 2, nu_1 = 2, digamma(1) = -gamma
        by_hand = math.log(2 * 2) + EULER_GAMMA + (math.log(1) + math.log(1) + math.log(2)) / 3
        assert kl_entropy(Dataset([0.0, 1.0, 3.0])).value == pytest.approx(by_hand, abs=1e-14)

    def test_scaled_two_points(self):
        got = kl_entropy(Dataset([0.0, 10.0])).value
        assert abs(got - (KL_TWO_POINTS + math.log(10))) < 1e-12

    def test_per_point_terms(self):
        est = kl_entropy(Dataset([0.0, 1.0, 3.0]), keep_terms=True)
        assert est.per_point_terms.shape == (3,)
        assert math.fsum(est.per_point_terms) / 3 == est.value
        assert kl_entropy(Dataset([0.0, 1.0])).per_point_terms is None

    def test_duplicates_are_rejected(self):
        with pytest.raises(DegenerateDataError):
            kl_entropy(Dataset([0.0, 0.0, 1.0]))

    def test_too_few_points(self):
        with pytest.raises(ArityError):
            kl_entropy(Dataset([0.0, 1.0, 3.0]), EstimatorConfig(k=3))

    @pytest.mark.parametrize("k", [0, -1, 1.5])
    def test_bad_k(self, k):
        with pytest.raises(DomainError):
            EstimatorConfig(k=k)


class TestKlEntropyInvariances:
    @given(st.integers(0, 2**32 - 1), st.integers(5, 200), st.integers(1, 4), st.integers(1, 3),
           st.sampled_from(list(Metric)))
    def test_permutation_exact(self, seed, n, d, k, metric):
        pts = random_data(seed, n, d)
        perm = np.random.default_rng(seed + 1).permutation(n)
        cfg = EstimatorConfig(k, metric)
        assert kl_entropy(Dataset(pts), cfg).value == kl_entropy(Dataset(pts[perm]), cfg).value

    @given(st.integers(0, 2**32 - 1), st.integers(5, 200), st.integers(1, 4),
           st.floats(-100.0, 100.0), st.sampled_from(list(Metric)))
    def test_translation(self, seed, n, d, shift, metric):
        pts = random_data(seed, n, d)
        offset = np.random.default_rng(seed + 2).uniform(-1, 1, size=d) * shift
        cfg = EstimatorConfig(2, metric)
        base = kl_entropy(Dataset(pts), cfg).value
        assert abs(kl_entropy(Dataset(pts + offset), cfg).value - base) < 1e-10

    @given(st.integers(0, 2**32 - 1), st.integers(5, 200), st.integers(1, 4),
           st.floats(1e-3, 1e3), st.sampled_from(list(Metric)))
    def test_scaling_law(self, seed, n, d, c, metric):
        pts = random_data(seed, n, d)
        cfg = EstimatorConfig(1, metric)
        base = kl_entropy(Dataset(pts), cfg).value
        assert abs(kl_entropy(Dataset(c * pts), cfg).value - (base + d * math.log(c))) < 1e-10

    def test_tree_and_brute_agree_exactly(self):
        pts = random_data(4, 400, 3)
        for k in (1, 4):
            cfg = EstimatorConfig(k)
            assert kl_entropy(pts, cfg).value == kl_entropy(pts, cfg, method="brute").value

    def test_metric_changes_only_through_geometry(self):
        # in d = 1 both metrics give the same distances and ball volume
        pts = random_data(6, 300, 1)
        a = kl_entropy(pts, EstimatorConfig(2, "euclidean")).value
        b = kl_entropy(pts, EstimatorConfig(2, "chebyshev")).value
        assert a == b


class TestKlEntropyStatistics:
    @pytest.mark.parametrize("metric", list(Metric))
    def test_uniform_cube(self, metric):
        # entropy of U([0, 1]^2) is 0
        pts = np.random.default_rng(10).uniform(size=(20_000, 2))
        assert abs(kl_entropy(pts, EstimatorConfig(3, metric)).value) < 0.03

    def test_correlated_gaussian(self):
        data = sample_iid_gaussian(2, 0.25, 20_000, RngSeed(12))
        assert abs(kl_entropy(data, EstimatorConfig(2)).value - gaussian_entropy(2, 0.25)) < 0.03

    def test_chebyshev_unit_ball_is_cube(self):
        assert unit_ball_volume(2, "chebyshev") == 4.0


class TestPlugIn:
    @staticmethod
    def std_normal_log_density(x):
        return -0.5 * float(np.dot(x, x)) - 0.5 * len(x) * math.log(2 * math.pi)

    def test_example(self):
        got = plug_in_entropy(Dataset([0.0, 1.0]), self.std_normal_log_density)
        assert abs(got - (0.5 * math.log(2 * math.pi) + 0.25)) < 1e-12

    def test_non_finite_density_names_index(self):
        def bad(x):
            return -math.inf if x[0] > 2 else 0.0

        with pytest.raises(DomainError, match="index 2"):
            plug_in_entropy(Dataset([0.0, 1.0, 3.0]), bad)

    def test_converges_to_entropy(self):
        data = sample_iid_gaussian(1, 0.0, 50_000, RngSeed(2))
        got = plug_in_entropy(data, self.std_normal_log_density)
        # sd of -log f(X) for N(0,1) is 1/sqrt(2)
        assert abs(got - gaussian_entropy(1, 0.0)) < 5 * math.sqrt(0.5 / 50_000)


class TestMutualInformation:
    def test_symmetric_exactly(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(500, 1))
        y = 0.5 * x + rng.normal(size=(500, 1))
        y2 = np.hstack([y, rng.normal(size=(500, 1))])
        cfg = EstimatorConfig(3)
        assert mutual_information(x, y, cfg) == mutual_information(y, x, cfg)
        assert mutual_information(x, y2, cfg) == mutual_information(y2, x, cfg)

    def test_independent_is_near_zero(self):
        rng = np.random.default_rng(2)
        x, y = rng.normal(size=(5000, 1)), rng.normal(size=(5000, 1))
        assert abs(mutual_information(x, y, EstimatorConfig(3))) < 0.02

    def test_gaussian_pair(self):
        data = sample_iid_gaussian(2, 0.5, 5000, RngSeed(21)).points
        got = mutual_information(data[:, :1], data[:, 1:], EstimatorConfig(3))
        assert abs(got - GAUSS_MI_HALF) < 0.03

    def test_length_mismatch(self):
        with pytest.raises(ArityError):
            mutual_information(np.zeros((5, 1)) + np.arange(5)[:, None], np.arange(6.0))

    def test_identical_copies_are_degenerate(self):
        # repeated rows stay repeated in the joint sample
        x = np.array([0.0, 1.0, 1.0, 2.0, 3.0, 5.0])
        with pytest.raises(DegenerateDataError):
            mutual_information(x, x, EstimatorConfig(1))
