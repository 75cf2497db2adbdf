import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chi2

from augca.domain import normalize
from augca.spectral import pairwise_posterior_distance_sq, pairwise_weighted_aug_distance_sq
from augca.synthetic import MixtureConfig, augment_gaussian, gen_mixture, gen_random_instance, make_pilot_data


class TestMixture:
    def test_defaults(self):
        pts, labels = gen_mixture(MixtureConfig())
        assert pts.shape == (800, 2)
        assert np.bincount(labels).tolist() == [200] * 4

    def test_means_on_circle(self):
        m = MixtureConfig().means
        np.testing.assert_allclose(np.linalg.norm(m, axis=1), 2.0)
        np.testing.assert_allclose(m[0], [2.0, 0.0])

    def test_seeded(self):
        a, _ = gen_mixture(MixtureConfig(seed=4))
        b, _ = gen_mixture(MixtureConfig(seed=4))
        assert np.array_equal(a, b)

    @pytest.mark.parametrize("seed", range(3))
    def test_component_means(self, seed):
        cfg = MixtureConfig(seed=seed)
        pts, labels = gen_mixture(cfg)
        for c in range(4):
            dev = pts[labels == c].mean(axis=0) - cfg.means[c]
            assert np.all(np.abs(dev) <= 3 * 1.0 / np.sqrt(200))

    @pytest.mark.parametrize("bad", [{"components": 0}, {"component_var": 0.0},
                                     {"weights": (0.5, 0.6, 0.0, -0.1)}, {"aug_scale_is": "sd"}])
    def test_validation(self, bad):
        with pytest.raises(ValueError):
            MixtureConfig(**bad)

    def test_std_reading(self):
        assert MixtureConfig(aug_scale=4.0).aug_var == 4.0
        assert MixtureConfig(aug_scale=4.0, aug_scale_is="std").aug_var == 16.0


class TestAugment:
    def test_zero_noise_returns_parents(self):
        pts = np.random.default_rng(0).normal(size=(5, 2))
        out, parents = augment_gaussian(pts, 0.0, 3, np.random.default_rng(1))
        assert np.array_equal(out, pts[parents])
        assert parents.tolist() == [0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3, 4, 4, 4]

    def test_noise_variance(self):
        pts = np.zeros((800, 2))
        out, _ = augment_gaussian(pts, 4.0, 2, np.random.default_rng(0))
        n = len(out)
        for coord in range(2):
            # (n - 1) s^2 / sigma^2 follows chi-square with n - 1 degrees of freedom
            stat = (n - 1) * np.var(out[:, coord], ddof=1) / 4.0
            lo, hi = chi2.ppf([0.00135, 0.99865], n - 1)
            assert lo <= stat <= hi

    def test_bad_draws(self):
        with pytest.raises(ValueError):
            augment_gaussian(np.zeros((1, 2)), 1.0, 0, 0)


class TestPilotData:
    def test_shapes(self):
        data = make_pilot_data(MixtureConfig())
        assert data.matrix.n == 800 and data.matrix.l == 1600
        assert len(data.outcome_labels) == 1600
        np.testing.assert_allclose(data.matrix.probs.sum(axis=1), 1.0)

    def test_density_weights(self):
        # a tiny instance checked against the Gaussian density directly
        cfg = MixtureConfig(components=2, samples_per_component=2, augmentations=1, seed=3)
        data = make_pilot_data(cfg)
        sq = np.sum((data.points[:, None, :] - data.outcomes[None, :, :]) ** 2, axis=2)
        dens = np.exp(-sq / (2 * cfg.aug_var))
        np.testing.assert_allclose(data.matrix.probs, dens / dens.sum(axis=1, keepdims=True), rtol=1e-12)

    def test_intra_closer_than_inter(self):
        data = make_pilot_data(MixtureConfig(seed=1))
        feat = normalize(data.matrix)
        post = pairwise_posterior_distance_sq(feat)
        waug = pairwise_weighted_aug_distance_sq(feat)
        ol = data.outcome_labels[feat.columns]
        same_o = ol[:, None] == ol[None, :]
        same_n = data.labels[:, None] == data.labels[None, :]
        off_o = ~np.eye(len(ol), dtype=bool)
        off_n = ~np.eye(len(data.labels), dtype=bool)
        assert np.sqrt(post[same_o & off_o]).mean() < np.sqrt(post[~same_o]).mean()
        assert np.sqrt(waug[same_n & off_n]).mean() < np.sqrt(waug[~same_n]).mean()


class TestRandomInstance:
    def test_point_masses(self):
        a = gen_random_instance(6, 10, 1, 0)
        assert np.all(np.sort(a.probs, axis=1)[:, -1] == 1.0)

    def test_seeded(self):
        assert np.array_equal(gen_random_instance(4, 9, 3, 7).probs, gen_random_instance(4, 9, 3, 7).probs)

    def test_snapshot(self):
        a = gen_random_instance(2, 3, 2, 0)
        assert np.count_nonzero(a.probs) == 4
        np.testing.assert_allclose(a.probs.sum(axis=1), 1.0)
        assert np.all(a.probs.sum(axis=0) > 0)


@settings(max_examples=100, deadline=None)
@given(n=st.integers(1, 15), l=st.integers(1, 40), s=st.integers(1, 8), seed=st.integers(0, 10**6))
def test_random_instance_valid(n, l, s, seed):
    a = gen_random_instance(n, l, s, seed)
    assert a.probs.shape == (n, l)
    np.testing.assert_allclose(a.probs.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(np.count_nonzero(a.probs, axis=1) <= min(s, l))
    if n * min(s, l) >= l:
        assert np.all(a.probs.sum(axis=0) > 0)
