import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from augca.domain import (
    AugmentationMatrix, DiscreteDomain, DomainError, build_empirical_matrix, build_exact_matrix,
    identity_model, load_descriptor, load_matrix_csv, marginals, normalize, save_descriptor,
    save_matrix_csv,
)
from augca.synthetic import gen_random_instance


def test_identity_model():
    a = build_exact_matrix(identity_model, DiscreteDomain(3, 3))
    np.testing.assert_array_equal(a.probs, np.eye(3))
    np.testing.assert_array_equal(marginals(a).d, np.ones(3))
    assert np.array_equal(normalize(a).matrix, np.eye(3))


def test_two_by_three(small):
    w = marginals(small)
    np.testing.assert_allclose(w.d, [0.5, 1.0, 0.5])
    np.testing.assert_allclose(w.marginal.sum(), 1.0)
    feat = normalize(small, w)
    np.testing.assert_allclose(feat.matrix, [[2**-0.5, 0.5, 0], [0, 0.5, 2**-0.5]])


def test_bad_row_rejected():
    with pytest.raises(DomainError, match="row 0"):
        build_exact_matrix([[0.4, 0.5]], DiscreteDomain(1, 2))
    with pytest.raises(DomainError):
        AugmentationMatrix([[1.2, -0.2]])


def test_l_not_greater_than_n_is_fine():
    a = AugmentationMatrix([[1, 0], [0.5, 0.5], [0, 1]])
    assert np.linalg.svd(normalize(a).matrix, compute_uv=False)[0] == pytest.approx(1.0)


def test_size_guard():
    with pytest.raises(DomainError):
        DiscreteDomain(1, 100_001)


def test_labels_length():
    with pytest.raises(DomainError):
        DiscreteDomain(3, 4, labels=[0, 1])


def test_zero_marginal_columns_dropped():
    a = AugmentationMatrix([[0.5, 0.0, 0.5], [1.0, 0.0, 0.0]])
    feat = normalize(a)
    assert feat.columns.tolist() == [0, 2]
    assert feat.matrix.shape == (2, 2)


def test_matrices_are_read_only(small):
    with pytest.raises(ValueError):
        small.probs[0, 0] = 1.0


class TestEmpirical:
    def test_equal_density(self):
        emp = build_empirical_matrix([(0, 1.0), (0, 2.0)], weight=lambda outs: np.ones((1, 2)))
        np.testing.assert_allclose(emp.matrix.probs, [[0.5, 0.5]])

    def test_dedup_merges(self):
        emp = build_empirical_matrix([(0, (1.0, 2.0)), (1, (1.0, 2.0)), (0, (3.0, 0.0)), (0, (1.0, 2.0))])
        assert emp.domain.augmented_count == 2
        assert emp.counts[:, 0].sum() == 3
        assert emp.counts[0, 0] == 2
        np.testing.assert_allclose(emp.matrix.probs, [[2 / 3, 1 / 3], [1, 0]])

    def test_array_outcomes(self):
        emp = build_empirical_matrix([(0, np.array([1.0, 2.0])), (0, np.array([1.0, 2.0]))])
        assert emp.counts[0, 0] == 2

    def test_missing_natural(self):
        with pytest.raises(DomainError, match="natural sample 1"):
            build_empirical_matrix([(0, "a"), (2, "b")], natural_count=3)


class TestFiles:
    def test_csv_round_trip(self, tmp_path):
        a = gen_random_instance(5, 9, 3, seed=2)
        save_matrix_csv(a, tmp_path / "m.csv")
        assert (tmp_path / "m.csv").read_text().splitlines()[0] == "5,9"
        b = load_matrix_csv(tmp_path / "m.csv")
        assert np.array_equal(a.probs, b.probs)

    def test_csv_literal_header(self, tmp_path):
        (tmp_path / "m.csv").write_text("n,l\n1,2\n0.25,0.75\n")
        np.testing.assert_allclose(load_matrix_csv(tmp_path / "m.csv").probs, [[0.25, 0.75]])

    def test_descriptor(self, tmp_path):
        a = gen_random_instance(4, 6, 2, seed=0)
        save_descriptor(a, tmp_path / "inst.json", labels=[0, 0, 1, 1])
        desc = json.loads((tmp_path / "inst.json").read_text())
        assert desc == {"natural_count": 4, "augmented_count": 6, "matrix_path": "inst.csv",
                        "labels": [0, 0, 1, 1]}
        b, dom = load_descriptor(tmp_path / "inst.json")
        assert np.array_equal(a.probs, b.probs)
        assert dom.labels.tolist() == [0, 0, 1, 1]

    def test_descriptor_mismatch(self, tmp_path):
        a = gen_random_instance(2, 3, 2, seed=0)
        save_descriptor(a, tmp_path / "inst.json")
        desc = json.loads((tmp_path / "inst.json").read_text())
        desc["natural_count"] = 3
        (tmp_path / "inst.json").write_text(json.dumps(desc))
        with pytest.raises(DomainError):
            load_descriptor(tmp_path / "inst.json")


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 20), l=st.integers(1, 50), s=st.integers(1, 6), seed=st.integers(0, 10**6))
def test_spectral_invariants(n, l, s, seed):
    a = gen_random_instance(n, l, s, seed)
    np.testing.assert_allclose(a.probs.sum(axis=1), 1.0, atol=1e-9)
    w = marginals(a)
    assert abs(w.d.sum() - n) < 1e-8
    ahat = normalize(a, w).matrix
    gram = ahat @ ahat.T
    np.testing.assert_allclose(gram, gram.T, atol=1e-12)
    np.testing.assert_allclose(gram.sum(axis=1), 1.0, atol=1e-8)
    eig = np.linalg.eigvalsh(gram)
    assert abs(np.sqrt(eig.max()) - 1.0) < 1e-8
    assert np.all(np.sqrt(np.clip(eig, 0, None)) <= 1 + 1e-8)
    # nonnegative row-stochastic: the ones vector is an eigenvector for 1 and the
    # infinity norm (max row sum = 1) bounds the spectral radius
    np.testing.assert_allclose(gram @ np.ones(n), np.ones(n), atol=1e-8)
    assert np.abs(gram).sum(axis=1).max() <= 1 + 1e-8
