import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from priornet.datamodel import (
    CovariancePair,
    ExpressionMatrix,
    GroundTruthModel,
    center_by_condition,
    covariance_pair,
    empirical_covariance,
    format_expression,
    load_expression,
    sample_expression,
    support_f1,
    synth_network,
    write_expression,
)
from priornet.errors import DuplicateGene, TooFewReplicates, UnlabeledSample


def _write(tmp_path, expr, labels):
    e = tmp_path / "expr.tsv"
    lab = tmp_path / "labels.tsv"
    e.write_text(expr)
    lab.write_text(labels)
    return e, lab


LABELS = "sample\tcondition\ns1\t1\ns2\t1\ns3\t2\ns4\t2\n"


def test_load_small_fixture(tmp_path):
    e, lab = _write(
        tmp_path,
        "gene\ts1\ts2\ts3\ts4\nA\t1\t2\t3\t4\nB\t0.5\t0.1\t2\t2\nC\t1\t1\t1\t1\n",
        LABELS,
    )
    X = load_expression(e, lab)
    assert X.p == 3 and X.n1 == 2 and X.n2 == 2
    assert X.gene_ids == ("A", "B", "C")
    np.testing.assert_array_equal(X.values[0], [1, 2, 3, 4])


def test_duplicate_gene(tmp_path):
    e, lab = _write(tmp_path, "gene\ts1\ts2\ts3\ts4\nTP53\t1\t2\t3\t4\nTP53\t1\t2\t3\t4\n", LABELS)
    with pytest.raises(DuplicateGene):
        load_expression(e, lab)


def test_unlabeled_sample(tmp_path):
    e, lab = _write(
        tmp_path,
        "gene\ts1\ts2\ts3\ts4\nA\t1\t2\t3\t4\n",
        "s1\t1\ns2\t1\ns3\t2\n",
    )
    with pytest.raises(UnlabeledSample):
        load_expression(e, lab)


def test_expression_roundtrip(tmp_path):
    X = sample_expression(synth_network(5, 2, 0.5, 0.1, 1), 4, 5, 3)
    write_expression(X, tmp_path / "x.tsv", tmp_path / "l.tsv")
    Y = load_expression(tmp_path / "x.tsv", tmp_path / "l.tsv")
    assert X == Y
    assert format_expression(Y) == format_expression(X)


def _matrix(values, conditions):
    return ExpressionMatrix(tuple(f"g{k}" for k in range(len(values))), np.array(values, float), np.array(conditions))


def test_centering_examples():
    X = _matrix([[1, 3, 5, 5], [2, 2, 7, 9]], [1, 1, 2, 2])
    C = center_by_condition(X)
    np.testing.assert_allclose(C.values[0], [-1, 1, 0, 0])
    np.testing.assert_allclose(C.values[1], [0, 0, -1, 1])
    np.testing.assert_allclose(center_by_condition(C).values, C.values, atol=1e-12)


def test_constant_gene_centers_to_zero():
    X = _matrix([[2, 2, 2, 4, 4]], [1, 1, 1, 2, 2])
    assert np.all(center_by_condition(X).values == 0)
    assert np.all(center_by_condition(X, scale=True).values == 0)


def test_covariance_hand_value():
    X = _matrix([[1, -1, 0, 2]], [1, 1, 2, 2])
    np.testing.assert_allclose(empirical_covariance(X, 1), [[1.0]])


def test_perfect_correlation():
    X = _matrix([[1, 2, 3, 5, 1], [1, 2, 3, 5, 1]], [1, 1, 1, 2, 2])
    S = empirical_covariance(X, 1)
    assert S[0, 0] == S[1, 1] == S[0, 1] == S[1, 0]


def test_covariance_identity_model():
    model = GroundTruthModel(np.zeros((3, 0), int), (np.eye(3), np.eye(3)))
    X = sample_expression(model, 5000, 5000, 1)
    S = covariance_pair(X)
    assert np.linalg.norm(S.S[0] - np.eye(3)) < 0.15
    assert S.n == (5000, 5000)


def test_covariance_pair_requires_symmetry():
    with pytest.raises(ValueError):
        CovariancePair((np.array([[1.0, 0.1], [0.0, 1.0]]), np.eye(2)), (3, 3))


def test_synth_degenerate():
    m = synth_network(1, 1, 0.5, 0.5, 0)
    assert m.K[0].shape == (1, 1) and m.K[0][0, 0] >= 0.1
    assert not m.edge_support[0].any()
    m = synth_network(12, 3, 0.0, 0.0, 0)
    for k in m.K:
        assert np.count_nonzero(k - np.diag(np.diag(k))) == 0


def test_synth_modularity_over_seeds():
    for seed in range(20):
        m = synth_network(30, 3, 0.3, 0.02, seed)
        same = (m.Z @ m.Z.T) > 0
        sup = np.triu(m.edge_support[0], 1)
        assert (sup & same).sum() > (sup & ~same).sum()


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 25), st.integers(1, 4), st.integers(0, 10_000))
def test_synth_invariants(p, Q, seed):
    Q = min(Q, p)
    m = synth_network(p, Q, 0.4, 0.05, seed)
    for k in m.K:
        assert np.array_equal(k, k.T)
        assert np.linalg.eigvalsh(k)[0] >= 0.1 - 1e-9
    assert (m.Z.sum(axis=1) >= 1).all()
    # shared signs on common support
    s1, s2 = (np.sign(k) for k in m.K)
    off = ~np.eye(p, dtype=bool)
    assert np.array_equal(s1[off], s2[off])


def test_sample_variance_and_determinism():
    model = GroundTruthModel(np.ones((1, 1), int), (np.array([[4.0]]), np.array([[4.0]])))
    X = sample_expression(model, 10_000, 10_000, 2)
    v = X.condition_values(1).var()
    assert abs(v - 0.25) < 0.05 * 0.25
    assert sample_expression(model, 10, 10, 2) == sample_expression(model, 10, 10, 2)
    with pytest.raises(TooFewReplicates):
        sample_expression(model, 1, 5, 2)


def test_support_f1():
    a = np.zeros((3, 3), bool)
    a[0, 1] = a[1, 0] = True
    assert support_f1((a, a), (a, a)) == 1.0
    assert support_f1((a, a), (~np.eye(3, dtype=bool), a)) == pytest.approx(2 * 0.5 * 1 / 1.5)
