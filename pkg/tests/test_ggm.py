import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import objective_p2, prox_grid
from priornet.datamodel import CovariancePair, covariance_pair, sample_expression, synth_network
from priornet.errors import NotPositiveDefinite, SchemaError
from priornet.ggm import (
    ConcentrationPair,
    coop_penalty,
    extract_network,
    format_network,
    objective,
    oracle_solve_small,
    parse_network,
    partial_correlations,
    penalty_weights,
    prox_coop,
    select_lambda,
    solve_independent,
    solve_multitask,
    uniform_weights,
)


def test_weights_examples():
    Z = np.array([[1, 0], [1, 0]])
    assert penalty_weights(Z, 2.0, 0.5).rho[0, 1] == 0.5
    Z = np.array([[1, 0], [0, 1]])
    assert penalty_weights(Z, 2.0, 0.5).rho[0, 1] == 2.0
    Z = np.array([[1, 0], [0, 0]])
    assert penalty_weights(Z, 2.0, 0.5).rho[0, 1] == 1.0
    Z = np.array([[1, 1], [1, 0]])
    assert penalty_weights(Z, 1.0, 1.0).rho[0, 1] == 2.0
    # rows missing from Z are unclustered genes
    w = penalty_weights(np.array([[1], [1]]), 2.0, 0.5, p=3)
    assert w.rho[0, 2] == 1.0 and w.rho[0, 1] == 0.5 and np.all(np.diag(w.rho) == 0)


def test_coop_examples():
    assert coop_penalty([1, 1]) == pytest.approx(math.sqrt(2))
    assert coop_penalty([1, -1]) == 2
    assert coop_penalty([3, 4]) == 5
    assert coop_penalty([0, 0]) == 0


def test_prox_examples():
    np.testing.assert_array_equal(prox_coop([0.3, -2.0], 0.0), [0.3, -2.0])
    np.testing.assert_allclose(prox_coop([3, 4], 2.5), [1.5, 2.0])
    np.testing.assert_allclose(prox_coop([1, -1], 0.5), [0.5, -0.5])
    np.testing.assert_allclose(prox_grid(np.array([[1.0, -1.0]]), 0.5), [[0.5, -0.5]], atol=1e-6)


def test_prox_matches_numeric_oracle():
    rng = np.random.default_rng(21)
    U = rng.normal(scale=2.0, size=(500, 2))
    U[::5, 1] = 0.0
    t = rng.uniform(0, 3, size=500)
    ours = np.array([prox_coop(u, s) for u, s in zip(U, t)])
    np.testing.assert_allclose(ours, prox_grid(U, t), atol=1e-6)


@settings(max_examples=60, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0, 4))
def test_prox_never_flips_signs(a, b, t):
    v = prox_coop([a, b], t)
    assert v[0] * a >= 0 and v[1] * b >= 0
    assert np.linalg.norm(v) <= math.hypot(a, b) + 1e-12


def test_objective_scalar_case():
    S = CovariancePair((np.array([[2.0]]), np.array([[2.0]])), (4, 4))
    K = (np.array([[0.5]]), np.array([[0.5]]))
    val = objective(K, S, uniform_weights(1, 123.0))
    assert val == pytest.approx(2 * 2 * (math.log(0.5) - 1))


def _instance(p, seed, n=(20, 25), Q=1, within=0.7):
    model = synth_network(p, Q, within, within, seed)
    X = sample_expression(model, n[0], n[1], seed + 100)
    return covariance_pair(X)


def test_objective_matches_hand_formula():
    S = _instance(2, 11)
    rng = np.random.default_rng(11)
    K = []
    for _ in range(2):
        A = rng.normal(size=(2, 2))
        K.append(A @ A.T + np.eye(2))
    w = uniform_weights(2, 0.7)
    ref = objective_p2(K[0], K[1], S.S[0], S.S[1], S.n[0], S.n[1], 1.0, 0.7)
    assert objective(K, S, w) == pytest.approx(ref, abs=1e-10)
    ll = objective(K, S, w.with_lambda(0.0))
    assert ll == pytest.approx(ref + 2 * 0.7 * coop_penalty([K[0][0, 1], K[1][0, 1]]), abs=1e-10)


def test_objective_rejects_non_pd():
    S = _instance(2, 1)
    with pytest.raises(NotPositiveDefinite):
        objective((np.array([[1, 2], [2, 1.0]]), np.eye(2)), S, uniform_weights(2))


def test_solver_anchors():
    S = _instance(3, 5)
    fit = solve_multitask(S, uniform_weights(3, 0.0))
    assert fit.converged
    for k, s in zip(fit.K, S.S):
        np.testing.assert_allclose(k, np.linalg.inv(s), atol=1e-6)
    fit = solve_multitask(S, uniform_weights(3, 1e6))
    for k, s in zip(fit.K, S.S):
        off = k - np.diag(np.diag(k))
        assert np.all(off == 0)
        np.testing.assert_allclose(np.diag(k), 1 / np.diag(s), atol=1e-6)


def test_single_gene():
    S = CovariancePair((np.array([[2.0]]), np.array([[0.5]])), (5, 6))
    fit = oracle_solve_small(S, uniform_weights(1, 1.0))
    assert fit.K[0][0, 0] == 0.5 and fit.K[1][0, 0] == 2.0
    fit = solve_multitask(S, uniform_weights(1, 1.0))
    np.testing.assert_allclose([fit.K[0][0, 0], fit.K[1][0, 0]], [0.5, 2.0], atol=1e-9)


def test_solver_matches_oracle_seed13():
    S = _instance(3, 13)
    Z = np.array([[1, 0], [1, 0], [0, 1]])
    w = penalty_weights(Z, 2.0, 0.5, lam=0.1)
    fit = solve_multitask(S, w)
    ref = oracle_solve_small(S, w)
    assert abs(fit.objective - ref.objective) <= 1e-4
    for a, b in zip(fit.K, ref.K):
        assert np.array_equal(a != 0, b != 0)


def test_oracle_at_least_as_good_seed17():
    S = _instance(3, 17)
    w = uniform_weights(3, 1.5)
    fit = solve_multitask(S, w)
    ref = oracle_solve_small(S, w)
    assert ref.objective >= fit.objective - 1e-6
    assert objective(ref.K, S, w) == pytest.approx(ref.objective)


def test_oracle_large_lambda_is_diagonal():
    S = _instance(3, 3)
    ref = oracle_solve_small(S, uniform_weights(3, 1e6))
    fit = solve_multitask(S, uniform_weights(3, 1e6))
    for a, b in zip(ref.K, fit.K):
        np.testing.assert_allclose(a, b, atol=1e-6)


def test_independent_reduces_to_l1():
    # with one condition the joint problem is the l1 graphical lasso; zeroing
    # the other condition's weights must not change the fit
    S = _instance(4, 8, Q=1, within=0.5)
    w = uniform_weights(4, 3.0)
    ind = solve_independent(S, w)
    assert ind.converged
    for c in range(2):
        single = CovariancePair((S.S[c], S.S[c]), (S.n[c], S.n[c]))
        joint = solve_multitask(single, w.with_lambda(3.0 * math.sqrt(2)))
        # identical copies: coop of (x, x) is sqrt(2)|x|, so the scaled joint
        # fit equals the single-condition l1 fit
        np.testing.assert_allclose(joint.K[0], ind.K[c], atol=1e-5)


def test_diagnostics_json():
    fit = solve_multitask(_instance(3, 2), uniform_weights(3, 1.0))
    d = json.loads(fit.diagnostics_json())
    assert set(d) == {"iterations", "final_objective", "kkt_residual", "converged"}
    assert d["converged"] and d["kkt_residual"] < 1e-7


def test_extract_network_examples():
    D = (np.eye(3), np.eye(3))
    assert extract_network(D).edges == ()
    K1 = np.array([[1.0, -0.5], [-0.5, 1.0]])
    net = extract_network((K1, np.eye(2)), genes=("a", "b"))
    (e,) = net.edges
    assert (e.i, e.j, e.present_in) == (0, 1, (1,))
    assert e.pcor[0] == pytest.approx(0.5) and e.sign == (1, 0)
    assert partial_correlations(K1)[0, 1] == pytest.approx(0.5)


def test_extract_network_relabeling():
    S = _instance(4, 4, within=0.6)
    fit = solve_multitask(S, uniform_weights(4, 1.0))
    genes = ("a", "b", "c", "d")
    net = extract_network(fit.K, genes=genes)
    perm = [2, 0, 3, 1]
    Kp = tuple(k[np.ix_(perm, perm)] for k in fit.K)
    netp = extract_network(Kp, genes=tuple(genes[i] for i in perm))

    def edge_set(n):
        return {(frozenset((n.genes[e.i], n.genes[e.j])), e.present_in, tuple(round(v, 12) for v in e.pcor)) for e in n.edges}

    assert edge_set(net) == edge_set(netp)


def test_network_roundtrip():
    S = _instance(4, 6, within=0.8)
    fit = solve_multitask(S, uniform_weights(4, 0.5))
    net = extract_network(fit.K, genes=("w", "x", "y", "z"))
    text = format_network(net)
    back = parse_network(text, net.genes)
    assert format_network(back) == text
    with pytest.raises(SchemaError):
        parse_network(text.replace("pcor2", "r2", 1))


def test_select_lambda_single_and_diagonal():
    S = _instance(3, 9)
    sel = select_lambda(S, uniform_weights(3), [0.7])
    assert sel.best == 0.7
    sel = select_lambda(S, uniform_weights(3), [1e5, 1e6])
    # both fits are diagonal: equal likelihoods and equal penalties, tie -> larger
    assert sel.table[0][1] == pytest.approx(sel.table[1][1])
    assert sel.best == 1e6


def test_solver_invariants():
    S = _instance(6, 12, Q=2, within=0.6)
    w = penalty_weights(np.array([[1, 0]] * 3 + [[0, 1]] * 3), 2.0, 0.5, lam=2.0)
    fit = solve_multitask(S, w)
    trace = np.array(fit.objective_trace)
    assert (np.diff(trace) >= -1e-12 * np.abs(trace[1:])).all()
    for k in fit.K:
        assert np.array_equal(k, k.T)
        np.linalg.cholesky(k)


def test_prox_does_not_increase_penalty():
    rng = np.random.default_rng(3)
    for u, t in zip(rng.normal(size=(200, 2)), rng.uniform(0, 2, 200)):
        assert coop_penalty(prox_coop(u, t)) <= coop_penalty(u) + 1e-15


def test_zero_variance_rejected():
    S = CovariancePair((np.diag([1.0, 0.0]), np.eye(2)), (5, 5))
    with pytest.raises(ValueError, match="zero variance"):
        solve_multitask(S, uniform_weights(2, 1.0))
