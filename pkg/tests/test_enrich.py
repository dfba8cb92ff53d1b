import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.cluster.hierarchy import linkage
from scipy.spatial.distance import squareform

from priornet.datamodel import Signature
from priornet.enrich import (
    EnrichmentResult,
    build_catalog,
    cluster_pathways,
    cut_core_pathways,
    cut_groups,
    enrich_all,
    enrichment_pvalue,
    format_clusters,
    format_enrichment,
    hypergeom_pmf,
    hypergeom_upper_tail,
    jaccard_distance,
    jaccard_matrix,
    membership_matrix,
    parse_clusters,
    parse_enrichment,
    significant_pathways,
    suggest_q,
    ward_cluster,
)
from priornet.errors import DataWarning, SchemaError


def test_hypergeom_examples():
    assert hypergeom_pmf(2, 10, 4, 5) == pytest.approx(10 / 21, abs=1e-12)
    assert hypergeom_pmf(3, 5, 5, 3) == pytest.approx(1.0, abs=1e-12)
    assert hypergeom_pmf(3, 10, 2, 3) == 0.0
    assert hypergeom_upper_tail(4, 10, 4, 5) == pytest.approx(5 / 210, abs=1e-12)
    assert hypergeom_upper_tail(0, 10, 4, 5) == pytest.approx(1.0, abs=1e-12)


def test_hypergeom_enumeration_small():
    M, K, n = 7, 3, 4
    counts = {}
    for draw in itertools.combinations(range(M), n):
        y = sum(1 for g in draw if g < K)
        counts[y] = counts.get(y, 0) + 1
    total = math.comb(M, n)
    for y in range(n + 1):
        assert hypergeom_pmf(y, M, K, n) == pytest.approx(counts.get(y, 0) / total, abs=1e-12)


def sig(*genes):
    return Signature.from_genes(genes, "forest-retained")


def test_full_pathway_forces_p_one():
    cat = build_catalog({"ALL": list("abcdef"), "X": ["z"]}, universe=list("abcdefz"))
    r = enrichment_pvalue("ALL", sig("a", "b"), cat)
    assert (r.K, r.y, r.n, r.M) == (6, 2, 2, 7)
    cat = build_catalog({"ALL": list("abcd")}, universe=list("abcd"))
    with pytest.warns(DataWarning):
        r = enrichment_pvalue("ALL", sig("a", "q"), cat)
    assert r.y == r.n == 1 and r.p_value == pytest.approx(1.0)


def test_catalog_drops_genes_outside_universe():
    with pytest.warns(DataWarning):
        cat = build_catalog({"P": ["a", "b", "zz"]}, universe=["a", "b", "c"])
    assert cat.pathways["P"] == frozenset("ab") and cat.M == 3


def _res(name, p):
    return EnrichmentResult(name, 3, 1, 2, 10, p)


def test_significant_examples():
    assert [r.pathway for r in significant_pathways([_res("A", 0.01), _res("B", 0.2)])] == ["A"]
    assert significant_pathways([_res("A", 1.0), _res("B", 1.0)]) == []
    ties = significant_pathways([_res("Z", 0.01), _res("B", 0.01), _res("C", 0.001)])
    assert [r.pathway for r in ties] == ["C", "B", "Z"]


def test_membership_examples():
    mm = membership_matrix({"P1": ["a", "b"], "P2": ["c", "d"]})
    assert mm.matrix.shape == (4, 2)
    assert list(mm.matrix.sum(axis=0)) == [2, 2] and (mm.matrix.sum(axis=1) == 1).all()
    mm = membership_matrix({"P1": ["a", "b"], "P2": ["b", "a"]})
    assert np.array_equal(mm.matrix[:, 0], mm.matrix[:, 1])
    mm = membership_matrix({"P1": ["a", "b"], "P2": ["b", "c"]})
    assert list(mm.matrix[mm.genes.index("b")]) == [1, 1]


def test_jaccard_examples():
    assert jaccard_distance([1, 1, 0], [0, 1, 1]) == pytest.approx(2 / 3)
    assert jaccard_distance([1, 0, 1], [1, 0, 1]) == 0.0
    assert jaccard_distance([1, 0, 0], [0, 1, 1]) == 1.0


def four_pathway_D():
    D = np.full((4, 4), 0.9)
    np.fill_diagonal(D, 0.0)
    D[0, 1] = D[1, 0] = 0.1
    D[2, 3] = D[3, 2] = 0.2
    return D


def test_ward_base_case_and_hand_fixture():
    d = ward_cluster(np.array([[0.0, 0.37], [0.37, 0.0]]))
    assert d.merges.tolist() == [[0, 1, 0.37, 2]]
    d = ward_cluster(four_pathway_D())
    assert [tuple(int(v) for v in m[:2]) for m in d.merges] == [(0, 1), (2, 3), (4, 5)]
    # squared distance from {A,B} to C (or D): (2 * 0.81 + 2 * 0.81 - 0.01) / 3
    ab_c = 3.23 / 3
    root = math.sqrt((3 * ab_c + 3 * ab_c - 2 * 0.04) / 4)
    np.testing.assert_allclose(d.heights, [0.1, 0.2, root], atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 9), st.integers(0, 10_000))
def test_ward_heights_match_scipy(m, seed):
    rng = np.random.default_rng(seed)
    D = squareform(rng.uniform(0.05, 1.0, size=m * (m - 1) // 2))
    ours = ward_cluster(D)
    ref = linkage(squareform(D), method="ward")
    np.testing.assert_allclose(np.sort(ours.heights), np.sort(ref[:, 2]), atol=1e-12)


def test_cuts():
    names = ["A", "B", "C", "D"]
    paths = {"A": ["a1", "x"], "B": ["b1"], "C": ["c1", "c2"], "D": ["d1", "x"]}
    s = sig("a1", "b1", "c1", "d1", "x", "other")
    dendro = ward_cluster(four_pathway_D())
    ca = cut_core_pathways(dendro, 2, names, paths, s)
    assert ca.cluster_genes(0) == ("a1", "b1", "x") and ca.cluster_genes(1) == ("c1", "d1", "x")
    assert ca.Z[s.genes.index("other")].sum() == 0
    ca = cut_core_pathways(dendro, 1, names, paths, s)
    assert ca.cluster_genes(0) == ("a1", "b1", "c1", "d1", "x")
    ca = cut_core_pathways(dendro, 4, names, paths, s)
    assert [ca.cluster_genes(q) for q in range(4)] == [("a1", "x"), ("b1",), ("c1",), ("d1", "x")]
    assert cut_groups(dendro, 2) == [[0, 1], [2, 3]]
    assert suggest_q(dendro) == 2


def test_pipeline_tables_roundtrip():
    cat = build_catalog(
        {"P1": ["a", "b", "c"], "P2": ["b", "c", "d"], "P3": ["x", "y"], "P4": ["e", "f", "a"]},
        universe=list("abcdefxyzuvw"),
    )
    s = sig("a", "b", "c", "d", "e")
    res = enrich_all(s, cat)
    text = format_enrichment(res)
    assert format_enrichment(parse_enrichment(text)) == text
    ca, _ = cluster_pathways(significant_pathways(res, 0.5), cat, s, 2)
    ctext = format_clusters(ca)
    back = parse_clusters(ctext, s.genes)
    assert np.array_equal(back.Z, ca.Z) and format_clusters(back) == ctext
    with pytest.raises(SchemaError):
        parse_clusters(ctext.replace("genes", "members", 1), s.genes)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 40), st.data())
def test_hypergeom_symmetry_and_tail_monotone(M, data):
    K = data.draw(st.integers(0, M))
    n = data.draw(st.integers(0, M))
    for y in range(0, min(K, n) + 1):
        assert hypergeom_pmf(y, M, K, n) == pytest.approx(hypergeom_pmf(y, M, n, K), rel=1e-12, abs=1e-300)
    tails = [hypergeom_upper_tail(y, M, K, n) for y in range(0, min(K, n) + 2)]
    assert all(a >= b for a, b in zip(tails, tails[1:]))


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 10), st.integers(0, 10_000))
def test_ward_heights_non_decreasing(m, seed):
    rng = np.random.default_rng(seed)
    sets = [set(rng.choice(30, size=rng.integers(1, 10), replace=False)) for _ in range(m)]
    mm = membership_matrix({f"P{k}": sorted(map(str, s)) for k, s in enumerate(sets)})
    h = ward_cluster(jaccard_matrix(mm)).heights
    assert (np.diff(h) >= -1e-12).all()


def test_duplicate_pathways_merge_at_zero():
    mm = membership_matrix({"P1": ["a", "b"], "P2": ["a", "b"], "P3": ["c"]})
    d = ward_cluster(jaccard_matrix(mm))
    assert d.merges[0, :3].tolist() == [0, 1, 0.0]
