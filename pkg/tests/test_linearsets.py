from __future__ import annotations

import itertools

import numpy as np
import pytest

from r2cs.clique import adjacency_bitsets, cliques_of_size, degeneracy_order, is_clique
from r2cs.conic import frobenius_element, group_element, point_index
from r2cs.linalg import fq_basis, fq_rank, span_points
from r2cs.linearsets import (
    Classifier,
    LinearSet,
    all_internal,
    build_graph,
    clique_size,
    compatible,
    enumerate_rank3,
    find_higher_rank,
    host_dimension,
    materialize,
    rref_subspaces,
    search_subplanes,
    subline_inventory,
    subplanes_of,
    verify_witness,
)

from conftest import frame_for


@pytest.fixture(scope="module")
def frame27():
    return frame_for(3, 1, 3)


@pytest.fixture(scope="module")
def rank3_27(frame27):
    return enumerate_rank3(frame27)


def brute_span(F, gens):
    pts = set()
    for lams in itertools.product(F.subfield(), repeat=len(gens)):
        if not any(lams):
            continue
        v = [0, 0, 0]
        for lam, g in zip(lams, gens):
            v = [F.add(v[j], F.mul(lam, g[j])) for j in range(3)]
        if any(v):
            pts.add(point_index(F, v))
    return sorted(pts)


def test_materialize(frame81):
    F = frame81.F
    rng = np.random.default_rng(3)
    for r in (2, 3, 4):
        gens = [frame81.x] + [tuple(rng.integers(1, F.order, 3).tolist()) for _ in range(r - 1)]
        if fq_rank(F, gens) < r:
            continue
        ls = materialize(frame81, gens)
        assert list(ls.points) == brute_span(F, gens)
        assert len(ls.points) <= (F.q**r - 1) // (F.q - 1)
        assert LinearSet.from_json(ls.to_json()) == ls
    with pytest.raises(ValueError):
        materialize(frame81, [frame81.x, frame81.x])


def test_fq_rank_and_basis(frame81):
    F = frame81.F
    x = frame81.x
    u = (F.alpha(3), F.alpha(9), 1)
    w = tuple(F.add(x[i], F.mul(F.neg(1), u[i])) for i in range(3))  # x - u
    assert fq_rank(F, [x, u]) == 2
    assert fq_rank(F, [x, u, w]) == 2
    assert len(fq_basis(F, [x, u, w])) == 2
    # alpha*x is F_q-independent of x although projectively equal
    ax = tuple(F.mul(F.alpha(1), c) for c in x)
    assert fq_rank(F, [x, ax]) == 2
    assert host_dimension(F, [x, ax]) == 0
    assert host_dimension(F, [x, u, ax]) == 1
    assert list(span_points(F, [x, u])) == brute_span(F, [x, u])


def test_compatible_matches_point_test(frame81):
    F = frame81.F
    inv = subline_inventory(frame81)
    rng = np.random.default_rng(4)
    I = rng.integers(0, len(inv), 400)
    J = rng.integers(0, len(inv), 400)
    keep = I != J
    I, J = I[keep], J[keep]
    got = compatible(frame81, inv.gens[I], inv.gens[J])
    for k, (i, j) in enumerate(zip(I.tolist(), J.tolist())):
        gens = [frame81.x, tuple(inv.gens[i]), tuple(inv.gens[j])]
        basis = fq_basis(F, gens)
        expect = all_internal(frame81, brute_span(F, basis))
        assert bool(got[k]) == expect


def test_rank3_sets(frame27, rank3_27):
    F = frame27.F
    assert rank3_27.sets()
    for i, j in rank3_27.sets()[:60]:
        ls = rank3_27.linear_set(i, j)
        assert len(ls.points) <= F.q**2 + F.q + 1
        assert all_internal(frame27, ls.points)
    for i, j in rank3_27.subplane_pairs()[:20]:
        assert rank3_27.linear_set(i, j).host_dimension == 2
    for i, j in rank3_27.line_pairs()[:20]:
        assert rank3_27.linear_set(i, j).host_dimension == 1


def test_search_matches_exhaustive_route(frame27, rank3_27):
    # streaming search over orbit representatives vs every pair of sublines
    res = search_subplanes(frame27)
    full = {rank3_27.linear_set(i, j).points for i, j in rank3_27.subplane_pairs()}
    assert {s.points for s in res.subplanes} <= full
    cl = Classifier(frame27)
    a = {cl.canonical(s.points)[0] for s in res.subplanes}
    b = {cl.canonical(p)[0] for p in full}
    assert a == b and len(a) >= 1
    for s in res.subplanes:
        assert len(s.points) == 13 and s.host_dimension == 2 and all_internal(frame27, s.points)


def test_search_zero_for_q5():
    fr = frame_for(5, 1, 3)
    res = search_subplanes(fr)
    assert not res.found


def test_graph_and_cliques(frame27, rank3_27):
    inv = rank3_27.inventory
    first, second = max(rank3_27.pairs.items(), key=lambda kv: len(kv[1]))
    g = build_graph(frame27, inv, first, second)
    n = len(g.vertices)
    for a in range(n):
        assert not (g.adj[a] >> a) & 1
        for b in range(n):
            assert ((g.adj[a] >> b) & 1) == ((g.adj[b] >> a) & 1)
    # adjacency is the rank-3 internality of the second lines
    for a, b in list(itertools.combinations(range(n), 2))[:200]:
        u, v = inv.gens[g.vertices[a]], inv.gens[g.vertices[b]]
        gens = fq_basis(frame27.F, [frame27.x, tuple(u), tuple(v)])
        assert bool((g.adj[a] >> b) & 1) == all_internal(frame27, brute_span(frame27.F, gens))


def test_higher_rank_small(frame27, rank3_27):
    res = find_higher_rank(frame27, 3, rank3_27, require_subplane=False)
    # rank-3 through cliques of size q: every set internal
    for ls in res.sets:
        assert all_internal(frame27, ls.points)
    assert clique_size(3, 4) == 12 and clique_size(3, 5) == 39 and clique_size(5, 4) == 30


def test_clique_search_against_brute_force():
    rng = np.random.default_rng(7)
    for trial in range(20):
        n = 11
        edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < 0.6]
        adj = adjacency_bitsets(n, edges)
        es = set(edges)
        for k in (3, 4, 5):
            brute = sorted(c for c in itertools.combinations(range(n), k)
                           if all((a, b) in es for a, b in itertools.combinations(c, 2)))
            got = sorted(tuple(sorted(c)) for c in cliques_of_size(adj, k))
            assert got == brute
            assert all(is_clique(adj, c) for c in got)
        assert sorted(degeneracy_order(adj)) == list(range(n))


def test_classifier_invariance(frame27, rank3_27):
    fr = frame27
    F = fr.F
    ls = rank3_27.linear_set(*rank3_27.subplane_pairs()[0])
    rng = np.random.default_rng(8)
    for semi in (False, True):
        cl = Classifier(fr, semi)
        canon, el = cl.canonical(ls.points)
        assert verify_witness(fr, ls.points, el, canon)
        for a, b, c, d in rng.integers(0, F.order, (4, 4)).tolist():
            if F.mul(a, d) == F.mul(b, c):
                continue
            g = group_element(F, a, b, c, d)
            img = sorted(g.apply_indices(F, np.array(ls.points)).tolist())
            assert cl.canonical(img)[0] == canon
        c = cl.classify([ls.points, img])
        assert c.class_count == 1
        for s, w in zip([ls.points, img], c.witnesses):
            assert verify_witness(fr, s, w, c.canonical_forms[0])
    # Frobenius images always fall in the same semilinear class
    phi = frobenius_element(1)
    img = sorted(phi.apply_indices(F, np.array(ls.points)).tolist())
    semi = Classifier(fr, True)
    assert semi.canonical(img)[0] == semi.canonical(ls.points)[0]
    with pytest.raises(ValueError):
        semi.canonical(materialize(fr, [fr.x, (1, 0, 0), (0, 1, 0)]).points)


def test_rref_subspaces():
    F = frame_for(3, 1, 2).F
    # Gaussian binomial [4 choose 2]_3 = 130, [3 choose 3]_3 = 1
    assert len(rref_subspaces(F, 4, 2)) == 130
    assert len(rref_subspaces(F, 3, 3)) == 1
    assert len(rref_subspaces(F, 4, 3)) == 40


def test_subplanes_of(frame27):
    fr = frame27
    ls = materialize(fr, [fr.x, (1, 0, 0), (0, 0, 1)])
    assert ls.host_dimension == 2
    assert subplanes_of(fr, ls) == [ls.points]
    # x lies on the line through (1,0,0) and (0,1,0): no subplane there
    assert subplanes_of(fr, materialize(fr, [fr.x, (1, 0, 0), (0, 1, 0)])) == []
