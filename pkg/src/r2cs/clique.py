"""Fixed-size clique enumeration on bitset adjacency (Python ints as bitsets)."""

from __future__ import annotations

from typing import Iterator, Sequence


def adjacency_bitsets(n: int, edges) -> list[int]:
    adj = [0] * n
    for i, j in edges:
        if i == j:
            raise ValueError("self-loop")
        adj[i] |= 1 << j
        adj[j] |= 1 << i
    return adj


def _bits(x: int) -> Iterator[int]:
    while x:
        low = x & -x
        yield low.bit_length() - 1
        x ^= low


def degeneracy_order(adj: Sequence[int]) -> list[int]:
    """Vertices in degeneracy (smallest-last) order."""
    n = len(adj)
    remaining = (1 << n) - 1
    deg = [bin(a).count("1") for a in adj]
    order = []
    alive = [True] * n
    for _ in range(n):
        v = min((u for u in range(n) if alive[u]), key=lambda u: deg[u])
        order.append(v)
        alive[v] = False
        remaining &= ~(1 << v)
        for u in _bits(adj[v] & remaining):
            deg[u] -= 1
    return order


def _greedy_colour_bound(cand: int, adj: Sequence[int]) -> int:
    """Number of colours in a greedy colouring of ``cand``: a clique-size bound."""
    colours = 0
    rest = cand
    while rest:
        colours += 1
        avail = rest
        while avail:
            v = (avail & -avail).bit_length() - 1
            rest &= ~(1 << v)
            avail &= ~(1 << v) & ~adj[v]
    return colours


def cliques_of_size(adj: Sequence[int], k: int) -> list[tuple[int, ...]]:
    """Every clique with exactly k vertices, each reported once as a sorted tuple.

    Vertices are added in degeneracy order, later vertices only, so each
    clique is built along a single path; branches whose candidate set cannot
    be coloured with enough colours are cut.
    """
    n = len(adj)
    if k <= 0:
        return [()]
    if k > n:
        return []
    order = degeneracy_order(adj)
    pos = {v: i for i, v in enumerate(order)}
    # relabel so that "later" is a bit mask
    radj = [0] * n
    for v in range(n):
        for u in _bits(adj[v]):
            radj[pos[v]] |= 1 << pos[u]
    out: list[tuple[int, ...]] = []

    def extend(clique: list[int], cand: int) -> None:
        need = k - len(clique)
        if need == 0:
            out.append(tuple(sorted(order[i] for i in clique)))
            return
        if bin(cand).count("1") < need:
            return
        if need > 2 and _greedy_colour_bound(cand, radj) < need:
            return
        while cand:
            if bin(cand).count("1") < need:
                return
            v = (cand & -cand).bit_length() - 1
            cand &= ~(1 << v)
            clique.append(v)
            extend(clique, cand & radj[v])
            clique.pop()

    extend([], (1 << n) - 1)
    out.sort()
    return out


def is_clique(adj: Sequence[int], verts: Sequence[int]) -> bool:
    for i, a in enumerate(verts):
        for b in verts[i + 1:]:
            if not (adj[a] >> b) & 1:
                return False
    return True
