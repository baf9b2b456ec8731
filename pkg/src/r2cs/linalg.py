"""F_q-linear algebra on vectors of F_{q^n}^3 and batched group actions."""

from __future__ import annotations

import itertools
from typing import Sequence

import numpy as np

from .conic import GroupElement, vindex_points, vpoint_index
from .field import FieldTower


def prime_digits(F: FieldTower, v: Sequence[int]) -> list[int]:
    """Coordinates of a vector of F_{q^n}^3 over F_p."""
    out: list[int] = []
    for c in v:
        out.extend(F.to_vector(int(c)))
    return out


def _rank_mod_p(rows: list[list[int]], p: int) -> int:
    if not rows:
        return 0
    A = np.array(rows, dtype=np.int64) % p
    r = 0
    nrows, ncols = A.shape
    for c in range(ncols):
        piv = next((i for i in range(r, nrows) if A[i, c]), None)
        if piv is None:
            continue
        A[[r, piv]] = A[[piv, r]]
        A[r] = (A[r] * pow(int(A[r, c]), p - 2, p)) % p
        others = [i for i in range(nrows) if i != r and A[i, c]]
        for i in others:
            A[i] = (A[i] - A[i, c] * A[r]) % p
        r += 1
        if r == nrows:
            break
    return r


def fq_rank(F: FieldTower, vectors: Sequence[Sequence[int]]) -> int:
    """Dimension over F_q of the span of ``vectors``."""
    basis = [F.pow(F.alpha(F.subfield_step), j) for j in range(F.e)] if F.e > 1 else [1]
    rows = [prime_digits(F, [F.mul(c, x) for x in v]) for v in vectors for c in basis]
    return _rank_mod_p(rows, F.p) // F.e


def fq_basis(F: FieldTower, vectors: Sequence[Sequence[int]]) -> list[tuple[int, int, int]]:
    """Greedy F_q-basis taken from ``vectors`` in order."""
    out: list[tuple[int, int, int]] = []
    for v in vectors:
        cand = out + [tuple(int(c) for c in v)]
        if fq_rank(F, cand) == len(cand):
            out = cand  # type: ignore[assignment]
    return out


def projective_coefficients(F: FieldTower, rank: int) -> np.ndarray:
    """One coefficient tuple per point of PG(rank-1, q): first nonzero entry 1."""
    fq = F.subfield()
    rows = []
    for tup in itertools.product(fq, repeat=rank):
        nz = next((c for c in tup if c), None)
        if nz == 1:
            rows.append(tup)
    return np.array(rows, dtype=np.int64)


def span_points(F: FieldTower, gens: Sequence[Sequence[int]]) -> np.ndarray:
    """Sorted distinct point indices of the F_q-linear set spanned by ``gens``."""
    G = np.asarray(gens, dtype=np.int64).reshape(-1, 3)
    C = projective_coefficients(F, len(G))
    X = []
    for j in range(3):
        acc = np.zeros(len(C), dtype=np.int64)
        for i in range(len(G)):
            acc = F.vadd(acc, F.vmul(C[:, i], G[i, j]))
        X.append(acc)
    idx = vpoint_index(F, *X)
    if np.any(idx < 0):
        raise ValueError("generators are F_q-dependent")
    return np.unique(idx)


class ElementBatch:
    """Many group elements packed for simultaneous action on point indices."""

    def __init__(self, F: FieldTower, elems: Sequence[GroupElement]):
        self.F = F
        self.elems = list(elems)
        self.M = np.array([g.matrix for g in self.elems], dtype=np.int64).reshape(-1, 9)
        self.frob = np.array([g.frob for g in self.elems], dtype=np.int64)

    def __len__(self) -> int:
        return len(self.elems)

    def apply(self, idx) -> np.ndarray:
        """(K, N) array: row k is element k applied to the points ``idx``."""
        F = self.F
        idx = np.asarray(idx, dtype=np.int64)
        X = [np.broadcast_to(c, (len(self), len(idx))) for c in vindex_points(F, idx)]
        if np.any(self.frob):
            e = np.array([pow(F.p, int(k), F.m) for k in self.frob], dtype=np.int64)[:, None]
            X = [np.where(c == 0, 0, ((c - 1) * e) % F.m + 1) for c in X]
        out = []
        for j in range(3):
            acc = F.vmul(X[0], self.M[:, j][:, None])
            acc = F.vadd(acc, F.vmul(X[1], self.M[:, 3 + j][:, None]))
            acc = F.vadd(acc, F.vmul(X[2], self.M[:, 6 + j][:, None]))
            out.append(acc)
        return vpoint_index(F, *out)
