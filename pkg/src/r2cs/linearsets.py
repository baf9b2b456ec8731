"""Rank-3, rank-4 and rank-5 F_q-linear sets through x inside I(C).

Every subline through x is the F_q-span <x, u>_q of x and one generator u,
and two different sublines <x, u1>_q, <x, u2>_q lie in exactly one rank-3
set <x, u1, u2>_q.  Its points off the two sublines are
``u1 + lam*u2`` (lam != 0) and ``x + lam1*u1 + lam2*u2`` (lam1, lam2 != 0),
which is all the compatibility test has to look at.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .clique import adjacency_bitsets, cliques_of_size
from .conic import ConicFrame, GroupElement, ProjLine, Vec, frobenius_element, vis_internal
from .field import FieldTower
from .linalg import ElementBatch, fq_basis, fq_rank, span_points
from .sublines import (
    HOSTS,
    SublineSet,
    canonical_sublines,
    enumerate_subline_pairs,
    sublines_through_x,
)

log = logging.getLogger(__name__)


@dataclass
class LinearSet:
    """An F_q-linear set <g_1, ..., g_r>_q with g_1 = x."""

    rank: int
    generators: list[Vec]
    points: tuple[int, ...]
    host_dimension: int

    def to_json(self) -> dict:
        return {
            "rank": self.rank,
            "generators": [list(g) for g in self.generators],
            "points": list(self.points),
            "host_dimension": self.host_dimension,
        }

    @classmethod
    def from_json(cls, d: dict) -> "LinearSet":
        return cls(int(d["rank"]), [tuple(g) for g in d["generators"]],  # type: ignore[misc]
                   tuple(d["points"]), int(d["host_dimension"]))


def host_dimension(F: FieldTower, gens: Sequence[Vec]) -> int:
    """1 if the vectors span a line of PG(2, q^n), 2 if the whole plane."""
    from .conic import cross

    ref = None
    for i, a in enumerate(gens):
        for b in gens[i + 1:]:
            c = cross(F, a, b)
            if any(c):
                ref = (a, b, c)
                break
        if ref:
            break
    if ref is None:
        return 0
    a, b, c = ref
    line = ProjLine(c)
    return 1 if all(line.contains(F, g) for g in gens) else 2


def materialize(frame: ConicFrame, gens: Sequence[Vec]) -> LinearSet:
    F = frame.F
    gens = [tuple(int(c) for c in g) for g in gens]
    if fq_rank(F, gens) != len(gens):
        raise ValueError("generators are not F_q-independent")
    pts = span_points(F, gens)
    return LinearSet(len(gens), gens, tuple(pts.tolist()), host_dimension(F, gens))  # type: ignore[arg-type]


def all_internal(frame: ConicFrame, points: Iterable[int]) -> bool:
    idx = np.fromiter(points, dtype=np.int64)
    return bool(np.all(frame.is_internal_index(idx)))


# -- the compatibility test -------------------------------------------------------


def _combo(F: FieldTower, a, A, b, B, c=None, C=None):
    """Coordinatewise a*A + b*B (+ c*C) on broadcastable code arrays."""
    out = F.vadd(F.vmul(a, A), F.vmul(b, B))
    if c is not None:
        out = F.vadd(out, F.vmul(c, C))
    return out


def compatible(frame: ConicFrame, U1: np.ndarray, U2: np.ndarray) -> np.ndarray:
    """Row-wise: is <x, U1[i], U2[i]>_q inside I(C)?

    Both sublines are assumed internal already; rows must be different sublines.
    """
    F = frame.F
    U1 = np.atleast_2d(np.asarray(U1, dtype=np.int64))
    U2 = np.atleast_2d(np.asarray(U2, dtype=np.int64))
    n = max(len(U1), len(U2))
    U1 = np.broadcast_to(U1, (n, 3))
    U2 = np.broadcast_to(U2, (n, 3))
    alive = np.arange(n)
    lams = F.subfield_nonzero()
    x = frame.x
    for lam in lams:
        if not alive.size:
            break
        a, b = U1[alive], U2[alive]
        X = [_combo(F, 1, a[:, j], lam, b[:, j]) for j in range(3)]
        alive = alive[vis_internal(F, *X)]
    for l1 in lams:
        for l2 in lams:
            if not alive.size:
                break
            a, b = U1[alive], U2[alive]
            X = [F.vadd(x[j], _combo(F, l1, a[:, j], l2, b[:, j])) for j in range(3)]
            alive = alive[vis_internal(F, *X)]
    mask = np.zeros(n, dtype=bool)
    mask[alive] = True
    return mask


# -- subline inventory ----------------------------------------------------------------


@dataclass
class SublineInventory:
    """All sublines through x inside I(C), external-line ones first."""

    frame: ConicFrame
    gens: np.ndarray
    points: np.ndarray
    host: np.ndarray  # 0 external, 1 secant
    canonical: list[int]  # indices of sublines lying on ell_e or ell_s
    lines: np.ndarray = field(repr=False, default=None)  # type: ignore[assignment]

    def __len__(self) -> int:
        return len(self.gens)

    def index_of(self) -> dict[tuple[int, ...], int]:
        return {tuple(r): i for i, r in enumerate(self.points.tolist())}


def subline_inventory(frame: ConicFrame, pairs: dict[str, list] | None = None) -> SublineInventory:
    gens, pts, host, canon = [], [], [], []
    offset = 0
    for h, host_name in enumerate(HOSTS):
        pr = None if pairs is None else pairs.get(host_name)
        if pr is None:
            pr = enumerate_subline_pairs(frame, host_name)
        can = canonical_sublines(frame, host_name, pr)
        full = sublines_through_x(frame, host_name, can)
        if len(full):
            gens.append(full.gens)
            pts.append(full.points)
            host.append(np.full(len(full), h))
            keys = {tuple(r): i for i, r in enumerate(full.points.tolist())}
            canon.extend(offset + keys[tuple(r)] for r in can.points.tolist())
            offset += len(full)
    q1 = frame.F.q + 1
    inv = SublineInventory(
        frame,
        np.concatenate(gens) if gens else np.zeros((0, 3), dtype=np.int64),
        np.concatenate(pts) if pts else np.zeros((0, q1), dtype=np.int64),
        np.concatenate(host) if host else np.zeros(0, dtype=np.int64),
        sorted(canon),
    )
    inv.lines = _line_ids(frame, inv.gens)
    return inv


def _line_ids(frame: ConicFrame, gens: np.ndarray) -> np.ndarray:
    """Canonical index of the point ``u`` projected from x: identifies the line xu."""
    from .conic import cross, point_index

    F = frame.F
    out = np.empty(len(gens), dtype=np.int64)
    for i, u in enumerate(gens.tolist()):
        out[i] = point_index(F, cross(F, frame.x, u))
    return out


# -- rank 3 ---------------------------------------------------------------------------


def pair_subplane(frame: ConicFrame, u1: Vec, u2: Vec) -> LinearSet | None:
    """The subplane <x, u1, u2>_q if it lies in I(C), else None.

    ``u1`` and ``u2`` generate sublines through x on different lines.
    """
    F = frame.F
    if host_dimension(F, [frame.x, u1, u2]) != 2:
        raise ValueError("sublines span the same line")
    if not compatible(frame, np.array([u1]), np.array([u2]))[0]:
        return None
    ls = materialize(frame, [frame.x, u1, u2])
    if not all_internal(frame, ls.points):
        raise AssertionError("compatible pair produced a non-internal point")
    return ls


@dataclass
class Rank3Result:
    """Rank-3 sets through x stored as ordered pairs of subline indices."""

    inventory: SublineInventory
    pairs: dict[int, np.ndarray]  # first (canonical) subline -> compatible second sublines

    def sets(self) -> list[tuple[int, int]]:
        return [(i, int(j)) for i, js in self.pairs.items() for j in js]

    def subplane_pairs(self) -> list[tuple[int, int]]:
        lines = self.inventory.lines
        return [(i, j) for i, j in self.sets() if lines[i] != lines[j]]

    def line_pairs(self) -> list[tuple[int, int]]:
        lines = self.inventory.lines
        return [(i, j) for i, j in self.sets() if lines[i] == lines[j]]

    def linear_set(self, i: int, j: int) -> LinearSet:
        inv = self.inventory
        return materialize(inv.frame, [inv.frame.x, tuple(inv.gens[i]), tuple(inv.gens[j])])


def enumerate_rank3(frame: ConicFrame, inventory: SublineInventory | None = None) -> Rank3Result:
    """For every subline ell on ell_e or ell_s, the sublines compatible with it.

    Subplanes (second subline on another line) and line-contained rank-3 sets
    (same line) come out of the same test.
    """
    inv = subline_inventory(frame) if inventory is None else inventory
    out: dict[int, np.ndarray] = {}
    for i in inv.canonical:
        ok = compatible(frame, inv.gens[i], inv.gens)
        ok[i] = False
        out[i] = np.flatnonzero(ok)
    return Rank3Result(inv, out)


def subline_orbits(frame: ConicFrame, canonical: SublineSet) -> tuple[np.ndarray, np.ndarray]:
    """Orbit labels of the sublines of one host line under G_x, and one index per orbit.

    Two sublines on the same line through x are G_x-equivalent exactly when an
    element fixing x and that line maps one onto the other.
    """
    from .conic import line_stabilizer

    F = frame.F
    labels = np.full(len(canonical), -1, dtype=np.int64)
    if not len(canonical):
        return labels, np.zeros(0, dtype=np.int64)
    index = {tuple(r): i for i, r in enumerate(canonical.points.tolist())}
    stab = line_stabilizer(frame, frame.host_line(canonical.host))
    reps = []
    for i, row in enumerate(canonical.points.tolist()):
        if labels[i] >= 0:
            continue
        for g in stab:
            labels[index[tuple(sorted(g.apply_indices(F, np.asarray(row)).tolist()))]] = len(reps)
        reps.append(i)
    return labels, np.asarray(reps, dtype=np.int64)


def line_transversal(frame: ConicFrame, host: str) -> list[GroupElement]:
    """One element of G_x for each line through x in the G_x-orbit of the host line."""
    F = frame.F
    from .sublines import host_direction
    from .conic import cross, point_index

    w = host_direction(frame, host)
    seen = set()
    out = []
    for g in frame.stabilizer_of_x:
        key = point_index(F, cross(F, frame.x, g.apply(F, w)))
        if key not in seen:
            seen.add(key)
            out.append(g)
    return out


def _stabilizer_images(frame: ConicFrame, elems: Sequence[GroupElement], U: np.ndarray) -> np.ndarray:
    """(K*R, 3) generators g(U[r]) / c_g, with g(x) = c_g * x, for K elements and R rows."""
    F = frame.F
    M = np.array([g.matrix for g in elems], dtype=np.int64).reshape(-1, 9)
    cols = []
    for j in range(3):
        acc = F.vmul(U[None, :, 0], M[:, j][:, None])
        acc = F.vadd(acc, F.vmul(U[None, :, 1], M[:, 3 + j][:, None]))
        acc = F.vadd(acc, F.vmul(U[None, :, 2], M[:, 6 + j][:, None]))
        cols.append(acc)
    c = np.array([g.apply(F, frame.x)[0] for g in elems], dtype=np.int64)[:, None]
    ci = F.vinv(c)
    return np.stack([F.vmul(ci, col) for col in cols], axis=2).reshape(-1, 3)


@dataclass
class SubplaneSearch:
    """Subplanes through x containing a representative subline."""

    representatives: dict[str, np.ndarray]  # host -> generators of the orbit representatives
    subplanes: list[LinearSet]
    tested: int

    @property
    def found(self) -> bool:
        return bool(self.subplanes)


def search_subplanes(frame: ConicFrame, pairs: dict[str, list] | None = None, *,
                     stop_at_first: bool = False, rows_per_batch: int = 1 << 18,
                     progress=None) -> SubplaneSearch:
    """Subplanes through x in I(C), up to G_x, without storing every subline through x.

    Orbits of sublines through x are numbered 0, 1, ...  A subplane through x
    is moved by G_x so that the subline of least orbit number it contains
    becomes that orbit's representative ell_1; the second subline then only
    needs to run over sublines of orbit number >= that of ell_1.  Those are
    produced once each, as images of the ell_e / ell_s sublines under one
    element per line through x, and streamed in batches.
    """
    F = frame.F
    canon: dict[str, SublineSet] = {}
    labels: dict[str, np.ndarray] = {}
    reps: dict[str, np.ndarray] = {}
    offset = 0
    for host in HOSTS:
        pr = None if pairs is None else pairs.get(host)
        cs = canonical_sublines(frame, host, pr if pr is not None else enumerate_subline_pairs(frame, host))
        lab, rp = subline_orbits(frame, cs)
        canon[host] = cs
        labels[host] = lab + offset
        reps[host] = cs.gens[rp]
        offset += len(rp)
    found: dict[tuple[int, ...], LinearSet] = {}
    tested = 0
    x = frame.x
    trans = {h: line_transversal(frame, h) for h in HOSTS if len(canon[h])}
    order = [(h, i) for h in HOSTS for i in range(len(reps[h]))]
    for rank, (h1, i) in enumerate(order):
        u1 = reps[h1][i]
        u1t = tuple(int(c) for c in u1)
        for h2, elems in trans.items():
            cand = canon[h2].gens[labels[h2] >= rank]
            if not len(cand):
                continue
            per = max(1, rows_per_batch // len(cand))
            for k0 in range(0, len(elems), per):
                U2 = _stabilizer_images(frame, elems[k0:k0 + per], cand)
                tested += len(U2)
                for r in np.flatnonzero(compatible(frame, u1[None, :], U2)).tolist():
                    u2 = tuple(int(c) for c in U2[r])
                    if host_dimension(F, [x, u1t, u2]) != 2:
                        continue
                    ls = materialize(frame, [x, u1t, u2])
                    found.setdefault(ls.points, ls)
                if stop_at_first and found:
                    return SubplaneSearch(reps, list(found.values()), tested)
        if progress is not None:
            progress(rank + 1, len(order), len(found))
    return SubplaneSearch(reps, [found[k] for k in sorted(found)], tested)


# -- compatibility graphs and higher rank ---------------------------------------------


@dataclass
class CompatibilityGraph:
    first: int
    vertices: np.ndarray  # subline indices of the second generating lines
    adj: list[int]

    def edge_count(self) -> int:
        return sum(bin(a).count("1") for a in self.adj) // 2


def build_graph(frame: ConicFrame, inventory: SublineInventory, first: int,
                vertices: Sequence[int]) -> CompatibilityGraph:
    """Vertices adjacent iff their second lines generate an internal rank-3 set."""
    verts = np.asarray(vertices, dtype=np.int64)
    n = len(verts)
    adj = [0] * n
    if n > 1:
        I, J = np.triu_indices(n, 1)
        ok = compatible(frame, inventory.gens[verts[I]], inventory.gens[verts[J]])
        adj = adjacency_bitsets(n, zip(I[ok].tolist(), J[ok].tolist()))
    return CompatibilityGraph(first, verts, adj)


def clique_size(q: int, rank: int) -> int:
    """Sublines through x in a rank-r set containing a fixed one, minus that one."""
    return (q ** (rank - 1) - 1) // (q - 1) - 1


@dataclass
class HigherRankResult:
    rank: int
    sets: list[LinearSet]
    cliques: dict[int, list[tuple[int, ...]]]
    graphs: dict[int, CompatibilityGraph]
    rejected_cliques: int = 0


def find_higher_rank(frame: ConicFrame, rank: int, rank3: Rank3Result | None = None,
                     require_subplane: bool = True) -> HigherRankResult:
    """Rank-r sets through x in I(C) via cliques of size clique_size(q, r) in each graph."""
    F = frame.F
    if rank3 is None:
        rank3 = enumerate_rank3(frame)
    inv = rank3.inventory
    k = clique_size(F.q, rank)
    found: dict[tuple[int, ...], LinearSet] = {}
    cliques: dict[int, list[tuple[int, ...]]] = {}
    graphs: dict[int, CompatibilityGraph] = {}
    rejected = 0
    for first, second in rank3.pairs.items():
        if len(second) < k:
            continue
        g = build_graph(frame, inv, first, second)
        graphs[first] = g
        cl = cliques_of_size(g.adj, k)
        cliques[first] = cl
        for c in cl:
            vecs = [frame.x, tuple(inv.gens[first])] + [tuple(inv.gens[g.vertices[v]]) for v in c]
            basis = fq_basis(F, vecs)
            if len(basis) != rank:
                rejected += 1
                continue
            ls = materialize(frame, basis)
            if not all_internal(frame, ls.points):
                raise AssertionError("clique produced a set with non-internal points")
            if require_subplane and ls.host_dimension != 2:
                continue
            found.setdefault(ls.points, ls)
        log.debug("graph %d: %d vertices, %d cliques", first, len(second), len(cl))
    sets = [found[key] for key in sorted(found)]
    return HigherRankResult(rank, sets, cliques, graphs, rejected)


def find_rank4(frame: ConicFrame, rank3: Rank3Result | None = None) -> HigherRankResult:
    return find_higher_rank(frame, 4, rank3)


def find_rank5(frame: ConicFrame, rank3: Rank3Result | None = None) -> HigherRankResult:
    return find_higher_rank(frame, 5, rank3)


# -- equivalence classes ------------------------------------------------------------------


class Classifier:
    """Orbits of point sets under the conic stabiliser G, optionally with Frobenius.

    The canonical form of a set S of internal points is the least sorted
    tuple among h(t_p(S)) for p in S and h in the stabiliser of x, where t_p
    is a fixed element moving p to x.
    """

    CHUNK = 1 << 22  # entries per batch of images

    def __init__(self, frame: ConicFrame, semilinear: bool = False):
        self.frame = frame
        self.semilinear = semilinear
        F = frame.F
        elems = list(frame.stabilizer_of_x)
        if semilinear:
            phi = frobenius_element(1)
            fx = phi.apply(F, frame.x)
            from .conic import point_index

            psi = phi.then(F, frame.transversal[point_index(F, fx)])
            powers = [None]
            cur = psi
            for _ in range(1, F.degree):
                powers.append(cur)
                cur = cur.then(F, psi)
            elems = [g if s is None else s.then(F, g) for s in powers for g in elems]
        self.stab = ElementBatch(F, elems)
        self._inverses: dict[int, GroupElement] = {}

    def canonical(self, points: Sequence[int]) -> tuple[tuple[int, ...], GroupElement]:
        """(canonical point tuple, element mapping ``points`` onto it)."""
        F = self.frame.F
        pts = np.asarray(points, dtype=np.int64)
        trans = self.frame.transversal
        missing = [int(p) for p in pts if int(p) not in trans]
        if missing:
            raise ValueError(f"point {missing[0]} is not internal")
        k = len(pts)
        best_row = None
        best = (0, 0)
        chunk = max(1, self.CHUNK // (len(self.stab) * k))
        for s0 in range(0, k, chunk):
            sel = pts[s0:s0 + chunk].tolist()
            moved = np.stack([trans[p].apply_indices(F, pts) for p in sel])
            imgs = self.stab.apply(moved.reshape(-1)).reshape(len(self.stab), len(sel), k)
            imgs.sort(axis=2)
            flat = imgs.reshape(-1, k)
            i = int(np.lexsort(flat.T[::-1])[0])
            if best_row is None or tuple(flat[i].tolist()) < best_row:
                best_row = tuple(flat[i].tolist())
                h, j = divmod(i, len(sel))
                best = (h, sel[j])
        h, p = best
        el = trans[int(p)].then(F, self.stab.elems[h])
        return best_row, el  # type: ignore[return-value]

    def classify(self, sets: Sequence[Sequence[int]]) -> "Classification":
        """Label every set by its class; each stabiliser-of-x orbit is canonicalised once."""
        F = self.frame.F
        reps: dict[tuple[int, ...], int] = {}
        known: dict[tuple[int, ...], tuple[int, GroupElement]] = {}
        labels = []
        witnesses = []
        for s in sets:
            key = tuple(sorted(int(i) for i in s))
            if key not in known:
                canon, el = self.canonical(key)
                lab = reps.setdefault(canon, len(reps))
                imgs = self.stab.apply(np.asarray(key, dtype=np.int64))
                imgs.sort(axis=1)
                for h, row in enumerate(imgs.tolist()):
                    img = tuple(row)
                    if img not in known:
                        known[img] = (lab, self._inverse(h).then(F, el))
            lab, el = known[key]
            labels.append(lab)
            witnesses.append(el)
        return Classification(list(reps), labels, witnesses, self.semilinear)

    def _inverse(self, h: int) -> GroupElement:
        inv = self._inverses.get(h)
        if inv is None:
            inv = self._inverses[h] = self.stab.elems[h].inverse(self.frame.F)
        return inv


@dataclass
class Classification:
    canonical_forms: list[tuple[int, ...]]
    labels: list[int]
    witnesses: list[GroupElement]
    semilinear: bool

    @property
    def class_count(self) -> int:
        return len(self.canonical_forms)

    def representatives(self) -> list[int]:
        seen: dict[int, int] = {}
        for i, lab in enumerate(self.labels):
            seen.setdefault(lab, i)
        return [seen[c] for c in range(self.class_count)]


def classify_up_to_equivalence(frame: ConicFrame, sets: Sequence[Sequence[int]],
                               semilinear: bool = False) -> Classification:
    return Classifier(frame, semilinear).classify(sets)


def verify_witness(frame: ConicFrame, points: Sequence[int], element: GroupElement,
                   target: Sequence[int]) -> bool:
    img = element.apply_indices(frame.F, np.asarray(points, dtype=np.int64))
    return sorted(img.tolist()) == sorted(int(t) for t in target)


def rref_subspaces(F: FieldTower, r: int, k: int) -> list[list[tuple[int, ...]]]:
    """Every k-dimensional subspace of F_q^r as the rows of its reduced echelon form."""
    fq = F.subfield()
    out = []
    for pivots in itertools.combinations(range(r), k):
        free = [(i, j) for i, pc in enumerate(pivots) for j in range(pc + 1, r) if j not in pivots]
        for vals in itertools.product(fq, repeat=len(free)):
            rows = [[0] * r for _ in range(k)]
            for i, pc in enumerate(pivots):
                rows[i][pc] = 1
            for (i, j), v in zip(free, vals):
                rows[i][j] = v
            out.append([tuple(row) for row in rows])
    return out


def subplanes_of(frame: ConicFrame, ls: LinearSet) -> list[tuple[int, ...]]:
    """Point sets of the subplanes <a, b, c>_q inside a linear set, sorted."""
    F = frame.F
    gens = ls.generators
    seen = set()
    for rows in rref_subspaces(F, len(gens), 3):
        trip = []
        for row in rows:
            v = [0, 0, 0]
            for c, g in zip(row, gens):
                if c:
                    for j in range(3):
                        v[j] = F.add(v[j], F.mul(c, g[j]))
            trip.append(tuple(v))
        if host_dimension(F, trip) != 2:
            continue
        seen.add(tuple(span_points(F, trip).tolist()))
    return sorted(seen)
