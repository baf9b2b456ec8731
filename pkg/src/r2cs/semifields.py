"""Rank-two commutative semifields, Cohen-Ganley pairs, the set W and flocks.

Every family is written in the template

    (x, y) o (u, v) = (xv + yu + F(xu), yv + G(xu))

with F, G q-linearised.  Eliminating v from (x, y) o (u, v) = 0 leaves
``z^2 + F(t) z - t G(t) = 0`` with t = xu, z = yu, so the product has no zero
divisors iff ``F(t)^2 + 4 t G(t)`` is a non-square for all t != 0.  In the
pair convention "g^2 - 4 t f non-square" that is the pair (f, g) = (-G, F),
which is what :func:`family_pair` returns.  Flocks use the cone X0 X1 = X2^2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .conic import ConicFrame, GroupElement, point_index
from .field import FieldTower
from .linearsets import LinearSet, host_dimension, materialize

FAMILIES = ("dickson", "kk", "cg", "pw", "generic")
SCAN_LIMIT = 3**8  # largest q^(2n) for the exhaustive product scan

# (X0, X1, X2) -> (2 X0, 2 X1, X2) maps X2^2 - 4 X0 X1 = 0 onto X0 X1 - X2^2 = 0.
BRIDGE_DIAGONAL = (2, 2, 1)


# -- linearised polynomials ---------------------------------------------------------


@dataclass(frozen=True)
class LinPoly:
    """sum c * t^(q^k) over ``terms = ((c, k), ...)``."""

    terms: tuple[tuple[int, int], ...] = ()

    def __call__(self, F: FieldTower, t):
        t = np.asarray(t, dtype=np.int64)
        acc = np.zeros_like(t)
        for c, k in self.terms:
            acc = F.vadd(acc, F.vmul(c, F.vfrobenius(t, k)))
        return acc

    def scalar(self, F: FieldTower, t: int) -> int:
        return F.linearized_eval(self.terms, t)

    def negated(self, F: FieldTower) -> "LinPoly":
        return LinPoly(tuple((F.neg(c), k) for c, k in self.terms))

    def fmt(self, F: FieldTower) -> str:
        if not self.terms:
            return "0"
        parts = []
        for c, k in self.terms:
            mono = "t" if k == 0 else f"t^{F.q ** k}"
            parts.append(mono if c == 1 else f"{F.fmt(c)}*{mono}")
        return " + ".join(parts)


@dataclass(frozen=True)
class CGPair:
    f: LinPoly
    g: LinPoly

    def to_json(self, F: FieldTower) -> dict:
        return {"f": self.f.fmt(F), "g": self.g.fmt(F),
                "f_terms": [list(t) for t in self.f.terms],
                "g_terms": [list(t) for t in self.g.terms]}


def cg_pair_check(F: FieldTower, pair: CGPair) -> bool:
    """g(t)^2 - 4 t f(t) is a non-square for every nonzero t."""
    t = np.arange(1, F.order, dtype=np.int64)
    g = pair.g(F, t)
    val = F.vsub(F.vmul(g, g), F.vmul(F.from_int(4), F.vmul(t, pair.f(F, t))))
    return bool(np.all(F.vnonsquare(val)))


# -- semifield multiplications -------------------------------------------------------


@dataclass(frozen=True)
class SemifieldMult:
    """A product on F_{q^n} x F_{q^n} in the (F, G) template."""

    F: FieldTower = field(repr=False)
    family: str
    params: dict
    first: LinPoly  # F in the template
    second: LinPoly  # G in the template

    def multiply(self, a, b):
        """``(x, y) o (u, v)`` for code arrays (broadcasting)."""
        F = self.F
        x, y = (np.asarray(c, dtype=np.int64) for c in a)
        u, v = (np.asarray(c, dtype=np.int64) for c in b)
        t = F.vmul(x, u)
        r0 = F.vadd(F.vadd(F.vmul(x, v), F.vmul(y, u)), self.first(F, t))
        r1 = F.vadd(F.vmul(y, v), self.second(F, t))
        return r0, r1

    def pair(self) -> CGPair:
        return family_pair(self)

    def describe(self) -> dict:
        F = self.F
        out = {"family": self.family, "field": F.describe()}
        out.update({k: (F.fmt(v) if k in ("m", "eta") else v) for k, v in self.params.items()})
        out["template"] = {"F": self.first.fmt(F), "G": self.second.fmt(F)}
        return out


def multiply(S: SemifieldMult, a, b):
    return S.multiply(a, b)


def dickson(F: FieldTower, m: int | None = None, sigma: int = 1) -> SemifieldMult:
    """(xv + yu, yv + m x^s u^s) with s = q^sigma; m must be a non-square."""
    if F.n < 2:
        raise ValueError("a Dickson semifield needs n >= 2")
    if not 0 <= sigma < F.n:
        raise ValueError(f"sigma index {sigma} outside [0, {F.n})")
    if m is None:
        m = F.generator
    if m == 0 or F.is_square(m):
        raise ValueError("m must be a non-square")
    return SemifieldMult(F, "dickson", {"m": m, "sigma": sigma}, LinPoly(), LinPoly(((m, sigma),)))


def cohen_ganley(F: FieldTower, eta: int | None = None) -> SemifieldMult:
    """(xv + yu + x^3 u^3, yv + eta x^9 u^9 + eta^-1 xu), q = 3, n >= 2."""
    if F.q != 3 or F.n < 2:
        raise ValueError("Cohen-Ganley semifields need q = 3 and n >= 2")
    if eta is None:
        eta = F.generator
    if eta == 0 or F.is_square(eta):
        raise ValueError("eta must be a non-square")
    second = ((eta, 2 % F.n), (F.inv(eta), 0)) if F.n > 2 else ((F.add(eta, F.inv(eta)), 0),)
    return SemifieldMult(F, "cg", {"eta": eta}, LinPoly(((1, 1),)), LinPoly(second))


def penttila_williams(F: FieldTower) -> SemifieldMult:
    """(xv + yu + x^27 u^27, yv + x^9 u^9), only for q = 3, n = 5."""
    if F.q != 3 or F.n != 5:
        raise ValueError("the Penttila-Williams semifield needs q = 3 and n = 5")
    return SemifieldMult(F, "pw", {}, LinPoly(((1, 3),)), LinPoly(((1, 2),)))


def generic(F: FieldTower, first: LinPoly, second: LinPoly) -> SemifieldMult:
    return SemifieldMult(F, "generic", {}, first, second)


def family_pair(S: SemifieldMult) -> CGPair:
    """The Cohen-Ganley pair (f, g) = (-G, F) of the template (F, G)."""
    return CGPair(S.second.negated(S.F), S.first)


def kantor_knuth_pair(F: FieldTower, m: int | None = None, sigma: int = 1) -> CGPair:
    """(f, g) = (-m t^s, 0): the flock of the Dickson semifield."""
    return family_pair(dickson(F, m, sigma))


def make_family(F: FieldTower, family: str, m: int | None = None, sigma: int = 1) -> SemifieldMult:
    if family in ("dickson", "kk"):
        return dickson(F, m, sigma)
    if family == "cg":
        return cohen_ganley(F, m)
    if family == "pw":
        return penttila_williams(F)
    raise ValueError(f"unknown family {family!r}")


# -- zero divisors --------------------------------------------------------------


def _nonzero_pairs(F: FieldTower) -> tuple[np.ndarray, np.ndarray]:
    Q = F.order
    idx = np.arange(1, Q * Q, dtype=np.int64)
    return idx // Q, idx % Q


def scan_zero_divisors(S: SemifieldMult, block: int = 1 << 22) -> tuple[int, int, int, int] | None:
    """Exhaustive: a zero divisor pair ((x, y), (u, v)) or None."""
    F = S.F
    if F.order**2 > SCAN_LIMIT:
        raise ValueError(f"exhaustive scan limited to q^(2n) <= {SCAN_LIMIT}")
    x, y = _nonzero_pairs(F)
    rows = max(1, block // len(x))
    for start in range(0, len(x), rows):
        a = (x[start:start + rows, None], y[start:start + rows, None])
        r0, r1 = S.multiply(a, (x[None, :], y[None, :]))
        hit = np.argwhere((r0 == 0) & (r1 == 0))
        if len(hit):
            i, j = hit[0]
            return int(a[0][i, 0]), int(a[1][i, 0]), int(x[j]), int(y[j])
    return None


def sample_zero_divisors(S: SemifieldMult, samples: int, seed: int = 0,
                         block: int = 1 << 20) -> tuple[int, int, int, int] | None:
    """Random nonzero pairs; a zero divisor pair if one is hit, else None."""
    F = S.F
    rng = np.random.default_rng(seed)
    Q = F.order
    done = 0
    while done < samples:
        k = min(block, samples - done)
        a = rng.integers(1, Q * Q, size=k)
        b = rng.integers(1, Q * Q, size=k)
        r0, r1 = S.multiply((a // Q, a % Q), (b // Q, b % Q))
        hit = np.flatnonzero((r0 == 0) & (r1 == 0))
        if hit.size:
            i = hit[0]
            return int(a[i] // Q), int(a[i] % Q), int(b[i] // Q), int(b[i] % Q)
        done += k
    return None


def batched_rank_mod_p(A: np.ndarray, p: int) -> np.ndarray:
    """Ranks over F_p of a stack of matrices, shape (N, r, c)."""
    A = np.array(A, dtype=np.int64) % p
    N, r, c = A.shape
    rank = np.zeros(N, dtype=np.int64)
    inv = np.array([0] + [pow(i, p - 2, p) for i in range(1, p)], dtype=np.int64)
    rows = np.arange(N)
    for col in range(c):
        # pivot: first row at index >= rank with a nonzero entry in this column
        idx = np.arange(r)[None, :]
        cand = (A[:, :, col] != 0) & (idx >= rank[:, None])
        has = cand.any(axis=1)
        piv = np.argmax(cand, axis=1)
        sel = rows[has]
        if not sel.size:
            continue
        pr, rk = piv[sel], rank[sel]
        top = A[sel, rk].copy()
        A[sel, rk] = A[sel, pr]
        A[sel, pr] = top
        prow = (A[sel, rk] * inv[A[sel, rk, col]][:, None]) % p
        A[sel, rk] = prow
        factor = A[sel, :, col].copy()
        factor[np.arange(len(sel)), rk] = 0
        A[sel] = (A[sel] - factor[:, :, None] * prow[:, None, :]) % p
        rank[sel] += 1
    return rank


def kernel_zero_divisors(S: SemifieldMult, block: int = 4096) -> tuple[int, int] | None:
    """Bilinear-kernel test: some nonzero (x, y) whose multiplication map is singular.

    (u, v) -> (x, y) o (u, v) is F_p-linear, so the product has zero divisors
    iff one of these 2d x 2d matrices over F_p (d = e*n) has a kernel.
    """
    F = S.F
    d = F.degree
    basis = np.arange(1, d + 1, dtype=np.int64)  # alpha^0 .. alpha^(d-1)
    zeros = np.zeros(d, dtype=np.int64)
    bu = np.concatenate([basis, zeros])
    bv = np.concatenate([zeros, basis])
    x, y = _nonzero_pairs(F)
    for start in range(0, len(x), block):
        xs, ys = x[start:start + block, None], y[start:start + block, None]
        r0, r1 = S.multiply((xs, ys), (bu[None, :], bv[None, :]))
        M = np.concatenate([F.vdigits(r0), F.vdigits(r1)], axis=2)
        rk = batched_rank_mod_p(M, F.p)
        bad = np.flatnonzero(rk < 2 * d)
        if bad.size:
            i = bad[0]
            return int(xs[i, 0]), int(ys[i, 0])
    return None


def has_zero_divisors(S: SemifieldMult, method: str = "auto", samples: int = 10**7,
                      seed: int = 0) -> bool:
    """``auto``: exhaustive scan when small enough, otherwise kernel test plus sampling."""
    F = S.F
    if method == "auto":
        method = "scan" if F.order**2 <= SCAN_LIMIT else "kernel+sample"
    if method == "scan":
        return scan_zero_divisors(S) is not None
    found = False
    if "kernel" in method:
        found |= kernel_zero_divisors(S) is not None
    if "sample" in method:
        found |= sample_zero_divisors(S, samples, seed) is not None
    if method not in ("kernel", "sample", "kernel+sample"):
        raise ValueError(f"unknown method {method!r}")
    return found


# -- the linear set W ----------------------------------------------------------------


@dataclass
class WSet:
    """W = {(t, f(t), g(t))} and its image in the frame model."""

    pair: CGPair
    raw_generators: list[tuple[int, int, int]]
    linear_set: LinearSet
    in_line: bool
    all_internal: bool


def fq_basis_of_big_field(F: FieldTower) -> list[int]:
    """1, alpha, ..., alpha^(n-1): an F_q-basis of F_{q^n}."""
    return [F.alpha(k) for k in range(F.n)]


def bridge_to_frame(F: FieldTower, v: Sequence[int]) -> tuple[int, int, int]:
    return tuple(F.mul(F.from_int(c), a) for c, a in zip(BRIDGE_DIAGONAL, v))  # type: ignore[return-value]


def bridge_maps_conic(F: FieldTower) -> bool:
    """Check the bridge sends every point of X2^2 = 4 X0 X1 onto X0 X1 = X2^2."""
    from .conic import conic_eval

    four = F.from_int(4)
    # points (1, s^2/4, s) and (0, 1, 0) of X2^2 = 4 X0 X1
    pts = [(1, F.mul(F.mul(s, s), F.inv(four)), s) for s in F.elements()] + [(0, 1, 0)]
    for v in pts:
        assert F.sub(F.mul(v[2], v[2]), F.mul(four, F.mul(v[0], v[1]))) == 0
        if conic_eval(F, bridge_to_frame(F, v)) != 0:
            return False
    return True


def linear_set_W(frame: ConicFrame, pair: CGPair) -> WSet:
    F = frame.F
    raw = []
    for t in fq_basis_of_big_field(F):
        raw.append((t, pair.f.scalar(F, t), pair.g.scalar(F, t)))
    gens = [bridge_to_frame(F, v) for v in raw]
    ls = materialize(frame, gens)
    inside = bool(np.all(frame.is_internal_index(np.asarray(ls.points))))
    return WSet(pair, raw, ls, host_dimension(F, gens) == 1, inside)


def W_points_direct(frame: ConicFrame, pair: CGPair) -> list[int]:
    """Point indices of (2t, 2f(t), g(t)) over all nonzero t, computed pointwise."""
    F = frame.F
    out = set()
    for t in range(1, F.order):
        out.add(point_index(F, bridge_to_frame(F, (t, pair.f.scalar(F, t), pair.g.scalar(F, t)))))
    return sorted(out)


# -- flocks ----------------------------------------------------------------------------


@dataclass
class Flock:
    """Planes [a, b, c, d] meaning a X0 + b X1 + c X2 + d X3 = 0."""

    F: FieldTower = field(repr=False)
    planes: np.ndarray

    def __len__(self) -> int:
        return len(self.planes)


FLOCK_LIMIT = 3**7


def flock_from_pair(F: FieldTower, pair: CGPair) -> Flock:
    t = np.arange(F.order, dtype=np.int64)
    planes = np.stack([t, pair.f(F, t), pair.g(F, t), np.ones_like(t)], axis=1)
    if len(np.unique(planes, axis=0)) != F.order:
        raise ValueError("duplicate planes in the flock")
    return Flock(F, planes)


def cone_base_points(F: FieldTower) -> np.ndarray:
    """The conic X0 X1 = X2^2 of the base plane X3 = 0: (1, s^2, s) and (0, 1, 0)."""
    s = np.arange(F.order, dtype=np.int64)
    pts = np.stack([np.ones_like(s), F.vmul(s, s), s], axis=1)
    return np.concatenate([pts, np.array([[0, 1, 0]], dtype=np.int64)])


def verify_flock(flock: Flock) -> bool:
    """Every point of the cone minus its vertex lies on exactly one plane.

    Cone points off the vertex are (c, h) with c on the base conic and h any
    element.  A plane with d != 0 meets the generator through c in exactly one
    point, so the planes partition the cone iff, for every c, the values
    h = -(a c0 + b c1 + c c2) / d run over all elements once.
    """
    F = flock.F
    if F.order > FLOCK_LIMIT:
        raise ValueError(f"flock verification limited to q^n <= {FLOCK_LIMIT}")
    P = np.asarray(flock.planes, dtype=np.int64)
    if len(P) != F.order:
        return False
    if np.any(P[:, 3] == 0):
        return False  # a plane through the vertex
    base = cone_base_points(F)
    for c in base:
        acc = F.vadd(F.vadd(F.vmul(P[:, 0], c[0]), F.vmul(P[:, 1], c[1])), F.vmul(P[:, 2], c[2]))
        h = F.vdiv(F.vneg(acc), P[:, 3])
        if len(np.unique(h)) != F.order:
            return False
    return True


def frame_element_from_bridge(F: FieldTower) -> GroupElement:
    """The bridge as a projectivity acting on row vectors."""
    d = [F.from_int(c) for c in BRIDGE_DIAGONAL]
    return GroupElement((d[0], 0, 0, 0, d[1], 0, 0, 0, d[2]))
