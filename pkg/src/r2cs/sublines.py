"""F_q-sublines through x on a line of the frame, contained in I(C).

On a host line through x with basis (x, w) a subline through x is
``{y_b} | {x + lam*mu*y_b : lam in F_q}`` with ``y_b = x + b*w`` internal.
Writing ``t = lam*mu`` the point ``x + t*y_b`` normalises to
``x + (t/(1+t)) * b * w``, so the subline is internal exactly when
``(t/(1+t)) * b`` lies in B for every nonzero lam and ``1 + t != 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .conic import (
    ConicFrame,
    GroupElement,
    Vec,
    point_index,
    vis_internal,
    vpoint_index,
)
from .field import FieldTower, prime_power

HOSTS = ("external", "secant")


def host_direction(frame: ConicFrame, host: str) -> Vec:
    """Second basis vector w of the host line, paired with x."""
    if host == "external":
        return frame.v2
    if host == "secant":
        return (0, 1, 0)
    raise ValueError(f"unknown host {host!r}")


def compute_B(frame: ConicFrame, host: str = "external") -> np.ndarray:
    """Boolean mask over element codes: s in B iff x + s*w is internal."""
    F = frame.F
    w = host_direction(frame, host)
    s = np.arange(F.order)
    X = [F.vadd(np.full(F.order, frame.x[i]), F.vmul(s, w[i])) for i in range(3)]
    return vis_internal(F, *X)


def b_polynomial(frame: ConicFrame, s: int) -> int:
    """s^2 + 2*eta*s - eta, whose non-squareness defines B on ell_e."""
    F = frame.F
    two_eta = F.mul(F.from_int(2), frame.eta)
    return F.sub(F.add(F.mul(s, s), F.mul(two_eta, s)), frame.eta)


def subline_quadratic(frame: ConicFrame, b: int, t: int) -> int:
    """-Q(x + t*y_b) on ell_e, expanded as a polynomial in t.

    ``(b^2 + 2 eta b - eta) t^2 + 2 eta (b - 1) t - eta``
    """
    F = frame.F
    eta = frame.eta
    two_eta = F.mul(F.from_int(2), eta)
    lead = b_polynomial(frame, b)
    lin = F.mul(two_eta, F.sub(b, 1))
    return F.sub(F.add(F.mul(lead, F.mul(t, t)), F.mul(lin, t)), eta)


def subline_condition(frame: ConicFrame, b: int, mu: int, host: str = "external",
                      B: np.ndarray | None = None) -> bool:
    """Whether (b, mu) defines a subline of the host line inside I(C).

    Evaluated in the fraction form against B; on ell_e the quadratic form is
    evaluated as well and the two must agree.
    """
    F = frame.F
    if B is None:
        B = compute_B(frame, host)
    frac = True
    for lam in F.subfield_nonzero():
        t = F.mul(lam, mu)
        d = F.add(1, t)
        if d == 0 or not B[F.mul(F.div(t, d), b)]:
            frac = False
            break
    if host == "external":
        quad = all(
            F.vnonsquare(subline_quadratic(frame, b, F.mul(lam, mu)))
            for lam in F.subfield()
        )
        if quad != frac:
            raise AssertionError(f"subline tests disagree at b={b}, mu={mu}")
    return frac


def subline_points(frame: ConicFrame, b: int, mu: int, host: str = "external") -> list[int]:
    """Sorted point indices of the subline with parameters (b, mu)."""
    F = frame.F
    u = subline_generator(frame, b, mu, host)
    pts = {point_index(F, u)}
    for lam in F.subfield():
        pts.add(point_index(F, tuple(F.add(frame.x[i], F.mul(lam, u[i])) for i in range(3))))
    return sorted(pts)


def subline_generator(frame: ConicFrame, b: int, mu: int, host: str = "external") -> Vec:
    """u = mu * y_b, so the subline is the F_q-span of x and u."""
    F = frame.F
    w = host_direction(frame, host)
    y = tuple(F.add(frame.x[i], F.mul(b, w[i])) for i in range(3))
    return tuple(F.mul(mu, c) for c in y)  # type: ignore[return-value]


def _ratio_table(F: FieldTower, mus: np.ndarray) -> np.ndarray:
    """r[j, k] = t/(1+t) for t = lam_k * mu_j; 0 marks 1 + t = 0."""
    lams = np.array(F.subfield_nonzero(), dtype=np.int64)
    t = F.vmul(mus[:, None], lams[None, :])
    d = F.vadd(1, t)
    safe = np.where(d == 0, 1, d)
    return np.where(d == 0, 0, F.vdiv(t, safe))


def enumerate_subline_pairs(
    frame: ConicFrame,
    host: str = "external",
    *,
    block: int = 256,
    b_values: Iterable[int] | None = None,
    progress: Callable[[int, list[tuple[int, int]]], None] | None = None,
) -> list[tuple[int, int]]:
    """All (b, mu) in B x S with an internal subline, sorted by (b, mu).

    S is the transversal alpha^0 .. alpha^(step-1) of F_{q^n}*/F_q*.  The
    b-range is processed in blocks; ``progress(b_end, block_pairs)`` is called
    after each block, which is the checkpoint hook of the CLI.
    """
    F = frame.F
    B = compute_B(frame, host)
    m = F.m
    mus = np.array(F.quotient_transversal(), dtype=np.int64)
    R = _ratio_table(F, mus)
    usable = np.all(R != 0, axis=1)
    mus = mus[usable]
    R = R[usable]
    if b_values is None:
        bs = np.flatnonzero(B)
    else:
        bs = np.array(sorted(b_values), dtype=np.int64)
        bs = bs[B[bs]]
    bs = bs[bs != 0]
    out: list[tuple[int, int]] = []
    nl = R.shape[1]
    for start in range(0, len(bs), block):
        chunk = bs[start:start + block]
        bi, mj = np.nonzero(B[(chunk[:, None] + R[None, :, 0] - 2) % m + 1])
        for k in range(1, nl):
            if not bi.size:
                break
            keep = B[(chunk[bi] + R[mj, k] - 2) % m + 1]
            bi = bi[keep]
            mj = mj[keep]
        got = list(zip(chunk[bi].tolist(), mus[mj].tolist()))
        got.sort()
        out.extend(got)
        if progress is not None:
            progress(int(chunk[-1]), got)
    return out


def count_sublines(frame: ConicFrame, host: str = "external",
                   pairs: Sequence[tuple[int, int]] | None = None) -> int:
    """Number of distinct sublines through x on the host line inside I(C).

    Each such subline has q points besides x, and each of them serves as y_b
    for exactly one mu in S, so the pair count is q times the subline count.
    """
    if pairs is None:
        pairs = enumerate_subline_pairs(frame, host)
    q = frame.F.q
    if len(pairs) % q:
        raise AssertionError(f"{len(pairs)} pairs is not a multiple of q = {q}")
    return len(pairs) // q


# -- subline collections through x -------------------------------------------------


@dataclass
class SublineSet:
    """Sublines through x, each the F_q-span of x and a generator u.

    ``gens`` is (N, 3) of codes; ``points`` is (N, q+1) of sorted point
    indices; ``host`` names the class of the spanned line.
    """

    frame: ConicFrame
    gens: np.ndarray
    points: np.ndarray
    host: str

    def __len__(self) -> int:
        return len(self.gens)

    def ordered_pair(self, i: int) -> tuple[int, int]:
        """Point indices (y, z) with {x, y, z} determining subline i."""
        F = self.frame.F
        u = tuple(int(c) for c in self.gens[i])
        y = point_index(F, u)
        z = point_index(F, tuple(F.add(self.frame.x[k], u[k]) for k in range(3)))
        return y, z

    def keys(self) -> list[tuple[int, ...]]:
        return [tuple(r) for r in self.points.tolist()]


def subline_point_array(frame: ConicFrame, gens: np.ndarray) -> np.ndarray:
    """(N, q+1) sorted point indices of the sublines <x, u>_q."""
    F = frame.F
    cols = [vpoint_index(F, gens[:, 0], gens[:, 1], gens[:, 2])]
    for lam in F.subfield():
        X = [F.vadd(frame.x[i], F.vmul(lam, gens[:, i])) for i in range(3)]
        cols.append(vpoint_index(F, *X))
    pts = np.stack(cols, axis=1)
    pts.sort(axis=1)
    return pts


def canonical_sublines(frame: ConicFrame, host: str = "external",
                       pairs: Sequence[tuple[int, int]] | None = None) -> SublineSet:
    """The distinct sublines through x on ell_e (or ell_s)."""
    if pairs is None:
        pairs = enumerate_subline_pairs(frame, host)
    gens = np.array([subline_generator(frame, b, mu, host) for b, mu in pairs],
                    dtype=np.int64).reshape(-1, 3)
    return _dedupe(frame, gens, host)


def _dedupe(frame: ConicFrame, gens: np.ndarray, host: str) -> SublineSet:
    pts = subline_point_array(frame, gens)
    if len(pts):
        _, first = np.unique(pts, axis=0, return_index=True)
        first.sort()
        gens = gens[first]
        pts = pts[first]
    order = np.lexsort(pts.T[::-1]) if len(pts) else np.arange(0)
    return SublineSet(frame, gens[order], pts[order], host)


def image_generators(frame: ConicFrame, g: GroupElement, gens: np.ndarray) -> np.ndarray:
    """Generators of g(<x, u>_q) for g fixing x, rescaled so x stays a generator."""
    F = frame.F
    gx = g.apply(F, frame.x)
    c = gx[0]  # g(x) = c * x and x[0] = 1
    img = g.vapply(F, gens[:, 0], gens[:, 1], gens[:, 2])
    ci = F.inv(c)
    return np.stack([F.vmul(ci, col) for col in img], axis=1)


def sublines_through_x(frame: ConicFrame, host: str = "external",
                       canonical: SublineSet | None = None) -> SublineSet:
    """All sublines through x in I(C) spanning a line of the host class.

    The canonical sublines of ell_e (ell_s) are moved by every element of G_x.
    """
    if canonical is None:
        canonical = canonical_sublines(frame, host)
    if not len(canonical):
        return canonical
    parts = [image_generators(frame, g, canonical.gens) for g in frame.stabilizer_of_x]
    return _dedupe(frame, np.concatenate(parts), host)


# -- theoretical bounds --------------------------------------------------------------


def subline_bound(n: int) -> float:
    return 4 * n * n - 8 * n + 2


def prime_subline_bound(n: int) -> float:
    r3 = math.sqrt(3)
    return 2 * n * n - (4 - 2 * r3) * n + (3 - 2 * r3)


def feasible_q_range(n: int) -> list[int]:
    """Odd prime powers q not excluded by the subline-existence bounds."""
    if n < 2:
        raise ValueError("n must be at least 2")
    out = []
    q = 3
    while q < subline_bound(n):
        pe = prime_power(q)
        if pe is not None and pe[0] != 2:
            if pe[1] > 1 or q <= prime_subline_bound(n):
                out.append(q)
        q += 2
    return out
