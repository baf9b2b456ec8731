"""The conic X0*X1 - X2^2 in PG(2, q^n), its point classes and stabiliser.

Points are stored either as coordinate triples of field codes or as a
canonical index in ``range(Q*Q + Q + 1)``:

* ``(0, 0, 1)``           -> 0
* ``(0, 1, z)``           -> 1 + z
* ``(1, y, z)``           -> 1 + Q + y*Q + z

which is lexicographic order of normalised coordinates.  Group elements act
on row vectors from the right, optionally after a Frobenius twist.
"""

from __future__ import annotations

import enum
import functools
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .field import FieldTower

Vec = tuple[int, int, int]

BITMAP_LIMIT = 3**7


class ConicClass(enum.Enum):
    ON = "on"
    INTERNAL = "internal"
    EXTERNAL = "external"


class LineClass(enum.Enum):
    TANGENT = "tangent"
    SECANT = "secant"
    EXTERNAL = "external"


class GeometryError(RuntimeError):
    """An internal consistency check on the conic frame failed."""


# -- coordinates ---------------------------------------------------------------


def conic_eval(F: FieldTower, v: Sequence[int]) -> int:
    if not any(v):
        raise ValueError("zero vector")
    return F.sub(F.mul(v[0], v[1]), F.mul(v[2], v[2]))


def vconic_eval(F: FieldTower, X0, X1, X2):
    return F.vsub(F.vmul(X0, X1), F.vmul(X2, X2))


def classify_point(F: FieldTower, v: Sequence[int]) -> ConicClass:
    val = conic_eval(F, v)
    if val == 0:
        return ConicClass.ON
    return ConicClass.EXTERNAL if F.is_square(F.neg(val)) else ConicClass.INTERNAL


def vis_internal(F: FieldTower, X0, X1, X2):
    """Vectorised internal-point test on (unnormalised) coordinate arrays."""
    return F.vnonsquare(F.vsub(F.vmul(X2, X2), F.vmul(X0, X1)))


def normalize(F: FieldTower, v: Sequence[int]) -> Vec:
    for c in v:
        if c:
            return tuple(F.div(x, c) for x in v)  # type: ignore[return-value]
    raise ValueError("zero vector")


def scale(F: FieldTower, c: int, v: Sequence[int]) -> Vec:
    return (F.mul(c, v[0]), F.mul(c, v[1]), F.mul(c, v[2]))


def vec_add(F: FieldTower, u: Sequence[int], v: Sequence[int]) -> Vec:
    return (F.add(u[0], v[0]), F.add(u[1], v[1]), F.add(u[2], v[2]))


def point_count(Q: int) -> int:
    return Q * Q + Q + 1


def point_index(F: FieldTower, v: Sequence[int]) -> int:
    Q = F.order
    a, b, c = normalize(F, v)
    if a:
        return 1 + Q + b * Q + c
    if b:
        return 1 + c
    return 0


def index_point(F: FieldTower, idx: int) -> Vec:
    Q = F.order
    if idx == 0:
        return (0, 0, 1)
    if idx <= Q:
        return (0, 1, idx - 1)
    y, z = divmod(idx - 1 - Q, Q)
    return (1, y, z)


def vpoint_index(F: FieldTower, X0, X1, X2):
    """Canonical indices of coordinate arrays; -1 where the vector is zero."""
    Q = F.order
    X0 = np.asarray(X0, dtype=np.int64)
    X1 = np.asarray(X1, dtype=np.int64)
    X2 = np.asarray(X2, dtype=np.int64)
    m = F.m
    n0 = X0 != 0
    n1 = X1 != 0
    # divide by X0 (rows with X0 != 0)
    y0 = np.where(X1 == 0, 0, (X1 - X0) % m + 1)
    z0 = np.where(X2 == 0, 0, (X2 - X0) % m + 1)
    z1 = np.where(X2 == 0, 0, (X2 - X1) % m + 1)
    return np.where(
        n0,
        1 + Q + y0 * Q + z0,
        np.where(n1, 1 + z1, np.where(X2 != 0, 0, -1)),
    )


def vindex_points(F: FieldTower, idx):
    """Inverse of :func:`vpoint_index` for index arrays."""
    Q = F.order
    idx = np.asarray(idx, dtype=np.int64)
    aff = idx > Q
    y, z = np.divmod(np.maximum(idx - 1 - Q, 0), Q)
    X0 = np.where(aff, 1, 0)
    X1 = np.where(aff, y, np.where(idx > 0, 1, 0))
    X2 = np.where(aff, z, np.where(idx > 0, idx - 1, 1))
    return X0, X1, X2


# -- lines -------------------------------------------------------------------------


def cross(F: FieldTower, u: Sequence[int], v: Sequence[int]) -> Vec:
    def det2(a, b, c, d):
        return F.sub(F.mul(a, d), F.mul(b, c))

    return (
        det2(u[1], u[2], v[1], v[2]),
        det2(u[2], u[0], v[2], v[0]),
        det2(u[0], u[1], v[0], v[1]),
    )


@dataclass(frozen=True)
class ProjLine:
    """A line given by normalised dual coordinates [a, b, c]."""

    dual: Vec

    @classmethod
    def through(cls, F: FieldTower, u: Sequence[int], v: Sequence[int]) -> "ProjLine":
        d = cross(F, u, v)
        if not any(d):
            raise ValueError("points coincide")
        return cls(normalize(F, d))

    def contains(self, F: FieldTower, v: Sequence[int]) -> bool:
        a, b, c = self.dual
        return F.sum((F.mul(a, v[0]), F.mul(b, v[1]), F.mul(c, v[2]))) == 0


def line_basis(F: FieldTower, line: ProjLine) -> tuple[Vec, Vec]:
    """Two independent vectors spanning ``line``."""
    a, b, c = line.dual
    if a:
        # a X0 = -(b X1 + c X2)
        return (F.neg(F.div(b, a)), 1, 0), (F.neg(F.div(c, a)), 0, 1)
    if b:
        return (1, 0, 0), (0, F.neg(F.div(c, b)), 1)
    return (1, 0, 0), (0, 1, 0)


def line_points(F: FieldTower, line: ProjLine) -> list[int]:
    """Canonical indices of the Q + 1 points on ``line``."""
    u, v = line_basis(F, line)
    t = np.arange(F.order)
    X = [F.vadd(np.full(F.order, u[i]), F.vmul(t, v[i])) for i in range(3)]
    idx = vpoint_index(F, *X).tolist()
    idx.append(point_index(F, v))
    return sorted(idx)


def classify_line(F: FieldTower, line: ProjLine) -> LineClass:
    pts = line_points(F, line)
    X = vindex_points(F, pts)
    on = int(np.count_nonzero(vconic_eval(F, *X) == 0))
    if on == 1:
        return LineClass.TANGENT
    if on == 2:
        return LineClass.SECANT
    if on == 0:
        return LineClass.EXTERNAL
    raise GeometryError(f"line meets the conic in {on} points")


# -- matrices and group elements ------------------------------------------------

Mat = tuple[int, int, int, int, int, int, int, int, int]


def mat_mul(F: FieldTower, A: Sequence[int], B: Sequence[int]) -> Mat:
    out = []
    for i in range(3):
        for j in range(3):
            out.append(
                F.sum(F.mul(A[3 * i + k], B[3 * k + j]) for k in range(3))
            )
    return tuple(out)  # type: ignore[return-value]


def mat_det(F: FieldTower, A: Sequence[int]) -> int:
    a, b, c, d, e, f, g, h, i = A
    t1 = F.mul(a, F.sub(F.mul(e, i), F.mul(f, h)))
    t2 = F.mul(b, F.sub(F.mul(d, i), F.mul(f, g)))
    t3 = F.mul(c, F.sub(F.mul(d, h), F.mul(e, g)))
    return F.add(F.sub(t1, t2), t3)


def mat_inv(F: FieldTower, A: Sequence[int]) -> Mat:
    """Inverse up to a scalar (the adjugate)."""
    a, b, c, d, e, f, g, h, i = A
    if mat_det(F, A) == 0:
        raise ValueError("singular matrix")
    s = F.sub
    m = F.mul
    adj = (
        s(m(e, i), m(f, h)), s(m(c, h), m(b, i)), s(m(b, f), m(c, e)),
        s(m(f, g), m(d, i)), s(m(a, i), m(c, g)), s(m(c, d), m(a, f)),
        s(m(d, h), m(e, g)), s(m(b, g), m(a, h)), s(m(a, e), m(b, d)),
    )
    return adj


def mat_normalize(F: FieldTower, A: Sequence[int]) -> Mat:
    for c in A:
        if c:
            return tuple(F.div(x, c) for x in A)  # type: ignore[return-value]
    raise ValueError("zero matrix")


def mat_frobenius(F: FieldTower, A: Sequence[int], k: int) -> Mat:
    """Entrywise ``x -> x**(p**k)``."""
    if k % F.degree == 0:
        return tuple(A)  # type: ignore[return-value]
    e = pow(F.p, k, F.m)
    return tuple(0 if x == 0 else ((x - 1) * e) % F.m + 1 for x in A)  # type: ignore[return-value]


@dataclass(frozen=True)
class GroupElement:
    """``v -> (v ** (p ** frob)) @ matrix`` on row vectors, projectively.

    ``frob`` counts powers of the absolute (p-power) Frobenius; it is zero
    for elements of PGO(3, q^n) itself.
    """

    matrix: Mat
    frob: int = 0

    def apply(self, F: FieldTower, v: Sequence[int]) -> Vec:
        if self.frob:
            e = pow(F.p, self.frob, F.m)
            v = [0 if x == 0 else ((x - 1) * e) % F.m + 1 for x in v]
        M = self.matrix
        return tuple(  # type: ignore[return-value]
            F.sum(F.mul(v[i], M[3 * i + j]) for i in range(3)) for j in range(3)
        )

    def vapply(self, F: FieldTower, X0, X1, X2):
        X = [np.asarray(X0, dtype=np.int64), np.asarray(X1, dtype=np.int64),
             np.asarray(X2, dtype=np.int64)]
        if self.frob:
            e = pow(F.p, self.frob, F.m)
            X = [np.where(x == 0, 0, ((x - 1) * e) % F.m + 1) for x in X]
        M = self.matrix
        out = []
        for j in range(3):
            acc = F.vmul(X[0], M[j])
            acc = F.vadd(acc, F.vmul(X[1], M[3 + j]))
            acc = F.vadd(acc, F.vmul(X[2], M[6 + j]))
            out.append(acc)
        return out

    def apply_indices(self, F: FieldTower, idx) -> np.ndarray:
        return vpoint_index(F, *self.vapply(F, *vindex_points(F, idx)))

    def then(self, F: FieldTower, other: "GroupElement") -> "GroupElement":
        """Apply ``self`` first, then ``other``."""
        A = mat_frobenius(F, self.matrix, other.frob)
        return GroupElement(mat_normalize(F, mat_mul(F, A, other.matrix)),
                            (self.frob + other.frob) % F.degree)

    def inverse(self, F: FieldTower) -> "GroupElement":
        k = (-self.frob) % F.degree
        return GroupElement(mat_normalize(F, mat_frobenius(F, mat_inv(F, self.matrix), k)), k)

    def to_json(self) -> dict:
        return {"matrix": list(self.matrix), "frob": self.frob}

    @classmethod
    def from_json(cls, d: dict) -> "GroupElement":
        return cls(tuple(d["matrix"]), int(d.get("frob", 0)))  # type: ignore[arg-type]


def identity() -> GroupElement:
    return GroupElement((1, 0, 0, 0, 1, 0, 0, 0, 1))


def frobenius_element(k: int = 1) -> GroupElement:
    return GroupElement((1, 0, 0, 0, 1, 0, 0, 0, 1), k)


def group_element(F: FieldTower, a: int, b: int, c: int, d: int) -> GroupElement:
    """Image of the 2x2 matrix [[a, b], [c, d]] in the conic stabiliser.

    Row form ``[[a^2, b^2, ab], [c^2, d^2, cd], [2ac, 2bd, ad + bc]]``; it maps
    the conic point ``(s^2, t^2, st)`` to ``((as + ct)^2, (bs + dt)^2, ...)``.
    """
    if F.mul(a, d) == F.mul(b, c):
        raise ValueError("singular parameters: ad = bc")
    two = F.from_int(2)
    m = F.mul
    M = (
        m(a, a), m(b, b), m(a, b),
        m(c, c), m(d, d), m(c, d),
        m(two, m(a, c)), m(two, m(b, d)), F.add(m(a, d), m(b, c)),
    )
    return GroupElement(mat_normalize(F, M))


def conic_points(F: FieldTower) -> list[Vec]:
    """The Q + 1 points (1, t^2, t) and (0, 1, 0)."""
    pts = [(1, F.mul(t, t), t) for t in F.elements()]
    pts.append((0, 1, 0))
    return pts


def preserves_conic(F: FieldTower, g: GroupElement, sample: Iterable[Vec] | None = None) -> bool:
    pts = conic_points(F) if sample is None else sample
    return all(conic_eval(F, g.apply(F, v)) == 0 for v in pts)


def group_generators(F: FieldTower) -> list[GroupElement]:
    """Generators of PGO(3, q^n) = image of PGL(2, q^n)."""
    return [
        group_element(F, F.alpha(1), 0, 0, 1),
        group_element(F, 1, 1, 0, 1),
        group_element(F, 0, 1, 1, 0),
    ]


# -- orbits ---------------------------------------------------------------------------


def orbit(F: FieldTower, seed, gens: Sequence[GroupElement]) -> set:
    """Closure of a point index (int) or a point-index set under ``gens``.

    Point sets are returned as sorted tuples.
    """
    if isinstance(seed, (int, np.integer)):
        seen = np.zeros(point_count(F.order), dtype=bool)
        seen[int(seed)] = True
        frontier = np.array([int(seed)], dtype=np.int64)
        while frontier.size:
            new = []
            for g in gens:
                img = g.apply_indices(F, frontier)
                img = np.unique(img[~seen[img]])
                seen[img] = True
                new.append(img)
            frontier = np.unique(np.concatenate(new)) if new else frontier[:0]
        return set(np.flatnonzero(seen).tolist())
    start = tuple(sorted(int(i) for i in seed))
    seen_sets = {start}
    todo = deque([start])
    while todo:
        s = todo.popleft()
        arr = np.array(s, dtype=np.int64)
        for g in gens:
            img = tuple(sorted(g.apply_indices(F, arr).tolist()))
            if img not in seen_sets:
                seen_sets.add(img)
                todo.append(img)
    return seen_sets


# -- the search frame -----------------------------------------------------------------


def find_eta(F: FieldTower) -> int:
    """First alpha^k (k >= 1) with -eta a non-square and -eta-1 a nonzero square."""
    if F.order <= 3:
        raise ValueError(f"no valid eta in a field of order {F.order}")
    for k in range(1, F.m + 1):
        eta = F.alpha(k)
        t = F.neg(F.add(eta, 1))
        if not F.is_square(F.neg(eta)) and t != 0 and F.is_square(t):
            return eta
    raise GeometryError("no valid eta found")


class ConicFrame:
    """The fixed internal point x = (1, eta, 0) with lines ell_e and ell_s.

    ``ell_e = <v1, v2>`` with ``v1 = x`` and ``v2 = (0, -2 eta, 1)`` is external;
    ``ell_s = <(1,0,0), (0,1,0)>`` is secant.  Immutable after construction.
    """

    def __init__(self, F: FieldTower, eta: int | None = None):
        self.F = F
        self.eta = find_eta(F) if eta is None else eta
        minus_eta = F.neg(self.eta)
        if F.is_square(minus_eta) or F.sub(minus_eta, 1) == 0 or not F.is_square(F.sub(minus_eta, 1)):
            raise GeometryError("eta must have -eta a non-square and -eta-1 a nonzero square")
        x = (1, self.eta, 0)
        if classify_point(F, x) is not ConicClass.INTERNAL:
            raise GeometryError("x = (1, eta, 0) is not internal")
        self.x: Vec = x
        self.v1: Vec = x
        two = F.from_int(2)
        self.v2: Vec = (0, F.neg(F.mul(two, self.eta)), 1)
        self.ell_e = ProjLine.through(F, self.v1, self.v2)
        self.ell_s = ProjLine.through(F, (1, 0, 0), (0, 1, 0))
        self.x_index = point_index(F, x)

    @property
    def Q(self) -> int:
        return self.F.order

    def describe(self) -> dict:
        return {**self.F.describe(), "eta_log": self.F.log(self.eta)}

    @functools.cached_property
    def internal_bitmap(self) -> np.ndarray:
        if self.Q > BITMAP_LIMIT:
            raise MemoryError(f"internal bitmap not built for Q = {self.Q}")
        idx = np.arange(point_count(self.Q))
        return vis_internal(self.F, *vindex_points(self.F, idx))

    def is_internal_index(self, idx) -> np.ndarray:
        return vis_internal(self.F, *vindex_points(self.F, idx))

    def host_line(self, host: str) -> ProjLine:
        if host == "external":
            return self.ell_e
        if host == "secant":
            return self.ell_s
        raise ValueError(f"unknown host {host!r}")

    @functools.cached_property
    def stabilizer_of_x(self) -> list[GroupElement]:
        return stabilizer_of_x(self)

    @functools.cached_property
    def stabilizer_of_x_and_line(self) -> list[GroupElement]:
        return stabilizer_of_x_and_line(self)

    @functools.cached_property
    def transversal(self) -> dict[int, GroupElement]:
        """For every internal point index p, an element of G mapping p to x."""
        return transversal_to_x(self, group_generators(self.F))


def stabilizer_of_x(frame: ConicFrame) -> list[GroupElement]:
    """All 2(Q + 1) elements of G fixing x.

    Parameters (a, b, c, d) are normalised so that the first nonzero one is 1
    and the third-coordinate condition ``ab + eta*cd = 0`` is solved for b;
    the remaining condition is tested for every candidate.
    """
    F = frame.F
    eta = frame.eta
    x = frame.x
    found: dict[Mat, GroupElement] = {}

    def consider(a, b, c, d):
        if F.mul(a, d) == F.mul(b, c):
            return
        g = group_element(F, a, b, c, d)
        if normalize(F, g.apply(F, x)) == x:
            found.setdefault(g.matrix, g)

    minus_one = F.neg(1)
    for c in F.elements():
        # a = 1: b = -eta*c*d, and the X1 condition reduces to d^2 = 1
        for d in (1, minus_one):
            consider(1, F.neg(F.mul(eta, F.mul(c, d))), c, d)
    # a = 0, b = 1: needs d = 0 and c = +-1/eta
    for c in (F.inv(eta), F.neg(F.inv(eta))):
        consider(0, 1, c, 0)
    out = sorted(found.values(), key=lambda g: g.matrix)
    if len(out) != 2 * (F.order + 1):
        raise GeometryError(f"|G_x| = {len(out)}, expected {2 * (F.order + 1)}")
    return out


def stabilizer_of_x_and_line(frame: ConicFrame) -> list[GroupElement]:
    F = frame.F
    out = []
    for g in frame.stabilizer_of_x:
        if frame.ell_e.contains(F, g.apply(F, frame.v2)):
            out.append(g)
    if len(out) != 4:
        raise GeometryError(f"|G_(x, ell_e)| = {len(out)}, expected 4")
    return out


def line_stabilizer(frame: ConicFrame, line: ProjLine) -> list[GroupElement]:
    """Elements of G_x mapping ``line`` (a line through x) onto itself."""
    F = frame.F
    other = next(v for v in line_basis(F, line) if normalize(F, v) != normalize(F, frame.x))
    return [g for g in frame.stabilizer_of_x if line.contains(F, g.apply(F, other))]


def transversal_to_x(frame: ConicFrame, gens: Sequence[GroupElement]) -> dict[int, GroupElement]:
    F = frame.F
    to_point: dict[int, GroupElement] = {frame.x_index: identity()}
    todo = deque([frame.x_index])
    while todo:
        p = todo.popleft()
        h = to_point[p]
        v = index_point(F, p)
        for s in gens:
            r = point_index(F, s.apply(F, v))
            if r not in to_point:
                to_point[r] = h.then(F, s)
                todo.append(r)
    return {p: h.inverse(F) for p, h in to_point.items()}
