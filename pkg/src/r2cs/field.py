"""Zech-logarithm arithmetic for the tower F_p < F_q < F_{q^n}, p odd.

Elements of the big field are plain ints ("codes"): code 0 is zero and code
``k + 1`` is ``alpha**k`` for the fixed primitive element ``alpha``.  Codes
sort by discrete logarithm with zero first, so they double as the canonical
element index.  Every binary operation exists in a scalar form (Python ints)
and a vectorised form (numpy arrays, prefix ``v``).
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

MAX_ORDER = 1 << 25


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    i = 2
    while i * i <= n:
        if n % i == 0:
            return False
        i += 1
    return True


def prime_power(q: int) -> tuple[int, int] | None:
    """Return ``(p, e)`` with ``q == p**e`` or None."""
    if q < 2:
        return None
    p = 2
    while p * p <= q and q % p:
        p += 1
    if q % p:
        p = q
    e = 0
    r = q
    while r % p == 0:
        r //= p
        e += 1
    return (p, e) if r == 1 else None


def _factor(n: int) -> list[int]:
    out = []
    d = 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        out.append(n)
    return out


@functools.lru_cache(maxsize=None)
def conway_polynomial(p: int, degree: int) -> tuple[int, ...]:
    """Conway polynomial of F_{p^degree}, coefficients lowest degree first."""
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        import galois

    poly = galois.conway_poly(p, degree)
    return tuple(int(c) for c in reversed(poly.coeffs.tolist()))


def format_polynomial(coeffs: Sequence[int]) -> str:
    terms = []
    for k in range(len(coeffs) - 1, -1, -1):
        c = coeffs[k]
        if not c:
            continue
        mono = "" if k == 0 else ("x" if k == 1 else f"x^{k}")
        if k == 0:
            terms.append(str(c))
        else:
            terms.append(mono if c == 1 else f"{c}{mono}")
    return " + ".join(terms)


@dataclass(frozen=True, eq=False)
class FieldTower:
    """The field F_{q^n} with its subfield F_q, q = p**e.

    Construct with :func:`make_tower`.  Instances are immutable and may be
    shared freely between workers.
    """

    p: int
    e: int
    n: int
    modulus: tuple[int, ...]
    exp_vec: np.ndarray = field(repr=False)
    log_of_vec: np.ndarray = field(repr=False)
    zech: np.ndarray = field(repr=False)

    # -- sizes -------------------------------------------------------------

    @property
    def q(self) -> int:
        return self.p**self.e

    @property
    def order(self) -> int:
        return self.p ** (self.e * self.n)

    @property
    def m(self) -> int:
        return self.order - 1

    @property
    def degree(self) -> int:
        return self.e * self.n

    @property
    def modulus_small(self) -> tuple[int, ...]:
        return conway_polynomial(self.p, self.e) if self.e > 1 else (0, 1)

    @property
    def generator(self) -> int:
        return 2 if self.order > 2 else 1

    @functools.cached_property
    def subfield_step(self) -> int:
        """Log step of F_q* inside F_{q^n}*: (q^n - 1)/(q - 1)."""
        return self.m // (self.q - 1)

    def describe(self) -> dict:
        """Cache/report header identifying this exact field."""
        return {
            "p": self.p,
            "e": self.e,
            "n": self.n,
            "modulus": list(self.modulus),
            "generator_log": 1,
        }

    # -- element construction ----------------------------------------------

    @property
    def zero(self) -> int:
        return 0

    @property
    def one(self) -> int:
        return 1

    def alpha(self, k: int) -> int:
        """The code of alpha**k."""
        return k % self.m + 1

    def log(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("log of zero")
        return a - 1

    def from_int(self, k: int) -> int:
        """Image of the integer ``k`` under Z -> F_p -> F_{q^n}."""
        return int(self.log_of_vec[k % self.p])

    def from_vector(self, coeffs: Sequence[int]) -> int:
        """Element with the given coordinates over F_p in the power basis."""
        v = sum((c % self.p) * self.p**i for i, c in enumerate(coeffs))
        return int(self.log_of_vec[v])

    def to_vector(self, a: int) -> list[int]:
        v = int(self.exp_vec[a - 1]) if a else 0
        out = []
        for _ in range(self.degree):
            v, r = divmod(v, self.p)
            out.append(r)
        return out

    def elements(self) -> range:
        """All codes in canonical order (zero, alpha^0, alpha^1, ...)."""
        return range(self.order)

    def subfield(self) -> list[int]:
        """F_q inside F_{q^n}: zero followed by the powers of alpha^step."""
        s = self.subfield_step
        return [0] + [k * s + 1 for k in range(self.q - 1)]

    def subfield_nonzero(self) -> list[int]:
        return self.subfield()[1:]

    def in_subfield(self, a: int) -> bool:
        return a == 0 or (a - 1) % self.subfield_step == 0

    def quotient_transversal(self) -> list[int]:
        """Representatives of F_{q^n}* / F_q*: alpha^0 ... alpha^(step-1)."""
        return list(range(1, self.subfield_step + 1))

    def fmt(self, a: int) -> str:
        if a == 0:
            return "0"
        k = a - 1
        return "1" if k == 0 else ("a" if k == 1 else f"a^{k}")

    # -- scalar arithmetic ---------------------------------------------------

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        return (a + b - 2) % self.m + 1

    def add(self, a: int, b: int) -> int:
        if a == 0:
            return b
        if b == 0:
            return a
        z = int(self.zech[(b - a) % self.m])
        if z == 0:
            return 0
        return (a + z - 2) % self.m + 1

    def neg(self, a: int) -> int:
        if a == 0:
            return 0
        return (a - 1 + self.m // 2) % self.m + 1

    def sub(self, a: int, b: int) -> int:
        return self.add(a, self.neg(b))

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("inverse of zero")
        return (1 - a) % self.m + 1

    def div(self, a: int, b: int) -> int:
        if b == 0:
            raise ZeroDivisionError("division by zero")
        if a == 0:
            return 0
        return (a - b) % self.m + 1

    def pow(self, a: int, k: int) -> int:
        if a == 0:
            if k < 0:
                raise ZeroDivisionError("zero to a negative power")
            return 1 if k == 0 else 0
        return ((a - 1) * k) % self.m + 1

    def is_square(self, a: int) -> bool:
        """Squareness via the parity of the discrete log; zero counts as square."""
        return a == 0 or (a - 1) % 2 == 0

    def sqrt(self, a: int) -> int | None:
        if a == 0:
            return 0
        if (a - 1) % 2:
            return None
        return (a - 1) // 2 + 1

    def frobenius(self, a: int, i: int = 1) -> int:
        """``a ** (q ** i)``."""
        if a == 0:
            return 0
        return ((a - 1) * pow(self.q, i, self.m)) % self.m + 1

    def sum(self, items: Iterable[int]) -> int:
        acc = 0
        for it in items:
            acc = self.add(acc, it)
        return acc

    def linearized_eval(self, coeffs: Sequence[tuple[int, int]], t: int) -> int:
        """Evaluate sum(c * t**(q**k)) for ``coeffs = [(c, k), ...]``."""
        acc = 0
        for c, k in coeffs:
            if not 0 <= k < self.n:
                raise ValueError(f"automorphism index {k} outside [0, {self.n})")
            acc = self.add(acc, self.mul(c, self.frobenius(t, k)))
        return acc

    # -- vectorised arithmetic -------------------------------------------------

    def vmul(self, a, b):
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        return np.where((a == 0) | (b == 0), 0, (a + b - 2) % self.m + 1)

    def vadd(self, a, b):
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        z = self.zech[(b - a) % self.m]
        s = np.where(z == 0, 0, (a + z - 2) % self.m + 1)
        return np.where(a == 0, b, np.where(b == 0, a, s))

    def vneg(self, a):
        a = np.asarray(a, dtype=np.int64)
        return np.where(a == 0, 0, (a - 1 + self.m // 2) % self.m + 1)

    def vsub(self, a, b):
        return self.vadd(a, self.vneg(b))

    def vinv(self, a):
        a = np.asarray(a, dtype=np.int64)
        if np.any(a == 0):
            raise ZeroDivisionError("inverse of zero")
        return (1 - a) % self.m + 1

    def vdiv(self, a, b):
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        if np.any(b == 0):
            raise ZeroDivisionError("division by zero")
        return np.where(a == 0, 0, (a - b) % self.m + 1)

    def vpow(self, a, k: int):
        a = np.asarray(a, dtype=np.int64)
        if k == 0:
            return np.ones_like(a)
        if k < 0 and np.any(a == 0):
            raise ZeroDivisionError("zero to a negative power")
        return np.where(a == 0, 0, ((a - 1) * k) % self.m + 1)

    def vfrobenius(self, a, i: int = 1):
        """Elementwise ``a ** (q ** i)``."""
        return self.vpow(a, pow(self.q, i, self.m))

    def vdigits(self, a) -> np.ndarray:
        """F_p coordinates of each element, shape ``a.shape + (degree,)``."""
        a = np.asarray(a, dtype=np.int64)
        packed = np.where(a == 0, 0, self.exp_vec[(a - 1) % self.m])
        place = self.p ** np.arange(self.degree, dtype=np.int64)
        return (packed[..., None] // place) % self.p

    def vis_square(self, a):
        a = np.asarray(a, dtype=np.int64)
        return (a == 0) | ((a - 1) % 2 == 0)

    def vnonsquare(self, a):
        """True exactly on the nonzero non-squares."""
        a = np.asarray(a, dtype=np.int64)
        return (a != 0) & ((a - 1) % 2 == 1)


def _power_table(p: int, coeffs: Sequence[int]) -> np.ndarray | None:
    """Vector forms of x^0 .. x^(Q-2) modulo ``coeffs``; None if x is not primitive."""
    d = len(coeffs) - 1
    order = p**d
    m = order - 1
    top = [(-c) % p for c in coeffs[:d]]
    place = [p**i for i in range(d)]
    out = np.empty(m, dtype=np.int64)
    v = [0] * d
    v[0] = 1
    for k in range(m):
        out[k] = sum(c * w for c, w in zip(v, place))
        hi = v[-1]
        v = [0] + v[:-1]
        if hi:
            v = [(v[i] + hi * top[i]) % p for i in range(d)]
        if k + 1 < m and v[0] == 1 and not any(v[1:]):
            return None
    if not (v[0] == 1 and not any(v[1:])):
        return None
    return out


def make_tower(p: int, e: int, n: int, modulus_override: Sequence[int] | None = None) -> FieldTower:
    """Build F_{q^n} with q = p**e.

    ``modulus_override`` gives the defining polynomial of F_{q^n} over F_p,
    lowest coefficient first; it must be monic and primitive.  The default
    is the Conway polynomial.
    """
    if not is_prime(p):
        raise ValueError(f"{p} is not prime")
    if p == 2:
        raise ValueError("characteristic 2 is not supported")
    if e < 1 or n < 1:
        raise ValueError("e and n must be positive")
    d = e * n
    order = p**d
    if order > MAX_ORDER:
        raise ValueError(f"field of order {order} exceeds table limit {MAX_ORDER}")
    if modulus_override is None:
        coeffs = tuple(conway_polynomial(p, d))
    else:
        coeffs = tuple(int(c) % p for c in modulus_override)
        if len(coeffs) != d + 1 or coeffs[-1] != 1:
            raise ValueError(f"modulus must be monic of degree {d}")
        if coeffs[0] == 0:
            raise ValueError("modulus is reducible (divisible by x)")
    if d == 1:
        # x - r with r a primitive root; powers of r
        r = (-coeffs[0]) % p
        exp_vec = np.array([pow(r, k, p) for k in range(p - 1)], dtype=np.int64)
        if len(set(exp_vec.tolist())) != p - 1:
            raise ValueError("modulus root is not a primitive element")
    else:
        exp_vec = _power_table(p, coeffs)
        if exp_vec is None:
            raise ValueError(
                f"modulus {format_polynomial(coeffs)} is reducible or not primitive"
            )
    m = order - 1
    log_of_vec = np.zeros(order, dtype=np.int64)
    log_of_vec[exp_vec] = np.arange(1, m + 1)
    # zech[k] = code of 1 + alpha^k; adding 1 touches only the constant digit
    low = exp_vec % p
    one_plus = np.where(low == p - 1, exp_vec - (p - 1), exp_vec + 1)
    zech = log_of_vec[one_plus]
    for arr in (exp_vec, log_of_vec, zech):
        arr.setflags(write=False)
    return FieldTower(p, e, n, coeffs, exp_vec, log_of_vec, zech)


@functools.lru_cache(maxsize=32)
def cached_tower(p: int, e: int, n: int, modulus: tuple[int, ...] | None = None) -> FieldTower:
    return make_tower(p, e, n, modulus)
