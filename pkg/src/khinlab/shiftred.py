"""Shift-reduced residue sets S_q, their cardinalities and box counts, and the
square families E_q / E_q' built from them.

A residue ``u`` mod ``q`` survives the shift reduction at modulus ``M`` and
offset ``m`` (from the level's :class:`~khinlab.approx.ShiftContext`) iff
``gcd(M u_1 + m_1, M u_2 + m_2, M q) == 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Iterable, Mapping

import numpy as np

from .approx import ShiftContext, shift_context
from .errors import ValidityError, check
from .exactnum import IrrationalSurrogate, Prng, Vec2Q

HALF = Fraction(1, 2)


@lru_cache(maxsize=4096)
def prime_factors(n: int) -> tuple[int, ...]:
    """Distinct prime factors of n by trial division."""
    out = []
    p = 2
    while p * p <= n:
        if n % p == 0:
            out.append(p)
            while n % p == 0:
                n //= p
        p += 1 if p == 2 else 2
    if n > 1:
        out.append(n)
    return tuple(out)


def squarefree_divisors(primes: Iterable[int]) -> list[tuple[int, int]]:
    """All (d, mu(d)) with d a product of a subset of ``primes``."""
    divs = [(1, 1)]
    for p in primes:
        divs += [(d * p, -mu) for d, mu in divs]
    return divs


class ApproxFunction:
    """Finitely supported psi: q -> (0, 1/2], exact rational values."""

    def __init__(self, support: Mapping[int, Fraction], label: str = "custom"):
        values = {}
        for q, v in support.items():
            v = Fraction(v)
            if not (isinstance(q, int) and q >= 1):
                raise ValidityError(f"support point {q!r} is not a positive integer")
            if not 0 < v <= HALF:
                raise ValidityError(f"psi({q}) = {v} outside (0, 1/2]")
            values[q] = v
        self.support = dict(sorted(values.items()))
        self.label = label

    def __call__(self, q: int) -> Fraction:
        try:
            return self.support[q]
        except KeyError:
            raise ValidityError(f"q = {q} is not in the support of psi") from None

    def __contains__(self, q: int) -> bool:
        return q in self.support

    def __len__(self) -> int:
        return len(self.support)

    def __repr__(self) -> str:
        return f"ApproxFunction({self.label}, |supp|={len(self.support)})"

    def in_block(self, lo: int) -> list[int]:
        """Supported q in the dyadic block (lo, 2 lo]."""
        return [q for q in self.support if lo < q <= 2 * lo]

    def level(self, q: int) -> int:
        return dyadic_level(self(q))

    def restrict(self, qs: Iterable[int]) -> ApproxFunction:
        return ApproxFunction({q: self.support[q] for q in qs if q in self.support}, self.label)


def dyadic_level(psi_q: Fraction) -> int:
    """The k >= 2 with 2^-k < psi_q <= 2^(-k+1)."""
    psi_q = Fraction(psi_q)
    if not 0 < psi_q <= HALF:
        raise ValidityError(f"psi value {psi_q} outside (0, 1/2]")
    n, d = psi_q.numerator, psi_q.denominator
    # smallest k with d < n 2^k
    k = max(0, (d // n).bit_length() - 1)
    while d >= n << k:
        k += 1
    return k


def pi_q(q: int, ctx: ShiftContext) -> int:
    """Product of the primes dividing q but not the context modulus."""
    M = ctx.modulus
    return math.prod(p for p in prime_factors(q) if M % p)


def _coordinate_gcds(q: int, M: int, m: int) -> np.ndarray:
    u = np.arange(q, dtype=np.int64)
    return np.gcd(M * u + m, M * q)


@dataclass(frozen=True)
class ResidueSet:
    q: int
    context: ShiftContext
    mask: np.ndarray = field(repr=False, compare=False)  # mask[u1, u2]

    @cached_property
    def members(self) -> frozenset[tuple[int, int]]:
        u1, u2 = np.nonzero(self.mask)
        return frozenset(zip(u1.tolist(), u2.tolist()))

    def __len__(self) -> int:
        return int(self.mask.sum())

    def __contains__(self, u) -> bool:
        return bool(self.mask[u[0] % self.q, u[1] % self.q])


def residue_set(q: int, ctx: ShiftContext) -> ResidueSet:
    """S_q for the given context, as a q-by-q membership mask."""
    if q < 1:
        raise ValidityError("q must be positive")
    M, (m1, m2) = ctx.modulus, ctx.offset
    g1 = _coordinate_gcds(q, M, m1)
    g2 = _coordinate_gcds(q, M, m2)
    # gcd(x, y, Mq) = gcd(gcd(x, Mq), gcd(y, Mq))
    mask = np.gcd.outer(g1, g2) == 1
    return ResidueSet(q, ctx, mask)


def is_member(u: tuple[int, int], q: int, ctx: ShiftContext) -> bool:
    M, (m1, m2) = ctx.modulus, ctx.offset
    return math.gcd(math.gcd(M * u[0] + m1, M * u[1] + m2), M * q) == 1


def residue_count(q: int, ctx: ShiftContext) -> int:
    """|S_q| by enumeration of every residue pair, grouped by coordinate gcd."""
    M, (m1, m2) = ctx.modulus, ctx.offset
    Mq = M * q
    h1: dict[int, int] = {}
    h2: dict[int, int] = {}
    for u in range(q):
        a = math.gcd(M * u + m1, Mq)
        b = math.gcd(M * u + m2, Mq)
        h1[a] = h1.get(a, 0) + 1
        h2[b] = h2.get(b, 0) + 1
    return sum(ca * cb for a, ca in h1.items() for b, cb in h2.items() if math.gcd(a, b) == 1)


def cardinality_formula(q: int, ctx: ShiftContext) -> int:
    """q^2 * prod over p | pi_q of (1 - p^-2), as an exact integer."""
    n = q * q
    for p in prime_factors(pi_q(q, ctx)):
        n = n // (p * p) * (p * p - 1)
    return n


def euler_lower_bound(q: int) -> Fraction:
    """q^2 * prod over primes p <= q of (1 - p^-2); a lower bound for |S_q|."""
    bound = Fraction(q * q)
    sieve = bytearray([1]) * (q + 1)
    for p in range(2, q + 1):
        if sieve[p]:
            sieve[p * p :: p] = bytearray(len(sieve[p * p :: p]))
            bound *= Fraction(p * p - 1, p * p)
    return bound


def box_count(rs: ResidueSet, y: Vec2Q) -> int:
    """#{u in S_q : u_i <= q y_i} (non-strict)."""
    q = rs.q
    lim = [min(math.floor(q * c), q - 1) for c in y]
    if lim[0] < 0 or lim[1] < 0:
        return 0
    return int(rs.mask[: lim[0] + 1, : lim[1] + 1].sum())


def box_count_crt(q: int, ctx: ShiftContext, y: Vec2Q) -> int:
    """The same count by Moebius inversion over d | pi_q with a CRT progression count."""
    M, m = ctx.modulus, ctx.offset
    lim = [min(math.floor(q * c), q - 1) for c in y]
    if lim[0] < 0 or lim[1] < 0:
        return 0
    total = 0
    for d, mu in squarefree_divisors(prime_factors(pi_q(q, ctx))):
        inv = pow(M, -1, d) if d > 1 else 0
        prod = 1
        for i in range(2):
            c = (-m[i] * inv) % d  # u with d | M u + m
            prod *= (lim[i] - c) // d + 1 if lim[i] >= c else 0
        total += mu * prod
    return total


@dataclass(frozen=True)
class SquareFamily:
    q: int
    radius: Fraction
    centers: tuple[Vec2Q, ...]
    primed: bool

    def __len__(self) -> int:
        return len(self.centers)


def context_for(q: int, psi: ApproxFunction, gamma: IrrationalSurrogate, sigma) -> ShiftContext:
    return shift_context(gamma, psi.level(q), Fraction(sigma))


def square_family(q: int, psi: ApproxFunction, gamma: IrrationalSurrogate,
                  sigma, primed: bool) -> SquareFamily:
    """Squares B((u+gamma)/q, psi(q)/q) mod 1, over S_q (primed) or all u."""
    radius = psi(q) / q
    gamma.require(q, "modulus q")
    G, (Px, Py) = gamma.den, gamma.num
    if primed:
        us = sorted(residue_set(q, context_for(q, psi, gamma, sigma)).members)
    else:
        us = [(a, b) for a in range(q) for b in range(q)]
    qG = q * G
    # (u + gamma)/q mod 1 as a reduced fraction straight from integers
    centers = tuple(
        Vec2Q(Fraction((a * G + Px) % qG, qG), Fraction((b * G + Py) % qG, qG)) for a, b in us
    )
    check(2 * radius <= Fraction(1, q), "squares of one family overlap", q=q)
    return SquareFamily(q, radius, centers, primed)


# -- psi generators ---------------------------------------------------------

def _floor_root_inverse(q: int, s: Fraction, precision: int) -> int:
    """floor(2^precision * q^(-s)) by exact integer search."""
    a, b = s.numerator, s.denominator
    target = 1 << (precision * b)
    # largest n with n^b * q^a <= 2^(precision b)
    lo, hi = 0, 1 << precision
    qa = q**a
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if mid**b * qa <= target:
            lo = mid
        else:
            hi = mid - 1
    return lo


def psi_power_law(qs: Iterable[int], exponent, precision: int = 40, scale=1) -> ApproxFunction:
    """psi(q) = scale * q^-exponent truncated down to a multiple of 2^-precision, capped at 1/2."""
    s = Fraction(exponent)
    scale = Fraction(scale)
    out = {}
    for q in qs:
        v = Fraction(_floor_root_inverse(q, s, precision), 1 << precision) * scale
        if v > 0:
            out[q] = min(v, HALF)
    return ApproxFunction(out, f"power(q^-{s}, x{scale})")


def psi_constant(qs: Iterable[int], value) -> ApproxFunction:
    value = Fraction(value)
    return ApproxFunction({q: value for q in qs}, f"const({value})")


def psi_sparse_random(lo: int, hi: int, count: int, rng: Prng,
                      level_range: tuple[int, int] = (2, 14)) -> ApproxFunction:
    """``count`` support points sampled from [lo, hi]; each value is
    (1 + t) 2^-k with k uniform in ``level_range`` and t uniform in [0, 1)."""
    out = {}
    for q in rng.sample(lo, hi, min(count, hi - lo + 1)):
        k = rng.randint(*level_range)
        t = Fraction(rng.below(256), 256)
        out[q] = (1 + t) / 2**k
    return ApproxFunction(out, f"sparse({count} in [{lo},{hi}])")


def block_support(rng: Prng, lo_exp: int, hi_exp: int, per_block: int, links: int = 0) -> dict[int, int]:
    """Sample ``per_block`` moduli from each dyadic block (2^u, 2^(u+1)],
    lo_exp <= u <= hi_exp, adding the doubles of ``links`` points of the block
    below (so that divisor pairs r | q occur). Returns q -> block exponent."""
    out: dict[int, int] = {}
    prev: list[int] = []
    for u in range(lo_exp, hi_exp + 1):
        sub = rng.split(u)
        pts = sub.sample((1 << u) + 1, 1 << (u + 1), per_block)
        pts = sorted(set(pts) | {2 * p for p in prev[:links]})
        out.update((q, u) for q in pts)
        prev = pts
    return out


def psi_sparse_blocks(rng: Prng, lo_exp: int, hi_exp: int, per_block: int,
                      links: int = 0) -> ApproxFunction:
    """Sparse support per dyadic block; psi(q) = (1 + t) 2^-k with k uniform in
    [2, u + 4] for q in block u and t uniform in {0, 1/256, ..., 255/256}."""
    support = block_support(rng, lo_exp, hi_exp, per_block, links)
    vals = {}
    for q, u in sorted(support.items()):
        sub = rng.split(1_000_003 * q)
        k = sub.randint(2, u + 4)
        vals[q] = (1 + Fraction(sub.below(256), 256)) / 2**k
    return ApproxFunction(vals, f"sparse-blocks({per_block}/block, 2^{lo_exp}..2^{hi_exp + 1})")


def psi_power_blocks(rng: Prng, lo_exp: int, hi_exp: int, per_block: int, exponent,
                     links: int = 0) -> ApproxFunction:
    """The same sparse block support with power-law values q^-exponent."""
    support = block_support(rng, lo_exp, hi_exp, per_block, links)
    psi = psi_power_law(sorted(support), exponent)
    psi.label = f"power-blocks(q^-{Fraction(exponent)}, {per_block}/block)"
    return psi
