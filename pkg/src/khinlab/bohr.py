"""Bohr-set counts {1 <= h <= N : ||h gamma + beta|| < eps} and the bounds
used to control them: full and partial rational orbits, once-around
separation, the case indicator 1_C and the master bound over (N, D).

Irrational powers such as D^omega are never evaluated in floating point:
comparisons raise both sides to the common denominator of the exponent, and
reported magnitudes carry certified rational brackets.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import lru_cache
from typing import Optional, Union

import numpy as np

from .approx import dirichlet, exceeds_power, first_kind
from .errors import ValidityError, check
from .exactnum import ZERO2, IrrationalSurrogate, Vec2Q, gcd3, torus_dist, torus_norm

SIGMA = Fraction(2, 3)
TAU = Fraction(5, 6)
RHO = Fraction(1, 6)
OMEGA = Fraction(1, 6)


@dataclass(frozen=True)
class BohrQuery:
    gamma: Union[IrrationalSurrogate, Vec2Q]
    N: int
    eps: Fraction
    beta: Vec2Q = ZERO2


def _as_vector(gamma) -> Vec2Q:
    return gamma.value if isinstance(gamma, IrrationalSurrogate) else gamma


def bohr_count(qy: BohrQuery) -> int:
    """#{1 <= h <= N : ||h gamma + beta|| < eps} (strict)."""
    if isinstance(qy.gamma, IrrationalSurrogate):
        qy.gamma.require(qy.N, "Bohr range N")
    g = _as_vector(qy.gamma)
    b = qy.beta
    den = math.lcm(g.x.denominator, g.y.denominator, b.x.denominator, b.y.denominator)
    gx, gy = int(g.x * den), int(g.y * den)
    bx, by = int(b.x * den), int(b.y * den)
    eps = Fraction(qy.eps)
    count = 0
    x, y = bx, by
    for _ in range(qy.N):
        x = (x + gx) % den
        y = (y + gy) % den
        d = max(min(x, den - x), min(y, den - y))
        if d < eps * den:
            count += 1
    return count


def rational_orbit_count(a: tuple[int, int], b: int, beta: Vec2Q, eps) -> int:
    """Points of the full orbit {h a/b + beta : 0 <= h < b} in the eps-box."""
    if b < 1 or gcd3(a[0], a[1], b) != 1:
        raise ValidityError(f"need gcd(a1, a2, b) = 1 with b >= 1, got a={a}, b={b}")
    eps = Fraction(eps)
    count = sum(
        torus_norm(Vec2Q(Fraction(h * a[0], b) + beta.x, Fraction(h * a[1], b) + beta.y)) < eps
        for h in range(b)
    )
    check(count <= 8 * eps * b + 1, "full orbit count exceeds 8 eps b + 1",
          a=a, b=b, beta=(str(beta.x), str(beta.y)), eps=str(eps), count=count)
    return count


def partial_orbit_bound(b: int, N: int, eps) -> Fraction:
    """16 (eps b + 1) N/b for N >= b, and 16 min(N, eps b) for N < b."""
    eps = Fraction(eps)
    if N >= b:
        return 16 * (eps * b + 1) * Fraction(N, b)
    return 16 * min(Fraction(N), eps * b)


def partial_orbit_count(a: tuple[int, int], b: int, N: int, eps) -> int:
    """#{1 <= h <= N : ||h a/b|| < eps}."""
    if b < 1 or gcd3(a[0], a[1], b) != 1:
        raise ValidityError(f"need gcd(a1, a2, b) = 1 with b >= 1, got a={a}, b={b}")
    if N < 1:
        raise ValidityError("N must be positive")
    eps = Fraction(eps)
    # the orbit is periodic in h with period b; count one period and the remainder
    hits = [max(torus_dist(Fraction(h * a[0], b)), torus_dist(Fraction(h * a[1], b))) < eps
            for h in range(1, b + 1)]
    full, rest = divmod(N, b)
    count = full * sum(hits) + sum(hits[:rest])
    check(count <= partial_orbit_bound(b, N, eps), "partial orbit bound violated",
          a=a, b=b, N=N, eps=str(eps), count=count)
    return count


def once_around_count(alpha: Vec2Q, beta: Vec2Q, eps) -> int:
    """#{1 <= m < 1/||alpha|| : ||m alpha + beta|| < eps}."""
    na = torus_norm(alpha)
    if na == 0:
        raise ValidityError("alpha must not be an integer vector")
    eps = Fraction(eps)
    count = 0
    m = 1
    while m * na < 1:
        if torus_norm(alpha.scale(m) + beta) < eps:
            count += 1
        m += 1
    check(count <= 2 * eps / na + 1, "once-around count exceeds 2 eps/||alpha|| + 1",
          alpha=(str(alpha.x), str(alpha.y)), beta=(str(beta.x), str(beta.y)),
          eps=str(eps), count=count)
    return count


# -- case indicator ---------------------------------------------------------

@dataclass(frozen=True)
class CaseContext:
    level: int  # the bullet level
    B: int
    b: Optional[int]
    sigma: Fraction
    tau: Fraction
    rho: Fraction
    D: Fraction
    Dhat: Fraction
    h: int
    norm_b: Optional[Fraction]  # ||b gamma||
    error: Fraction = Fraction(0)  # |gamma - A/B|, so that Dhat(h) = max(D, h error)

    def __post_init__(self):
        s, t, r = self.sigma, self.tau, self.rho
        if not (0 < s < 1 and s < t < 1 and 0 < r < s / 2):
            raise ValidityError(f"parameters need 0<sigma<tau<1, 0<rho<sigma/2; got {s}, {t}, {r}")

    def at(self, h: int) -> CaseContext:
        return replace(self, h=h, Dhat=max(self.D, h * self.error))


def case_context(gamma: IrrationalSurrogate, level: int, D, h: int = 1,
                 sigma=SIGMA, tau=TAU, rho=RHO) -> CaseContext:
    fk = first_kind(gamma, level)
    b = nb = None
    if fk.B >= 2:
        dk = dirichlet(gamma, fk)
        b, nb = dk.b, dk.norm_b
    D = Fraction(D)
    ctx = CaseContext(level, fk.B, b, Fraction(sigma), Fraction(tau), Fraction(rho),
                      D, D, h, nb, fk.error)
    return ctx.at(h)


def _first_branch(ctx: CaseContext) -> bool:
    """B <= max(2^level D, 2^(sigma level))."""
    return ctx.B <= (1 << ctx.level) * ctx.D or not exceeds_power(ctx.B, ctx.level, ctx.sigma)


def indicator_C(ctx: CaseContext) -> bool:
    above = exceeds_power(ctx.B, ctx.level, ctx.sigma)  # 2^(sigma level) < B
    if _first_branch(ctx):
        return (2 * ctx.Dhat * ctx.B >= 1 and not above) or above
    if ctx.b is None or ctx.norm_b is None:
        raise ValidityError("the second branch of 1_C needs the Dirichlet denominator b")
    wide = 2 * ctx.h * ctx.norm_b > 1
    return (2 * ctx.D * ctx.b >= 1 and not wide) or wide


def indicator_C_threshold(ctx: CaseContext) -> Optional[int]:
    """The least h0 >= 1 with 1_C(h) = 1 exactly for h >= h0 (None if never).

    1_C depends on h only through Dhat(h) = max(D, h error) and h ||b gamma||,
    both nondecreasing, so it is a threshold function of h.
    """
    above = exceeds_power(ctx.B, ctx.level, ctx.sigma)
    if _first_branch(ctx):
        if above or 2 * ctx.D * ctx.B >= 1:
            return 1
        if ctx.error == 0:
            return None
        # 2 h error B >= 1
        return max(1, math.ceil(1 / (2 * ctx.error * ctx.B)))
    if 2 * ctx.D * ctx.b >= 1:
        return 1
    if ctx.norm_b == 0:
        return None
    # 2 h ||b gamma|| > 1
    return math.floor(1 / (2 * ctx.norm_b)) + 1


# -- irrational powers ------------------------------------------------------

def iroot(x: int, n: int) -> int:
    """floor(x^(1/n)) for integers x >= 0, n >= 1."""
    if x < 0 or n < 1:
        raise ValueError("iroot needs x >= 0, n >= 1")
    if x < 2 or n == 1:
        return x
    guess = 1 << -(-x.bit_length() // n)  # >= the root
    while True:
        nxt = ((n - 1) * guess + x // guess ** (n - 1)) // n
        if nxt >= guess:
            break
        guess = nxt
    while guess**n > x:
        guess -= 1
    while (guess + 1) ** n <= x:
        guess += 1
    return guess


def power_bracket(D: Fraction, omega: Fraction, bits: int = 64) -> tuple[Fraction, Fraction]:
    """Rationals lo <= D^omega <= hi with hi - lo <= 2^-bits (lo = hi if exact)."""
    D, omega = Fraction(D), Fraction(omega)
    if D <= 0:
        raise ValidityError("D must be positive")
    a, c = omega.numerator, omega.denominator
    # D^omega = (num^a / den^a)^(1/c); scale by 2^(bits c) before the root
    num = D.numerator**a << (bits * c)
    den = D.denominator**a
    root = iroot(num // den, c)
    lo = Fraction(root, 1 << bits)
    exact = root**c * den == num
    return (lo, lo) if exact else (lo, lo + Fraction(1, 1 << bits))


def power_less(x: Fraction, D: Fraction, omega: Fraction) -> bool:
    """Exact x < D^omega for x >= 0."""
    a, c = omega.numerator, omega.denominator
    return x**c < D**a


@dataclass(frozen=True)
class BoundTerms:
    D: Fraction
    omega: Fraction
    d_omega: tuple[Fraction, Fraction]  # bracket for D^omega
    ind_k: bool  # 1[D^omega >= C1 R/Q] 1[bullet = k]
    ind_l: bool  # 1[D >= C2] 1[bullet = l]
    C1: Fraction
    C2: Fraction

    @property
    def total(self) -> tuple[Fraction, Fraction]:
        extra = int(self.ind_k) + int(self.ind_l)
        lo, hi = self.d_omega
        return lo + extra, hi + extra


def bound_terms(D, bullet: str, Q: int, R: int, omega=OMEGA, C1=1, C2=1) -> BoundTerms:
    D, omega, C1, C2 = Fraction(D), Fraction(omega), Fraction(C1), Fraction(C2)
    ind_k = bullet == "k" and _power_at_least(D, omega, C1 * Fraction(R, Q))
    ind_l = bullet == "l" and D >= C2
    return BoundTerms(D, omega, power_bracket(D, omega), ind_k, ind_l, C1, C2)


def _power_at_least(D: Fraction, omega: Fraction, x: Fraction) -> bool:
    """Exact D^omega >= x for x >= 0."""
    return x**omega.denominator <= D**omega.numerator


# -- the master bound -------------------------------------------------------

def adhoc_bound_eval(gamma: IrrationalSurrogate, ctx: CaseContext, N: int, D,
                     bullet: str = "l", Q: int = 1, R: int = 1, omega=OMEGA, C1=1, C2=1
                     ) -> tuple[Fraction, BoundTerms]:
    """lhs = (1/N) sum_{1<=h<=N} 1[||h gamma|| < D] 1_C(h), by direct enumeration,
    together with the bound terms D^omega, 1[D^omega >= C1 R/Q] 1[bullet=k],
    1[D >= C2] 1[bullet=l]."""
    D = Fraction(D)
    if N < 1:
        raise ValidityError("N must be positive")
    gamma.require(N, "Bohr range N")
    base = replace(ctx, D=D)
    den = gamma.den
    count = 0
    for h in range(1, N + 1):
        if max(gamma.dist_num(h, 0), gamma.dist_num(h, 1)) < D * den and indicator_C(base.at(h)):
            count += 1
    return Fraction(count, N), bound_terms(D, bullet, Q, R, omega, C1, C2)


class DepthTable:
    """depth[h] = max{t : ||h gamma|| < 2^-t} for 1 <= h <= limit, so that
    ||h gamma|| < 2^-t  <=>  depth[h] >= t."""

    def __init__(self, gamma: IrrationalSurrogate, limit: int):
        gamma.require(limit, "depth table range")
        self.gamma = gamma
        self.limit = limit
        den = gamma.den
        depth = np.empty(limit + 1, dtype=np.int16)
        depth[0] = np.iinfo(np.int16).max
        x = y = 0
        gx, gy = gamma.num
        for h in range(1, limit + 1):
            x = (x + gx) % den
            y = (y + gy) % den
            d = max(min(x, den - x), min(y, den - y))
            depth[h] = ((den - 1) // d).bit_length() - 1 if d else np.iinfo(np.int16).max
        self.depth = depth
        self._at_least: dict[int, np.ndarray] = {}

    def hits(self, t: int) -> np.ndarray:
        """Sorted h in [1, limit] with ||h gamma|| < 2^-t."""
        if t not in self._at_least:
            self._at_least[t] = np.nonzero(self.depth[1:] >= t)[0] + 1
        return self._at_least[t]

    def count(self, t: int, lo: int, hi: int) -> int:
        """#{lo <= h <= hi : ||h gamma|| < 2^-t}."""
        if hi > self.limit:
            raise ValidityError(f"h = {hi} beyond depth table limit {self.limit}")
        arr = self.hits(t)
        return int(np.searchsorted(arr, hi, side="right") - np.searchsorted(arr, lo, side="left"))


@lru_cache(maxsize=8)
def depth_table(gamma: IrrationalSurrogate, limit: int) -> DepthTable:
    return DepthTable(gamma, limit)


def adhoc_lhs_dyadic(table: DepthTable, ctx: CaseContext, N: int, j: int) -> Fraction:
    """lhs for D = 2^(-j+1) via the depth table and the 1_C threshold."""
    D = Fraction(2, 1 << j)
    h0 = indicator_C_threshold(replace(ctx, D=D))
    if h0 is None or h0 > N:
        return Fraction(0)
    return Fraction(table.count(j - 1, h0, N), N)


def harness_N(bullet: str, Q: int, R: int, j: int, k: int, l: int) -> int:
    """N = ceil((Q/R) 2^(k-j+2)) for bullet k, ceil(2^(l-j+3)) for bullet l."""
    if bullet == "k":
        return math.ceil(Fraction(Q, R) * Fraction(2) ** (k - j + 2))
    return math.ceil(Fraction(2) ** (l - j + 3))


# -- structural identities --------------------------------------------------

def bohr_count_decomposed(gamma: IrrationalSurrogate, N: int, eps, b: int) -> int:
    """The same count with h = m b + s, 1 <= s <= b: sum over m of the shifted
    counts #{s : ||s gamma + m b gamma|| < eps}."""
    if b < 1:
        raise ValidityError("b must be positive")
    eps = Fraction(eps)
    g = gamma.value
    total = 0
    m = 0
    while m * b < N:
        shift = g.scale(m * b)
        s_max = min(b, N - m * b)
        total += sum(torus_norm(g.scale(s) + shift) < eps for s in range(1, s_max + 1))
        m += 1
    return total


def triangle_transfer(gamma: IrrationalSurrogate, level: int, N: int, D, tau=TAU
                      ) -> tuple[bool, int, int]:
    """Check {h <= N : ||h gamma|| < D, Dhat(h) <= D^tau} is contained in
    {h <= N : ||h A/B|| < 2 D^tau}; returns (contained, |left|, |right|)."""
    D, tau = Fraction(D), Fraction(tau)
    gamma.require(N, "Bohr range N")
    fk = first_kind(gamma, level)
    a, c = tau.numerator, tau.denominator
    Dtau_c = D**a  # (D^tau)^c
    left = right = 0
    contained = True
    for h in range(1, N + 1):
        rat = max(torus_dist(Fraction(h * fk.A[0], fk.B)), torus_dist(Fraction(h * fk.A[1], fk.B)))
        in_right = (rat / 2) ** c < Dtau_c
        right += in_right
        if gamma.norm_multiple(h) < D and max(D, h * fk.error) ** c <= Dtau_c:
            left += 1
            contained &= in_right
    return contained, left, right
