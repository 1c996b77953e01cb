"""Best rational approximations to the shift vector.

For each dyadic level ``k`` the first-kind approximation is the minimal
denominator ``B`` with ``|gamma - A/B| < 2^-k`` (max norm). Below it sits the
Dirichlet approximation ``b < B`` with ``||b gamma|| <= B^(-1/2)``. The shift
context picks between them by comparing ``B`` with ``2^(sigma k)``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Optional

from .errors import ValidityError, check
from .exactnum import IrrationalSurrogate, gcd3


class Branch(enum.Enum):
    FIRST_KIND = "FirstKind"
    DIRICHLET = "Dirichlet"


@dataclass(frozen=True)
class FirstKindApprox:
    k: int
    B: int
    A: tuple[int, int]
    error: Fraction  # |gamma - A/B| in max norm, equals ||B gamma|| / B


@dataclass(frozen=True)
class DirichletApprox:
    k: int
    b: int
    a: tuple[int, int]
    norm_b: Fraction  # ||b gamma||


@dataclass(frozen=True)
class ShiftContext:
    k: int
    first_kind: FirstKindApprox
    dirichlet: Optional[DirichletApprox]
    sigma: Fraction
    branch: Branch

    @property
    def modulus(self) -> int:
        """The denominator used for shift reduction (B_k or b_k)."""
        if self.branch is Branch.FIRST_KIND:
            return self.first_kind.B
        return self.dirichlet.b

    @property
    def offset(self) -> tuple[int, int]:
        if self.branch is Branch.FIRST_KIND:
            return self.first_kind.A
        return self.dirichlet.a


def minimal_denominator(
    gamma: IrrationalSurrogate,
    accept: Callable[[int, int], bool],
    start: int = 1,
    stop: Optional[int] = None,
) -> Optional[int]:
    """Smallest ``n >= start`` with ``accept(n, dnum)`` where ``dnum / gamma.den``
    is ``||n gamma||``. Scans up to ``stop`` (default: validity bound)."""
    stop = gamma.validity_bound if stop is None else stop
    for n in range(start, stop + 1):
        if accept(n, max(gamma.dist_num(n, 0), gamma.dist_num(n, 1))):
            return n
    return None


def _first_kind_from(gamma: IrrationalSurrogate, k: int, start: int) -> FirstKindApprox:
    den = gamma.den
    scale = 1 << k
    B = minimal_denominator(gamma, lambda n, d: d * scale < n * den, start=start)
    if B is None:
        raise ValidityError(
            f"first-kind search at level k={k} exceeds validity bound"
            f" {gamma.validity_bound} ({gamma.family})"
        )
    A = gamma.nearest_vector(B)
    err = gamma.norm_multiple(B) / B
    check(gcd3(A[0], A[1], B) == 1, "first-kind approximation not reduced", k=k, B=B, A=A)
    return FirstKindApprox(k, B, A, err)


@lru_cache(maxsize=None)
def first_kind(gamma: IrrationalSurrogate, k: int) -> FirstKindApprox:
    """Minimal B >= 1 with ||B gamma|| / B < 2^-k; A nearest to B gamma."""
    if k < 0:
        raise ValidityError("level must be nonnegative")
    # B_k is nondecreasing in k, so resume the scan from the previous level
    start = first_kind(gamma, k - 1).B if k > 0 else 1
    return _first_kind_from(gamma, k, start)


def first_kind_bruteforce(gamma: IrrationalSurrogate, k: int) -> FirstKindApprox:
    """Oracle: scan every B from 1 using Fraction arithmetic directly."""
    radius = Fraction(1, 1 << k)
    B = 1
    while True:
        gamma.require(B, "first-kind denominator")
        A = gamma.nearest_vector(B)
        err = max(abs(gamma.value.x - Fraction(A[0], B)), abs(gamma.value.y - Fraction(A[1], B)))
        if err < radius:
            return FirstKindApprox(k, B, A, err)
        B += 1


@lru_cache(maxsize=None)
def first_kind_within(gamma: IrrationalSurrogate, radius_sq_inv: int) -> FirstKindApprox:
    """Minimal B with |gamma - A/B| < radius, where radius = radius_sq_inv^(-1/2).

    Used for B(M) in the model problem (radius M^(-1/2)); compared exactly
    as ||B gamma||^2 * M < B^2.
    """
    den2 = gamma.den**2
    B = minimal_denominator(gamma, lambda n, d: d * d * radius_sq_inv < n * n * den2)
    if B is None:
        raise ValidityError(f"no denominator within validity for radius^-2 = {radius_sq_inv}")
    A = gamma.nearest_vector(B)
    return FirstKindApprox(-1, B, A, gamma.norm_multiple(B) / B)


@lru_cache(maxsize=None)
def dirichlet(gamma: IrrationalSurrogate, fk: FirstKindApprox) -> DirichletApprox:
    """Minimal 1 <= b < B with ||b gamma|| <= B^(-1/2); a nearest to b gamma."""
    B = fk.B
    if B < 2:
        raise ValidityError("Dirichlet approximation needs B >= 2")
    den2 = gamma.den**2
    b = minimal_denominator(gamma, lambda n, d: d * d * B <= den2, stop=B - 1)
    check(b is not None, "no Dirichlet denominator below B (surrogate validity breach?)",
          k=fk.k, B=B)
    a = gamma.nearest_vector(b)
    check(b * b * B <= 4**fk.k, "b_k <= 2^k / B_k^(1/2) violated", k=fk.k, B=B, b=b)
    check(gcd3(a[0], a[1], b) == 1, "Dirichlet approximation not reduced", k=fk.k, b=b, a=a)
    return DirichletApprox(fk.k, b, a, gamma.norm_multiple(b))


def exceeds_power(B: int, k: int, sigma: Fraction) -> bool:
    """Exact test of B > 2^(sigma k)."""
    return B**sigma.denominator > 2 ** (k * sigma.numerator)


@lru_cache(maxsize=None)
def shift_context(gamma: IrrationalSurrogate, k: int, sigma: Fraction) -> ShiftContext:
    if not 0 < sigma < 1:
        raise ValidityError("sigma must lie in (0, 1)")
    fk = first_kind(gamma, k)
    if exceeds_power(fk.B, k, sigma):
        return ShiftContext(k, fk, dirichlet(gamma, fk), sigma, Branch.DIRICHLET)
    return ShiftContext(k, fk, None, sigma, Branch.FIRST_KIND)


def manual_context(k: int, M: int, m: tuple[int, int], sigma=Fraction(2, 3)) -> ShiftContext:
    """A FirstKind context with a given modulus/offset, for tests on S_q."""
    fk = FirstKindApprox(k, M, tuple(m), Fraction(0))
    return ShiftContext(k, fk, None, Fraction(sigma), Branch.FIRST_KIND)


def convergents_1d(cf_coeffs: list[int], n: int) -> list[tuple[int, int]]:
    """First n convergents p_i/q_i of [a0; a1, ...] by the usual recurrence."""
    out = []
    p0, q0, p1, q1 = 1, 0, cf_coeffs[0], 1
    out.append((p1, q1))
    for a in cf_coeffs[1:n]:
        if a <= 0:
            raise ValidityError("coefficients beyond the first must be positive")
        p0, q0, p1, q1 = p1, q1, a * p1 + p0, a * q1 + q0
        out.append((p1, q1))
    assert all(math.gcd(p, q) == 1 for p, q in out)
    return out[:n]
