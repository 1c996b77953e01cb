"""Exact scalar and vector arithmetic on the torus, surrogates for irrational
shifts, and a small deterministic PRNG.

Rationals are ``fractions.Fraction``; nothing in the computational core ever
touches a float.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import ValidityError

Ratio = Fraction

MASK64 = (1 << 64) - 1


def as_ratio(value) -> Fraction:
    """Parse ints, Fractions and ``"p/q"`` strings. Floats are refused."""
    if isinstance(value, float):
        raise TypeError("floats are not exact; pass a Fraction or 'p/q' string")
    return Fraction(value)


@dataclass(frozen=True, slots=True)
class Vec2Q:
    x: Fraction
    y: Fraction

    def __iter__(self):
        yield self.x
        yield self.y

    def __add__(self, other: Vec2Q) -> Vec2Q:
        return Vec2Q(self.x + other.x, self.y + other.y)

    def __sub__(self, other: Vec2Q) -> Vec2Q:
        return Vec2Q(self.x - other.x, self.y - other.y)

    def __neg__(self) -> Vec2Q:
        return Vec2Q(-self.x, -self.y)

    def scale(self, c) -> Vec2Q:
        return Vec2Q(self.x * c, self.y * c)

    def mod1(self) -> Vec2Q:
        return Vec2Q(self.x - math.floor(self.x), self.y - math.floor(self.y))

    @classmethod
    def of(cls, x, y) -> Vec2Q:
        return cls(as_ratio(x), as_ratio(y))


ZERO2 = Vec2Q(Fraction(0), Fraction(0))


def torus_dist(x: Fraction) -> Fraction:
    """Distance from ``x`` to the nearest integer, in [0, 1/2]."""
    n, d = x.numerator, x.denominator
    r = n % d
    return Fraction(min(r, d - r), d)


def torus_norm(v: Vec2Q) -> Fraction:
    """Max-norm distance of ``v`` to the nearest integer vector."""
    return max(torus_dist(v.x), torus_dist(v.y))


def nearest_int(x: Fraction) -> int:
    # round() on a Fraction rounds half to even
    return round(x)


def gcd3(a: int, b: int, c: int) -> int:
    return math.gcd(math.gcd(a, b), c)


@dataclass(frozen=True)
class IrrationalSurrogate:
    """Exact rational stand-in for an irrational shift vector.

    Every consumer must reject denominators/indices above ``validity_bound``
    (see :meth:`require`).
    """

    value: Vec2Q
    validity_bound: int
    description: str
    family: str = "custom"
    # common-denominator integer form: value = (num_x, num_y) / den
    den: int = field(init=False, repr=False, compare=False)
    num: tuple[int, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        den = math.lcm(self.value.x.denominator, self.value.y.denominator)
        object.__setattr__(self, "den", den)
        object.__setattr__(
            self, "num", (int(self.value.x * den), int(self.value.y * den))
        )

    def require(self, n: int, what: str = "index") -> None:
        if n > self.validity_bound:
            raise ValidityError(
                f"{what} {n} exceeds surrogate validity bound {self.validity_bound}"
                f" ({self.family})"
            )

    def dist_num(self, h: int, axis: int) -> int:
        """Numerator of ||h*gamma_axis|| over ``self.den``."""
        r = (h * self.num[axis]) % self.den
        return min(r, self.den - r)

    def norm_multiple(self, h: int) -> Fraction:
        """||h gamma|| computed in integers."""
        return Fraction(max(self.dist_num(h, 0), self.dist_num(h, 1)), self.den)

    def nearest_vector(self, h: int) -> tuple[int, int]:
        return (nearest_int(h * self.value.x), nearest_int(h * self.value.y))


def rational_point(x, y, validity_bound: int = 10**9) -> IrrationalSurrogate:
    """Wrap an exact rational vector (e.g. gamma = (0,0)) for APIs expecting a surrogate.

    This is *not* irrational; it exists for oracle tests on rational shifts.
    """
    return IrrationalSurrogate(
        Vec2Q.of(x, y), validity_bound, f"rational point ({x}, {y})", "rational"
    )


def _cf_coeff(cf: list[int], i: int) -> int:
    # index 0 is the integer part; the tail after it repeats periodically
    if i == 0 or len(cf) == 1:
        if i > 0:
            raise ValidityError("continued fraction has no coefficients beyond a0")
        return cf[0]
    return cf[1 + (i - 1) % (len(cf) - 1)]


def _convergent(cf: list[int], depth: int) -> tuple[int, int, int]:
    """Return (p_depth, q_depth, q_{depth+1}) for the periodically extended cf."""
    p0, q0, p1, q1 = 1, 0, cf[0], 1
    for i in range(1, depth + 1):
        a = _cf_coeff(cf, i)
        p0, q0, p1, q1 = p1, q1, a * p1 + p0, a * q1 + q0
    q_next = _cf_coeff(cf, depth + 1) * q1 + q0 if len(cf) > 1 else q1
    return p1, q1, q_next


def min_quadratic_depth(cf: list[int], validity: int) -> int:
    target = validity**4
    p0, q0, p1, q1 = 1, 0, cf[0], 1
    depth = 0
    while q1 <= target:
        depth += 1
        a = _cf_coeff(cf, depth)
        p0, q0, p1, q1 = p1, q1, a * p1 + p0, a * q1 + q0
    return depth


def surrogate_quadratic(
    cf_coeffs: list[int],
    depth: int,
    validity: int,
    second_cf: list[int] | None = None,
) -> IrrationalSurrogate:
    """Depth-th convergent of a periodic continued fraction, used on both axes
    (or paired with a second continued fraction).

    ``cf_coeffs = [a0, a1, ..., am]`` denotes ``[a0; a1, ..., am, a1, ..., am, ...]``.
    """
    cfs = [list(cf_coeffs)] + ([list(second_cf)] if second_cf is not None else [])
    comps = []
    notes = []
    for cf in cfs:
        if any(a <= 0 for a in cf[1:]):
            raise ValidityError("continued fraction coefficients beyond a0 must be positive")
        p, q, q_next = _convergent(cf, depth)
        if q <= validity**4:
            need = min_quadratic_depth(cf, validity)
            raise ValidityError(
                f"depth {depth} gives denominator {q} <= validity^4 = {validity**4};"
                f" minimum depth is {need}"
            )
        comps.append(Fraction(p, q))
        notes.append(f"[{cf[0]};{','.join(map(str, cf[1:]))}...] tail < 1/({q}*{q_next})")
    if len(comps) == 1:
        comps.append(comps[0])
    return IrrationalSurrogate(
        Vec2Q(comps[0], comps[1]),
        validity,
        f"quadratic convergent depth {depth}: " + "; ".join(notes),
        "quadratic",
    )


def surrogate_liouville(
    base: int, terms: int, offsets: tuple[int, int], validity: int
) -> IrrationalSurrogate:
    """Partial sums of sum_n base^(-n! - offset_i)."""
    if base < 2 or terms < 3:
        raise ValidityError("need base >= 2 and terms >= 3")
    if base ** math.factorial(terms) <= validity**4:
        raise ValidityError(
            f"base^(terms!) = {base}^{math.factorial(terms)} must exceed validity^4"
        )
    comps = [
        sum(Fraction(1, base ** (math.factorial(n) + off)) for n in range(1, terms + 1))
        for off in offsets
    ]
    tail_exp = math.factorial(terms + 1) + min(offsets)
    return IrrationalSurrogate(
        Vec2Q(comps[0], comps[1]),
        validity,
        f"Liouville base {base}, {terms} terms, offsets {tuple(offsets)};"
        f" tail < 2*{base}^-{tail_exp}",
        "liouville",
    )


# the three families used throughout the experiment suites
FAMILY_VALIDITY = 10**6


def surrogate_family(name: str, validity: int = FAMILY_VALIDITY) -> IrrationalSurrogate:
    """Named test parameters: ``quad-sqrt2`` (diagonal sqrt2-1), ``quad-pair``
    (sqrt2-1 paired with the golden-ratio conjugate) and ``liouville``."""
    if name == "quad-sqrt2":
        return surrogate_quadratic([0, 2], min_quadratic_depth([0, 2], validity), validity)
    if name == "quad-pair":
        depth = max(min_quadratic_depth([0, 2], validity), min_quadratic_depth([0, 1], validity))
        return surrogate_quadratic([0, 2], depth, validity, second_cf=[0, 1])
    if name == "liouville":
        return surrogate_liouville(10, 5, (0, 1), validity)
    raise ValidityError(f"unknown surrogate family {name!r}")


FAMILIES = ("quad-sqrt2", "quad-pair", "liouville")


class Prng:
    """SplitMix64. ``state`` advances by the golden gamma; output is the
    standard three-step xor-shift-multiply finalizer. All arithmetic mod 2^64."""

    GAMMA = 0x9E3779B97F4A7C15

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + self.GAMMA) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Uniform integer in [0, n), by rejection."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi]."""
        return lo + self.below(hi - lo + 1)

    def ratio(self, denominator: int = 1 << 32) -> Fraction:
        return Fraction(self.below(denominator), denominator)

    def sample(self, lo: int, hi: int, k: int) -> list[int]:
        """k distinct integers from [lo, hi] (Floyd's algorithm), sorted."""
        n = hi - lo + 1
        if k > n:
            raise ValueError(f"cannot sample {k} from {n} values")
        chosen: set[int] = set()
        for j in range(n - k, n):
            t = self.below(j + 1)
            chosen.add(j if t in chosen else t)
        return sorted(lo + c for c in chosen)

    def split(self, index: int) -> Prng:
        """Independent child stream; depends only on the current state and index."""
        mixer = Prng(self.state ^ ((index * 0xD1B54A32D192ED03) & MASK64))
        return Prng(mixer.next_u64())
