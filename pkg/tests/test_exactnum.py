import math
import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import ratios
from khinlab.errors import ValidityError
from khinlab.exactnum import (
    FAMILIES, Prng, Vec2Q, min_quadratic_depth, surrogate_family, surrogate_liouville,
    surrogate_quadratic, torus_dist, torus_norm,
)


@pytest.mark.parametrize("x, d", [(0, 0), (Fraction(9, 10), Fraction(1, 10)),
                                  (Fraction(7, 3), Fraction(1, 3))])
def test_torus_dist_examples(x, d):
    assert torus_dist(Fraction(x)) == d


@pytest.mark.parametrize("v, n", [((0, 0), 0), ((Fraction(9, 10), Fraction(1, 5)), Fraction(1, 5)),
                                  ((Fraction(1, 2), Fraction(1, 4)), Fraction(1, 2))])
def test_torus_norm_examples(v, n):
    assert torus_norm(Vec2Q.of(*v)) == n


@given(ratios(), st.integers(-3, 3))
def test_torus_dist_periodic_and_even(x, n):
    assert torus_dist(x + n) == torus_dist(x) == torus_dist(-x)
    assert 0 <= torus_dist(x) <= Fraction(1, 2)


@given(ratios(), ratios(), ratios(), ratios())
def test_torus_triangle(a, b, c, d):
    u, v = Vec2Q(a, b), Vec2Q(c, d)
    assert torus_norm(u + v) <= torus_norm(u) + torus_norm(v)


def test_sums_and_products_order_free():
    rng = random.Random(3)
    terms = [Fraction(rng.randint(-10**6, 10**6), rng.randint(1, 10**4)) for _ in range(10_000)]
    total = sum(terms, Fraction(0))
    shuffled = terms[:]
    rng.shuffle(shuffled)
    assert sum(shuffled, Fraction(0)) == total
    assert sum(reversed(terms), Fraction(0)) == total
    few = terms[:200]
    assert math.prod(few) == math.prod(reversed(few))


def test_quadratic_surrogate_depth_requirements():
    # [0;2,2,...] needs depth 63 for denominators beyond (10^6)^4
    with pytest.raises(ValidityError, match="minimum depth is 63"):
        surrogate_quadratic([0, 2], 40, 10**6)
    s = surrogate_quadratic([0, 2], 63, 10**6)
    assert s.den > 10**24
    assert abs(s.value.x - (Fraction(14142135623730950488, 10**19) - 1)) < Fraction(1, 10**18)
    assert min_quadratic_depth([0, 2], 10**6) == 63


def test_quadratic_small_cases():
    with pytest.raises(ValidityError):
        surrogate_quadratic([0, 1], 3, 10**6)
    assert surrogate_quadratic([0, 2], 1, 1).value == Vec2Q.of(Fraction(1, 2), Fraction(1, 2))


def test_liouville_surrogate():
    s = surrogate_liouville(10, 4, (0, 1), 10**4)
    want = [sum(Fraction(1, 10 ** (math.factorial(n) + o)) for n in range(1, 5)) for o in (0, 1)]
    assert (s.value.x, s.value.y) == tuple(want)
    with pytest.raises(ValidityError):
        surrogate_liouville(10, 2, (0, 1), 10**9)
    d = surrogate_liouville(2, 4, (0, 0), 2**4)
    assert d.value.x == d.value.y


@pytest.mark.parametrize("name", FAMILIES)
def test_families_within_validity(name):
    s = surrogate_family(name)
    assert s.den > s.validity_bound**4
    with pytest.raises(ValidityError):
        s.require(s.validity_bound + 1)


def test_prng_streams_reproducible():
    a, b = Prng(11), Prng(11)
    assert [a.next_u64() for _ in range(5)] == [b.next_u64() for _ in range(5)]
    assert Prng(11).split(1).next_u64() != Prng(11).split(2).next_u64()
    xs = Prng(4).sample(10, 20, 5)
    assert len(set(xs)) == 5 and all(10 <= x <= 20 for x in xs)


@given(st.integers(0, 2**64 - 1), st.integers(1, 1000))
def test_prng_below_in_range(seed, n):
    assert 0 <= Prng(seed).below(n) < n
