from fractions import Fraction

import pytest

from khinlab.approx import (
    Branch, convergents_1d, dirichlet, first_kind, first_kind_bruteforce, manual_context,
    shift_context,
)
from khinlab.errors import ValidityError
from khinlab.exactnum import gcd3, surrogate_family, surrogate_liouville

SIGMA = Fraction(2, 3)
SQRT2 = surrogate_family("quad-sqrt2")


def test_first_kind_examples():
    fk0 = first_kind(SQRT2, 0)
    assert (fk0.B, fk0.A) == (1, (0, 0))
    fk2 = first_kind(SQRT2, 2)
    assert (fk2.B, fk2.A) == (2, (1, 1))
    assert gcd3(*fk2.A, fk2.B) == 1


def test_dirichlet_example():
    d = dirichlet(SQRT2, first_kind(SQRT2, 2))
    assert (d.b, d.a) == (1, (0, 0))


def test_dirichlet_on_liouville_is_minimal():
    s = surrogate_liouville(10, 4, (0, 0), 10**4)
    k = next(k for k in range(2, 27) if first_kind(s, k).B == 100)  # 10^(2!)
    d = dirichlet(s, first_kind(s, k))
    # ||b gamma|| <= B^(-1/2) = 1/10, i.e. 100 ||b gamma||^2 <= 1
    ok = [b for b in range(1, 100) if 100 * s.norm_multiple(b) ** 2 <= 1]
    assert d.b == ok[0] == 9  # 9 * 0.110001... sits within 1/100 of 1


def test_shift_context_branches():
    assert shift_context(SQRT2, 0, SIGMA).branch is Branch.FIRST_KIND
    fk = first_kind(SQRT2, 6)
    assert fk.B == 5 and shift_context(SQRT2, 6, SIGMA).branch is Branch.FIRST_KIND
    # the exact rule: 17^3 = 4913 > 2^12 would switch to the Dirichlet branch
    assert 17**3 > 2**12 >= 5**3


def test_convergents():
    assert convergents_1d([0, 2, 2, 2], 3) == [(0, 1), (1, 2), (2, 5)]
    assert convergents_1d([0], 1) == [(0, 1)]
    assert convergents_1d([1, 1, 1, 1, 1], 5) == [(1, 1), (2, 1), (3, 2), (5, 3), (8, 5)]


@pytest.mark.parametrize("k", range(0, 15))
def test_first_kind_minimal(gamma, k):
    assert first_kind(gamma, k) == first_kind_bruteforce(gamma, k)


def test_levels_monotone_and_bounded(gamma):
    Bs = [first_kind(gamma, k).B for k in range(0, 24)]
    assert Bs == sorted(Bs) and Bs[-1] > 100
    for k in range(2, 24):
        ctx = shift_context(gamma, k, SIGMA)
        fk = ctx.first_kind
        assert gcd3(*fk.A, fk.B) == 1
        if ctx.branch is Branch.DIRICHLET:
            d = ctx.dirichlet
            assert d.b**2 * fk.B <= 4**k
            assert gcd3(*d.a, d.b) == 1


def test_search_beyond_validity_rejected(gamma):
    with pytest.raises(ValidityError, match="exceeds validity"):
        first_kind(gamma, 60)


def test_manual_context():
    ctx = manual_context(3, 2, (1, 1))
    assert ctx.modulus == 2 and ctx.offset == (1, 1)
