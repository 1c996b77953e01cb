from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from khinlab.bohr import (
    BohrQuery, CaseContext, adhoc_bound_eval, adhoc_lhs_dyadic, bohr_count,
    bohr_count_decomposed, bound_terms, case_context, depth_table, harness_N, indicator_C,
    indicator_C_threshold, iroot, once_around_count, partial_orbit_count, power_bracket,
    power_less, rational_orbit_count, triangle_transfer,
)
from khinlab.errors import ValidityError
from khinlab.exactnum import FAMILIES, Vec2Q, gcd3, surrogate_family

ZERO = Vec2Q.of(0, 0)
FAM = {name: surrogate_family(name) for name in FAMILIES}
THIRDS = Vec2Q.of(Fraction(1, 3), Fraction(2, 3))


def test_bohr_count_examples():
    assert bohr_count(BohrQuery(THIRDS, 3, Fraction(1, 5))) == 1
    assert bohr_count(BohrQuery(THIRDS, 0, Fraction(1, 5))) == 0
    assert bohr_count(BohrQuery(FAM["quad-pair"], 50, Fraction(3, 5))) == 50


def test_rational_orbit_examples():
    assert rational_orbit_count((1, 2), 3, ZERO, Fraction(1, 5)) == 1
    beta = Vec2Q.of(Fraction(1, 7), Fraction(1, 9))
    assert rational_orbit_count((0, 0), 1, beta, Fraction(1, 5)) == 1
    assert rational_orbit_count((0, 0), 1, beta, Fraction(1, 8)) == 0
    with pytest.raises(ValidityError):
        rational_orbit_count((2, 4), 6, ZERO, Fraction(1, 5))


def test_partial_orbit_examples():
    assert partial_orbit_count((1, 1), 5, 4, Fraction(1, 10)) == 0
    # N = b includes h = b, i.e. the origin
    assert partial_orbit_count((1, 1), 5, 5, Fraction(1, 10)) == 1
    assert partial_orbit_count((1, 2), 7, 14, Fraction(1, 2) + Fraction(1, 100)) == 14


def test_once_around_examples():
    alpha = Vec2Q.of(Fraction(3, 10), Fraction(9, 20))
    assert once_around_count(alpha, ZERO, Fraction(1, 20)) == 0
    assert once_around_count(alpha, -alpha, Fraction(1, 1000)) >= 1
    a = Vec2Q.of(Fraction(1, 7), Fraction(2, 7))
    assert once_around_count(a, ZERO, Fraction(3, 5)) == 3  # 1 <= m < 7/2
    with pytest.raises(ValidityError):
        once_around_count(Vec2Q.of(1, 2), ZERO, Fraction(1, 4))


@given(st.integers(1, 60), st.integers(0, 59), st.integers(0, 59), st.integers(0, 8),
       st.integers(0, 7), st.integers(0, 7))
def test_full_orbit_bound(b, a1, a2, j, i1, i2):
    a = (a1 % b, a2 % b)
    if gcd3(*a, b) != 1:
        a = (1, a[1])
    eps = Fraction(1, 2**j)
    n = rational_orbit_count(a, b, Vec2Q.of(Fraction(i1, 8), Fraction(i2, 8)), eps)
    assert n <= 8 * eps * b + 1


@given(st.integers(1, 400), st.integers(1, 400), st.integers(1, 400), st.integers(1, 200))
def test_bohr_monotone(n1, n2, e1, e2):
    g = FAM["quad-pair"]
    N1, N2 = sorted((n1, n2))
    E1, E2 = sorted((Fraction(e1, 401), Fraction(e2, 401)))
    assert bohr_count(BohrQuery(g, N1, E1)) <= bohr_count(BohrQuery(g, N2, E1))
    assert bohr_count(BohrQuery(g, N1, E1)) <= bohr_count(BohrQuery(g, N1, E2))


@given(st.sampled_from(FAMILIES), st.integers(1, 300), st.integers(1, 40), st.integers(1, 50))
def test_decomposition_identity(fam, N, b, e):
    g = FAM[fam]
    eps = Fraction(e, 100)
    assert bohr_count_decomposed(g, N, eps, b) == bohr_count(BohrQuery(g, N, eps))


@pytest.mark.parametrize("fam", FAMILIES)
@pytest.mark.parametrize("level, j", [(6, 3), (9, 4), (12, 6), (15, 8)])
def test_triangle_transfer(fam, level, j):
    contained, left, right = triangle_transfer(FAM[fam], level, 3000, Fraction(1, 2**j))
    assert contained and left <= right


def test_indicator_examples():
    def ctx(**kw):
        base = dict(level=4, B=1, b=None, sigma=Fraction(2, 3), tau=Fraction(5, 6),
                    rho=Fraction(1, 6), D=Fraction(1, 2), Dhat=Fraction(1, 2), h=1, norm_b=None)
        base.update(kw)
        return CaseContext(**base)

    assert indicator_C(ctx())  # B = 1, 2 Dhat >= 1
    # B = 50 > max(2^4 D, 2^(8/3)), h ||b gamma|| = 3/5 > 1/2
    assert indicator_C(ctx(B=50, b=3, D=Fraction(1, 64), Dhat=Fraction(1, 64), h=3,
                           norm_b=Fraction(1, 5)))
    # B = 5 <= 2^(8/3), 2 Dhat < 1/5
    assert not indicator_C(ctx(B=5, D=Fraction(1, 64), Dhat=Fraction(1, 64)))
    with pytest.raises(ValidityError):
        indicator_C(ctx(B=50, D=Fraction(1, 64), Dhat=Fraction(1, 64)))
    with pytest.raises(ValidityError):
        ctx(rho=Fraction(1, 2))


@pytest.mark.parametrize("fam", FAMILIES)
@pytest.mark.parametrize("level", [4, 8, 12, 16, 20])
def test_indicator_is_threshold_in_h(fam, level):
    for D in (Fraction(1, 2**t) for t in range(1, 12, 2)):
        ctx = case_context(FAM[fam], level, D)
        h0 = indicator_C_threshold(ctx)
        values = [indicator_C(ctx.at(h)) for h in range(1, 400)]
        want = [h0 is not None and h >= h0 for h in range(1, 400)]
        assert values == want


@pytest.mark.parametrize("fam", FAMILIES)
def test_dyadic_lhs_matches_enumeration(fam):
    g = FAM[fam]
    table = depth_table(g, 5000)
    for level in (6, 10, 14):
        for j in (2, 4, 7):
            ctx = case_context(g, level, Fraction(2, 2**j))
            lhs, _ = adhoc_bound_eval(g, ctx, 2000, Fraction(2, 2**j))
            assert adhoc_lhs_dyadic(table, ctx, 2000, j) == lhs


def test_adhoc_examples():
    g = FAM["quad-sqrt2"]
    ctx = case_context(g, 6, Fraction(1, 4))
    lhs, _ = adhoc_bound_eval(g, ctx, 1, g.norm_multiple(1))  # ||gamma|| >= D
    assert lhs == 0
    terms = bound_terms(Fraction(1, 64), "k", 8, 1)
    assert terms.d_omega == (Fraction(1, 2), Fraction(1, 2))
    assert terms.ind_k  # (1/64)^(1/6) = 1/2 >= 1/8
    assert bound_terms(Fraction(1, 64), "l", 8, 1).total == (Fraction(1, 2), Fraction(1, 2))


@given(st.integers(1, 10**30), st.integers(1, 7))
def test_iroot(x, n):
    r = iroot(x, n)
    assert r**n <= x < (r + 1) ** n


@given(st.integers(1, 10**6), st.integers(1, 10**6), st.integers(1, 6), st.integers(1, 6))
def test_power_bracket(p, q, a, c):
    D, w = Fraction(min(p, q), max(p, q)), Fraction(a, c)
    lo, hi = power_bracket(D, w)
    assert lo <= hi and lo**c <= D**a <= hi**c
    assert hi - lo <= Fraction(1, 2**60)
    assert power_less(lo - Fraction(1, 2**70), D, w) or lo == 0


def test_harness_N():
    assert harness_N("k", 64, 16, 3, 8, 5) == 4 * 2**7
    assert harness_N("l", 64, 16, 3, 8, 5) == 2**5
