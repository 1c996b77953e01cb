import math
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from khinlab.errors import ValidityError
from khinlab.exactnum import FAMILIES, Vec2Q, rational_point, surrogate_family
from khinlab.measure import (
    arc_overlap, interval_union_intersection_1d, measure_of, measure_single, overlap_bruteforce,
    overlap_fast, pair_geometry, union_measure,
)
from khinlab.shiftred import ApproxFunction, SquareFamily, square_family

S = Fraction(2, 3)
ORIGIN = rational_point(Fraction(0), Fraction(0))
FAM = {name: surrogate_family(name) for name in FAMILIES}


def key(o):
    return o.measure, o.pair_count, o.value_count


def test_pair_geometry_examples():
    psi = ApproxFunction({6: Fraction(1, 4), 4: Fraction(1, 8), 7: Fraction(1, 8),
                          3: Fraction(1, 8)})
    g = pair_geometry(6, 4, psi, ORIGIN)
    assert (g.g, g.Delta, g.delta, g.D) == (2, Fraction(1, 12), Fraction(1, 16), 1)
    g = pair_geometry(7, 3, psi, ORIGIN)
    assert (g.g, g.h, g.D) == (1, 4, Fraction(7, 4))
    tie = pair_geometry(8, 4, ApproxFunction({8: Fraction(1, 4), 4: Fraction(1, 8)}), ORIGIN)
    assert tie.bullet == "l"
    with pytest.raises(ValidityError):
        pair_geometry(3, 7, psi, ORIGIN)


def test_single_measures():
    psi = ApproxFunction({5: Fraction(1, 5), 6: Fraction(1, 2)})
    assert measure_single(square_family(5, psi, ORIGIN, S, False)) == Fraction(4, 25)
    assert measure_single(square_family(6, psi, ORIGIN, S, True)) == Fraction(2, 3)
    assert measure_of(6, psi, ORIGIN, S, True) == Fraction(2, 3)
    assert measure_of(5, psi, FAM["liouville"], S, False) == Fraction(4, 25)


def test_bruteforce_examples():
    psi = ApproxFunction({2: Fraction(1, 4), 1: Fraction(1, 4)})
    a = square_family(2, psi, ORIGIN, S, False)
    b = square_family(1, psi, ORIGIN, S, False)
    assert overlap_bruteforce(a, a).measure == measure_single(a)
    # 4 squares of side 1/4 against one of side 1/2 centred at the origin
    res = overlap_bruteforce(a, b)
    per_axis = interval_union_intersection_1d(2, 1, Fraction(1, 8), Fraction(1, 4), Fraction(0))
    assert res.measure == per_axis**2 == Fraction(1, 16)
    far = SquareFamily(3, Fraction(1, 20), (Vec2Q.of(0, 0),), False)
    other = SquareFamily(2, Fraction(1, 20), (Vec2Q.of(Fraction(1, 2), 0),), False)
    assert overlap_bruteforce(far, other).measure == 0


def test_arc_overlap():
    assert arc_overlap(Fraction(0), Fraction(1, 10), Fraction(19, 20), Fraction(1, 10)) == Fraction(3, 20)
    assert arc_overlap(Fraction(0), Fraction(1, 10), Fraction(1, 2), Fraction(1, 10)) == 0


pairs = st.integers(2, 40).flatmap(lambda q: st.tuples(st.just(q), st.integers(1, q - 1)))
psis = st.builds(lambda k, t: (1 + Fraction(t, 64)) / 2**k, st.integers(2, 9), st.integers(0, 63))


@given(pairs, psis, psis, st.sampled_from(FAMILIES), st.booleans())
def test_fast_matches_oracle(qr, pq, pr, fam, primed):
    q, r = qr
    gamma = FAM[fam]
    psi = ApproxFunction({q: pq, r: pr})
    oracle = overlap_bruteforce(square_family(q, psi, gamma, S, primed),
                                square_family(r, psi, gamma, S, primed))
    assert key(overlap_fast(q, r, psi, gamma, S, primed)) == key(oracle)
    if primed:
        assert key(overlap_fast(q, r, psi, gamma, S, True, method="moebius")) == key(oracle)
        assert key(overlap_fast(q, r, psi, gamma, S, True, method="sweep")) == key(oracle)
    else:
        axes = [interval_union_intersection_1d(q, r, pq / q, pr / r, c) for c in gamma.value]
        assert oracle.measure == axes[0] * axes[1]
    geo = oracle.geometry or pair_geometry(q, r, psi, gamma, S)
    vc = oracle.value_count
    assert oracle.measure <= geo.delta**2 * geo.g**2 * vc
    assert vc <= (2 * math.ceil(geo.D) + 1) ** 2


def test_value_box_bound_consecutive_moduli():
    gamma = FAM["quad-pair"]
    for r in range(1, 30):
        psi = ApproxFunction({r + 1: Fraction(1, 3), r: Fraction(1, 5)})
        res = overlap_fast(r + 1, r, psi, gamma, S, primed=False)
        assert res.value_count <= (2 * res.geometry.D + 1) ** 2


def test_sweep_windows_wider_than_period():
    psi = ApproxFunction({2: Fraction(369, 4096), 1: Fraction(367, 1024)})
    gamma = FAM["liouville"]
    oracle = overlap_bruteforce(square_family(2, psi, gamma, S, True),
                                square_family(1, psi, gamma, S, True))
    assert key(overlap_fast(2, 1, psi, gamma, S, True, method="sweep")) == key(oracle)


def test_union_examples():
    psi = ApproxFunction({2: Fraction(1, 4), 3: Fraction(1, 4)})
    f2 = square_family(2, psi, ORIGIN, S, False)
    f3 = square_family(3, psi, ORIGIN, S, False)
    assert union_measure([f2]) == measure_single(f2)
    inter = overlap_bruteforce(f3, f2).measure
    assert inter > 0
    assert union_measure([f2, f3]) == measure_single(f2) + measure_single(f3) - inter
    a = SquareFamily(2, Fraction(1, 10), (Vec2Q.of(0, 0),), False)
    b = SquareFamily(2, Fraction(1, 10), (Vec2Q.of(Fraction(1, 2), Fraction(1, 2)),), False)
    assert union_measure([a, b]) == measure_single(a) + measure_single(b)


@given(st.lists(st.tuples(st.integers(1, 12), psis), min_size=1, max_size=4,
                unique_by=lambda t: t[0]), st.sampled_from(FAMILIES))
def test_union_subadditive(spec, fam):
    gamma = FAM[fam]
    psi = ApproxFunction(dict(spec))
    fams = [square_family(q, psi, gamma, S, False) for q, _ in spec]
    singles = sum(measure_single(f) for f in fams)
    union = union_measure(fams)
    assert union <= singles
    qs = sorted(q for q, _ in spec)
    any_overlap = any(overlap_fast(q, r, psi, gamma, S, False).measure
                      for i, q in enumerate(qs) for r in qs[:i])
    assert (union == singles) == (not any_overlap)
