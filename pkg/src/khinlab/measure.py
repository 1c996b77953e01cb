"""Exact Lebesgue measures of square families on the torus.

Squares are open, side ``2 psi(q)/q``, centred at ``(u + gamma)/q mod 1``.
Within one family the squares are pairwise disjoint, so the measure of
``E_q* ∩ E_r*`` is the sum of the pairwise intersection areas.

Three routes compute that sum:

* :func:`overlap_bruteforce` looks at every center pair (oracle).
* :func:`overlap_fast` with ``method="lattice"`` (unprimed) uses that the
  center offset is ``c(u, v) = q'(v + gamma) - r'(u + gamma)``, a point of
  ``h gamma + Z^2`` taken mod ``lcm(q, r)``, each class hit by ``gcd(q, r)^2``
  pairs.
* ``method="sweep"`` (primed) sorts the columns of S_q and S_r and walks them
  with two pointers; ``method="moebius"`` (primed, large q) expands the
  coprimality indicator over squarefree divisors so that each axis factors.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .approx import first_kind
from .errors import BudgetExceeded, ValidityError, check
from .exactnum import IrrationalSurrogate
from .shiftred import (
    ApproxFunction,
    SquareFamily,
    cardinality_formula,
    context_for,
    pi_q,
    prime_factors,
    residue_set,
    squarefree_divisors,
)

UNION_BUDGET = 5_000_000
SWEEP_LIMIT = 400


@dataclass(frozen=True)
class PairGeometry:
    q: int
    r: int
    g: int
    qp: int
    rp: int
    h: int
    Delta: Fraction
    delta: Fraction
    D: Fraction
    bullet: str  # "k" or "l"
    level: int  # the dyadic level the bullet refers to
    k: int
    l: int
    Dhat: Fraction

    @property
    def lcm(self) -> int:
        return self.g * self.qp * self.rp


@dataclass(frozen=True)
class OverlapResult:
    measure: Fraction
    pair_count: int
    value_count: Optional[int]
    geometry: Optional[PairGeometry]


def pair_geometry(q: int, r: int, psi: ApproxFunction, gamma: IrrationalSurrogate,
                  sigma=Fraction(2, 3)) -> PairGeometry:
    if not r < q:
        raise ValidityError(f"pair geometry needs r < q, got q={q}, r={r}")
    pq, pr = psi(q), psi(r)
    eq, er = 2 * pq / q, 2 * pr / r
    g = math.gcd(q, r)
    Delta, delta = max(eq, er), min(eq, er)
    D = Delta * q * r / g
    k, l = psi.level(q), psi.level(r)
    bullet, level = ("k", k) if pq / q > pr / r else ("l", l)
    h = (q - r) // g
    fk = first_kind(gamma, level)
    Dhat = max(D, h * fk.error)
    return PairGeometry(q, r, g, q // g, r // g, h, Delta, delta, D, bullet, level, k, l, Dhat)


def measure_single(fam: SquareFamily) -> Fraction:
    """|centers| (2 radius)^2; exact because the squares are disjoint."""
    return len(fam.centers) * (2 * fam.radius) ** 2


def measure_of(q: int, psi: ApproxFunction, gamma: IrrationalSurrogate, sigma, primed: bool) -> Fraction:
    """lambda(E_q') = 4 (psi/q)^2 |S_q| (or 4 psi^2 unprimed) without building squares."""
    if not primed:
        return 4 * psi(q) ** 2
    count = cardinality_formula(q, context_for(q, psi, gamma, sigma))
    return 4 * (psi(q) / q) ** 2 * count


# -- brute force ------------------------------------------------------------

def _circle_pieces(center: Fraction, w: Fraction) -> list[tuple[Fraction, Fraction]]:
    """The open arc (center - w, center + w) mod 1 as sub-intervals of [0, 1]."""
    lo = center - w
    hi = center + w
    shift = math.floor(lo)
    lo, hi = lo - shift, hi - shift
    if hi <= 1:
        return [(lo, hi)]
    return [(lo, Fraction(1)), (Fraction(0), hi - 1)]


def arc_overlap(ca: Fraction, wa: Fraction, cb: Fraction, wb: Fraction) -> Fraction:
    """Length of the intersection of two arcs, by explicit interval splitting."""
    total = Fraction(0)
    for a0, a1 in _circle_pieces(ca, wa):
        for b0, b1 in _circle_pieces(cb, wb):
            total += max(Fraction(0), min(a1, b1) - max(a0, b0))
    return total


def _int_arc_pieces(c: int, w: int, period: int) -> list[tuple[int, int]]:
    lo = (c - w) % period
    hi = lo + 2 * w
    if hi <= period:
        return [(lo, hi)]
    return [(lo, period), (0, hi - period)]


def _int_arc_overlap(a: int, wa: int, b: int, wb: int, period: int) -> int:
    total = 0
    for a0, a1 in _int_arc_pieces(a, wa, period):
        for b0, b1 in _int_arc_pieces(b, wb, period):
            total += max(0, min(a1, b1) - max(a0, b0))
    return total


def _coordinate_tables(xa: list[int], xb: list[int], wa: int, wb: int, period: int):
    """Per-axis lookup over all pairs of distinct coordinates (integers over
    ``period``). Returns a table holding the offset-class id of each
    coordinate pair closer than Delta (else -1), and the overlap length of
    every offset class, each computed by explicit interval splitting."""
    Delta = 2 * max(wa, wb)
    offset_id: dict[int, int] = {}
    lengths: list[int] = []
    table = np.full((len(xa), len(xb)), -1, dtype=np.int16 if len(xa) * len(xb) < 32000 else np.int32)
    for i, a in enumerate(xa):
        row = table[i]
        for j, b in enumerate(xb):
            diff = (a - b) % period
            if min(diff, period - diff) >= Delta:
                continue
            length = _int_arc_overlap(a, wa, b, wb, period)
            oid = offset_id.get(diff)
            if oid is None:
                oid = offset_id[diff] = len(lengths)
                lengths.append(length)
            else:
                check(lengths[oid] == length, "overlap not a function of the offset", diff=diff)
            row[j] = oid
    return table, lengths


def overlap_bruteforce(famA: SquareFamily, famB: SquareFamily, chunk: int = 512) -> OverlapResult:
    """Exact measure of the intersection of two square families, examining
    every center pair. Also counts pairs at max-norm torus distance < Delta
    and the number of distinct center offsets among them."""
    dens = {famA.radius.denominator, famB.radius.denominator}
    for f in (famA, famB):
        dens.update(c.x.denominator for c in f.centers)
        dens.update(c.y.denominator for c in f.centers)
    period = math.lcm(*dens)
    wa, wb = int(famA.radius * period), int(famB.radius * period)

    def scaled(x: Fraction) -> int:
        return x.numerator * (period // x.denominator)

    tables, lengths, idx_a, idx_b = [], [], [], []
    for axis in range(2):
        ca = [scaled(c.y if axis else c.x) for c in famA.centers]
        cb = [scaled(c.y if axis else c.x) for c in famB.centers]
        xa, xb = sorted(set(ca)), sorted(set(cb))
        pa = {x: i for i, x in enumerate(xa)}
        pb = {x: i for i, x in enumerate(xb)}
        idx_a.append(np.array([pa[x] for x in ca], dtype=np.int64))
        idx_b.append(np.array([pb[x] for x in cb], dtype=np.int64))
        t, ln = _coordinate_tables(xa, xb, wa, wb, period)
        tables.append(t)
        lengths.append(ln)
    tx, ty = tables
    ny = max(1, len(lengths[1]))
    keys = []
    bx, by = idx_b
    for start in range(0, len(famA.centers), chunk):
        X = tx[idx_a[0][start : start + chunk, None], bx]
        ii, jj = np.nonzero(X >= 0)  # axis 2 only matters where axis 1 is close
        Y = ty[idx_a[1][start + ii], by[jj]]
        close = Y >= 0
        if close.any():
            keys.append(X[ii, jj][close].astype(np.int64) * ny + Y[close])
    if not keys:
        return OverlapResult(Fraction(0), 0, 0, None)
    classes, counts = np.unique(np.concatenate(keys), return_counts=True)
    num = 0
    for key, cnt in zip(classes.tolist(), counts.tolist()):
        num += cnt * lengths[0][key // ny] * lengths[1][key % ny]
    return OverlapResult(Fraction(num, period * period), int(counts.sum()), len(classes), None)


# -- fast paths -------------------------------------------------------------

class _Scaled:
    """Integer representation of the pair's geometry over a common denominator."""

    def __init__(self, geo: PairGeometry, psi: ApproxFunction, gamma: IrrationalSurrogate):
        q, r = geo.q, geo.r
        wq, wr = psi(q) / q, psi(r) / r
        L = geo.lcm
        G = gamma.den
        # offsets c/L with c = n + h gamma_i  ->  numerator (n G + h P_i) over L G
        den = math.lcm(L * G, wq.denominator, wr.denominator)
        self.den = den
        self.unit = den // (L * G)  # scale from (L G)-units to den-units
        self.L, self.G = L, G
        self.wsum = int((wq + wr) * den)
        self.wmin2 = int(2 * min(wq, wr) * den)
        self.Delta = int(geo.Delta * den) if (geo.Delta * den).denominator == 1 else None
        self.Delta_frac = geo.Delta
        self.hP = [geo.h * p for p in gamma.num]

    def dist(self, n: int, axis: int) -> int:
        """Torus distance of (n + h gamma_axis)/L, in den-units."""
        LG = self.L * self.G
        x = (n * self.G + self.hP[axis]) % LG
        return min(x, LG - x) * self.unit

    def overlap(self, dist: int) -> int:
        """Overlap length of two arcs whose centers are ``dist`` apart; the far
        wrap image (at den - dist) only meets when the half-widths exceed 1/2.
        Both arcs are at most one period long, so the two terms never double count."""
        near = max(0, min(self.wsum - dist, self.wmin2))
        return near + max(0, min(self.wsum - (self.den - dist), self.wmin2))

    def near(self, dist: int) -> bool:
        return Fraction(dist, self.den) < self.Delta_frac if self.Delta is None else dist < self.Delta


def _near_classes(geo: PairGeometry, sc: _Scaled, axis: int) -> dict[int, int]:
    """Classes n mod L with torus distance of (n + h gamma)/L below Delta,
    mapped to their distance (den-units)."""
    hg = Fraction(sc.hP[axis], sc.G)
    lo = math.floor(-geo.D - hg) + 1
    hi = math.ceil(geo.D - hg) - 1
    out: dict[int, int] = {}
    if hi - lo + 1 >= sc.L:
        candidates = range(sc.L)
    else:
        candidates = range(lo, hi + 1)
    for n in candidates:
        cls = n % sc.L
        if cls in out:
            continue
        d = sc.dist(cls, axis)
        if sc.near(d):
            out[cls] = d
    return out


def _realizing_pairs(n: int, geo: PairGeometry) -> list[tuple[int, int]]:
    """All (u, v) in Z_q x Z_r with q' v - r' u = n (mod lcm)."""
    qp, rp, g = geo.qp, geo.rp, geo.g
    u0 = (-n * pow(rp, -1, qp)) % qp if qp > 1 else 0
    out = []
    for t in range(g):
        u = u0 + qp * t
        v = ((n + rp * u) // qp) % geo.r
        out.append((u, v))
    return out


def _overlap_lattice(geo, psi, gamma) -> OverlapResult:
    sc = _Scaled(geo, psi, gamma)
    sums, counts = [], []
    for axis in range(2):
        cls = _near_classes(geo, sc, axis)
        sums.append(sum(sc.overlap(d) for d in cls.values()))
        counts.append(len(cls))
    g2 = geo.g**2
    measure = Fraction(g2 * sums[0] * sums[1], sc.den**2)
    value_count = counts[0] * counts[1]
    return OverlapResult(measure, g2 * value_count, value_count, geo)


def _sorted_window(keys: list[int], period: int, lo: int, hi: int) -> list[int]:
    """Indices i with keys[i] in the open window (lo, hi) taken mod period;
    keys sorted ascending in [0, period). Each index is reported once, even
    when the window is wider than the period."""
    out: dict[int, None] = {}
    for shift in (-period, 0, period):
        a = bisect.bisect_right(keys, lo - shift)
        b = bisect.bisect_left(keys, hi - shift)
        out.update(dict.fromkeys(range(a, b)))
    return list(out)


def _columns(q: int, mask: np.ndarray) -> dict[int, list[int]]:
    return {u1: np.nonzero(mask[u1])[0].tolist() for u1 in range(q) if mask[u1].any()}


def _overlap_sweep(geo, psi, gamma, sigma) -> OverlapResult:
    q, r = geo.q, geo.r
    Sq = residue_set(q, context_for(q, psi, gamma, sigma))
    Sr = residue_set(r, context_for(r, psi, gamma, sigma))
    sc = _Scaled(geo, psi, gamma)
    den, G = sc.den, gamma.den
    P = gamma.num
    period = den
    # coordinate (u + gamma_i)/q in den-units, reduced mod 1
    sq_unit, sr_unit = den // (q * G), den // (r * G)

    def coord_q(u, axis):
        return ((u * G + P[axis]) * sq_unit) % period

    def coord_r(v, axis):
        return ((v * G + P[axis]) * sr_unit) % period

    cols_q = _columns(q, Sq.mask)
    cols_r = _columns(r, Sr.mask)
    # Delta window; squares with distance >= Delta cannot be near
    Dl = geo.Delta * den
    lo_off = math.floor(Dl) if Dl.denominator == 1 else math.floor(Dl) + 1  # exclusive bound
    rx = sorted((coord_r(v1, 0), v1) for v1 in cols_r)
    rx_keys = [k for k, _ in rx]
    ycache_r = {}
    measure_num = 0
    pair_count = 0
    classes = set()
    L = geo.lcm
    for u1, ucol in cols_q.items():
        x = coord_q(u1, 0)
        for i in _sorted_window(rx_keys, period, x - lo_off, x + lo_off):
            v1 = rx[i][1]
            dx = (x - rx[i][0]) % period
            dx = min(dx, period - dx)
            if not sc.near(dx):
                continue
            ovx = sc.overlap(dx)
            if v1 not in ycache_r:
                ys = sorted((coord_r(v2, 1), v2) for v2 in cols_r[v1])
                ycache_r[v1] = ([k for k, _ in ys], ys)
            ykeys, ys = ycache_r[v1]
            for u2 in ucol:
                y = coord_q(u2, 1)
                for j in _sorted_window(ykeys, period, y - lo_off, y + lo_off):
                    dy = (y - ys[j][0]) % period
                    dy = min(dy, period - dy)
                    if not sc.near(dy):
                        continue
                    v2 = ys[j][1]
                    pair_count += 1
                    measure_num += ovx * sc.overlap(dy)
                    classes.add(((geo.qp * v1 - geo.rp * u1) % L, (geo.qp * v2 - geo.rp * u2) % L))
    return OverlapResult(Fraction(measure_num, den**2), pair_count, len(classes), geo)


def _overlap_moebius(geo, psi, gamma, sigma, want_values: bool) -> OverlapResult:
    q, r = geo.q, geo.r
    cq = context_for(q, psi, gamma, sigma)
    cr = context_for(r, psi, gamma, sigma)
    Mq, mq = cq.modulus, cq.offset
    Mr, mr = cr.modulus, cr.offset
    piq, pir = pi_q(q, cq), pi_q(r, cr)
    dq = squarefree_divisors(prime_factors(piq))
    dr = squarefree_divisors(prime_factors(pir))
    sc = _Scaled(geo, psi, gamma)
    # 1[u in S_q] = sum_{d | pi_q} mu(d) 1[d | Mq u1 + m1] 1[d | Mq u2 + m2], so the
    # double sum over (u, v) factors per axis once (d, e) are fixed. Per axis,
    # realizing pairs are aggregated by (gcd(Mq u + m, pi_q), gcd(Mr v + m', pi_r)).
    F, N, per_axis_pairs = [], [], []
    for axis in range(2):
        cls = _near_classes(geo, sc, axis)
        weight: dict[tuple[int, int], list[int]] = {}
        rows = []
        for n, dist in cls.items():
            ov = sc.overlap(dist)
            for u, v in _realizing_pairs(n, geo):
                key = (math.gcd(Mq * u + mq[axis], piq), math.gcd(Mr * v + mr[axis], pir))
                w = weight.setdefault(key, [0, 0])
                w[0] += ov
                w[1] += 1
                if want_values:
                    rows.append((n, u, v))
        Fa, Na = {}, {}
        for d, _ in dq:
            for e, _ in dr:
                f = c = 0
                for (x, y), (wo, wc) in weight.items():
                    if x % d == 0 and y % e == 0:
                        f += wo
                        c += wc
                Fa[d, e] = f
                Na[d, e] = c
        F.append(Fa)
        N.append(Na)
        per_axis_pairs.append(rows)
    num = 0
    pairs = 0
    for d, mud in dq:
        for e, mue in dr:
            num += mud * mue * F[0][d, e] * F[1][d, e]
            pairs += mud * mue * N[0][d, e] * N[1][d, e]
    value_count = None
    if want_values:
        value_count = _primed_value_count(geo, per_axis_pairs, cq, cr)
    return OverlapResult(Fraction(num, sc.den**2), pairs, value_count, geo)


def _primed_value_count(geo, per_axis_pairs, cq, cr) -> int:
    by_class = []
    for rows in per_axis_pairs:
        groups: dict[int, list] = {}
        for n, u, v in rows:
            groups.setdefault(n, []).append((u, v))
        by_class.append(groups)
    Mq, mq, Mr, mr = cq.modulus, cq.offset, cr.modulus, cr.offset
    Mqq, Mrr = Mq * geo.q, Mr * geo.r
    count = 0
    for n1, p1 in by_class[0].items():
        for n2, p2 in by_class[1].items():
            if any(
                math.gcd(math.gcd(Mq * u1 + mq[0], Mq * u2 + mq[1]), Mqq) == 1
                and math.gcd(math.gcd(Mr * v1 + mr[0], Mr * v2 + mr[1]), Mrr) == 1
                for u1, v1 in p1
                for u2, v2 in p2
            ):
                count += 1
    return count


def overlap_fast(q: int, r: int, psi: ApproxFunction, gamma: IrrationalSurrogate,
                 sigma=Fraction(2, 3), primed: bool = True, method: str = "auto",
                 want_values: bool = True) -> OverlapResult:
    """lambda(E_q* ∩ E_r*) together with pair and value counts, r < q.

    ``method`` is ``lattice`` (unprimed only), ``sweep`` or ``moebius``
    (primed); ``auto`` picks lattice / sweep / moebius by size.
    """
    gamma.require(q, "modulus q")
    geo = pair_geometry(q, r, psi, gamma, sigma)
    if not primed:
        if method not in ("auto", "lattice"):
            raise ValidityError(f"method {method!r} is for primed families")
        return _overlap_lattice(geo, psi, gamma)
    if method == "auto":
        method = "sweep" if q <= SWEEP_LIMIT and want_values else "moebius"
    if method == "sweep":
        return _overlap_sweep(geo, psi, gamma, sigma)
    if method == "moebius":
        return _overlap_moebius(geo, psi, gamma, sigma, want_values)
    raise ValidityError(f"unknown overlap method {method!r}")


# -- unions -----------------------------------------------------------------

def interval_union_intersection_1d(q: int, r: int, wq: Fraction, wr: Fraction,
                                   shift: Fraction) -> Fraction:
    """Measure of (U_u arc((u+shift)/q, wq)) ∩ (U_v arc((v+shift)/r, wr)) on the circle,
    by a merge over sorted pieces."""
    def pieces(n, w):
        out = []
        for u in range(n):
            out.extend(_circle_pieces((u + shift) / n, w))
        return sorted(out)

    a, b = pieces(q, wq), pieces(r, wr)
    i = j = 0
    total = Fraction(0)
    while i < len(a) and j < len(b):
        lo = max(a[i][0], b[j][0])
        hi = min(a[i][1], b[j][1])
        if hi > lo:
            total += hi - lo
        if a[i][1] < b[j][1]:
            i += 1
        else:
            j += 1
    return total


def _union_length(intervals: list[tuple[int, int]]) -> int:
    total = 0
    cur_lo = cur_hi = None
    for lo, hi in sorted(intervals):
        if cur_hi is None or lo > cur_hi:
            if cur_hi is not None:
                total += cur_hi - cur_lo
            cur_lo, cur_hi = lo, hi
        elif hi > cur_hi:
            cur_hi = hi
    if cur_hi is not None:
        total += cur_hi - cur_lo
    return total


def union_measure(fams: Sequence[SquareFamily], budget: int = UNION_BUDGET) -> Fraction:
    """Exact area of the union of all squares on the torus, by a sweep over
    x-breakpoints with a 1-D union of the active y-intervals on each slab."""
    total_squares = sum(len(f.centers) for f in fams)
    if total_squares > budget:
        raise BudgetExceeded(f"union of {total_squares} squares exceeds budget {budget}")
    den = 1
    for f in fams:
        den = math.lcm(den, (2 * f.radius).denominator)
        for c in f.centers:
            den = math.lcm(den, c.x.denominator, c.y.denominator, f.radius.denominator)
    rects = []  # integer rectangles in [0, den)^2 after wrap splitting
    for f in fams:
        w = int(f.radius * den)
        for c in f.centers:
            xs = _split_int(int(c.x * den), w, den)
            ys = _split_int(int(c.y * den), w, den)
            rects.extend((x0, x1, y0, y1) for x0, x1 in xs for y0, y1 in ys)
    events = sorted({e for x0, x1, _, _ in rects for e in (x0, x1)})
    starts: dict[int, list] = {}
    for rc in rects:
        starts.setdefault(rc[0], []).append(rc)
    active: list = []
    area = 0
    for x_lo, x_hi in zip(events, events[1:]):
        active = [rc for rc in active if rc[1] > x_lo] + starts.get(x_lo, [])
        if active:
            area += (x_hi - x_lo) * _union_length([(y0, y1) for _, _, y0, y1 in active])
    return Fraction(area, den * den)


def _split_int(c: int, w: int, den: int) -> list[tuple[int, int]]:
    lo, hi = c - w, c + w
    if 2 * w >= den:
        return [(0, den)]
    if lo < 0:
        return [(lo + den, den), (0, hi)]
    if hi > den:
        return [(lo, den), (0, hi - den)]
    return [(lo, hi)]
