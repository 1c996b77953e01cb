"""Quasi-independence harness: dyadic block sums of pairwise overlaps, their
stratification by D(q, r), the second-moment ratio, the model problem over
supports in [T, 2T], and the convergence-side union bound.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .approx import first_kind_within, minimal_denominator
from .bohr import OMEGA, RHO, SIGMA, TAU, adhoc_lhs_dyadic, bound_terms, \
    case_context, depth_table, harness_N
from .errors import BudgetExceeded, ValidityError, check
from .exactnum import IrrationalSurrogate, Prng
from .measure import measure_of, overlap_fast, pair_geometry, union_measure
from .shiftred import ApproxFunction, square_family

PAIR_BUDGET = 200_000


def log_plus(x: Fraction) -> int:
    """max(1, log2 x) for x a power of two (exact)."""
    x = Fraction(x)
    if x.denominator != 1 or x.numerator & (x.numerator - 1):
        raise ValidityError(f"log+ is only evaluated at powers of two, got {x}")
    return max(1, x.numerator.bit_length() - 1)


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


@dataclass(frozen=True)
class BlockSpec:
    Q: int
    R: int
    psi: ApproxFunction
    gamma: IrrationalSurrogate
    sigma: Fraction = SIGMA
    primed: bool = True

    def __post_init__(self):
        if not (_is_power_of_two(self.Q) and _is_power_of_two(self.R) and self.R <= self.Q):
            raise ValidityError(f"blocks need dyadic bases R <= Q, got Q={self.Q}, R={self.R}")
        self.gamma.require(2 * self.Q, "block modulus")

    def pairs(self) -> list[tuple[int, int]]:
        return [(q, r) for q in self.psi.in_block(self.Q) for r in self.psi.in_block(self.R) if r < q]


@dataclass
class Strata:
    D0: list = field(default_factory=list)
    Dj: dict = field(default_factory=dict)  # j -> list of pairs
    F: list = field(default_factory=list)

    def counts(self) -> dict:
        out = {"D0": len(self.D0), "F": len(self.F)}
        out.update({j: len(v) for j, v in sorted(self.Dj.items())})
        return out

    def total(self) -> int:
        return len(self.D0) + len(self.F) + sum(len(v) for v in self.Dj.values())


def stratum_index(D: Fraction) -> int:
    """The j >= 1 with D in (2^-j, 2^-j+1], for 0 < D <= 1."""
    if not 0 < D <= 1:
        raise ValidityError(f"D = {D} outside (0, 1]")
    j = 1
    while D <= Fraction(1, 1 << j):
        j += 1
    return j


def stratify(spec: BlockSpec) -> Strata:
    st = Strata()
    for q, r in spec.pairs():
        D = pair_geometry(q, r, spec.psi, spec.gamma, spec.sigma).D
        if D > 1:
            st.D0.append((q, r))
        elif q % r == 0:
            st.F.append((q, r))
        else:
            st.Dj.setdefault(stratum_index(D), []).append((q, r))
    return st


@dataclass(frozen=True)
class BlockReport:
    Q: int
    R: int
    lhs: Fraction
    product_term: Fraction
    cross_term: Fraction
    strata_counts: dict
    f_sum: Fraction
    empirical_constant: Fraction
    sum_q: Fraction  # sum of lambda(E_q*) over the Q block
    sum_r: Fraction


def _single_sum(spec: BlockSpec, lo: int) -> Fraction:
    return sum((measure_of(q, spec.psi, spec.gamma, spec.sigma, spec.primed)
                for q in spec.psi.in_block(lo)), Fraction(0))


def pair_measure(spec: BlockSpec, q: int, r: int) -> Fraction:
    return overlap_fast(q, r, spec.psi, spec.gamma, spec.sigma, spec.primed,
                        want_values=False).measure


def block_sums(spec: BlockSpec, budget: int = PAIR_BUDGET) -> BlockReport:
    pairs = spec.pairs()
    if len(pairs) > budget:
        raise BudgetExceeded(f"block ({spec.Q}, {spec.R}) has {len(pairs)} pairs > {budget}")
    st = stratify(spec)
    check(st.total() == len(pairs), "strata do not partition the block", Q=spec.Q, R=spec.R)
    measures = {p: pair_measure(spec, *p) for p in pairs}
    lhs = sum(measures.values(), Fraction(0))
    f_sum = sum((measures[p] for p in st.F), Fraction(0))
    sq, sr = _single_sum(spec, spec.Q), _single_sum(spec, spec.R)
    product = sq * sr
    ratio = Fraction(spec.Q, spec.R)
    cross = Fraction(log_plus(ratio)) / ratio * (sq + sr)
    denom = product + cross
    const = lhs / denom if denom else Fraction(0)
    return BlockReport(spec.Q, spec.R, lhs, product, cross, st.counts(), f_sum, const, sq, sr)


def f_set_sum(spec: BlockSpec) -> Fraction:
    """Sum of lambda(E_q' ∩ E_r') over divisor pairs r | q with D <= 1."""
    return sum((pair_measure(spec, q, r) for q, r in stratify(spec).F), Fraction(0))


def f_set_constant(spec: BlockSpec, f_sum: Optional[Fraction] = None) -> Fraction:
    """f_sum / ((R/Q) sum_q lambda(E_q')), or 0 when the block is empty."""
    f_sum = f_set_sum(spec) if f_sum is None else f_sum
    base = Fraction(spec.R, spec.Q) * _single_sum(spec, spec.Q)
    return f_sum / base if base else Fraction(0)


def qia_ratio(psi: ApproxFunction, gamma: IrrationalSurrogate, sigma, U: int,
              primed: bool, budget: int = PAIR_BUDGET) -> Optional[Fraction]:
    """sum_{s,t <= 2^U} lambda(E_s* ∩ E_t*) / (sum_s lambda(E_s*))^2, diagonal
    included; None when the denominator vanishes."""
    qs = [q for q in psi.support if q <= 1 << U]
    if len(qs) * (len(qs) - 1) // 2 > budget:
        raise BudgetExceeded(f"{len(qs)} moduli exceed the pair budget {budget}")
    singles = {q: measure_of(q, psi, gamma, sigma, primed) for q in qs}
    total = sum(singles.values(), Fraction(0))
    if total == 0:
        return None
    off = Fraction(0)
    for i, q in enumerate(qs):
        for r in qs[:i]:
            off += overlap_fast(q, r, psi, gamma, sigma, primed, want_values=False).measure
    return (total + 2 * off) / total**2


# -- the Bohr-set bound over the block grid ---------------------------------

@dataclass(frozen=True)
class AdhocInstance:
    Q: int
    R: int
    j: int
    k: int
    l: int
    bullet: str
    N: int
    lhs: Fraction
    bound_lo: Fraction  # certified lower bound for the bound terms
    ratio_hi: Fraction  # certified upper bound for lhs / bound


def adhoc_instances(spec: BlockSpec, tau=TAU, rho=RHO, omega=OMEGA, C1=1, C2=1,
                    strata: Optional[Strata] = None) -> list[AdhocInstance]:
    """Evaluate the Bohr-set lemma at every distinct (j, k, l, bullet) arising
    from the D_j strata of the block pair: N from the block sizes, D = 2^(-j+1)."""
    st = stratify(spec) if strata is None else strata
    keys = set()
    for j, pairs in st.Dj.items():
        for q, r in pairs:
            geo = pair_geometry(q, r, spec.psi, spec.gamma, spec.sigma)
            keys.add((j, geo.k, geo.l, geo.bullet))
    out = []
    for j, k, l, bullet in sorted(keys):
        N = harness_N(bullet, spec.Q, spec.R, j, k, l)
        level = k if bullet == "k" else l
        D = Fraction(2, 1 << j)
        table = depth_table(spec.gamma, spec.gamma.validity_bound)
        ctx = case_context(spec.gamma, level, D, 1, spec.sigma, tau, rho)
        lhs = adhoc_lhs_dyadic(table, ctx, N, j)
        bt = bound_terms(D, bullet, spec.Q, spec.R, omega, C1, C2)
        lo, _ = bt.total
        out.append(AdhocInstance(spec.Q, spec.R, j, k, l, bullet, N, lhs, lo, lhs / lo))
    return out


# -- the model problem -------------------------------------------------------

class Variant(enum.Enum):
    PLAIN = "plain"
    SHIFT_B = "shiftB"
    SHIFT_b = "shiftb"


MODEL_T = 1 << 30


@dataclass(frozen=True)
class ModelSpec:
    M: int
    gamma: IrrationalSurrogate
    seed: int
    variant: Variant
    T: int = MODEL_T
    support_kind: str = "uniform"  # or "progression"
    sigma: Fraction = SIGMA
    rho: Fraction = RHO

    def __post_init__(self):
        if self.M < 2:
            raise ValidityError("the model problem needs M >= 2")


def model_support(spec: ModelSpec) -> list[int]:
    """M distinct points of [T, 2T]: uniform, or a progression G*[M, 2M] with
    G = T // M (an adversarial hook with many small ratios q/r)."""
    rng = Prng(spec.seed)
    if spec.support_kind == "uniform":
        return rng.sample(spec.T, 2 * spec.T, spec.M)
    if spec.support_kind == "progression":
        G = spec.T // spec.M
        return [G * n for n in rng.sample(spec.M, 2 * spec.M, spec.M)]
    raise ValidityError(f"unknown support kind {spec.support_kind!r}")


def _dirichlet_1d(gamma: IrrationalSurrogate, B: int) -> tuple[int, Fraction]:
    """Minimal 1 <= b < B with ||b gamma|| <= 1/B (first coordinate)."""
    den = gamma.den
    b = minimal_denominator(gamma, lambda n, d: gamma.dist_num(n, 0) * B <= den, stop=B - 1)
    check(b is not None, "no b < B with ||b gamma|| <= 1/B", B=B)
    return b, Fraction(gamma.dist_num(b, 0), den)


@dataclass(frozen=True)
class ModelReport:
    M: int
    seed: int
    variant: str
    support_kind: str
    value: Fraction
    B: int
    b: Optional[int]
    pairs_near: int  # ordered pairs with D <= 1/2


def _pow_gt(x: Fraction, y_base: int, y_exp: Fraction) -> bool:
    """Exact x > y_base^y_exp for positive x."""
    a, c = y_exp.numerator, y_exp.denominator
    return x**c > Fraction(y_base) ** a


def model_sum(spec: ModelSpec) -> ModelReport:
    """(1/M^2) sum_j 4^j #{q != r : D(q,r) <= 2^-j, ||h gamma|| < 2^-j} with
    h = (q - r)/gcd(q, r), psi = M^(-1/2), D = 2 psi max(q, r)/gcd(q, r), plus
    the variant's extra indicators."""
    M = spec.M
    gamma = spec.gamma
    qs = np.array(model_support(spec), dtype=np.int64)
    fk = first_kind_within(gamma, M)
    B = fk.B
    b = nb = None
    split = False
    if spec.variant is Variant.SHIFT_b:
        # B > M^(sigma/2)  <=>  B^(2c) > M^a  for sigma = a/c
        split = _pow_gt(Fraction(B), M, spec.sigma / 2)
        if split:
            b, nb = _dirichlet_1d(gamma, B)
    total = 0
    near = 0
    table = None
    # D <= 1/2  <=>  16 mx^2 <= M  <=>  mx <= isqrt(M // 16), mx = max(q, r)/gcd
    mx_limit = math.isqrt(M // 16)
    for i in range(len(qs)):
        g = np.gcd(qs[i], qs)
        mx = np.maximum(qs[i], qs) // g
        idx = np.nonzero((mx <= mx_limit) & (qs != qs[i]))[0]
        for jx in idx.tolist():
            gg = int(g[jx])
            h = abs(int(qs[i]) - int(qs[jx])) // gg
            m = int(mx[jx])
            near += 1
            # largest j with D <= 2^-j: 4 m^2 4^j <= M
            jD = 0
            while 4 * m * m * 4 ** (jD + 1) <= M:
                jD += 1
            if table is None or h > table.limit:
                table = depth_table(gamma, max(h, 64))
            depth = int(table.depth[h])  # ||h gamma|| < 2^-j  <=>  j <= depth
            for j in range(1, min(jD, depth) + 1):
                if spec.variant is Variant.SHIFT_B or (spec.variant is Variant.SHIFT_b and not split):
                    if (1 << (j - 1)) > B:
                        continue
                elif split:
                    # 2b > 2^(rho j), or (2b <= 2^(rho j) and 2^j < sqrt(M) ||b gamma||)
                    big_b = _pow_gt(Fraction(2 * b), 2, spec.rho * j)
                    if not big_b and not 4**j < M * nb * nb:
                        continue
                total += 4**j
    return ModelReport(M, spec.seed, spec.variant.value, spec.support_kind,
                       Fraction(total, M * M), B, b, near)


# -- convergence side --------------------------------------------------------

def convergence_tail(psi: ApproxFunction, gamma: IrrationalSurrogate, Q0: int, Q1: int,
                     sigma=SIGMA) -> tuple[Fraction, Fraction]:
    """(lambda(union of E_q, Q0 <= q <= Q1), sum of 4 psi(q)^2), exact."""
    qs = [q for q in psi.support if Q0 <= q <= Q1]
    fams = [square_family(q, psi, gamma, sigma, primed=False) for q in qs]
    union = union_measure(fams)
    bound = sum((4 * psi(q) ** 2 for q in qs), Fraction(0))
    check(union <= bound, "union exceeds the subadditive bound", Q0=Q0, Q1=Q1)
    return union, bound


def tail_integral_below(Q0: int, exponent, threshold) -> bool:
    """Exact test of 4/(2s-1) (Q0-1)^-(2s-1) < threshold, the integral bound for
    sum_{q >= Q0} 4 q^(-2s) (valid for s > 1/2, Q0 >= 2)."""
    s = Fraction(exponent)
    e = 2 * s - 1
    if e <= 0 or Q0 < 2:
        raise ValidityError("the integral bound needs exponent > 1/2 and Q0 >= 2")
    a, c = e.numerator, e.denominator
    lhs_c = (4 / e) ** c  # (4/e)^c < threshold^c (Q0-1)^a
    return lhs_c < Fraction(threshold) ** c * (Q0 - 1) ** a


def tail_integral_bound(Q0: int, exponent) -> tuple[Fraction, Fraction]:
    """Rational bracket for 4/(2s-1) (Q0-1)^-(2s-1)."""
    from .bohr import power_bracket

    s = Fraction(exponent)
    e = 2 * s - 1
    lo, hi = power_bracket(Fraction(1, Q0 - 1), e)
    return 4 / e * lo, 4 / e * hi
