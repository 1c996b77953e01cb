"""Verification suites behind ``lab verify``.

Each suite splits its work into picklable tasks, evaluates them through a
``map``-like callable (serial or a process pool; the order of results is the
order of tasks), and merges exactly.  A suite returns CSV rows plus one
:class:`Criterion` per acceptance check it covers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from fractions import Fraction
from functools import lru_cache
from statistics import median
from typing import Callable

import numpy as np

from .approx import manual_context, shift_context
from .bohr import (OMEGA, RHO, SIGMA, TAU, case_context, indicator_C, once_around_count,
                   rational_orbit_count)
from .errors import InvariantViolation, ValidityError
from .exactnum import FAMILIES, Prng, Vec2Q, gcd3, rational_point, surrogate_family, torus_norm
from .measure import (interval_union_intersection_1d, measure_of, overlap_bruteforce,
                      overlap_fast, pair_geometry)
from .qia import (BlockSpec, ModelSpec, Variant, adhoc_instances, block_sums,
                  convergence_tail, f_set_constant, model_sum, stratify, tail_integral_below)
from .shiftred import (ApproxFunction, box_count, box_count_crt, cardinality_formula,
                       psi_power_blocks, psi_power_law, psi_sparse_blocks, residue_set,
                       square_family)

Mapper = Callable[[Callable, list], list]


def serial_map(fn: Callable, tasks: list) -> list:
    return [fn(*t) for t in tasks]


@dataclass
class VerifyConfig:
    seed: int = 7
    families: tuple[str, ...] = FAMILIES
    sigma: Fraction = SIGMA
    tau: Fraction = TAU
    rho: Fraction = RHO
    omega: Fraction = OMEGA
    # residue sets
    q_max: int = 500
    y_steps: int = 8
    # overlaps
    pair_q_max: int = 120
    pairs: int = 200
    pair_k_max: int = 10
    # Bohr counts
    bohr_b_max: int = 200
    bohr_j_max: int = 8
    bohr_beta_steps: int = 8
    once_around: int = 1000
    # blocks
    block_lo: int = 6
    block_hi: int = 12
    ratio_max: int = 6
    per_block: int = 10
    links: int = 3
    power_exponent: Fraction = Fraction(3, 4)
    adhoc_U: int = 12
    # model problem
    model_M_lo: int = 4
    model_M_hi: int = 10
    trials: int = 20
    # convergence
    tail_Q0s: tuple[int, ...] = (4, 8, 16, 32)
    tail_far: int = 10**6
    tail_threshold: Fraction = Fraction(1, 10)
    # thresholds
    slope_max: Fraction = Fraction(1, 20)
    stability: Fraction = Fraction(2)

    def __post_init__(self):
        for f in fields(self):
            if f.type == "Fraction":
                setattr(self, f.name, Fraction(getattr(self, f.name)))
        s, t, r = self.sigma, self.tau, self.rho
        if not (0 < s < t < 1 and 0 < r < s / 2 and self.omega > 0):
            raise ValidityError(f"need 0 < sigma < tau < 1, 0 < rho < sigma/2, omega > 0; "
                                f"got {s}, {t}, {r}, {self.omega}")
        self.families = tuple(self.families)
        self.tail_Q0s = tuple(self.tail_Q0s)
        unknown = set(self.families) - set(FAMILIES)
        if unknown:
            raise ValidityError(f"unknown surrogate families {sorted(unknown)}")

    @classmethod
    def from_dict(cls, data: dict) -> VerifyConfig:
        names = {f.name for f in fields(cls)}
        extra = set(data) - names
        if extra:
            raise ValidityError(f"unknown config keys {sorted(extra)}")
        return cls(**{k: Fraction(v) if isinstance(v, str) and "/" in v else v
                      for k, v in data.items()})


@dataclass
class Criterion:
    number: int
    name: str
    passed: bool
    summary: str
    constants: dict = field(default_factory=dict)  # name -> Fraction


@dataclass
class SuiteResult:
    suite: str
    columns: list[str]
    rows: list[dict]
    criteria: list[Criterion]


def lsq_slope(xs: list, ys: list) -> Fraction:
    """Exact least-squares slope of ys against xs."""
    n = len(xs)
    if n < 2:
        return Fraction(0)
    xbar = Fraction(sum(xs), n)
    ybar = sum(map(Fraction, ys), Fraction(0)) / n
    sxx = sum((x - xbar) ** 2 for x in xs)
    sxy = sum((x - xbar) * (y - ybar) for x, y in zip(xs, ys))
    return sxy / sxx if sxx else Fraction(0)


RATIONAL = "rational"  # gamma = (0, 0): the contrast case of the model problem


@lru_cache(maxsize=None)
def _gamma(family: str):
    if family == RATIONAL:
        return rational_point(Fraction(0), Fraction(0))
    return surrogate_family(family)


def _violation(exc: InvariantViolation) -> dict:
    return {"message": str(exc), **{k: str(v) for k, v in exc.instance.items()}}


# -- residue sets: cardinality, density, equidistribution --------------------

def shift_contexts(family: str, sigma: Fraction) -> list[tuple]:
    """Distinct (branch, M, m1, m2, levels) over all levels the surrogate supports."""
    gamma = _gamma(family)
    seen: dict[tuple, list[int]] = {}
    k = 2
    while True:
        try:
            ctx = shift_context(gamma, k, sigma)
        except ValidityError:
            break
        seen.setdefault((ctx.branch.value, ctx.modulus, *ctx.offset), []).append(k)
        k += 1
    return [(*key, tuple(levels)) for key, levels in seen.items()]


def _residue_task(family: str, branch: str, M: int, m1: int, m2: int, levels: tuple,
                  q_max: int, steps: int) -> dict:
    ctx = manual_context(levels[0], M, (m1, m2))
    mismatches, density_fail = [], []
    worst_density, worst_density_q = Fraction(2), 0
    worst_disc, worst_disc_q = Fraction(0), 0
    tail_from, worst_tail = max(2, q_max // 10), Fraction(0)
    ys = [Fraction(i, steps) for i in range(steps + 1)]
    for q in range(1, q_max + 1):
        rs = residue_set(q, ctx)
        size = len(rs)
        if size != cardinality_formula(q, ctx):
            mismatches.append(q)
        if 5 * size < 3 * q * q:
            density_fail.append(q)
        dens = Fraction(size, q * q)
        if dens < worst_density:
            worst_density, worst_density_q = dens, q
        cum = rs.mask.astype(np.int64).cumsum(0).cumsum(1)
        lims = [min(math.floor(q * y), q - 1) for y in ys]
        for y1, l1 in zip(ys, lims):
            for y2, l2 in zip(ys, lims):
                cnt = int(cum[l1, l2]) if l1 >= 0 and l2 >= 0 else 0
                disc = (cnt - y1 * y2 * size) ** 2 / q**3  # squared, scaled by q^-3
                if disc > worst_disc:
                    worst_disc, worst_disc_q = disc, q
                if q >= tail_from and disc > worst_tail:
                    worst_tail = disc
        if q <= 60:  # independent routes for the box count
            y = Vec2Q(ys[steps // 2 + 1], ys[steps - 1])
            c1, c2 = box_count(rs, y), box_count_crt(q, ctx, y)
            l1, l2 = (min(math.floor(q * c), q - 1) for c in y)
            if not c1 == c2 == int(cum[l1, l2]):
                mismatches.append(q)
    return {"family": family, "branch": branch, "M": M, "m": f"({m1},{m2})",
            "levels": f"{levels[0]}..{levels[-1]}" if len(levels) > 1 else str(levels[0]),
            "count_mismatches": len(mismatches), "density_failures": len(density_fail),
            "min_density": worst_density, "min_density_q": worst_density_q,
            "max_disc_sq": worst_disc, "max_disc_q": worst_disc_q,
            "max_disc_sq_tail": worst_tail}


def suite_residues(cfg: VerifyConfig, pmap: Mapper = serial_map) -> SuiteResult:
    tasks = [(fam, *c, cfg.q_max, cfg.y_steps) for fam in cfg.families
             for c in shift_contexts(fam, cfg.sigma)]
    rows = pmap(_residue_task, tasks)
    n_ctx = len(rows)
    bad1 = sum(r["count_mismatches"] for r in rows)
    bad2 = sum(r["density_failures"] for r in rows)
    dmin = min(r["min_density"] for r in rows)
    per_fam, tail = {}, {}
    for r in rows:
        per_fam[r["family"]] = max(per_fam.get(r["family"], Fraction(0)), r["max_disc_sq"])
        tail[r["family"]] = max(tail.get(r["family"], Fraction(0)), r["max_disc_sq_tail"])
    c_sq = max(per_fam.values())
    # C_eq^2 per family; stability: every family within factor 2 of the overall max
    stable = all(cfg.stability**2 * v >= c_sq for v in per_fam.values())
    ceq = {f"C_eq^2[{f}]": v for f, v in sorted(per_fam.items())}
    crits = [
        Criterion(1, "cardinality identity", bad1 == 0,
                  f"{n_ctx} contexts x q<={cfg.q_max}: {bad1} mismatches"),
        Criterion(2, "density bound 5|S_q| >= 3q^2", bad2 == 0,
                  f"{bad2} failures; min |S_q|/q^2 = {float(dmin):.6f}",
                  {"min_density": dmin}),
        Criterion(11, "equidistribution in boxes", stable,
                  f"C_eq = {math.sqrt(c_sq):.6f}; per family "
                  + ", ".join(f"{f}={math.sqrt(v):.4f}" for f, v in sorted(per_fam.items()))
                  + f"; over q >= {max(2, cfg.q_max // 10)}: "
                  + ", ".join(f"{f}={math.sqrt(v):.4f}" for f, v in sorted(tail.items())),
                  {"C_eq^2": c_sq, **ceq,
                   **{f"C_eq^2_tail[{f}]": v for f, v in sorted(tail.items())}}),
    ]
    cols = list(rows[0]) if rows else []
    return SuiteResult("residues", cols, rows, crits)


# -- overlaps: oracle equivalence and the count form of the overlap lemma ----

def overlap_instances(cfg: VerifyConfig, family_index: int) -> list[tuple]:
    rng = Prng(cfg.seed).split(100 + family_index)
    out = []
    for _ in range(cfg.pairs):
        q = rng.randint(2, cfg.pair_q_max)
        r = rng.randint(1, q - 1)
        vals = []
        for _ in range(2):
            k = rng.randint(2, cfg.pair_k_max)
            vals.append(str((1 + Fraction(rng.below(256), 256)) / 2**k))
        out.append((q, r, *vals))
    return out


def _overlap_task(family: str, q: int, r: int, pq: str, pr: str, sigma: Fraction) -> list[dict]:
    gamma = _gamma(family)
    psi = ApproxFunction({q: Fraction(pq), r: Fraction(pr)})
    geo = pair_geometry(q, r, psi, gamma, sigma)
    rows = []
    for primed in (False, True):
        fa = square_family(q, psi, gamma, sigma, primed)
        fb = square_family(r, psi, gamma, sigma, primed)
        oracle = overlap_bruteforce(fa, fb)
        fast = overlap_fast(q, r, psi, gamma, sigma, primed)
        key = lambda o: (o.measure, o.pair_count, o.value_count)
        agree = key(fast) == key(oracle)
        if primed:
            alt = overlap_fast(q, r, psi, gamma, sigma, primed, method="moebius")
            agree = agree and key(alt) == key(oracle)
        vc = oracle.value_count
        if not primed:  # the unprimed measure factors over the two axes
            wq, wr = psi(q) / q, psi(r) / r
            prod = math.prod(interval_union_intersection_1d(q, r, wq, wr, c) for c in gamma.value)
            agree = agree and prod == oracle.measure
        bullet1 = (oracle.measure <= geo.delta**2 * geo.g**2 * vc
                   and vc <= (2 * math.ceil(geo.D) + 1) ** 2)
        lam = (measure_of(q, psi, gamma, sigma, primed) * measure_of(r, psi, gamma, sigma, primed))
        c1 = oracle.measure / (lam * (1 + 1 / geo.D**2)) if lam else Fraction(0)
        vanishes, empty_ok = "", True
        if primed and q % r and geo.D < 1:
            ctx = case_context(gamma, geo.level, geo.D, geo.h, sigma)
            ind = gamma.norm_multiple(geo.h) < geo.D and indicator_C(ctx)
            vanishes = "yes" if not ind else "no"
            empty_ok = ind or vc == 0
        rows.append({"family": family, "q": q, "r": r, "psi_q": Fraction(pq), "psi_r": Fraction(pr),
                     "primed": int(primed), "g": geo.g, "D": geo.D, "bullet": geo.bullet,
                     "measure": oracle.measure, "pair_count": oracle.pair_count,
                     "value_count": vc, "oracle_agree": int(agree), "bullet1": int(bullet1),
                     "indicator_vanishes": vanishes, "empty_ok": int(empty_ok), "C1_ratio": c1})
    return rows


def suite_overlaps(cfg: VerifyConfig, pmap: Mapper = serial_map) -> SuiteResult:
    tasks = [(fam, *inst, cfg.sigma) for i, fam in enumerate(cfg.families)
             for inst in overlap_instances(cfg, FAMILIES.index(fam))]
    rows = [row for chunk in pmap(_overlap_task, tasks) for row in chunk]
    disagree = [r for r in rows if not r["oracle_agree"]]
    per = {(f, p): sum(1 for r in rows if r["family"] == f and r["primed"] == p)
           for f in cfg.families for p in (0, 1)}
    b1 = sum(1 for r in rows if not r["bullet1"])
    vanish = sum(1 for r in rows if r["indicator_vanishes"] == "yes")
    b23 = sum(1 for r in rows if not r["empty_ok"])
    c1 = max((r["C1_ratio"] for r in rows), default=Fraction(0))
    crits = [
        Criterion(3, "overlap oracle equivalence", not disagree and min(per.values()) >= cfg.pairs,
                  f"{len(rows)} comparisons (>= {min(per.values())} per family and mode): "
                  f"{len(disagree)} disagreements"),
        Criterion(4, "overlap lemma, count form", b1 == 0 and b23 == 0,
                  f"bullet 1: {b1} failures; bullets 2-3: indicator vanished on {vanish} "
                  f"pairs, {b23} with nonzero value count; C1 = {float(c1):.6g}",
                  {"C1": c1}),
    ]
    return SuiteResult("overlaps", list(rows[0]), rows, crits)


# -- Bohr-set counts ----------------------------------------------------------

def _orbit_counts_grid(a: tuple[int, int], b: int, steps: int, j_max: int) -> np.ndarray:
    """counts[j, i1, i2] = #{0 <= h < b : ||h a/b + (i1, i2)/steps|| < 2^-j}."""
    P = steps * b
    h = np.arange(b, dtype=np.int64)[:, None]
    shift = np.arange(steps, dtype=np.int64)[None, :] * b
    dists = []
    for ai in a:
        x = (steps * ((h * ai) % b) + shift) % P
        dists.append(np.minimum(x, P - x))  # distance to Z, scaled by P
    out = np.empty((j_max + 1, steps, steps), dtype=np.int64)
    for j in range(j_max + 1):
        # dist/P < 2^-j  <=>  dist * 2^j < P
        m1 = (dists[0] << j) < P
        m2 = (dists[1] << j) < P
        out[j] = m1.T.astype(np.int64) @ m2.astype(np.int64)
    return out


def _orbit_task(b_lo: int, b_hi: int, steps: int, j_max: int, seed: int) -> list[dict]:
    rows = []
    for b in range(b_lo, b_hi):
        rng = Prng(seed).split(b)
        a1s = [1] + [d for d in range(2, b) if b % d == 0]
        worst = None
        checked = 0
        spot_ok = True
        for a1 in a1s:
            for a2 in range(b):
                if gcd3(a1, a2, b) != 1:
                    continue
                counts = _orbit_counts_grid((a1, a2), b, steps, j_max)
                checked += counts.size
                for j in range(j_max + 1):
                    # count <= 8 b 2^-j + 1  <=>  2^j (count - 1) <= 8 b
                    slack = Fraction(int(counts[j].max()) - 1) - Fraction(8 * b, 1 << j)
                    if worst is None or slack > worst:
                        worst = slack
        # an independent exact evaluation at a few random grid points
        for _ in range(3):
            a1 = a1s[rng.below(len(a1s))]
            a2 = rng.below(b)
            if gcd3(a1, a2, b) != 1:
                continue
            i1, i2, j = rng.below(steps), rng.below(steps), rng.below(j_max + 1)
            exact = rational_orbit_count((a1, a2), b, Vec2Q(Fraction(i1, steps), Fraction(i2, steps)),
                                         Fraction(1, 1 << j))
            spot_ok &= exact == int(_orbit_counts_grid((a1, a2), b, steps, j_max)[j, i1, i2])
        rows.append({"b": b, "evaluations": checked, "max_excess": worst, "spot_check": int(spot_ok)})
    return rows


def _once_around_task(seed: int, n: int) -> list[dict]:
    rng = Prng(seed).split(10**6)
    rows = []
    for i in range(n):
        while True:
            alpha = Vec2Q(rng.ratio(1 << 20), rng.ratio(1 << 20))
            na = torus_norm(alpha)
            if na >= Fraction(1, 1024):
                break
        beta = Vec2Q(rng.ratio(1 << 20), rng.ratio(1 << 20))
        eps = Fraction(1 + rng.below(1 << 19), 1 << 20)
        try:
            cnt = once_around_count(alpha, beta, eps)
            ok = cnt <= 2 * eps / na + 1
        except InvariantViolation:
            cnt, ok = -1, False
        rows.append({"i": i, "alpha": alpha, "eps": eps, "count": cnt,
                     "bound": 2 * eps / na + 1, "ok": int(ok)})
    return rows


def suite_bohr(cfg: VerifyConfig, pmap: Mapper = serial_map) -> SuiteResult:
    edges = list(range(1, cfg.bohr_b_max + 1, 10)) + [cfg.bohr_b_max + 1]
    tasks = [(lo, hi, cfg.bohr_beta_steps, cfg.bohr_j_max, cfg.seed)
             for lo, hi in zip(edges, edges[1:])]
    rows = [r for chunk in pmap(_orbit_task, tasks) for r in chunk]
    once = pmap(_once_around_task, [(cfg.seed, cfg.once_around)])[0]
    worst = max(r["max_excess"] for r in rows)
    spot = all(r["spot_check"] for r in rows)
    evals = sum(r["evaluations"] for r in rows)
    once_bad = sum(1 for r in once if not r["ok"])
    once_ratio = max(Fraction(r["count"]) / r["bound"] for r in once)
    passed = worst <= 0 and spot and once_bad == 0 and len(once) >= cfg.once_around
    crit = Criterion(5, "Bohr orbit bounds", passed,
                     f"{evals} full-orbit counts, max(count - 8 eps b - 1) = {worst}; "
                     f"spot checks {'ok' if spot else 'FAILED'}; once-around {len(once)} "
                     f"instances, {once_bad} violations, max count/bound = {float(once_ratio):.4f}",
                     {"full_orbit_max_excess": worst, "once_around_max_ratio": once_ratio})
    out_rows = [{"kind": "full-orbit", **r, "i": "", "count": "", "bound": ""} for r in rows]
    out_rows += [{"kind": "once-around", "b": "", "evaluations": 1, "max_excess": "",
                  "spot_check": "", "i": r["i"], "count": r["count"], "bound": r["bound"]}
                 for r in once]
    cols = ["kind", "b", "evaluations", "max_excess", "spot_check", "i", "count", "bound"]
    return SuiteResult("bohr", cols, out_rows, [crit])


# -- dyadic blocks: log-tolerance, divisor pairs, the Bohr-set lemma ----------

GENERATORS = ("sparse", "power")


@lru_cache(maxsize=None)
def block_psi(generator: str, seed: int, lo: int, hi: int, per_block: int, links: int,
              exponent: Fraction) -> ApproxFunction:
    rng = Prng(seed).split(GENERATORS.index(generator) + 1)
    if generator == "sparse":
        return psi_sparse_blocks(rng, lo, hi, per_block, links)
    if generator == "power":
        return psi_power_blocks(rng, lo, hi, per_block, exponent, links)
    raise ValidityError(f"unknown psi generator {generator!r}")


def _block_task(family: str, generator: str, a: int, c: int, cfg: VerifyConfig) -> dict:
    gamma = _gamma(family)
    psi = block_psi(generator, cfg.seed, cfg.block_lo, cfg.block_hi, cfg.per_block,
                    cfg.links, cfg.power_exponent)
    spec = BlockSpec(1 << a, 1 << c, psi, gamma, cfg.sigma)
    st = stratify(spec)
    rep = block_sums(spec)
    c4 = f_set_constant(spec, rep.f_sum)
    adhoc = []
    if 1 << (a + 1) <= 1 << cfg.adhoc_U:
        adhoc = adhoc_instances(spec, cfg.tau, cfg.rho, cfg.omega, strata=st)
    amax = max((i.ratio_hi for i in adhoc), default=None)
    return {"family": family, "generator": generator, "Q": 1 << a, "R": 1 << c,
            "log_ratio": a - c, "pairs": st.total(), "F_pairs": len(st.F),
            "lhs": rep.lhs, "product_term": rep.product_term, "cross_term": rep.cross_term,
            "C3_block": rep.empirical_constant, "f_sum": rep.f_sum, "C4_block": c4,
            "adhoc_instances": len(adhoc), "C2_block": "" if amax is None else amax}


def suite_blocks(cfg: VerifyConfig, pmap: Mapper = serial_map) -> SuiteResult:
    tasks = [(fam, gen, a, c, cfg) for fam in cfg.families for gen in GENERATORS
             for a in range(cfg.block_lo, cfg.block_hi + 1)
             for c in range(max(cfg.block_lo, a - cfg.ratio_max), a + 1)]
    rows = pmap(_block_task, tasks)
    # 6: the Bohr-set lemma
    maxima = [r["C2_block"] for r in rows if r["C2_block"] != ""]
    c2 = max(maxima)
    med = Fraction(median(maxima))
    crit6 = Criterion(6, "Bohr-set lemma over the block harness", c2 <= cfg.stability * med,
                      f"{sum(r['adhoc_instances'] for r in rows)} instances in {len(maxima)} "
                      f"blocks; C2 = {float(c2):.6g}, median block max = {float(med):.6g}",
                      {"C2": c2, "C2_median_block": med})
    # 7: log-tolerance constant and its trend in Q/R
    c3 = max(r["C3_block"] for r in rows)
    slopes = {}
    for fam in cfg.families:
        for gen in GENERATORS:
            sub = [r for r in rows if r["family"] == fam and r["generator"] == gen]
            xs = sorted({r["log_ratio"] for r in sub})
            ys = [max(r["C3_block"] for r in sub if r["log_ratio"] == x) for x in xs]
            slopes[f"{fam}/{gen}"] = lsq_slope(xs, ys)
    worst = max(slopes.values())
    crit7 = Criterion(7, "log-tolerance constant, no trend in Q/R", worst <= cfg.slope_max,
                      f"C3 = {float(c3):.6g}; slope of per-ratio max vs log2(Q/R): "
                      + ", ".join(f"{k}={float(v):+.4f}" for k, v in slopes.items()),
                      {"C3": c3, **{f"slope[{k}]": v for k, v in slopes.items()}})
    # 8: divisor pairs
    c4 = max(r["C4_block"] for r in rows)
    populated = sum(1 for r in rows if r["F_pairs"])
    crit8 = Criterion(8, "divisor-pair bound", populated > 0,
                      f"C4 = {float(c4):.6g} over {len(rows)} blocks "
                      f"({populated} with divisor pairs)", {"C4": c4})
    return SuiteResult("blocks", list(rows[0]), rows, [crit6, crit7, crit8])


# -- model problem ------------------------------------------------------------

MODEL_KINDS = ("uniform", "progression")


def trial_seed(seed: int, trial: int) -> int:
    return Prng(seed).split(5000 + trial).next_u64()


def _model_task(family: str, variant: str, kind: str, M: int, trials: int, seed: int,
                sigma: Fraction, rho: Fraction) -> dict:
    gamma = _gamma(family)
    vals = []
    for t in range(trials):
        spec = ModelSpec(M, gamma, trial_seed(seed, t), Variant(variant), support_kind=kind,
                         sigma=sigma, rho=rho)
        vals.append(model_sum(spec).value)
    return {"family": family, "variant": variant, "support": kind, "M": M, "trials": trials,
            "max": max(vals), "mean": sum(vals, Fraction(0)) / len(vals)}


def suite_model(cfg: VerifyConfig, pmap: Mapper = serial_map) -> SuiteResult:
    Ms = [1 << e for e in range(cfg.model_M_lo, cfg.model_M_hi + 1)]
    tasks = [(fam, v.value, kind, M, cfg.trials, cfg.seed, cfg.sigma, cfg.rho)
             for fam in cfg.families for v in Variant for kind in MODEL_KINDS for M in Ms]
    tasks += [(RATIONAL, Variant.PLAIN.value, kind, M, cfg.trials, cfg.seed, cfg.sigma, cfg.rho)
              for kind in MODEL_KINDS for M in Ms]
    rows = pmap(_model_task, tasks)
    slopes = {}
    for key in dict.fromkeys((r["family"], r["variant"], r["support"]) for r in rows):
        sub = [r for r in rows if (r["family"], r["variant"], r["support"]) == key]
        slopes[key] = lsq_slope([r["M"].bit_length() - 1 for r in sub], [r["max"] for r in sub])
    bounded = {k: s for k, s in slopes.items() if k[1] != Variant.PLAIN.value}
    contrast = {k: s for k, s in slopes.items() if k[1] == Variant.PLAIN.value}
    worst = max(bounded.values())
    crit = Criterion(9, "model-problem flatness", worst <= cfg.slope_max,
                     f"max slope over shift variants = {float(worst):+.5f}; plain contrast slopes: "
                     + ", ".join(f"{f}/{k}={float(s):+.4f}" for (f, _, k), s in sorted(contrast.items())),
                     {f"slope[{'/'.join(k)}]": s for k, s in sorted(slopes.items())})
    return SuiteResult("model", list(rows[0]), rows, [crit])


# -- convergence side ---------------------------------------------------------

def _tail_task(family: str, Q0: int, exponent: Fraction, sigma: Fraction) -> dict:
    gamma = _gamma(family)
    qs = range(Q0, 2 * Q0 + 1)
    psi = psi_power_law(qs, exponent)
    below = all(psi(q) ** exponent.denominator * q ** exponent.numerator <= 1 for q in qs)
    union, bound = convergence_tail(psi, gamma, Q0, 2 * Q0, sigma)
    overlapping = any(overlap_fast(q, r, psi, gamma, sigma, primed=False, want_values=False).measure
                      for q in qs for r in qs if r < q)
    strict = union < bound if overlapping else union <= bound
    return {"family": family, "Q0": Q0, "Q1": 2 * Q0, "union": union, "bound": bound,
            "overlaps": int(overlapping), "truncation_ok": int(below), "ok": int(strict and below)}


def suite_convergence(cfg: VerifyConfig, pmap: Mapper = serial_map) -> SuiteResult:
    tasks = [(fam, Q0, cfg.power_exponent, cfg.sigma) for fam in cfg.families for Q0 in cfg.tail_Q0s]
    rows = pmap(_tail_task, tasks)
    far = tail_integral_below(cfg.tail_far, cfg.power_exponent, cfg.tail_threshold)
    bad = sum(1 for r in rows if not r["ok"])
    crit = Criterion(10, "convergence sanity", bad == 0 and far,
                     f"{len(rows)} tails, {bad} failures; integral tail bound at Q0 = "
                     f"{cfg.tail_far} below {cfg.tail_threshold}: {far}")
    return SuiteResult("convergence", list(rows[0]), rows, [crit])


SUITES = {
    "residues": suite_residues,
    "overlaps": suite_overlaps,
    "bohr": suite_bohr,
    "blocks": suite_blocks,
    "model": suite_model,
    "convergence": suite_convergence,
}
