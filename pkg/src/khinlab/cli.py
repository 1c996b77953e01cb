"""The ``lab`` command: module operations and verification suites.

Exit codes: 0 success, 1 usage or configuration error, 2 a mathematical
assertion failed (the failing instance goes to stderr as JSON).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime, timezone
from decimal import Context, Decimal, ROUND_HALF_EVEN
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Optional

from .approx import shift_context
from .bohr import BohrQuery, bohr_count, rational_orbit_count
from .errors import InvariantViolation, LabError, ValidityError
from .exactnum import FAMILIES, Vec2Q, surrogate_family
from .measure import overlap_bruteforce, overlap_fast, pair_geometry
from .qia import ModelSpec, Variant, model_sum, qia_ratio
from .shiftred import ApproxFunction, cardinality_formula, residue_set, square_family
from .suites import SUITES, SuiteResult, VerifyConfig, block_psi, trial_seed

WORKERS_ENV = "LAB_WORKERS"
_DEC = Context(prec=12, rounding=ROUND_HALF_EVEN)


# -- serialization -----------------------------------------------------------

def parse_ratio(text: str) -> Fraction:
    """Parse "p/q" (or an integer) exactly; decimals are refused."""
    text = str(text).strip()
    if "." in text or "e" in text.lower():
        raise ValidityError(f"rationals must be written p/q, got {text!r}")
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValidityError(f"not a rational: {text!r}") from exc


def exact(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def decimal12(x: Fraction) -> str:
    """12 significant digits, round-to-nearest (display only)."""
    return str(_DEC.divide(Decimal(x.numerator), Decimal(x.denominator)))


def flatten(row: dict) -> dict:
    """Fractions become an exact ``p/q`` cell plus a ``_dec`` companion."""
    out = {}
    for k, v in row.items():
        if isinstance(v, Fraction):
            out[k] = exact(v)
            out[k + "_dec"] = decimal12(v)
        elif isinstance(v, Vec2Q):
            out[k] = f"({exact(v.x)},{exact(v.y)})"
        elif isinstance(v, bool):
            out[k] = int(v)
        else:
            out[k] = v
    return out


def render_csv(rows: list[dict], header: Optional[str] = None) -> str:
    flat = [flatten(r) for r in rows]
    cols: list[str] = []
    for r in flat:
        cols.extend(c for c in r if c not in cols)
    buf = io.StringIO()
    if header is not None:
        buf.write(f"# {header}\n")
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    w.writerows(flat)
    return buf.getvalue()


def timestamp() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


# -- configuration -----------------------------------------------------------

@dataclass
class ExperimentConfig:
    suite: str = "all"
    seed: int = 7
    workers: int = 1
    out: str = "reports"
    params: dict = field(default_factory=dict)  # VerifyConfig overrides

    @classmethod
    def load(cls, path: str) -> ExperimentConfig:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidityError(f"cannot read config {path}: {exc}") from exc
        extra = set(data) - {"suite", "seed", "workers", "out", "params"}
        if extra:
            raise ValidityError(f"unknown config keys {sorted(extra)}")
        cfg = cls(**data)
        cfg.verify_config()  # validate early
        return cfg

    def verify_config(self) -> VerifyConfig:
        params = {k: parse_ratio(v) if isinstance(v, str) and k != "families" else v
                  for k, v in self.params.items()}
        return VerifyConfig.from_dict({**params, "seed": self.seed})


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValidityError(f"{WORKERS_ENV} must be an integer, got {raw!r}")


@contextmanager
def worker_map(workers: int):
    """A map(fn, tasks) callable returning results in task order."""
    if workers <= 1:
        yield lambda fn, tasks: [fn(*t) for t in tasks]
        return
    with ProcessPoolExecutor(max_workers=workers) as ex:
        yield lambda fn, tasks: list(ex.map(fn, *zip(*tasks))) if tasks else []


# -- verify ------------------------------------------------------------------

def run_verify(exp: ExperimentConfig, stream=None) -> int:
    stream = sys.stdout if stream is None else stream
    cfg = exp.verify_config()
    names = list(SUITES) if exp.suite == "all" else [exp.suite]
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise ValidityError(f"unknown suite {unknown[0]!r}; choose from all, {', '.join(SUITES)}")
    out = Path(exp.out)
    out.mkdir(parents=True, exist_ok=True)
    results: list[SuiteResult] = []
    timings = []
    with worker_map(exp.workers) as pmap:
        for name in names:
            t0 = time.perf_counter()
            res = SUITES[name](cfg, pmap)
            timings.append({"suite": name, "rows": len(res.rows),
                            "wall_seconds": f"{time.perf_counter() - t0:.3f}"})
            rows = [{"id": f"{name}-{i}", **r} for i, r in enumerate(res.rows)]
            (out / f"{name}.csv").write_text(
                render_csv(rows, f"lab verify {name} seed={cfg.seed} generated {timestamp()}"))
            results.append(res)
    summary = []
    for res in results:
        for c in res.criteria:
            base = {"criterion": c.number, "name": c.name, "status": "PASS" if c.passed else "FAIL"}
            summary.append({**base, "constant": "", "value": "", "summary": c.summary})
            for k, v in sorted(c.constants.items()):
                summary.append({**base, "constant": k, "value": Fraction(v), "summary": ""})
    summary.sort(key=lambda r: (r["criterion"], r["constant"]))
    (out / "summary.csv").write_text(
        render_csv(summary, f"lab verify {exp.suite} seed={cfg.seed} generated {timestamp()}"))
    (out / "timing.csv").write_text(render_csv(timings, f"generated {timestamp()}"))
    crits = sorted((c for r in results for c in r.criteria), key=lambda c: c.number)
    for c in crits:
        print(f"[{'PASS' if c.passed else 'FAIL'}] {c.number:>2} {c.name}: {c.summary}", file=stream)
    failed = [c.number for c in crits if not c.passed]
    print(f"{len(crits) - len(failed)}/{len(crits)} criteria passed; reports in {out}", file=stream)
    return 2 if failed else 0


# -- module subcommands ------------------------------------------------------

def emit(rows: list[dict], args) -> None:
    if getattr(args, "csv_out", None):
        Path(args.csv_out).write_text(render_csv(rows, f"lab {args.command} generated {timestamp()}"))
    sys.stdout.write(render_csv(rows))


def cmd_approx(args) -> int:
    gamma = surrogate_family(args.gamma)
    rows = []
    for k in range(2, args.k_max + 1):
        ctx = shift_context(gamma, k, args.sigma)
        d = ctx.dirichlet
        fk = ctx.first_kind
        rows.append({"k": k, "B_k": fk.B, "A_k": f"({fk.A[0]},{fk.A[1]})",
                     "b_k": d.b if d else "", "a_k": f"({d.a[0]},{d.a[1]})" if d else "",
                     "branch": ctx.branch.value})
    emit(rows, args)
    return 0


def cmd_shiftred(args) -> int:
    gamma = surrogate_family(args.gamma)
    ctx = shift_context(gamma, args.k, args.sigma)
    rows = []
    for q in range(1, args.q_max + 1):
        n = len(residue_set(q, ctx))
        f = cardinality_formula(q, ctx)
        if n != f:
            raise InvariantViolation("cardinality formula disagrees with enumeration",
                                     {"q": q, "brute": n, "formula": f})
        rows.append({"q": q, "M": ctx.modulus, "S_q": n, "density": Fraction(n, q * q)})
    emit(rows, args)
    return 0


def cmd_measure(args) -> int:
    gamma = surrogate_family(args.gamma)
    psi = ApproxFunction({args.q: args.psi_q, args.r: args.psi_r})
    primed = not args.unprimed
    geo = pair_geometry(args.q, args.r, psi, gamma, args.sigma)
    res = overlap_fast(args.q, args.r, psi, gamma, args.sigma, primed, args.method)
    row = {"q": args.q, "r": args.r, "primed": int(primed), "g": geo.g, "D": geo.D,
           "Delta": geo.Delta, "delta": geo.delta, "bullet": geo.bullet,
           "measure": res.measure, "pair_count": res.pair_count, "value_count": res.value_count}
    if args.oracle:
        ref = overlap_bruteforce(square_family(args.q, psi, gamma, args.sigma, primed),
                                 square_family(args.r, psi, gamma, args.sigma, primed))
        if (ref.measure, ref.pair_count, ref.value_count) != (res.measure, res.pair_count,
                                                              res.value_count):
            raise InvariantViolation("fast overlap disagrees with the oracle",
                                     {"q": args.q, "r": args.r, "fast": str(res.measure),
                                      "oracle": str(ref.measure)})
        row["oracle_measure"] = ref.measure
    emit([row], args)
    return 0


def _parse_rational_point(text: str) -> tuple[tuple[int, int], int]:
    """"a1,a2/b" -> ((a1, a2), b)."""
    try:
        num, b = text.split("/")
        a1, a2 = (int(t) for t in num.split(","))
        return (a1, a2), int(b)
    except ValueError as exc:
        raise ValidityError(f"expected a1,a2/b, got {text!r}") from exc


def _parse_vec(text: str) -> Vec2Q:
    x, y = text.split(",")
    return Vec2Q(parse_ratio(x), parse_ratio(y))


def cmd_bohr(args) -> int:
    beta = _parse_vec(args.beta)
    if args.rational:
        a, b = _parse_rational_point(args.rational)
        n = rational_orbit_count(a, b, beta, args.eps)
        rows = [{"a": f"({a[0]},{a[1]})", "b": b, "eps": args.eps, "count": n,
                 "bound": 8 * args.eps * b + 1}]
    else:
        if args.gamma is None or args.N is None:
            raise ValidityError("give --rational a1,a2/b, or --gamma and --N")
        gamma = surrogate_family(args.gamma)
        n = bohr_count(BohrQuery(gamma, args.N, args.eps, beta))
        rows = [{"gamma": args.gamma, "N": args.N, "eps": args.eps, "count": n}]
    emit(rows, args)
    return 0


def cmd_qia(args) -> int:
    gamma = surrogate_family(args.gamma)
    psi = block_psi(args.generator, args.seed, args.U_lo, args.U - 1, args.per_block, 3,
                    Fraction(3, 4))
    rows = []
    for U in range(args.U_lo + 1, args.U + 1):
        ratio = qia_ratio(psi, gamma, args.sigma, U, args.primed)
        rows.append({"U": U, "moduli": sum(1 for q in psi.support if q <= 1 << U),
                     "primed": int(args.primed), "ratio": "" if ratio is None else ratio})
    emit(rows, args)
    return 0


def _parse_M_range(text: str) -> list[int]:
    """"16..1024" -> powers of two from 16 to 1024; "16,64" -> explicit list."""
    if ".." in text:
        lo, hi = (int(t) for t in text.split(".."))
        out, M = [], lo
        while M <= hi:
            out.append(M)
            M *= 2
        return out
    return [int(t) for t in text.split(",")]


def cmd_model(args) -> int:
    gamma = surrogate_family(args.gamma)
    rows = []
    for M in _parse_M_range(args.M):
        for t in range(args.trials):
            rep = model_sum(ModelSpec(M, gamma, trial_seed(args.seed, t), Variant(args.variant),
                                      support_kind=args.support))
            rows.append({"M": M, "trial": t, "variant": rep.variant, "support": rep.support_kind,
                         "value": rep.value, "B": rep.B, "b": "" if rep.b is None else rep.b,
                         "near_pairs": rep.pairs_near})
    emit(rows, args)
    return 0


def cmd_verify(args) -> int:
    exp = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    exp.suite = args.suite
    if args.seed is not None:
        exp.seed = args.seed
    exp.workers = args.workers if args.workers is not None else (
        exp.workers if args.config else default_workers())
    if args.out:
        exp.out = args.out
    for key in ("q_max", "pairs"):
        val = getattr(args, key)
        if val is not None:
            # --q-max bounds the residue range, or the pair range for the overlap suite
            target = "pair_q_max" if key == "q_max" and args.suite == "overlaps" else key
            exp.params[target] = val
    return run_verify(exp)


def cmd_run(args) -> int:
    exp = ExperimentConfig.load(args.config)
    if args.workers is not None:
        exp.workers = args.workers
    return run_verify(exp)


# -- argument parsing --------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="lab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, gamma=True):
        if gamma:
            sp.add_argument("--gamma", choices=FAMILIES, default="quad-sqrt2")
        sp.add_argument("--sigma", type=parse_ratio, default=Fraction(2, 3))
        sp.add_argument("--csv-out", help="also write the table here (with a timestamp line)")

    sp = sub.add_parser("approx", help="first-kind and Dirichlet approximations per level")
    common(sp)
    sp.add_argument("--k-max", type=int, default=12)
    sp.set_defaults(fn=cmd_approx)

    sp = sub.add_parser("shiftred", help="residue-set sizes for one level")
    common(sp)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--q-max", type=int, default=50)
    sp.set_defaults(fn=cmd_shiftred)

    sp = sub.add_parser("measure", help="overlap of two square families")
    common(sp)
    sp.add_argument("--q", type=int, required=True)
    sp.add_argument("--r", type=int, required=True)
    sp.add_argument("--psi-q", type=parse_ratio, required=True)
    sp.add_argument("--psi-r", type=parse_ratio, required=True)
    sp.add_argument("--unprimed", action="store_true")
    sp.add_argument("--method", default="auto", choices=("auto", "lattice", "sweep", "moebius"))
    sp.add_argument("--oracle", action="store_true", help="cross-check with brute force")
    sp.set_defaults(fn=cmd_measure)

    sp = sub.add_parser("bohr", help="Bohr-set counts")
    sp.add_argument("--rational", help="a1,a2/b: count over one period of h a/b")
    sp.add_argument("--gamma", choices=FAMILIES)
    sp.add_argument("--N", type=int)
    sp.add_argument("--eps", type=parse_ratio, required=True)
    sp.add_argument("--beta", default="0,0")
    sp.add_argument("--csv-out")
    sp.set_defaults(fn=cmd_bohr)

    sp = sub.add_parser("qia", help="quasi-independence ratio trace per U")
    common(sp)
    sp.add_argument("--U", type=int, default=10)
    sp.add_argument("--U-lo", type=int, default=6)
    sp.add_argument("--primed", action="store_true")
    sp.add_argument("--generator", choices=("sparse", "power"), default="sparse")
    sp.add_argument("--per-block", type=int, default=10)
    sp.add_argument("--seed", type=int, default=7)
    sp.set_defaults(fn=cmd_qia)

    sp = sub.add_parser("model", help="model-problem sums over M and trials")
    common(sp)
    sp.add_argument("--variant", choices=[v.value for v in Variant], default="shiftb")
    sp.add_argument("--M", default="16..1024")
    sp.add_argument("--trials", type=int, default=20)
    sp.add_argument("--support", choices=("uniform", "progression"), default="uniform")
    sp.add_argument("--seed", type=int, default=7)
    sp.set_defaults(fn=cmd_model)

    sp = sub.add_parser("verify", help="run verification suites and acceptance criteria")
    sp.add_argument("suite", choices=["all", *SUITES])
    sp.add_argument("--seed", type=int)
    sp.add_argument("--workers", type=int, help=f"default: ${WORKERS_ENV} or 1")
    sp.add_argument("--out", help="report directory (default: reports)")
    sp.add_argument("--config", help="JSON experiment config")
    sp.add_argument("--q-max", type=int)
    sp.add_argument("--pairs", type=int)
    sp.set_defaults(fn=cmd_verify)

    sp = sub.add_parser("run", help="run the suite named in a JSON config")
    sp.add_argument("config")
    sp.add_argument("--workers", type=int)
    sp.set_defaults(fn=cmd_run)
    return p


def main(argv: Optional[Iterable[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(None if argv is None else list(argv))
    try:
        return args.fn(args)
    except InvariantViolation as exc:
        print(json.dumps({"error": str(exc), "instance": {k: str(v) for k, v in
                                                         exc.instance.items()}}), file=sys.stderr)
        return 2
    except (ValidityError, LabError, ValueError) as exc:
        print(f"lab: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
