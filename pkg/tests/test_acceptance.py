"""Acceptance criteria 1-12, evaluated from two full ``lab verify all`` runs.

Criteria 1-11 are read from the first run's summary report; criterion 12
compares every report of the two runs (different worker counts) byte for
byte after the timestamp line. One PASS/FAIL line per criterion is printed
in the terminal summary.
"""

import csv
import time
from pathlib import Path

import pytest

from khinlab.cli import main

SEED = "7"
RESULTS: list[str] = []
NAMES = {
    1: "cardinality identity",
    2: "density bound",
    3: "overlap oracle equivalence",
    4: "overlap lemma, count form",
    5: "Bohr orbit bounds",
    6: "Bohr-set lemma constant",
    7: "log-tolerance constant, no trend",
    8: "divisor-pair constant",
    9: "model-problem flatness",
    10: "convergence sanity",
    11: "equidistribution constant",
    12: "determinism across worker counts",
}


def _run(out: Path, workers: int) -> float:
    t0 = time.perf_counter()
    code = main(["verify", "all", "--seed", SEED, "--workers", str(workers), "--out", str(out)])
    assert code in (0, 2)
    return time.perf_counter() - t0


@pytest.fixture(scope="session")
def reports(tmp_path_factory):
    base = tmp_path_factory.mktemp("acceptance")
    a, b = base / "workers1", base / "workers2"
    ta = _run(a, 1)
    tb = _run(b, 2)
    return a, b, ta, tb


def _summary(path: Path) -> dict[int, dict]:
    lines = path.read_text().splitlines()[1:]
    out = {}
    for row in csv.DictReader(lines):
        if row["constant"] == "":
            out[int(row["criterion"])] = row
    return out


def _record(n: int, passed: bool, detail: str) -> None:
    RESULTS.append(f"criterion {n:>2} [{'PASS' if passed else 'FAIL'}] {NAMES[n]}: {detail}")


@pytest.mark.parametrize("n", range(1, 12))
def test_criterion(reports, n):
    row = _summary(reports[0] / "summary.csv")[n]
    passed = row["status"] == "PASS"
    _record(n, passed, row["summary"])
    assert passed, row["summary"]


def test_criterion_12_determinism(reports):
    a, b, ta, tb = reports
    names = sorted(p.name for p in a.glob("*.csv") if p.name != "timing.csv")
    assert names == sorted(p.name for p in b.glob("*.csv") if p.name != "timing.csv")
    differing = [n for n in names
                 if (a / n).read_bytes().split(b"\n", 1)[1] != (b / n).read_bytes().split(b"\n", 1)[1]]
    detail = (f"{len(names)} reports, {len(differing)} differ "
              f"(runs took {ta:.0f}s with 1 worker, {tb:.0f}s with 2)")
    _record(12, not differing, detail)
    assert not differing, differing
