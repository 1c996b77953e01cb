import csv
import io
import json
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from khinlab.cli import ExperimentConfig, decimal12, exact, flatten, main, parse_ratio, render_csv
from khinlab.errors import ValidityError


def table(out: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(out)))


def test_approx_table(capsys):
    assert main(["approx", "--gamma", "quad-sqrt2", "--k-max", "12"]) == 0
    rows = table(capsys.readouterr().out)
    assert [int(r["k"]) for r in rows] == list(range(2, 13))
    assert rows[0]["B_k"] == "2" and rows[0]["branch"] == "FirstKind"
    assert set(rows[0]) == {"k", "B_k", "A_k", "b_k", "a_k", "branch"}


def test_bohr_rational(capsys):
    assert main(["bohr", "--rational", "1,2/3", "--eps", "1/5"]) == 0
    (row,) = table(capsys.readouterr().out)
    assert row["count"] == "1" and row["bound"] == "29/5" and row["bound_dec"] == "5.8"


def test_measure_with_oracle(capsys):
    args = ["measure", "--gamma", "quad-pair", "--q", "6", "--r", "4", "--psi-q", "1/4",
            "--psi-r", "1/8", "--oracle"]
    assert main(args) == 0
    (row,) = table(capsys.readouterr().out)
    assert row["measure"] == row["oracle_measure"] and row["D"] == "1/1"


def test_model_grid(capsys):
    assert main(["model", "--variant", "shiftb", "--M", "16..64", "--trials", "2"]) == 0
    rows = table(capsys.readouterr().out)
    assert [(r["M"], r["trial"]) for r in rows] == [(m, t) for m in ("16", "32", "64") for t in "01"]


def test_qia_trace(capsys):
    assert main(["qia", "--U", "8", "--primed"]) == 0
    rows = table(capsys.readouterr().out)
    assert [r["U"] for r in rows] == ["7", "8"]
    assert all(Fraction(r["ratio"]) > 0 for r in rows)


def test_shiftred_counts(capsys):
    assert main(["shiftred", "--gamma", "liouville", "--k", "9", "--q-max", "12"]) == 0
    rows = table(capsys.readouterr().out)
    assert len(rows) == 12 and rows[0]["S_q"] == "1"


def test_usage_errors_exit_1(capsys, tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1
    assert main(["bohr", "--rational", "2,4/6", "--eps", "1/5"]) == 1
    assert main(["run", str(tmp_path / "missing.json")]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"suite": "bohr", "params": {"sigma": "5/6", "tau": "2/3"}}))
    assert main(["run", str(bad)]) == 1


def test_invariant_failure_exit_2(capsys, monkeypatch):
    import khinlab.cli as cli

    monkeypatch.setattr(cli, "cardinality_formula", lambda q, ctx: -1)
    assert main(["shiftred", "--k", "4", "--q-max", "3"]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["instance"]["q"] == "1"


def test_run_config_and_reports(tmp_path, capsys):
    cfg = {"suite": "convergence", "seed": 3, "workers": 1, "out": str(tmp_path / "r"),
           "params": {"tail_Q0s": [4], "families": ["liouville"], "tail_threshold": "1/10"}}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    assert main(["run", str(path)]) == 0
    text = (tmp_path / "r" / "convergence.csv").read_text().splitlines()
    assert text[0].startswith("# lab verify convergence seed=3 generated ")
    rows = list(csv.DictReader(text[1:]))
    assert rows[0]["ok"] == "1" and Fraction(rows[0]["union"]) <= Fraction(rows[0]["bound"])
    assert "[PASS] 10" in capsys.readouterr().out


def test_config_validation():
    with pytest.raises(ValidityError):
        ExperimentConfig(params={"rho": "1/2"}).verify_config()
    with pytest.raises(ValidityError):
        ExperimentConfig(params={"families": ["nope"]}).verify_config()
    with pytest.raises(ValidityError):
        parse_ratio("0.25")


@given(st.integers(-10**40, 10**40), st.integers(1, 10**40))
def test_exact_cells_round_trip(n, d):
    x = Fraction(n, d)
    cells = flatten({"x": x})
    assert parse_ratio(cells["x"]) == x
    assert exact(x) == cells["x"]
    dec = cells["x_dec"]
    if x:
        assert abs(float(dec) - float(x)) <= abs(float(x)) * 1e-11


def test_decimal_rendering():
    assert decimal12(Fraction(1, 3)) == "0.333333333333"
    assert decimal12(Fraction(2, 3)) == "0.666666666667"
    assert render_csv([{"a": Fraction(1, 2)}], "hdr").splitlines() == ["# hdr", "a,a_dec", "1/2,0.5"]
