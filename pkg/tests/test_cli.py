import json
import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from kobolbasket import IndexSet
from kobolbasket.cli import main
from kobolbasket.io import quote_from_json


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_price_one_asset(capsys, data_dir):
    code, out, _ = run(capsys, "price", "--model", str(data_dir / "model_n1.json"), "--market", str(data_dir / "market_n1.json"))
    assert code == 0
    rows = dict(line.split(None, 1) for line in out.strip().splitlines())
    assert float(rows["value"]) == pytest.approx(11.483016970622867, abs=1e-6)
    assert rows["P"] == "31"


def test_price_json_round_trip(capsys, data_dir, tmp_path):
    out_file = tmp_path / "q.json"
    code, out, _ = run(
        capsys,
        "price",
        "--model", str(data_dir / "model_n1.json"),
        "--market", str(data_dir / "market_n1.json"),
        "--format", "json",
        "--out", str(out_file),
    )
    assert code == 0 and out == ""
    q = quote_from_json(out_file.read_text())
    assert q.value == pytest.approx(11.483016970622867, abs=1e-6)


def test_price_csv_and_budget(capsys, data_dir):
    m, mk = str(data_dir / "model_n1.json"), str(data_dir / "market_n1.json")
    code, out, _ = run(capsys, "price", "--model", m, "--market", mk, "--format", "csv", "-M", "200")
    head, row = out.strip().splitlines()
    assert code == 0 and len(head.split(",")) == len(row.split(","))
    code, out, _ = run(capsys, "budget", "--model", m, "--market", mk, "--damping", "-2.5")
    keys = [line.split()[0] for line in out.strip().splitlines()]
    assert code == 0 and keys[0] == "alias" and "value" not in keys


def test_infeasible_model(capsys, data_dir):
    code, _, err = run(
        capsys, "price", "--model", str(data_dir / "model_shallow.json"), "--market", str(data_dir / "market_n1.json")
    )
    assert code == 2
    assert "eps_1 < -1" in err


def test_missing_file(capsys, data_dir, tmp_path):
    code, _, err = run(capsys, "price", "--model", str(tmp_path / "nope.json"), "--market", str(data_dir / "market_n1.json"))
    assert code == 1 and "ParameterError" in err


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["price", "--model", "m.json"],
        ["price", "--model", "m.json", "--market", "k.json", "-M", "10", "-R", "100"],
        ["price", "--model", "m.json", "--market", "k.json", "--terms", "-5"],
        ["validate", "--scope", "nope"],
    ],
)
def test_usage_errors(capsys, argv):
    code, _, _ = run(capsys, *argv)
    assert code == 1


def test_cap_exceeded(capsys, data_dir):
    code, _, err = run(capsys, "indexset", "--model", str(data_dir / "model_n2.json"), "-T", "0.5", "--cap", "100")
    assert code == 3 and "ResourceError" in err


def test_indexset_export(capsys, data_dir, tmp_path):
    path = tmp_path / "idx.csv"
    code, out, _ = run(
        capsys,
        "indexset",
        "--model", str(data_dir / "model_n1.json"),
        "--market", str(data_dir / "market_n1.json"),
        "--format", "json",
        "--export", str(path),
    )
    assert code == 0
    rec = json.loads(out)
    idx = IndexSet.load(path)
    assert len(idx) == rec["count"]
    assert rec["R_from_M"] == pytest.approx(rec["R"], rel=1e-12)
    assert rec["ln_R"] == pytest.approx(10.0)


def test_density_grid(capsys, data_dir):
    code, out, _ = run(
        capsys, "density", "--model", str(data_dir / "model_n1.json"), "-T", "0.5", "--grid=-6:6:1201", "--p-norm", "2"
    )
    assert code == 0
    lines = out.strip().splitlines()
    head = dict(kv.split("=") for kv in lines[0][2:].split())
    assert lines[1] == "x_1,density,imag_residual"
    # the Lp bound is the sup bound scaled by P^(n/p)
    P = int(head["P"])
    code, out_inf, _ = run(capsys, "density", "--model", str(data_dir / "model_n1.json"), "-T", "0.5", "--grid", "0:0:1")
    head_inf = dict(kv.split("=") for kv in out_inf.strip().splitlines()[0][2:].split())
    assert float(head["alias_bound"]) == pytest.approx(float(head_inf["alias_bound"]) * math.sqrt(P), rel=1e-10)
    data = np.array([[float(v) for v in line.split(",")] for line in lines[2:]])
    mass = trapezoid(data[:, 1], data[:, 0])
    assert mass == pytest.approx(1.0, abs=1e-4)


def test_density_two_asset_json(capsys, data_dir):
    code, out, _ = run(
        capsys,
        "density",
        "--model", str(data_dir / "model_n2.json"),
        "--market", str(data_dir / "market_n2.json"),
        "-R", str(math.exp(4.0)),
        "--eps-alias", "1e-4",
        "--grid=-0.5:0.5:3",
        "--format", "json",
    )
    assert code == 0
    rec = json.loads(out)
    assert len(rec["density"]) == 9 and rec["p_norm"] == "inf"


def test_validate_gamma(capsys):
    code, out, _ = run(capsys, "validate", "--scope", "gamma")
    assert code == 0 and out.strip().endswith("1/1 passed")


def test_validate_reports_failure(capsys, monkeypatch):
    import kobolbasket.payoff as payoff

    bad = payoff.LANCZOS_COEFFS.copy()
    bad[3] *= 1 + 1e-6
    monkeypatch.setattr(payoff, "LANCZOS_COEFFS", bad)
    code, out, _ = run(capsys, "validate", "--scope", "gamma")
    assert code == 4 and out.startswith("FAIL")
