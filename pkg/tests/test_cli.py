import csv
import json
import math
from pathlib import Path

import pytest

from weakdiqkd.cli import main, sweep_rows

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_bounds_reports_product_bound(capsys):
    code, out, _ = run(capsys, "bounds", "--loss", "0.03", "--json")
    assert code == 0
    payload = json.loads(out)
    assert payload["R_of_L"] == pytest.approx(0.786141, abs=1e-6)
    code, out, _ = run(capsys, "bounds", "--loss", "0")
    assert code == 0 and "R_of_L = 0.75" in out


def test_bounds_fraction_and_solver(capsys):
    code, out, _ = run(capsys, "bounds", "--loss", "0.03", "--robs", "0.801777",
                       "--fraction", "0.723026", "--json")
    payload = json.loads(out)
    assert payload["f_max"] == pytest.approx(0.723026, abs=2e-3)
    assert payload["R_obs_min"] == pytest.approx(0.801777, abs=1e-3)
    assert payload["status"] == "secure"


@pytest.mark.parametrize("argv", [["bounds", "--loss", "1.5"],
                                  ["bounds", "--loss", "0.03", "--robs", "-1"],
                                  ["quantum", "--dim", "1"],
                                  ["sweep", "loss", "--lo", "0.1", "--hi", "0.0"]])
def test_invalid_input_exit_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2 and "error" in err


def test_quantum_anchor_flags(capsys):
    code, out, _ = run(capsys, "quantum", "--dim", "2", "--dim", "5", "--json")
    assert code == 0
    rows = {r["d"]: r for r in json.loads(out)["results"]}
    refs2 = {r["value"]: r["matches"] for r in rows[2]["references"]}
    assert refs2 == {0.8177: False, 0.801777: True}
    ref5 = rows[5]["references"][0]
    assert ref5["value"] == 0.8516 and not ref5["matches"]
    assert ref5["difference"] == pytest.approx(-0.0105, abs=5e-4)
    assert ref5["matches_optimal_state"]
    assert rows[5]["optimal_state_value"] == pytest.approx(0.8516, abs=1e-4)


def test_quantum_text_output(capsys):
    code, out, _ = run(capsys, "quantum")
    assert code == 0 and out.startswith("d=2") and "0.801777" in out


def test_sweep_loss_csv(capsys, tmp_path):
    target = tmp_path / "fig1.csv"
    code, _, _ = run(capsys, "sweep", "loss", "--lo", "0", "--hi", "0.1", "--steps", "11",
                     "--out", str(target))
    assert code == 0
    raw = target.read_bytes()
    assert b"\r\n" not in raw
    rows = list(csv.DictReader(raw.decode().splitlines()))
    assert list(rows[0]) == ["L", "R_of_L", "Q_d2", "Q_d4", "Q_d32"]
    row = next(r for r in rows if abs(float(r["L"]) - 0.03) < 1e-12)
    assert float(row["R_of_L"]) == pytest.approx(0.786141, abs=1e-6)


def test_sweep_fraction_curve_passes_reference_point():
    header, rows = sweep_rows("fraction", 0.001, 0.999, 999, loss=0.03)
    assert header == ["f", "R_obs_min"]
    f_at = min(rows, key=lambda r: abs(r[0] - 0.723026))
    assert f_at[0] == pytest.approx(0.723026, abs=1e-3)
    assert f_at[1] == pytest.approx(0.801777, abs=1e-3)
    values = [r[1] for r in rows]
    assert all(x < y for x, y in zip(values, values[1:]))
    # small-f end sits just above the R(L) + L(1 - R(L)) floor
    assert values[0] == pytest.approx(0.786141 + 0.03 * (1 - 0.786141), abs=1e-3)


def test_sweep_dim_json(capsys):
    code, out, _ = run(capsys, "sweep", "dim", "--lo", "2", "--hi", "8", "--steps", "3",
                       "--json")
    payload = json.loads(out)
    assert [r[0] for r in payload["rows"]] == [2, 4, 8]
    fmax = [r[4] for r in payload["rows"]]
    assert fmax[1] == pytest.approx(0.999416, abs=2e-5)


def test_sweep_unwritable_path(capsys, tmp_path):
    code, _, err = run(capsys, "sweep", "loss", "--steps", "3",
                       "--out", str(tmp_path / "missing" / "x.csv"))
    assert code == 2 and "cannot write" in err


def test_sweep_threads_keep_order(monkeypatch):
    serial = sweep_rows("fraction", 0.1, 0.9, 9)
    monkeypatch.setenv("DIQKD_THREADS", "4")
    assert sweep_rows("fraction", 0.1, 0.9, 9) == serial


def test_simulate_is_byte_identical(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for target in (a, b):
        code, _, _ = run(capsys, "simulate", "--config", str(CONFIGS / "honest.json"),
                         "--seed", "11", "--out", str(target))
        assert code == 0
    assert a.read_bytes() == b.read_bytes()
    report = json.loads(a.read_text())
    assert report["verdict"] == "secure" and report["schema_version"] == 1


def test_simulate_product_only_alarm(capsys):
    code, out, _ = run(capsys, "simulate", "--config", str(CONFIGS / "product_only.json"))
    assert code == 3
    assert json.loads(out)["verdict"] == "alarm"


def test_simulate_sublinear_demo(capsys):
    code, out, _ = run(capsys, "simulate", "--config", str(CONFIGS / "sublinear_demo.json"),
                       "--seed", "1")
    report = json.loads(out)
    assert code == 0
    assert report["eve_guess_fraction"] >= 0.99
    assert report["verdict"] == "secure"


def test_simulate_flag_overrides(capsys):
    code, out, _ = run(capsys, "simulate", "--config", str(CONFIGS / "honest.json"),
                       "--attack", "combined", "--k", "0.5", "--json")
    assert code == 0
    assert json.loads(out)["eve_known_fraction"] == 1.0


def test_schema_error_has_line_number(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "N": 1000,\n  "f": 0.5,\n  "d": "two"\n}\n')
    code, _, err = run(capsys, "simulate", "--config", str(bad))
    assert code == 2
    assert f"{bad}:4:" in err and "d" in err


def test_invalid_json_reports_position(capsys, tmp_path):
    bad = tmp_path / "broken.json"
    bad.write_text('{\n  "N": 1000,\n  "f": 0.5,\n}\n')
    code, _, err = run(capsys, "simulate", "--config", str(bad))
    assert code == 2 and f"{bad}:4:" in err


def test_infeasible_attack_is_usage_error(capsys):
    code, _, err = run(capsys, "simulate", "--config", str(CONFIGS / "honest.json"),
                       "--attack", "sublinear", "--alpha", "0.5", "--k", "0.01")
    assert code == 2 and "error" in err


def test_csv_numbers_use_dot_decimal(capsys):
    _, out, _ = run(capsys, "sweep", "loss", "--steps", "3")
    assert len(out.strip().splitlines()) == 4
    for line in out.strip().splitlines()[1:]:
        for cell in line.split(","):
            assert not math.isnan(float(cell))
