import csv

import numpy as np
import pytest

from covadj.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION, main
from covadj.io import fmt, read_keyvalue, read_observed_csv, write_csv
from covadj.model import builtin_model
from covadj.nls import FitConfig
from covadj.pipeline import analyze
from covadj.sim import generate, get_scenario


def _rows(path):
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    return list(csv.reader(lines))


@pytest.fixture
def simulated(tmp_path):
    assert main(["simulate", "--scenario", "ex41", "--n", "250", "--seed", "4", "--out", str(tmp_path / "s")]) == 0
    return tmp_path / "s" / "observed.csv"


def test_simulate_writes_exact_values(simulated):
    lat = generate(get_scenario("ex41"), 250, seed=4)
    obs = read_observed_csv(simulated)
    assert np.array_equal(obs.u, lat.u)
    assert np.array_equal(obs.yt, lat.yt)
    assert np.array_equal(obs.xt, lat.xt)


def test_fit_round_trip_bit_identical(simulated, tmp_path):
    out = tmp_path / "f"
    assert main(["fit", "--input", str(simulated), "--model", "expsat", "--init", "1,1", "--out", str(out)]) == 0
    rows = _rows(out / "fit.csv")
    row = dict(zip(rows[0], rows[1]))
    an = analyze(generate(get_scenario("ex41"), 250, seed=4).observed(), builtin_model("expsat"),
                 FitConfig(init=(1.0, 1.0)))
    assert float(row["beta1"]) == an.fit.beta_hat[0]
    assert float(row["beta2"]) == an.fit.beta_hat[1]
    assert float(row["sigma12"]) == an.sigma.sigma[0, 1]
    assert row["beta1"] == fmt(an.fit.beta_hat[0])


def test_same_config_byte_identical(simulated, tmp_path):
    args = ["fit", "--input", str(simulated), "--model", "expsat", "--init", "1,1", "--curve"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ("fit.csv", "fit.txt", "curve_psi.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_report_embeds_config(simulated, tmp_path):
    main(["fit", "--input", str(simulated), "--model", "expsat", "--init", "1,1", "--alpha", "0.1",
          "--out", str(tmp_path / "f")])
    head = [ln for ln in (tmp_path / "f" / "fit.csv").read_text().splitlines() if ln.startswith("#")]
    assert "# alpha=0.1" in head and "# model=expsat" in head and "# init=1.0,1.0" in head


def test_config_file_and_flag_precedence(simulated, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"input = {simulated}\nmodel = expsat\ninit = 1,1\nalpha = 0.2  # comment\n")
    assert main(["fit", "--config", str(cfg), "--alpha", "0.05", "--out", str(tmp_path / "f")]) == 0
    head = (tmp_path / "f" / "fit.csv").read_text()
    assert "# alpha=0.05" in head


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("colour = blue\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_VALIDATION


def test_missing_column_names_it(simulated, tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    rows = _rows(simulated)
    with bad.open("w", newline="") as fh:
        w = csv.writer(fh)
        for r in rows:
            w.writerow([r[0], r[1]])  # drop y
    code = main(["fit", "--input", str(bad), "--model", "expsat", "--init", "1,1", "--out", str(tmp_path / "f")])
    assert code == EXIT_VALIDATION
    assert "'y'" in capsys.readouterr().err


def test_malformed_value_reports_line(simulated, tmp_path, capsys):
    text = simulated.read_text().splitlines()
    idx = next(i for i, ln in enumerate(text) if not ln.startswith("#")) + 3
    parts = text[idx].split(",")
    parts[1] = "abc"
    text[idx] = ",".join(parts)
    bad = tmp_path / "bad.csv"
    bad.write_text("\n".join(text) + "\n")
    code = main(["fit", "--input", str(bad), "--model", "expsat", "--init", "1,1", "--out", str(tmp_path / "f")])
    assert code == EXIT_VALIDATION
    err = capsys.readouterr().err
    assert f":{idx + 1}:" in err and "x1" in err


def test_missing_file_and_bad_alpha(tmp_path):
    assert main(["fit", "--input", str(tmp_path / "nope.csv"), "--model", "expsat", "--init", "1,1",
                 "--out", str(tmp_path)]) == EXIT_VALIDATION
    assert main(["coverage", "--alpha", "1.5", "--out", str(tmp_path)]) == EXIT_VALIDATION


def test_nonconvergence_exit_code(simulated, tmp_path):
    code = main(["fit", "--input", str(simulated), "--model", "expsat", "--init", "1,1", "--max-iter", "1",
                 "--out", str(tmp_path / "f")])
    assert code == EXIT_NUMERICAL


def test_region_after_fit(simulated, tmp_path):
    f = tmp_path / "f"
    assert main(["fit", "--input", str(simulated), "--model", "expsat", "--init", "1,1", "--out", str(f)]) == 0
    r = tmp_path / "r"
    assert main(["region", "--input", str(simulated), "--fit", str(f / "fit.csv"), "--resolution", "9",
                 "--out", str(r)]) == 0
    el = np.array(_rows(r / "region.csv")[1:], dtype=float)
    wald = np.array(_rows(r / "region_wald.csv")[1:], dtype=float)
    assert el.shape == (81, 4) and wald.shape == (81, 4)
    centre = el[40]
    assert centre[3] == 1.0 and wald[40, 2] < 1e-20


def test_coverage_report(tmp_path):
    out = tmp_path / "c"
    assert main(["coverage", "--scenario", "ex42", "--n", "120", "--reps", "3", "--seed", "2", "--out", str(out)]) == 0
    rows = _rows(out / "mc_report.csv")
    assert rows[0][:5] == ["scenario", "n", "replicates", "seed", "alpha"]
    assert rows[1][0] == "ex42" and rows[1][2] == "3"
    assert "Normal approximation" in (out / "mc_report.txt").read_text()


def test_bandwidth_command(simulated, tmp_path):
    assert main(["bandwidth", "--input", str(simulated), "--grid-size", "8", "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "bandwidth.csv")
    assert len(rows) == 1 + 16
    assert sum(r[4] == "1" for r in rows[1:]) == 2


def test_efficiency_map_command(tmp_path):
    m = tmp_path / "m.txt"
    m.write_text("ex = 2\nex2 = 5.144\nvar_psi = 0.08\ne_psiphi = 1\nsigma2 = 0.25\n")
    assert main(["efficiency-map", "--moments", str(m), "--out", str(tmp_path)]) == 0
    labels = [r[2] for r in _rows(tmp_path / "efficiency_map.csv")[1:]]
    assert len(labels) == 61 * 61
    assert {"R1", "R2", "R3", "R4"} <= set(labels)
    m.write_text("ex = 2\n")
    assert main(["efficiency-map", "--moments", str(m), "--out", str(tmp_path)]) == EXIT_VALIDATION


def test_io_helpers(tmp_path):
    write_csv(tmp_path / "t.csv", ["a", "b"], [[0.1, 2], [np.nan, True]], {"k": 0.1})
    text = (tmp_path / "t.csv").read_text()
    assert text.splitlines() == ["# k=0.1", "a,b", "0.10000000000000001,2", "nan,1"]
    assert float("0.10000000000000001") == 0.1
    (tmp_path / "kv").write_text("a-b = 3\n\n# only comment\n")
    assert read_keyvalue(tmp_path / "kv") == {"a_b": "3"}
    (tmp_path / "kv").write_text("novalue\n")
    with pytest.raises(Exception):
        read_keyvalue(tmp_path / "kv")
