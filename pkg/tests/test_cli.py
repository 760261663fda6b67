import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from nhdicke.cli import Grid, ConfigError, OUTPUT_ENV, main


def read_csv(path):
    lines = path.read_text().splitlines()
    header = [l for l in lines if l.startswith("#")]
    rows = list(csv.reader(l for l in lines if not l.startswith("#")))
    return header, rows[0], [[float(x) for x in r] for r in rows[1:]]


def config_value(header, key):
    for line in header:
        k, _, v = line[1:].partition("=")
        if k.strip() == key:
            return v.strip()
    raise KeyError(key)


def test_grid_parsing():
    g = Grid.parse("-1:1:201")
    v = g.values()
    assert len(v) == 201 and v[0] == -1.0 and v[-1] == 1.0 and v[100] == 0.0
    assert Grid.parse("0.5:0.5:1").values().tolist() == [0.5]
    np.testing.assert_allclose(Grid.parse("-8:-3:6", log=True).values(), 10.0 ** np.arange(-8, -2))
    for bad in ("1:2", "0:1:1", "a:1:3", "0:1:0"):
        with pytest.raises(ConfigError):
            Grid.parse(bad)


def test_ep_locus_table(tmp_path):
    out = tmp_path / "locus.csv"
    assert main(["ep-locus", "--t", "0.5", "--kappa", "1", "--omega-grid", "-1:1:201", "--output", str(out)]) == 0
    header, cols, rows = read_csv(out)
    assert cols == ["omega", "delta", "gamma", "omega3"]
    assert len(rows) == 201
    assert float(config_value(header, "t")) == 0.5
    assert config_value(header, "omega_grid") == "-1:1:201"
    assert rows[100][0] == 0.0 and rows[-1][0] == 1.0


def test_encircle_json_reports_three_cycle(tmp_path):
    out = tmp_path / "enc.json"
    assert main(["encircle", "--output", str(out)]) == 0
    doc = json.loads(out.read_text())
    meta = doc["meta"]
    assert meta["permutation"] == "312"
    for ph in meta["phase_per_cycle"]:
        assert abs(abs(ph) - 2 * np.pi / 3) < 0.05
    for ph in meta["closure_phases"]:
        assert abs(abs(ph) - 2 * np.pi) < 0.05


def test_quantum_g2_crosses_one(tmp_path):
    out = tmp_path / "g2.csv"
    args = ["quantum-g2", "--eta", "0.01", "--gamma1", "1", "--gamma2", "0.3", "--t", "0",
            "--delta-grid", "0:0:1", "--kappa-grid", "0.1:1.0:4", "--output", str(out)]
    assert main(args) == 0
    _, cols, rows = read_csv(out)
    g2 = np.array([r[cols.index("g2")] for r in rows])
    assert g2.min() < 1 < g2.max()


def test_exit_codes(tmp_path, capsys):
    assert main(["no-such-command"]) == 2
    assert "usage" in capsys.readouterr().err
    assert main([]) == 2
    assert main(["ep-locus", "--bogus", "1", "--output", str(tmp_path / "a")]) == 2
    assert main(["ep-locus", "--omega-grid", "0:1:1", "--output", str(tmp_path / "a")]) == 2
    assert main(["encircle", "--radius", "0", "--output", str(tmp_path / "b")]) == 3
    assert main(["edges", "--n-cells", "1", "--output", str(tmp_path / "c")]) == 3
    assert main(["--help"]) == 0


@pytest.mark.parametrize("sub", ["spectra", "phase-diagram", "nep", "zak", "dynamics"])
def test_reruns_are_byte_identical(tmp_path, sub):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main([sub, "--output", str(a)]) == 0
    assert main([sub, "--output", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().startswith("# nhdicke") or a.read_text().startswith("{")


def test_jobs_do_not_change_output(tmp_path):
    outs = []
    for jobs in ("1", "2"):
        out = tmp_path / f"z{jobs}.csv"
        assert main(["zak", "--lam-grid", "0:2.5:6", "--jobs", jobs, "--output", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nsubcommand = ep-locus\nt = 0.3\nomega_grid = 0:1:5\n")
    out = tmp_path / "o.csv"
    assert main(["--config", str(cfg), "--t", "0.4", "--output", str(out)]) == 0
    header, _, rows = read_csv(out)
    assert float(config_value(header, "t")) == 0.4
    assert len(rows) == 5


def test_output_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env"))
    assert main(["nep"]) == 0
    assert (tmp_path / "env" / "nep.csv").is_file()


def test_console_script_runs(tmp_path):
    out = tmp_path / "p.csv"
    r = subprocess.run([sys.executable, "-m", "nhdicke.cli", "ep-locus", "--kind", "ep3",
                        "--omega-grid", "-1:1:3", "--output", str(out)], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    _, cols, rows = read_csv(out)
    assert cols == ["omega", "delta", "gamma", "t"] and len(rows) == 3
