import json
import math

import numpy as np
import pytest

from meander import cli
from meander.gauss_kernels import survival_probability


def read_csv(path):
    lines = path.read_text().splitlines()
    return lines[0], np.array([[float(x) for x in line.split(",")] for line in lines[1:]])


def test_grid_parser():
    assert np.allclose(cli.parse_grid("0:1:5"), [0, 0.25, 0.5, 0.75, 1])
    for bad in ("0:1", "a:b:c", "1:0:5", "0:1:0"):
        with pytest.raises(Exception):
            cli.parse_grid(bad)


def test_density_endpoint_is_rayleigh(tmp_path):
    out = tmp_path / "d.csv"
    assert cli.main(["density", "--law", "endpoint", "--mu", "0", "--v", "0", "--t", "1",
                     "--y-grid", "0.1:4:40", "--out", str(out)]) == 0
    header, data = read_csv(out)
    assert header == "y,density"
    assert np.allclose(data[:, 1], data[:, 0] * np.exp(-0.5 * data[:, 0] ** 2), rtol=1e-14)
    manifest = json.loads((tmp_path / "d.csv.manifest.json").read_text())
    assert manifest["subcommand"] == "density" and manifest["output_paths"] == [str(out)]


def test_excursion_limit_time_reversal(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for s, out in (("0.3", a), ("0.7", b)):
        assert cli.main(["density", "--law", "excursion-limit", "--t", "1", "--s", s, "--y-grid", "0.1:3:30",
                         "--out", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_replay_is_byte_identical(tmp_path):
    hist = tmp_path / "h.csv"
    argv = ["sample", "--kind", "meander", "--u", "0.5", "--mu", "0.5", "--n", "2000", "--n-steps", "64",
            "--seed", "3", "--hist", str(hist), "--y-grid", "0:3:13"]
    assert cli.main(argv) == 0
    first = hist.read_bytes()
    hist.unlink()
    assert cli.main(["replay", str(hist) + ".manifest.json"]) == 0
    assert hist.read_bytes() == first


def test_sample_reports_acceptance_rate(tmp_path, capsys):
    paths = tmp_path / "p.jsonl"
    assert cli.main(["sample", "--kind", "meander", "--u", "0.5", "--mu", "0.5", "--n", "5000", "--n-steps", "32",
                     "--out", str(paths)]) == 0
    line = capsys.readouterr().out.strip()
    fields = dict(kv.split("=") for kv in line.split())
    p = survival_probability(1.0, 0.5, 0.0, 0.5)
    assert float(fields["survival_probability"]) == pytest.approx(p)
    assert abs(float(fields["acceptance_rate"]) - p) < 0.03
    assert len(paths.read_text().splitlines()) == 5000


def test_max_driftless_theta_and_limit(tmp_path):
    out = tmp_path / "m.csv"
    assert cli.main(["max", "--mu", "0", "--v", "0", "--x-grid", "0.5:8:16", "--out", str(out)]) == 0
    header, data = read_csv(out)
    assert header == "x,cdf"
    r = np.arange(-200, 201)
    theta = [np.sum((-1.0) ** np.abs(r) * np.exp(-0.5 * x * x * r * r)) for x in data[:, 0]]
    assert np.allclose(data[:, 1], theta, atol=1e-12)
    assert data[-1, 1] == pytest.approx(1.0, abs=1e-12)


def test_fpt_survival_near_zero_time(tmp_path):
    out = tmp_path / "f.csv"
    assert cli.main(["fpt", "--u", "0.5", "--x", "1.2", "--t-prime", "2", "--s-grid", "0.001:1.5:4",
                     "--out", str(out)]) == 0
    _, data = read_csv(out)
    assert data[0, 1] == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(data[:, 1]) <= 0)
    assert math.isnan(data[0, 2]) and data[-1, 2] > 0


def test_seventeen_significant_digits(capsys):
    assert cli.main(["density", "--law", "endpoint", "--y-grid", "1:1:1"]) == 0
    row = capsys.readouterr().out.splitlines()[1]
    assert row.split(",")[1] == format(math.exp(-0.5), ".17g")


def test_usage_errors_exit_2(capsys):
    assert cli.main(["density", "--law", "meander", "--u", "-1", "--s", "0.5", "--y-grid", "0:1:3"]) == 2
    assert "barrier" in capsys.readouterr().err
    assert cli.main(["density", "--law", "nonsense", "--y-grid", "0:1:3"]) == 2
    assert cli.main(["verify", "--alpha", "abc"]) == 2
    assert cli.main(["verify", "--only", "99"]) == 2
    assert cli.main(["max", "--mu", "0"]) == 2


def test_verify_subset_and_gate_failure(tmp_path):
    report = tmp_path / "r.json"
    assert cli.main(["verify", "--only", "2,9", "--out", str(report), "--csv", str(tmp_path / "r.csv")]) == 0
    data = json.loads(report.read_text())
    assert [d["criterion"] for d in data] == [2, 9] and all(d["passed"] for d in data)
    assert cli.main(["verify", "--only", "10"]) == 1
