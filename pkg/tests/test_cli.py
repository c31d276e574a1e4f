import json

import numpy as np
import pytest

from pooldesign import load_design, write_measurements
from pooldesign.cli import main, parse_grid


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_parse_grid():
    assert np.allclose(parse_grid("0:0.12:0.005"), np.arange(25) * 0.005)
    assert parse_grid("0.05").tolist() == [0.05]
    # inclusive endpoint despite float drift
    values = parse_grid("0:0.1:0.01")
    assert len(values) == 11
    assert values[-1] == pytest.approx(0.1)
    with pytest.raises(ValueError):
        parse_grid("0:1:0:2")
    with pytest.raises(ValueError):
        parse_grid("0:1:-0.5")


def test_design_by_params(tmp_path, capsys):
    out = tmp_path / "design.json"
    code, stdout, _ = run(capsys, "design", "--q", "31", "--s", "7", "--out", str(out))
    assert code == 0
    assert "m=248" in stdout and "n=961" in stdout
    design = load_design(out)
    assert (design.q, design.s) == (31, 7)


def test_design_by_population(tmp_path, capsys):
    out = tmp_path / "design.json"
    code, stdout, _ = run(
        capsys, "design", "--people", "10000", "--prevalence", "0.001",
        "--out", str(out),
    )
    assert code == 0
    design = load_design(out)
    assert (design.q, design.s) == (101, 10)


def test_design_invalid_params(tmp_path, capsys):
    out = tmp_path / "design.json"
    code, _, err = run(capsys, "design", "--q", "30", "--s", "7", "--out", str(out))
    assert code == 2 and "prime" in err
    code, _, err = run(capsys, "design", "--q", "5", "--s", "5", "--out", str(out))
    assert code == 2
    code, _, err = run(
        capsys, "design", "--q", "5", "--s", "2", "--people", "100",
        "--prevalence", "0.01", "--out", str(out),
    )
    assert code == 2


def test_verify_good_design(tmp_path, capsys):
    out = tmp_path / "design.json"
    run(capsys, "design", "--q", "5", "--s", "2", "--out", str(out))
    code, stdout, _ = run(capsys, "verify", "--design", str(out), "--check-disjunct")
    assert code == 0
    assert "coherence=1" in stdout
    assert "disjunct: yes" in stdout
    assert "bound_constant=" in stdout


def test_verify_tampered_design(tmp_path, capsys):
    out = tmp_path / "design.json"
    run(capsys, "design", "--q", "5", "--s", "2", "--out", str(out))
    payload = json.loads(out.read_text())
    payload["ones"][0][0] = (payload["ones"][0][0] + 5) % 15
    out.write_text(json.dumps(payload))
    code, _, err = run(capsys, "verify", "--design", str(out))
    assert code == 3


def test_verify_skips_unaffordable_disjunct(tmp_path, capsys):
    out = tmp_path / "design.json"
    run(capsys, "design", "--q", "31", "--s", "7", "--out", str(out))
    code, stdout, _ = run(capsys, "verify", "--design", str(out), "--check-disjunct")
    assert code == 0
    assert "disjunct: skipped" in stdout


def test_pools(tmp_path, capsys):
    design_path = tmp_path / "design.json"
    run(capsys, "design", "--q", "5", "--s", "2", "--out", str(design_path))
    sheet = tmp_path / "pools.csv"
    code, stdout, _ = run(capsys, "pools", "--design", str(design_path),
                          "--out", str(sheet))
    assert code == 0
    assert "volume_fraction=1/3" in stdout
    lines = sheet.read_text().splitlines()
    assert len(lines) == 16
    assert lines[0] == "test_id,specimen_ids"


def test_decode_roundtrip(tmp_path, capsys):
    design_path = tmp_path / "design.json"
    run(capsys, "design", "--q", "5", "--s", "2", "--out", str(design_path))
    design = load_design(design_path)
    x = np.zeros(design.n)
    x[[4, 20]] = [120.0, 75.0]
    meas = tmp_path / "meas.csv"
    write_measurements(design.forward(x), meas)
    result = tmp_path / "result.json"
    code, stdout, _ = run(
        capsys, "decode", "--design", str(design_path), "--measurements", str(meas),
        "--epsilon", "10", "--out", str(result),
    )
    assert code == 0
    assert "infected=2" in stdout
    payload = json.loads(result.read_text())
    flagged = sorted(c["individual"] for c in payload["calls"] if c["infected"])
    assert flagged == [4, 20]


def test_decode_dimension_mismatch(tmp_path, capsys):
    design_path = tmp_path / "design.json"
    run(capsys, "design", "--q", "5", "--s", "2", "--out", str(design_path))
    meas = tmp_path / "meas.csv"
    write_measurements(np.zeros(7), meas)
    code, _, err = run(
        capsys, "decode", "--design", str(design_path), "--measurements", str(meas),
        "--out", str(tmp_path / "result.json"),
    )
    assert code == 4


def test_budget_table(capsys):
    code, stdout, _ = run(capsys, "budget", "--people", "900", "--prevalence", "0.01")
    assert code == 0
    lines = stdout.splitlines()
    assert lines[0] == "method,pool_size,tests_per_individual"
    table = {line.split(",")[0]: line.split(",")[1:] for line in lines[1:]}
    assert table["circulant"] == ["31", f"{10 / 31:.6f}"]
    assert table["dorfman"][0] == "11"
    assert float(table["dorfman"][1]) == pytest.approx(0.1956, abs=1e-3)
    assert float(table["disjunct_bound"][1]) == pytest.approx(0.5573, abs=1e-3)


def test_budget_degenerate(capsys):
    code, stdout, _ = run(capsys, "budget", "--people", "100", "--prevalence", "0.01")
    assert code == 0
    assert "disjunct_bound,n/a,n/a" in stdout


def test_simulate_requires_seed(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        main(["simulate", "--q", "5", "--s", "2", "--out", str(tmp_path / "g.csv")])
    assert info.value.code == 2


def test_simulate_and_heatmap(tmp_path, capsys):
    grid = tmp_path / "grid.csv"
    args = [
        "simulate", "--q", "5", "--s", "2",
        "--p-grid", "0:0.08:0.08", "--pe-grid", "0:0.04:0.04",
        "--trials", "3", "--seed", "42", "--out", str(grid),
    ]
    code, stdout, _ = run(capsys, *args)
    assert code == 0
    assert "cells=4" in stdout
    assert "region check skipped" in stdout
    first = grid.read_bytes()

    code, _, _ = run(capsys, *args)
    assert code == 0
    assert grid.read_bytes() == first  # same seed, byte-identical

    svg = tmp_path / "map.svg"
    code, stdout, _ = run(capsys, "heatmap", "--grid", str(grid), "--out", str(svg))
    assert code == 0
    assert svg.read_text().startswith("<?xml")


def test_missing_file_is_parameter_error(tmp_path, capsys):
    code, _, err = run(capsys, "verify", "--design", str(tmp_path / "nope.json"))
    assert code == 3  # malformed/unreadable design file
