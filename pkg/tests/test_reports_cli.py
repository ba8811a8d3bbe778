import json
import math
from pathlib import Path

import numpy as np
import pytest

from sinegap.cli import main
from sinegap.phase import GapEstimate
from sinegap.reports import (read_json, write_estimates_csv, write_json,
                             write_points_csv)


def test_estimates_csv_roundtrip(tmp_path):
    est = GapEstimate(value=1 / 3, stderr=math.pi * 1e-4, n_samples=10,
                      method="direct", seed=7, beta=2.0, lam=2.0, k=0, dt=1e-3)
    path = tmp_path / "est.csv"
    write_estimates_csv(path, [est])
    header, row = path.read_text().strip().splitlines()
    assert header == "beta,lambda,k,method,value,stderr,n_samples,seed,dt"
    fields = row.split(",")
    assert float(fields[4]) == est.value  # repr round-trips exactly
    assert float(fields[5]) == est.stderr


def test_points_csv(tmp_path):
    path = tmp_path / "pts.csv"
    write_points_csv(path, [np.array([0.5, 1.5]), np.array([2.5])])
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "sample_id,point_location"
    assert len(lines) == 4
    assert lines[3].startswith("1,")


def test_json_writer_sorted_and_versioned(tmp_path):
    path = tmp_path / "r.json"
    write_json(path, {"b": np.float64(1.5), "a": np.int64(2),
                      "c": np.array([1.0, 2.0]), "d": np.bool_(True)})
    data = read_json(path)
    assert data["schema_version"] == 1
    assert data["c"] == [1.0, 2.0]
    assert list(json.loads(path.read_text())) == sorted(data)


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def test_cli_gap_direct_and_determinism(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    argv = ["gap-direct", "--beta", "2", "--lambda", "2", "--k", "0",
            "--n", "2000", "--seed", "1"]
    assert main(argv + ["--out", str(out1)]) == 0
    assert main(argv + ["--out", str(out2)]) == 0
    for name in ("gap_direct_estimates.csv", "gap_direct.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    row = (out1 / "gap_direct_estimates.csv").read_text().splitlines()[1]
    assert row.split(",")[3] == "direct"


def test_cli_rejects_bad_lambda(tmp_path, capsys):
    code = main(["gap-direct", "--beta", "2", "--lambda", "-1",
                 "--n", "10", "--out", str(tmp_path)])
    assert code == 2
    assert "lambda" in capsys.readouterr().err


def test_cli_missing_required(tmp_path, capsys):
    code = main(["gap-direct", "--lambda", "2", "--out", str(tmp_path)])
    assert code == 2
    assert "beta" in capsys.readouterr().err


def test_cli_oracle_fredholm(tmp_path):
    assert main(["oracle", "fredholm", "--lambda", "0",
                 "--out", str(tmp_path)]) == 0
    row = read_json(tmp_path / "oracle_fredholm.json")["result"]
    assert row["value"] == 1.0


def test_cli_p1_table_and_gap_is(tmp_path):
    out = str(tmp_path)
    assert main(["p1-table", "--beta", "2", "--n-per-point", "200",
                 "--seed", "5", "--out", out]) == 0
    table_path = tmp_path / "p1_table_beta2.json"
    assert table_path.exists()
    assert main(["gap-is", "--beta", "2", "--lambda", "4", "--n", "1000",
                 "--seed", "6", "--table", str(table_path),
                 "--out", out]) == 0
    payload = read_json(tmp_path / "gap_is.json")
    assert payload["estimate"]["method"] == "importance"
    assert 0.3 < payload["estimate"]["value"] < 0.5
    assert payload["g_equivalence_rms"] < 0.1
    # mismatched beta is refused
    code = main(["gap-is", "--beta", "1", "--lambda", "4", "--n", "100",
                 "--seed", "6", "--table", str(table_path), "--out", out])
    assert code == 2
    # missing table file is refused
    code = main(["gap-is", "--beta", "2", "--lambda", "4", "--n", "100",
                 "--seed", "6", "--table", str(tmp_path / "nope.json"),
                 "--out", out])
    assert code == 2


def test_cli_config_file_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("beta = 2\nlam = 2\nn = 500\nseed = 9\n# comment\n")
    out1 = tmp_path / "o1"
    assert main(["gap-direct", "--config", str(cfg), "--out", str(out1)]) == 0
    payload = read_json(out1 / "gap_direct.json")
    assert payload["estimate"]["n_samples"] == 500
    # flag overrides the file
    out2 = tmp_path / "o2"
    assert main(["gap-direct", "--config", str(cfg), "--n", "300",
                 "--out", str(out2)]) == 0
    assert read_json(out2 / "gap_direct.json")["estimate"]["n_samples"] == 300


def test_cli_embedded_config_reproduces_run(tmp_path):
    out1 = tmp_path / "r1"
    assert main(["gap-direct", "--beta", "2", "--lambda", "1.5", "--n", "800",
                 "--seed", "3", "--out", str(out1)]) == 0
    payload = read_json(out1 / "gap_direct.json")
    rc = payload["run_config"]
    out2 = tmp_path / "r2"
    argv = ["gap-direct", "--beta", str(rc["beta"]), "--lambda",
            str(rc["lam"]), "--k", str(rc["k"]), "--n", str(rc["n"]),
            "--seed", str(rc["seed"]), "--out", str(out2)]
    assert main(argv) == 0
    a = (out1 / "gap_direct_estimates.csv").read_bytes()
    b = (out2 / "gap_direct_estimates.csv").read_bytes()
    assert a == b


def test_cli_sample_points(tmp_path):
    assert main(["sample-points", "--beta", "2", "--lambda-max", "3.0",
                 "--resolution", "8", "--n-samples", "3", "--seed", "2",
                 "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "sample_points.csv").read_text().splitlines()
    assert lines[0] == "sample_id,point_location"


def test_cli_oracle_matrix(tmp_path):
    assert main(["oracle", "matrix", "--beta", "2", "--lambda", "2",
                 "--n", "100", "--samples", "120", "--seed", "4",
                 "--out", str(tmp_path)]) == 0
    text = (tmp_path / "oracle_matrix.csv").read_text()
    assert text.splitlines()[0] == \
        "oracle,beta,lambda,k,n_or_order,value,stderr_or_tol,seed"


def test_cli_threads_do_not_change_results(tmp_path):
    outs = []
    for threads, name in ((1, "t1"), (3, "t3")):
        out = tmp_path / name
        assert main(["gap-direct", "--beta", "2", "--lambda", "2",
                     "--n", "2000", "--seed", "1", "--threads", str(threads),
                     "--out", str(out)]) == 0
        outs.append((out / "gap_direct_estimates.csv").read_bytes())
    assert outs[0] == outs[1]


def test_cli_emit_plot_data(tmp_path):
    assert main(["gap-direct", "--beta", "2", "--lambda", "2", "--n", "500",
                 "--seed", "1", "--emit-plot-data", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "gap_direct_plot_data.csv").read_text().splitlines()
    assert lines[0] == "x,y,yerr"
    assert len(lines) == 2
