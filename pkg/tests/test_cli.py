"""CLI round trip: synth -> prepare -> query / export / sweep / kernels."""

import os

import pytest

from ebsopt.cli import main


@pytest.fixture(scope="module")
def cli_world(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    raw = str(root / "raw")
    data = str(root / "data")
    assert main(["synth", "--out", raw, "--spots", "6", "--days", "60",
                 "--seed", "2", "--trips-per-day", "50"]) == 0
    assert main(["prepare", "--trips", f"{raw}/trips.csv",
                 "--weather", f"{raw}/weather.csv",
                 "--stations", f"{raw}/stations.csv",
                 "--out", data, "--trees", "8", "--depth", "3",
                 "--min-leaf", "5", "--fleet", "40",
                 "--vehicle-capacity", "12", "--battery-capacity", "16",
                 "--initial-full", "10", "--seed", "3"]) == 0
    return raw, data


def test_prepare_outputs(cli_world):
    _raw, data = cli_world
    assert os.path.exists(os.path.join(data, "forest.txt"))
    assert os.path.exists(os.path.join(data, "config.json"))
    assert os.path.exists(os.path.join(data, "store", "manifest.txt"))


def test_query_command(cli_world, tmp_path, capsys):
    _raw, data = cli_world
    trace_path = str(tmp_path / "trace.txt")
    code = main(["query", "increase available e-bikes at spots 1 and 2",
                 "--data", data, "--max-parameterized", "3",
                 "--trace-out", trace_path])
    out = capsys.readouterr().out
    assert code == 0
    assert "status:" in out
    with open(trace_path, encoding="utf-8") as fh:
        assert fh.readline().startswith("ebsopt-trace v1")


def test_export_lp(cli_world, tmp_path, capsys):
    _raw, data = cli_world
    out_path = str(tmp_path / "model.lp")
    assert main(["export-lp", "--data", data, "--model", "e2e",
                 "--out", out_path]) == 0
    text = open(out_path, encoding="utf-8").read()
    assert text.startswith("min p0:")
    assert "balance[0,k1]:" in text
    assert "int:" in text


def test_sweep_command(cli_world, capsys):
    _raw, data = cli_world
    assert main(["sweep", "--data", data, "--caps", "1,3,5",
                 "--queries", "4"]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0] == "cap,mean,median,q1,q3,min,max"


def test_ingest_check_command(cli_world, capsys):
    raw, _data = cli_world
    assert main(["ingest-check", "--trips", f"{raw}/trips.csv",
                 "--weather", f"{raw}/weather.csv",
                 "--stations", f"{raw}/stations.csv"]) == 0
    out = capsys.readouterr().out
    assert '"trips_accepted"' in out


def test_bench_kernels_command(capsys):
    assert main(["bench-kernels", "--rows", "80", "--cols", "120",
                 "--pivots", "20"]) == 0
    out = capsys.readouterr().out
    assert "numpy" in out
