import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from p1tdre.cli import main
from p1tdre.errors import DataError, DuplicateEdge, ParseError, SelfLoop
from p1tdre.io import (
    dump_json,
    parse_edge_list,
    read_edge_list,
    read_params,
    to_jsonable,
    write_csv,
    write_edge_list,
    write_params,
)
from p1tdre.model import Digraph, ParamVector, linear_design, sample_graph

DATA = Path(__file__).parent / "data"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, json.loads(out.out) if out.out.strip() else None, out.err


# ---------------------------------------------------------------------------
# parsing


def test_parse_examples():
    g = parse_edge_list(["0,1\n", "1,0\n"])
    assert g.n == 2 and g.edges == {(0, 1), (1, 0)}
    with pytest.raises(SelfLoop) as info:
        parse_edge_list(["0,0\n"])
    assert info.value.line == 1


def test_parse_comments_header_and_nodes():
    g = parse_edge_list(["# comment", "src,dst", "", "0, 2", "2,1"], n_nodes=5)
    assert g.n == 5 and g.edges == {(0, 2), (2, 1)}


@pytest.mark.parametrize("lines,exc,line", [
    (["0,1", "0,1"], DuplicateEdge, 2),
    (["0,1", "1;2"], ParseError, 2),
    (["0,1", "1,x"], ParseError, 2),
    (["0,1", "", "1,-2"], ParseError, 3),
    (["0,1", "1,2,3"], ParseError, 2),
    (["src,dst", "0,1", "src,dst"], ParseError, 3),
])
def test_parse_errors_carry_line(lines, exc, line):
    with pytest.raises(exc) as info:
        parse_edge_list(lines)
    assert info.value.line == line
    assert info.value.to_dict()["line"] == line


def test_parse_rejects_out_of_range_and_tiny():
    with pytest.raises(ParseError):
        parse_edge_list(["0,5"], n_nodes=4)
    with pytest.raises(DataError):
        parse_edge_list([])


def test_round_trip_4077_nodes(tmp_path):
    par = linear_design(4078, 0.5, -6.0)
    g = sample_graph(par, 1)
    g = Digraph(4077, *[a[(g.src < 4077) & (g.dst < 4077)] for a in (g.src, g.dst)])
    path = tmp_path / "big.csv"
    write_edge_list(g, path, header=True)
    assert read_edge_list(path, 4077) == g


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 30), st.integers(0, 2**31 - 1))
def test_round_trip_property(n, seed):
    rng = np.random.default_rng(seed)
    par = ParamVector(rng.normal(), rng.normal(), rng.normal(size=n), rng.normal(size=n))
    g = sample_graph(par, seed)
    lines = [f"{a},{b}\n" for a, b in zip(g.src.tolist(), g.dst.tolist())]
    assert parse_edge_list(lines, n) == g


def test_params_and_json_helpers(tmp_path):
    par = linear_design(6, 0.5, -1.0)
    write_params(par, tmp_path / "p.json")
    assert read_params(tmp_path / "p.json") == par
    (tmp_path / "bad.json").write_text("{")
    with pytest.raises(DataError):
        read_params(tmp_path / "bad.json")
    (tmp_path / "wrong.json").write_text('{"rho": 1}')
    with pytest.raises(DataError):
        read_params(tmp_path / "wrong.json")
    assert to_jsonable({"a": np.float64(np.nan), "b": np.arange(2), "c": np.bool_(True)}) == {
        "a": None, "b": [0, 1], "c": True}
    assert dump_json({"b": 1, "a": 2}).index('"a"') < dump_json({"b": 1, "a": 2}).index('"b"')
    write_csv([{"x": 1.5, "y": None}], tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text() == "x,y\n1.5,\n"


# ---------------------------------------------------------------------------
# command line


@pytest.fixture(scope="module")
def dense_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("g") / "dense.csv"
    write_edge_list(sample_graph(linear_design(200, 0.5, 0.0), 4), path)
    return path


def test_simulate_and_estimate(capsys, tmp_path):
    edges = tmp_path / "g.csv"
    code, out, err = run(capsys, "simulate", "--n", 200, "--rho", 0.5, "--theta=-log(n)/10",
                         "--seed", 3, "--edges", edges, "--params-out", tmp_path / "p.json")
    assert code == 0 and out["n"] == 200 and edges.exists()
    assert read_params(tmp_path / "p.json") == linear_design(200, 0.5, -np.log(200) / 10)
    code, out, err = run(capsys, "estimate", "--input", edges, "--method", "auto")
    assert code == 0 and set(out) >= {"theta", "rho", "alpha", "beta"}
    assert err.startswith("estimate:")
    code2, out2, _ = run(capsys, "estimate", "--input", edges, "--method", "sparse",
                         "--emit-asymptotics")
    assert out2["theta"] == out["theta"] and out2["asymptotics"]["source"] == "plugin"


def test_simulate_needs_seed(capsys, tmp_path):
    code, out, _ = run(capsys, "simulate", "--n", 10, "--edges", tmp_path / "x.csv")
    assert code == 1 and out["exit_code"] == 1


def test_complete_mutual_is_degenerate(capsys, tmp_path):
    path = tmp_path / "k.csv"
    write_edge_list(Digraph.from_adjacency(1 - np.eye(6, dtype=int)), path)
    code, out, err = run(capsys, "estimate", "--input", path)
    assert code == 2 and out["error"] == "DegenerateCounts" and out["exit_code"] == 2
    assert err.startswith("error:")


def test_data_errors_exit_one(capsys, tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("0,1\n3,3\n")
    code, out, _ = run(capsys, "estimate", "--input", bad)
    assert code == 1 and out["error"] == "SelfLoop" and out["line"] == 2
    code, out, _ = run(capsys, "estimate", "--input", tmp_path / "missing.csv")
    assert code == 1 and out["error"] == "FileNotFoundError"
    code, out, _ = run(capsys, "no-such-command")
    assert code == 1
    code, out, _ = run(capsys, "estimate", "--input", bad, "--method", "quantum")
    assert code == 1


def test_inference_commands(capsys, dense_csv, tmp_path):
    code, out, err = run(capsys, "test-reciprocity", "--input", dense_csv, "--level", 0.05)
    assert code == 0 and out["test"]["reject"] and "reject=True" in err
    code, out, _ = run(capsys, "test-equality", "--input", dense_csv, "--indices", "0,50,100",
                       "--param", "beta")
    assert code == 0 and out["test"]["null_distribution"] == "chi2(2)"
    code, out, _ = run(capsys, "test-equality", "--input", dense_csv, "--indices", "3,3")
    assert code == 1 and out["error"] == "InvalidIndices"
    code, out, _ = run(capsys, "compare", "--input", dense_csv, "--input2", dense_csv)
    assert code == 0 and out["test"]["statistic"] == 0.0
    target = tmp_path / "out.json"
    code, out, _ = run(capsys, "mle", "--input", dense_csv, "--output", target)
    assert code == 0 and out is None and json.loads(target.read_text())["converged"]


def test_analyze_dense(capsys, dense_csv):
    code, out, _ = run(capsys, "analyze", "--input", dense_csv, "--bins", 10)
    assert code == 0 and out["gamma_size"] == 200
    assert sum(out["histogram"]["alpha"]["counts"]) == 200
    assert len(out["histogram"]["beta"]["edges"]) == 11


def test_analyze_impossible_thresholds(capsys, dense_csv):
    code, out, _ = run(capsys, "analyze", "--input", dense_csv, "--min-in", 200, "--min-out", 200)
    assert code == 2 and out["error"] == "EmptyFilter"


def test_analyze_planted_reciprocity(capsys, tmp_path):
    path = tmp_path / "sparse.csv"
    code, _, _ = run(capsys, "simulate", "--n", 400, "--rho", 2.0, "--theta=-log(n)/2",
                     "--seed", 7, "--edges", path)
    assert code == 0
    code, out, _ = run(capsys, "analyze", "--input", path, "--nodes", 450)
    assert code == 0 and 0 < out["gamma_size"] < 450
    assert out["reciprocity"]["p_value"] < 0.05
    assert out["estimate"]["skipped"]


def test_bench_golden(capsys, tmp_path):
    code, out, _ = run(capsys, "bench", "--config", DATA / "bench_small.toml", "--seed", 11,
                       "--kind", "errors", "--output", tmp_path)
    assert code == 0
    for name in ("errors.csv", "errors.json"):
        assert (tmp_path / name).read_bytes() == (DATA / "golden" / name).read_bytes()
    code, out, _ = run(capsys, "bench", "--config", DATA / "bench_small.toml", "--seed", 11,
                       "--kind", "coverage", "--output", tmp_path)
    for name in ("coverage.csv", "residuals_n100_c0.csv"):
        assert (tmp_path / name).read_bytes() == (DATA / "golden" / name).read_bytes()


def test_bench_requires_seed(capsys):
    code, _, _ = run(capsys, "bench", "--config", DATA / "bench_small.toml")
    assert code == 1


def test_threads_env_and_console_script(tmp_path, dense_csv):
    exe = shutil.which("p1tdre")
    cmd = [exe] if exe else [sys.executable, "-m", "p1tdre.cli"]
    outs = []
    for threads in ("1", "2"):
        env = {"P1TDRE_THREADS": threads, "PATH": "/usr/bin:/bin:/usr/local/bin"}
        proc = subprocess.run(cmd + ["estimate", "--input", str(dense_csv)], capture_output=True,
                              env=env, text=True, check=False)
        assert proc.returncode == 0, proc.stderr
        outs.append(proc.stdout)
    assert outs[0] == outs[1]
