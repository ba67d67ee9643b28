import json

import pytest

from cagm.cli import main, read_config
from cagm.graph import load_attributed_graph, write_attributes, write_edges, write_partition


@pytest.fixture
def files(tmp_path, planted_small):
    G, P = planted_small
    write_edges(G, tmp_path / "g.edges")
    write_attributes(G, tmp_path / "g.attrs")
    write_partition(P, tmp_path / "g.part")
    return tmp_path, G


def run(*args):
    return main([str(a) for a in args])


def test_fit_k3(tmp_path):
    (tmp_path / "e").write_text("0 1\n1 2\n0 2\n")
    (tmp_path / "a").write_text("1\n1\n0\n")
    (tmp_path / "p").write_text("0 1\n1 1\n2 1\n")
    assert run("fit", "--edges", tmp_path / "e", "--attrs", tmp_path / "a", "--partition", tmp_path / "p",
               "--out", tmp_path / "o") == 0
    params = json.loads((tmp_path / "o" / "params.json").read_text())
    assert params["theta_m"]["tri_intra"] == 1


def test_missing_file_is_validation_error(tmp_path, capsys):
    (tmp_path / "e").write_text("0 1\n")
    assert run("fit", "--edges", tmp_path / "e", "--attrs", tmp_path / "nope.attrs", "--out", tmp_path) == 2
    assert "nope.attrs" in capsys.readouterr().err


def test_malformed_input_is_validation_error(tmp_path):
    (tmp_path / "e").write_text("0 0\n")
    (tmp_path / "a").write_text("1\n0\n")
    assert run("fit", "--edges", tmp_path / "e", "--attrs", tmp_path / "a", "--out", tmp_path) == 2


def test_fit_is_byte_deterministic(files):
    d, _ = files
    for out in ("a", "b"):
        assert run("fit", "--edges", d / "g.edges", "--attrs", d / "g.attrs", "--out", d / out, "--seed", 3) == 0
    assert (d / "a" / "params.json").read_bytes() == (d / "b" / "params.json").read_bytes()


def test_dp_fit_ledger_and_validation(files):
    d, _ = files
    assert run("dp-fit", "--edges", d / "g.edges", "--attrs", d / "g.attrs", "--eps", 12, "--out", d / "dp") == 0
    params = json.loads((d / "dp" / "params.json").read_text())
    assert [r["eps"] for r in params["ledger"]] == [6, 1, 2, 1, 1, 1]
    assert sum(r["eps"] for r in params["ledger"]) == 12
    assert "total" in (d / "dp" / "ledger.txt").read_text()
    assert run("dp-fit", "--edges", d / "g.edges", "--attrs", d / "g.attrs", "--eps", 0, "--out", d / "x") == 2
    assert run("dp-fit", "--edges", d / "g.edges", "--attrs", d / "g.attrs", "--eps", 1,
               "--partition", d / "g.part", "--out", d / "x") == 2


def test_sample_counts_and_determinism(files):
    d, G = files
    run("fit", "--edges", d / "g.edges", "--attrs", d / "g.attrs", "--partition", d / "g.part", "--out", d / "f")
    for out in ("s1", "s2"):
        assert run("sample", "--params", d / "f" / "params.json", "--samples", 3, "--seed", 5, "--out", d / out) == 0
    texts = [(d / "s1" / f"sample_{i}.edges").read_text() for i in range(3)]
    assert len(set(texts)) == 3
    for i in range(3):
        assert texts[i] == (d / "s2" / f"sample_{i}.edges").read_text()
        H = load_attributed_graph(d / "s1" / f"sample_{i}.edges", d / "s1" / f"sample_{i}.attrs")
        assert H.m == G.m
        manifest = json.loads((d / "s1" / f"sample_{i}.manifest.json").read_text())
        assert manifest["seed"] == 5 and manifest["spawn_key"] == [1, i]


def test_evaluate_self_and_row_count(files):
    d, _ = files
    assert run("evaluate", "--edges", d / "g.edges", "--attrs", d / "g.attrs", "--partition", d / "g.part",
               "--synthetic", d / "g", d / "g", "--out", d / "ev") == 0
    rows = (d / "ev" / "report.tsv").read_text().strip().splitlines()
    assert len(rows) == 1 + 2 + 1
    assert rows[0].split("\t")[1:7] == ["rho_E", "rho_tri", "rho_c", "H_d", "H_lc", "rho_a"]
    values = [float(x) for x in rows[1].split("\t")[1:]]
    assert values == [0, 0, 0, 0, 0, 0, 1]
    assert (d / "ev" / "eval_0_degree_ccdf.txt").exists()


def test_evaluate_rejects_mismatch(files, tmp_path):
    d, _ = files
    (tmp_path / "h.edges").write_text("0 1\n")
    (tmp_path / "h.attrs").write_text("1\n0\n")
    assert run("evaluate", "--edges", d / "g.edges", "--attrs", d / "g.attrs", "--synthetic", tmp_path / "h",
               "--out", tmp_path) == 2


def test_pipeline_with_config(files):
    d, G = files
    (d / "run.cfg").write_text(f"edges = {d / 'g.edges'}\nattrs = {d / 'g.attrs'}\nsamples = 2\nseed = 1\n"
                               f"partition = {d / 'g.part'}\n")
    assert run("pipeline", "--config", d / "run.cfg", "--samples", 1, "--out", d / "pl") == 0
    assert (d / "pl" / "sample_0.edges").exists() and not (d / "pl" / "sample_1.edges").exists()
    rows = (d / "pl" / "report.tsv").read_text().strip().splitlines()
    assert float(rows[1].split("\t")[1]) == 0.0


def test_config_parsing(tmp_path):
    (tmp_path / "c").write_text("# sweep\neps = 2\nfan-out = 3\n")
    assert read_config(tmp_path / "c") == {"eps": "2", "fan_out": "3"}
    (tmp_path / "bad").write_text("eps 2\n")
    assert run("fit", "--config", tmp_path / "bad") == 2


def test_unknown_command_exit_code():
    assert run("frobnicate") == 2
