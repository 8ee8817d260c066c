import json
import subprocess
import sys

import numpy as np
import pytest

from mixlab.cli import main, read_config
from mixlab.graph import cycle_graph, path_graph, write_graph
from mixlab.sgh import FiniteTriple

from conftest import FROZEN, random_triple, SEED


@pytest.fixture
def p4(tmp_path):
    path = tmp_path / "p4.txt"
    write_graph(path_graph(4), path)
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_compute_rational(capsys, p4):
    code, out, _ = run(capsys, "compute", p4, "--rational")
    assert code == 0
    rep = json.loads(out)
    assert rep["t_mix"] == FROZEN["P4"]["t_mix_1"] and rep["graph"]["vertices"] == 4


def test_compute_sup_norm(capsys, p4):
    code, out, _ = run(capsys, "compute", p4, "--p", "inf")
    assert code == 0 and json.loads(out)["t_mix"] == FROZEN["P4"]["t_mix_inf"]


def test_compute_curve_csv(capsys, p4):
    code, out, _ = run(capsys, "compute", p4, "--csv")
    lines = out.strip().splitlines()
    assert code == 0 and "," in lines[0] and len(lines) >= 3


def test_compute_root_only(capsys, p4):
    code, out, _ = run(capsys, "compute", p4, "--root-only")
    rep = json.loads(out)
    assert code == 0 and rep["vertex"] == 0 and rep["t_integer"] >= 1


def test_missing_file_is_input_error(capsys, tmp_path):
    code, _, err = run(capsys, "compute", str(tmp_path / "nope.txt"))
    assert code == 2 and "mixlab:" in err


def test_malformed_graph_is_input_error(capsys, tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("n=3 root=0 metric=graph\n0 1 1\n1 x 1\n")
    code, _, err = run(capsys, "compute", str(bad))
    assert code == 2 and "3" in err


def test_horizon_exit_code(capsys, tmp_path):
    path = tmp_path / "c64.txt"
    write_graph(cycle_graph(64), path)
    code, _, _ = run(capsys, "compute", str(path), "--horizon", "10")
    assert code == 3


def test_bounds_upper(capsys, p4):
    code, out, _ = run(capsys, "bounds", p4)
    rep = json.loads(out)
    assert code == 0 and rep["upper_bound"]["value"] == pytest.approx(72)
    assert rep["upper_holds"]


def test_bounds_lower_on_cycle(capsys, tmp_path):
    path = tmp_path / "c64.txt"
    write_graph(cycle_graph(64), path)
    code, out, _ = run(capsys, "bounds", str(path), "--root", "0", "--radius", "8",
                       "--lam", "2", "--H", "1,2,1,1")
    rep = json.loads(out)
    assert code == 0 and rep["lower_holds"] and rep["measured"]["1"] == FROZEN["C64"]["t_mix_1"]


def test_bounds_failed_precondition(capsys, tmp_path):
    path = tmp_path / "c16.txt"
    write_graph(cycle_graph(16), path)
    code, _, err = run(capsys, "bounds", str(path), "--root", "0", "--radius", "4",
                       "--lam", "2", "--H", "1,1,1,1")
    assert code == 5 and "volume_upper" in err


def test_ghdist(capsys, tmp_path):
    A = random_triple(np.random.default_rng(SEED), 3)
    A.save(tmp_path / "a.json")
    A.relabel([2, 0, 1]).save(tmp_path / "b.json")
    code, out, _ = run(capsys, "ghdist", str(tmp_path / "a.json"), str(tmp_path / "b.json"))
    rep = json.loads(out)
    assert code == 0 and rep["value"] == 0


def test_ghdist_grid_mismatch(capsys, tmp_path):
    rng = np.random.default_rng(SEED)
    random_triple(rng, 2, knots=(1.0,)).save(tmp_path / "a.json")
    random_triple(rng, 2, knots=(2.0,)).save(tmp_path / "b.json")
    code, _, _ = run(capsys, "ghdist", str(tmp_path / "a.json"), str(tmp_path / "b.json"))
    assert code == 4


def test_tails_need_draws(capsys):
    code, _, err = run(capsys, "tails", "--family", "er", "--size", "100", "--draws", "10",
                       "--lambdas", "1,2")
    assert code == 5 and "InsufficientDraws" in err


def test_unknown_family(capsys):
    code, _, _ = run(capsys, "generate", "--family", "torus", "--size", "10")
    assert code == 2


def test_generate(capsys, tmp_path):
    out_dir = tmp_path / "ens"
    code, out, _ = run(capsys, "generate", "--family", "gw", "--size", "30", "--draws", "3",
                       "--seed", str(SEED), "--out", str(out_dir))
    assert code == 0 and json.loads(out)["draws"] == 3
    assert len(json.loads((out_dir / "manifest.json").read_text())["draws"]) == 3


def test_converge_with_config(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# path ladder\nfamily = box\nsizes = 8, 16\np = inf\n")
    code, out, _ = run(capsys, "converge", "--config", str(cfg), "--format", "csv")
    lines = out.strip().splitlines()
    assert code == 0 and lines[0].startswith("N,gamma") and len(lines) == 3


def test_config_flags_override(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("family = box\nsizes = 8,16\n")
    code, out, _ = run(capsys, "converge", "--config", str(cfg), "--sizes", "8,12")
    assert code == 0 and json.loads(out)["config"]["sizes"] == [8, 12]


def test_config_rejects_unknown_keys(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("family = box\ncolour = red\n")
    code, _, err = run(capsys, "converge", "--config", str(cfg), "--sizes", "8,16")
    assert code == 2 and "colour" in err


def test_read_config(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("a-b = 1  # comment\n\nc = x y\n")
    assert read_config(cfg) == {"a_b": "1", "c": "x y"}


def test_module_entry_point(p4):
    res = subprocess.run([sys.executable, "-m", "mixlab", "compute", p4], capture_output=True,
                         text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["t_mix"] == FROZEN["P4"]["t_mix_1"]
