import json

import pytest

from controllability_tools.cli import (
    EXIT_CERTIFICATE,
    EXIT_INFEASIBLE_K,
    EXIT_OK,
    EXIT_UNSOLVABLE,
    EXIT_USAGE,
    load_system,
    main,
)
from controllability_tools.structmat import StructuredMatrix
from controllability_tools.sysmodel import DescriptorSystem

NAMES = ("MATCTL_SEED", "MATCTL_PRIME", "MATCTL_TRIALS", "MATCTL_Z_COUNT", "MATCTL_LOG_LEVEL")


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in NAMES:
        monkeypatch.setenv(name, "")
        monkeypatch.delenv(name)


def write_json(path, data):
    path.write_text(json.dumps(data), encoding="utf-8")
    return str(path)


@pytest.fixture
def chain_file(tmp_path):
    return write_json(tmp_path / "chain.json", {"n": 3, "edges": [[0, 1], [1, 2]], "undirected": False})


@pytest.fixture
def star_file(tmp_path):
    return write_json(tmp_path / "star.json", {"n": 4, "edges": [[0, 1], [0, 2], [0, 3]]})


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr().out
    return code, out


def test_load_system_variants(tmp_path, chain_file):
    assert load_system(chain_file).kind == "free"
    assert load_system(chain_file, "double").n == 6
    wrapped = write_json(tmp_path / "gen.json", {"system": load_system(chain_file).to_json()})
    assert load_system(wrapped).A == load_system(chain_file).A
    path = write_json(tmp_path / "path.json", {"n": 3, "edges": [[0, 1], [1, 2]], "undirected": True})
    assert load_system(path, "consensus").n == 5


def test_min_inputs(chain_file, capsys):
    code, out = run(["min-inputs", "--system", chain_file, "--seed", "1"], capsys)
    result = json.loads(out)
    assert code == EXIT_OK
    assert result["S"] == [0]
    assert result["certificate"]["passed"] is True
    assert result["meta"]["seed"] == 1
    assert len(result["meta"]["config_hash"]) == 12


def test_seed_defaults_to_the_environment(chain_file, capsys, monkeypatch):
    monkeypatch.setenv("MATCTL_SEED", "5")
    code, out = run(["min-inputs", "--system", chain_file], capsys)
    assert code == EXIT_OK
    assert json.loads(out)["meta"]["seed"] == 5


def test_degree_baseline(star_file, capsys):
    code, out = run(["min-inputs", "--system", star_file, "--baseline", "degree"], capsys)
    result = json.loads(out)
    assert code == EXIT_OK
    assert result["algorithm"] == "baseline_degree"
    assert result["certificate"]["passed"] is True


def test_strong_variant_on_a_chain_is_refused(chain_file, capsys):
    code, _ = run(["min-inputs", "--system", chain_file, "--assume-strong"], capsys)
    assert code == EXIT_UNSOLVABLE


def test_unsolvable_system(tmp_path, capsys):
    zero = StructuredMatrix.zeros(2, 2)
    path = write_json(tmp_path / "zero.json", DescriptorSystem(2, zero, zero).to_json())
    code, _ = run(["min-inputs", "--system", path], capsys)
    assert code == EXIT_UNSOLVABLE


def test_verify(chain_file, tmp_path, capsys):
    dot = tmp_path / "aux.dot"
    code, out = run(["verify", "--system", chain_file, "--S", "0", "--dot", str(dot)], capsys)
    assert code == EXIT_OK
    assert json.loads(out)["certificate"]["passed"] is True
    assert dot.read_text(encoding="utf-8").startswith("digraph aux {")


def test_verify_reads_a_selection_file(chain_file, tmp_path, capsys):
    inputs = write_json(tmp_path / "sel.json", {"S": [2]})
    code, _ = run(["verify", "--system", chain_file, "--inputs", inputs, "--z-count", "3"], capsys)
    assert code == EXIT_CERTIFICATE


def test_select_with_modular_weights(star_file, capsys):
    code, out = run(["select", "--system", star_file, "--k", "3", "--modular-weights", "0,1,5,3"], capsys)
    assert code == EXIT_OK
    assert json.loads(out)["S"] == [0, 2, 3]


def test_select_with_too_small_k(star_file, capsys):
    code, _ = run(["select", "--system", star_file, "--k", "2", "--modular-weights", "0,1,5,3"], capsys)
    assert code == EXIT_INFEASIBLE_K


def test_select_with_a_metric(star_file, capsys):
    code, out = run(["select", "--system", star_file, "--k", "3", "--delta", "0.5"], capsys)
    result = json.loads(out)
    assert code == EXIT_OK
    assert len(result["S"]) == 3 and 0 in result["S"]


def test_tradeoff_as_csv(chain_file, capsys):
    code, out = run(["tradeoff", "--system", chain_file, "--k", "1", "--eta", "0", "--format", "csv"], capsys)
    assert code == EXIT_OK
    header = out.splitlines()[0].split(",")
    assert "algorithm" in header and "meta.seed" in header


def test_generate(tmp_path, capsys):
    out_file = tmp_path / "net.json"
    code, _ = run(["gen", "--n", "15", "--degree", "3", "--kind", "free", "--seed", "2", "--out", str(out_file)], capsys)
    data = json.loads(out_file.read_text(encoding="utf-8"))
    assert code == EXIT_OK
    assert data["graph"]["n"] == 15
    assert data["system"]["kind"] == "free"
    assert load_system(str(out_file)).n == 15


def test_generate_rejects_tiny_networks(capsys):
    with pytest.raises(SystemExit) as info:
        main(["gen", "--n", "1"])
    assert info.value.code == EXIT_USAGE


def test_missing_file_is_a_usage_error(tmp_path, capsys):
    code, _ = run(["min-inputs", "--system", str(tmp_path / "nope.json")], capsys)
    assert code == EXIT_USAGE


def test_bad_log_level(chain_file, capsys, monkeypatch):
    monkeypatch.setenv("MATCTL_LOG_LEVEL", "LOUD")
    code, _ = run(["min-inputs", "--system", chain_file], capsys)
    assert code == EXIT_USAGE
