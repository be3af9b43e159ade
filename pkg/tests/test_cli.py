import json

import pytest

from cli_cases import CASES
from plantedfg.cli import run
from plantedfg.model import model_hash
from plantedfg.zoo import make_nae_sat, nae_sat_witness, witness_to_dict
from conftest import two_atom_model


def run_to(tmp_path, argv, name="out.csv"):
    out = tmp_path / name
    code = run(argv + ["--out", str(out)])
    return code, out.read_text() if out.exists() else ""


@pytest.mark.parametrize("case", sorted(CASES))
def test_outputs_identical_across_workers(case, tmp_path):
    argv = CASES[case] + ["--seed", "17"]
    c1, a = run_to(tmp_path, argv + ["--workers", "1"], "a.csv")
    c2, b = run_to(tmp_path, argv + ["--workers", "4"], "b.csv")
    assert c1 == c2 == 0
    assert a == b and a


@pytest.mark.parametrize("case", sorted(set(CASES) - {"model-dump"}))
def test_csv_has_header_and_metadata(case, tmp_path):
    code, text = run_to(tmp_path, CASES[case])
    lines = text.splitlines()
    assert code == 0 and not lines[0].startswith("#")
    meta = lines[-1]
    assert meta.startswith("# seed=0 ") and "version=" in meta and "model_hash=" in meta


def test_model_check_reports_bal(tmp_path, capsys):
    code, text = run_to(tmp_path, ["model", "check", "--zoo", "nae-sat"])
    assert code == 0 and "BAL: pass" in capsys.readouterr().err


def test_model_check_file_and_witness(tmp_path):
    spec = tmp_path / "m.json"
    code, _ = run_to(tmp_path, ["model", "dump", "--zoo", "nae-sat"], "m.json")
    spec.write_text("\n".join(l for l in spec.read_text().splitlines() if not l.startswith("#")))
    assert json.loads(spec.read_text())
    code, text = run_to(tmp_path, ["model", "check", str(spec)])
    assert code == 0
    assert model_hash(make_nae_sat(3, 0.5)) in text
    wit = tmp_path / "w.json"
    wit.write_text(json.dumps(witness_to_dict(nae_sat_witness(3, 0.5))))
    code, text = run_to(tmp_path, ["model", "check", str(spec), "--witness", str(wit)])
    assert code == 0
    wit.write_text(json.dumps(witness_to_dict(nae_sat_witness(3, 0.2))))
    assert run(["model", "check", str(spec), "--witness", str(wit)]) == 1


def test_exact_audit_two_atom(tmp_path):
    spec = tmp_path / "two.json"
    from plantedfg.model import save_model
    save_model(two_atom_model(2), spec)
    code, text = run_to(tmp_path, ["exact", "audit", "--model", str(spec), "--n", "2", "--m", "1"])
    assert code == 0
    rows = [l.split(",") for l in text.splitlines()[1:] if not l.startswith("#")]
    assert rows and all(float(r[1]) < 1e-9 for r in rows)


def test_exit_codes(tmp_path):
    assert run(["nonsense"]) == 3
    assert run(["mc", "--zoo", "nae-sat", "--d", "1"]) == 3
    bad = tmp_path / "bad.json"
    bad.write_text("{\"q\": 2}")
    assert run(["model", "check", str(bad)]) == 1
    assert run(["mc", "--zoo", "nae-sat", "--n", "40", "--d", "1", "--samples", "10"]) == 2
    assert run(["bethe", "--zoo", "nae-sat", "--d", "-1"]) == 1
