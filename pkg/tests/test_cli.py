import json
import subprocess
import sys

import numpy as np
import pytest

from oambsm.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def run_json(capsys, *argv):
    code, out = run(capsys, *argv)
    return code, json.loads(out) if out.strip().startswith("{") else None


def test_verify_default(capsys):
    code, rep = run_json(capsys, "verify")
    assert code == 0 and rep["passed"]
    for name, check in rep["checks"].items():
        assert check["passed"], name
        assert "max_residual" in check
    assert np.shape(rep["analyzer"]["composite"]) == (8, 8, 2)
    np.testing.assert_allclose(rep["analyzer"]["routing_table"], np.eye(4), atol=1e-9)


def test_verify_corrupted_unitary(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"u4": [[1, 1, 0, 0], [1, 1, 0, 0], [0, 0, 1, 1], [0, 0, 1, -1]]}))
    code, rep = run_json(capsys, "--config", str(cfg), "verify")
    assert code == 2
    assert "unitarity" in rep["failed"]
    assert not rep["checks"]["unitarity"]["passed"]


def test_verify_toml_config(tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text('subspace_m = 2\n[codebook]\n"00" = "PsiPlus"\n"01" = "PsiMinus"\n'
                   '"10" = "PhiPlus"\n"11" = "PhiMinus"\n')
    code, rep = run_json(capsys, "--config", str(cfg), "verify")
    assert code == 0


def test_coincidence_target(capsys):
    code, rep = run_json(capsys, "coincidence", "--state", "PsiPlus", "--basis", "target")
    assert code == 0
    np.testing.assert_allclose(rep["probabilities"], np.eye(4) / 4)
    assert "counts" not in rep


def test_coincidence_initial_degenerate(capsys):
    _, a = run_json(capsys, "coincidence", "--state", "PsiPlus", "--basis", "initial")
    _, b = run_json(capsys, "coincidence", "--state", "PsiMinus", "--basis", "initial")
    assert a["probabilities"] == b["probabilities"]


def test_coincidence_counts(capsys):
    code, rep = run_json(capsys, "coincidence", "--state", "PhiMinus", "--total", "10000", "--seed", "7")
    counts = np.array(rep["counts"])
    assert counts.sum() == 10000
    mask = np.zeros((4, 4), dtype=bool)
    for k, l in rep["expected_pattern"]:
        mask[k - 1, l - 1] = True
    assert counts[mask].sum() == 10000
    assert rep["snr"] == float("inf")
    _, again = run_json(capsys, "coincidence", "--state", "PhiMinus", "--total", "10000", "--seed", "7")
    assert again == rep


def test_coincidence_csv(capsys):
    code, out = run(capsys, "coincidence", "--state", "PhiPlus", "--format", "csv")
    assert code == 0
    rows = [l for l in out.splitlines() if not l.startswith("#")]
    assert len(rows) == 4 and all(len(r.split(",")) == 4 for r in rows)


def test_coincidence_counts_require_seed(capsys):
    code, _ = run(capsys, "coincidence", "--state", "PhiPlus", "--total", "10")
    assert code == 1


def test_bad_label_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["coincidence", "--state", "Chi"])
    assert exc.value.code == 1


@pytest.mark.parametrize("cmd", [["search", "--budget", "10"], ["superdense", "--n", "10"]])
def test_randomized_commands_need_seed(cmd):
    with pytest.raises(SystemExit) as exc:
        main(cmd)
    assert exc.value.code == 1


def test_search_command(tmp_path, capsys):
    out = tmp_path / "sols.jsonl"
    code, rep = run_json(capsys, "search", "--budget", "20000", "--seed", "1", "--out", str(out))
    assert code == 0
    assert rep["n_solutions"] >= 1 and rep["contains_reference_class"]
    assert len(out.read_text().splitlines()) == rep["n_solutions"]


def test_superdense_command(tmp_path, capsys):
    code, rep = run_json(capsys, "superdense", "--eps", "0", "--n", "100", "--seed", "1")
    assert code == 0 and rep["success_rate"] == 1.0
    assert set(rep) >= {"success_rate", "mi_uniform_bits", "capacity_bits", "p_star"}
    book = tmp_path / "book.json"
    book.write_text(json.dumps({"codebook": {"00": "PhiPlus", "01": "PhiMinus",
                                             "10": "PsiPlus", "11": "PsiMinus"}}))
    code, rep = run_json(capsys, "superdense", "--eps", "0", "--n", "50", "--seed", "2",
                         "--codebook", str(book))
    assert rep["success_rate"] == 1.0


def test_superdense_reproducible_json(capsys):
    _, a = run(capsys, "superdense", "--eps", "0.24", "--n", "2000", "--seed", "9")
    _, b = run(capsys, "superdense", "--eps", "0.24", "--n", "2000", "--seed", "9")
    assert a == b


def test_capacity_command(tmp_path, capsys):
    f = tmp_path / "W.csv"
    np.savetxt(f, np.eye(4), delimiter=",")
    before = f.read_bytes()
    code, rep = run_json(capsys, "capacity", "--confusion", str(f))
    assert code == 0 and rep["capacity_bits"] == pytest.approx(2.0, abs=1e-9)
    assert f.read_bytes() == before


def test_capacity_missing_file(capsys):
    code, _ = run(capsys, "capacity", "--confusion", "/nonexistent.csv")
    assert code == 1


def test_capacity_non_convergence_exit_code(tmp_path, capsys, monkeypatch):
    from oambsm import channel

    f = tmp_path / "W.csv"
    np.savetxt(f, np.array([[0.9, 0.1, 0, 0], [0.2, 0.5, 0.3, 0], [0, 0.1, 0.6, 0.3], [0.25] * 4]),
               delimiter=",")
    monkeypatch.setattr(channel, "MAX_ITER", 2)
    monkeypatch.setattr(channel.capacity, "__defaults__", (1e-9, 2))
    code, _ = run(capsys, "capacity", "--confusion", str(f))
    assert code == 3


def test_calibrate_command(capsys):
    code, rep = run_json(capsys, "calibrate", "--target", "0.82")
    assert code == 0 and rep["eps"] == pytest.approx(0.24, abs=1e-9)
    code, _ = run(capsys, "calibrate", "--target", "0.2")
    assert code == 1


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "oambsm", "calibrate", "--target", "1.0"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["eps"] == pytest.approx(0.0, abs=1e-9)
