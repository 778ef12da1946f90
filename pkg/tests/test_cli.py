import csv
import io
import json

import numpy as np
import pytest

from swsim.cli import main
from swsim.io import read_report, save_tensor, strip_timestamp
from swsim.quant import prune_magnitude, quantize

EXAMPLE_B = [7.0, 0, 1, 0, 2, 0, 1, 0]
X_B = [1.0, 0, 3, 0, 2, 0, 1, 0]


@pytest.fixture
def example(tmp_path):
    w, x = tmp_path / "w.npy", tmp_path / "x.npy"
    save_tensor(np.array(EXAMPLE_B), w)
    save_tensor(np.array(X_B), x)
    return tmp_path, w, x


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_map_example(capsys, example):
    tmp, w, _ = example
    code, out, _ = run(capsys, "map", "--weights", w, "--bits", 3, "--rows", 2, "--out", tmp / "m.json")
    assert code == 0
    assert "sorted=2 baseline=4" in out
    summary = json.loads((tmp / "m.json").read_text())
    assert summary["layers"][0]["sorted_sections"] == 2
    assert summary["layers"][0]["permutation_overhead"]["time_units"] == 48


def test_map_all_zero(capsys, tmp_path):
    w = tmp_path / "z.npy"
    save_tensor(np.zeros(8), w)
    code, out, _ = run(capsys, "map", "--weights", w, "--bits", 3, "--rows", 2)
    assert code == 0 and "sorted=0" in out


def test_map_bad_profile(capsys, example):
    _, w, _ = example
    code, _, err = run(capsys, "map", "--weights", w, "--bits", 3, "--profile", "10-10")
    assert code == 1 and "profile" in err


def test_simulate_example(capsys, example):
    tmp, w, x = example
    out_path = tmp / "r.json"
    code, out, _ = run(
        capsys, "simulate", "--weights", w, "--activations", x, "--bits", 3, "--abits", 2, "--rows", 2,
        "--profile", 10, "--out", out_path,
    )
    assert code == 0
    assert "max_abs error: 0" in out
    assert "savings=33.33%" in out
    doc = read_report(out_path)
    assert doc["sorted"]["total"]["total_conversions"] == 4
    assert doc["baseline"]["total"]["total_conversions"] == 6
    assert doc["errors"]["max_abs"] == 0


def test_simulate_full_resolution_synthetic(capsys, tmp_path):
    w = tmp_path / "w.npy"
    save_tensor(np.random.default_rng(0).normal(size=(4, 300)), w)
    code, out, _ = run(capsys, "simulate", "--weights", w, "--profile", "full", "--sparsity", 0.5, "--rows", 16)
    assert code == 0
    assert "max_abs error: 0" in out


def test_simulate_zero_profile_is_flagged(capsys, example):
    _, w, x = example
    code, out, err = run(capsys, "simulate", "--weights", w, "--activations", x, "--bits", 3, "--rows", 2, "--profile", 0)
    assert code == 0
    assert "degenerate" in err


def test_simulate_is_reproducible(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({
        "weights": [{"gaussian": {"sigma": 0.5, "shape": [3, 200], "seed": 4}}],
        "activations": {"gaussian": {"batch": 2, "seed": 9}},
        "sparsity": 0.7, "rows_per_section": 16, "baseline": "shuffled", "seed": 3, "profile": 8,
    }))
    out = tmp_path / "r.json"
    assert run(capsys, "simulate", "--config", cfg, "--out", out)[0] == 0
    first = strip_timestamp(read_report(out))
    assert run(capsys, "simulate", "--config", cfg, "--out", out)[0] == 0
    assert strip_timestamp(read_report(out)) == first
    # a thread pool changes nothing but the echoed worker count
    assert run(capsys, "simulate", "--config", cfg, "--out", out, "--workers", 3)[0] == 0
    threaded = strip_timestamp(read_report(out))
    for key in ("sorted", "baseline", "comparison", "errors"):
        assert threaded[key] == first[key]


def test_compare_and_flag_precedence(capsys, example):
    tmp, w, _ = example
    cfg = tmp / "c.json"
    cfg.write_text(json.dumps({"weights": str(w), "weight_bits": 3, "rows_per_section": 8}))
    code, out, _ = run(capsys, "compare", "--config", cfg, "--rows", 2, "--out", tmp / "r.json")
    assert code == 0
    doc = read_report(tmp / "r.json")
    assert doc["config"]["rows_per_section"] == 2
    assert doc["comparison"]["total"]["savings_fraction"] == pytest.approx(1 / 3)


def test_strict_and_lenient(capsys, example):
    tmp, w, _ = example
    cfg = tmp / "c.json"
    cfg.write_text(json.dumps({"weights": str(w), "weight_bits": 3, "typo_key": 1}))
    code, _, err = run(capsys, "compare", "--config", cfg)
    assert code == 1 and "typo_key" in err
    code, _, err = run(capsys, "compare", "--config", cfg, "--lenient")
    assert code == 0 and "typo_key" in err


def test_missing_file_exit_1(capsys, tmp_path):
    code, _, err = run(capsys, "simulate", "--weights", tmp_path / "nope.npy")
    assert code == 1 and err


def test_sweep_csv(capsys, tmp_path):
    w = tmp_path / "w.npy"
    save_tensor(np.random.default_rng(1).normal(size=(2, 256)), w)
    out = tmp_path / "s.csv"
    code, _, _ = run(
        capsys, "sweep", "--weights", w, "--sparsity", "0,0.9", "--rows", "16,128",
        "--profile", "10", "--profile", "10-10-10-10-10-9-9-8", "--out", out,
    )
    assert code == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 2 * 2 * 2
    assert rows[0]["sparsity"] == "0.0" and rows[0]["rows_per_section"] == "16"
    dense_128 = [r for r in rows if r["sparsity"] == "0.9" and r["rows_per_section"] == "128"]
    assert all(int(r["baseline_sections"]) == 4 for r in dense_128)
    assert all(float(r["adc_savings"]) > 0 for r in dense_128)


def test_sweep_bad_grid(capsys, example):
    _, w, _ = example
    code, _, err = run(capsys, "sweep", "--weights", w, "--bits", 3, "--sparsity", "0,abc")
    assert code == 1


def test_analyze_csv(capsys, tmp_path):
    w = tmp_path / "w.npy"
    save_tensor(np.random.default_rng(2).normal(size=(2, 512)), w)
    out = tmp_path / "a.csv"
    code, _, _ = run(capsys, "analyze", "--weights", w, "--sparsity", 0.5, "--rows", 64, "--out", out)
    assert code == 0
    rows = list(csv.DictReader(out.open()))
    nnz = np.count_nonzero(quantize(prune_magnitude(np.load(w), 0.5), 8).magnitudes, axis=1)
    assert len(rows) == sum(-(-n // 64) for n in nnz)
    for r in rows:
        assert 0 <= float(r["expected_active_columns"]) <= 8
        assert int(r["min_code"]) <= int(r["max_code"])


def test_analyze_stdout(capsys, example):
    _, w, _ = example
    code, out, _ = run(capsys, "analyze", "--weights", w, "--bits", 3, "--rows", 2)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    assert [r["active_columns"] for r in rows] == ["1", "3"]


def test_theory_prefix(capsys):
    code, out, _ = run(capsys, "theory", "--sigma", 1, "-L", 0, "--n", 1, "--samples", 200000)
    assert code == 0
    assert "analytic=0.515539" in out
    assert "difference=" in out


def test_theory_huge_sigma_and_scan(capsys):
    code, out, _ = run(capsys, "theory", "--sigma", 1e6, "-L", 0.1, "--n", 2, "--samples", 10000, "--scan", "0,0.5,1")
    assert code == 0
    assert "analytic=0.500000" in out
    assert "L=0.5" in out


def test_theory_section_query(capsys):
    code, out, _ = run(
        capsys, "theory", "--lo", 0, "--hi", 1, "--column", 0, "--bits", 3, "--scale", 1 / 7, "--samples", 100000
    )
    assert code == 0 and "P(column 0 active" in out


def test_theory_invalid(capsys):
    assert run(capsys, "theory", "-L", -1)[0] == 1
    assert run(capsys, "theory", "--sigma", 0)[0] == 1
    assert run(capsys, "theory", "--lo", 0, "--hi", 1)[0] == 1
