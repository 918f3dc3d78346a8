import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twhm.cli import main
from twhm.io import FormatError, ModelFile, format_snapshots, parse_snapshots, read_model, read_snapshots, write_model
from twhm.model import ParamVector, SnapshotSeries
from twhm.objective import neg_log_likelihood, sufficient_stats
from twhm.simulate import SimConfig, simulate


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def kv(line):
    return dict(item.split("=", 1) for item in line.split())


# --- snapshot files


def test_snapshot_format_layout():
    s = SnapshotSeries.from_edge_lists(4, [[(2, 3), (0, 1)], [], [(1, 3)]])
    text = format_snapshots(s)
    assert text == "# twhm-snapshots v1 p=4 n=2\n0 0 1\n0 2 3\n2 1 3\n"
    assert parse_snapshots(text) == s


@given(st.integers(2, 7), st.integers(0, 4), st.integers(0, 2**32))
@settings(max_examples=40, deadline=None)
def test_snapshot_round_trip(p, n, seed):
    rng = np.random.default_rng(seed)
    s = SnapshotSeries(p, rng.random((n + 1, p * (p - 1) // 2)) < 0.4)
    text = format_snapshots(s)
    back = parse_snapshots(text)
    assert back == s
    assert format_snapshots(back) == text


def test_snapshot_comments_and_blank_lines_ignored():
    text = "# produced elsewhere\n# twhm-snapshots v1 p=3 n=1\n\n# note\n1 0 2\n"
    s = parse_snapshots(text)
    assert s.edge_list(1) == [(0, 2)] and s.edge_list(0) == []


@pytest.mark.parametrize(
    "text",
    [
        "0 0 1\n",
        "# twhm-snapshots v1 p=3 n=1\n0 1 0\n",
        "# twhm-snapshots v1 p=3 n=1\n2 0 1\n",
        "# twhm-snapshots v1 p=3 n=1\n0 0 3\n",
        "# twhm-snapshots v1 p=3 n=1\n0 0 1\n0 0 1\n",
        "# twhm-snapshots v1 p=3 n=1\n0 0\n",
        "# twhm-snapshots v1 p=3 n=1\n0 a 1\n",
    ],
)
def test_snapshot_format_errors(text):
    with pytest.raises(FormatError):
        parse_snapshots(text)


# --- model files


def test_model_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    th = ParamVector(rng.normal(size=9) * 1e-3, rng.normal(size=9) * 1e5)
    th = ParamVector(np.append(th.beta0[:-1], 0.1 + 0.2), np.append(th.beta1[:-1], -5e-324))
    path = tmp_path / "m.json"
    write_model(path, ModelFile(th, {"method": "mle"}))
    back = read_model(path)
    assert back.theta.beta0.tobytes() == th.beta0.tobytes()
    assert back.theta.beta1.tobytes() == th.beta1.tobytes()
    assert back.meta == {"method": "mle"}
    doc = json.loads(path.read_text())
    assert doc["format"] == "twhm-model v1" and doc["p"] == 9


def test_model_file_errors():
    with pytest.raises(FormatError):
        ModelFile.from_json("{not json")
    with pytest.raises(FormatError):
        ModelFile.from_json('{"format": "other"}')
    with pytest.raises(FormatError):
        ModelFile.from_json('{"format": "twhm-model v1", "p": 3, "beta0": [0, 0], "beta1": [0, 0]}')


# --- CLI


def test_simulate_is_byte_reproducible(tmp_path, capsys):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    for path in (a, b):
        code, out, _ = run(capsys, "simulate", "--nodes", 10, "--steps", 5, "--setting", "const0", "--seed", 1, "--out", path)
        assert code == 0
    assert a.read_bytes() == b.read_bytes()
    vals = kv(out)
    assert vals["p"] == "10" and vals["n"] == "5" and 0 <= float(vals["density"]) <= 1


def test_simulate_two_block_density(tmp_path, capsys):
    code, out, _ = run(capsys, "simulate", "--nodes", 200, "--steps", 5, "--setting", "twoblock:1,-1", "--out", tmp_path / "s.txt")
    assert code == 0
    assert float(kv(out)["density"]) == pytest.approx(0.19, abs=0.01)


def test_simulate_usage_errors(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--nodes", "10", "--steps", "5", "--setting", "const0"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--nodes", "10", "--steps", "5", "--setting", "bogus:1", "--out", str(tmp_path / "x")])
    assert exc.value.code == 2
    code, out, err = run(capsys, "simulate", "--steps", 5, "--setting", "const0", "--out", tmp_path / "x")
    assert code == 2 and out == "" and "--nodes" in err


def test_simulate_io_error(tmp_path, capsys):
    code, out, err = run(capsys, "simulate", "--nodes", 5, "--steps", 2, "--setting", "const0", "--out", tmp_path / "missing" / "x.txt")
    assert code == 3 and out == "" and err


def test_simulate_from_model(tmp_path, capsys):
    m = tmp_path / "m.json"
    write_model(m, ModelFile(ParamVector(np.full(6, -30.0), np.zeros(6))))
    code, out, _ = run(capsys, "simulate", "--model", m, "--steps", 3, "--out", tmp_path / "s.txt")
    assert code == 0 and float(kv(out)["density"]) == 0.0


def test_fit_round_trip_and_loss(tmp_path, capsys):
    data, model = tmp_path / "d.txt", tmp_path / "m.json"
    run(capsys, "simulate", "--nodes", 60, "--steps", 20, "--setting", "const0", "--seed", 3, "--out", data)
    code, out, _ = run(capsys, "fit", "--data", data, "--method", "mle", "--out", model)
    assert code == 0
    vals = kv(out)
    assert vals["converged"] == "true"
    th = read_model(model).theta
    loss = neg_log_likelihood(th, sufficient_stats(read_snapshots(data)))
    assert abs(loss - float(vals["loss"])) <= 1e-12
    # every estimate inside a generous l-infinity band around the zero truth
    assert np.max(np.abs(th.flat())) < 0.6


def test_fit_is_byte_reproducible(tmp_path, capsys):
    data = tmp_path / "d.txt"
    run(capsys, "simulate", "--nodes", 20, "--steps", 6, "--setting", "uniform:-1,1/uniform:0,1", "--seed", 2, "--out", data)
    outs = []
    for name in ("a.json", "b.json"):
        run(capsys, "fit", "--data", data, "--out", tmp_path / name, "--seed", 2)
        outs.append((tmp_path / name).read_bytes())
    assert outs[0] == outs[1]


def test_fit_degenerate_exit_code(tmp_path, capsys):
    data = tmp_path / "d.txt"
    data.write_text("# twhm-snapshots v1 p=3 n=2\n0 0 1\n1 0 1\n2 0 1\n")
    code, out, err = run(capsys, "fit", "--data", data, "--method", "mme", "--lambda", 0, "--out", tmp_path / "m.json")
    assert code == 4 and "DegenerateDegree" in err and out == ""
    # the default clamps with a warning instead
    code, _, err = run(capsys, "fit", "--data", data, "--method", "mme", "--out", tmp_path / "m.json")
    assert code == 0 and "clamping" in err


def test_fit_strict_non_convergence(tmp_path, capsys):
    data = tmp_path / "d.txt"
    run(capsys, "simulate", "--nodes", 15, "--steps", 4, "--setting", "const0", "--out", data)
    code, out, _ = run(capsys, "fit", "--data", data, "--max-iters", 1, "--strict", "--out", tmp_path / "m.json")
    assert code == 5 and kv(out)["converged"] == "false"
    code, _, _ = run(capsys, "fit", "--data", data, "--max-iters", 1, "--out", tmp_path / "m.json")
    assert code == 0


def test_fit_bad_input(tmp_path, capsys):
    code, _, _ = run(capsys, "fit", "--data", tmp_path / "nope.txt", "--out", tmp_path / "m.json")
    assert code == 3
    with pytest.raises(SystemExit) as exc:
        main(["fit", "--data", "x", "--out", "y", "--method", "newton"])
    assert exc.value.code == 2


def _zero_model(tmp_path, p):
    m = tmp_path / "zero.json"
    write_model(m, ModelFile(ParamVector.zeros(p)))
    return m


def test_predict_omega_zero_copies_last_frame(tmp_path, capsys):
    data = tmp_path / "d.txt"
    run(capsys, "simulate", "--nodes", 12, "--steps", 4, "--setting", "const0", "--seed", 5, "--out", data)
    out_path = tmp_path / "p.txt"
    code, out, _ = run(capsys, "predict", "--model", _zero_model(tmp_path, 12), "--data", data, "--rule", "adaptive", "--omega", 0, "--out", out_path)
    assert code == 0
    series = read_snapshots(data)
    pred = read_snapshots(out_path)
    assert pred.n == series.n + 1
    assert np.array_equal(pred.edges[-1], series.edges[-1])
    last = [ln.split(" ", 1)[1] for ln in data.read_text().splitlines() if ln.startswith(f"{series.n} ")]
    got = [ln.split(" ", 1)[1] for ln in out_path.read_text().splitlines()[1:]]
    assert got == last
    assert "accuracy" not in kv(out)


def test_predict_fixed_on_empty_frame(tmp_path, capsys):
    data = tmp_path / "d.txt"
    data.write_text("# twhm-snapshots v1 p=5 n=0\n")
    code, out, _ = run(capsys, "predict", "--model", _zero_model(tmp_path, 5), "--data", data, "--rule", "fixed", "--out", tmp_path / "p.txt")
    assert code == 0 and kv(out)["edges"] == "0"
    assert not read_snapshots(tmp_path / "p.txt").edges.any()


def test_predict_accuracy_and_auto(tmp_path, capsys):
    data, model = tmp_path / "d.txt", tmp_path / "m.json"
    run(capsys, "simulate", "--nodes", 30, "--steps", 6, "--setting", "const0/const:1", "--seed", 1, "--out", data)
    run(capsys, "fit", "--data", data, "--out", model)
    code, out, _ = run(capsys, "predict", "--model", model, "--data", data, "--rule", "auto", "--from", 5, "--out", tmp_path / "p.txt")
    assert code == 0 and 0 <= float(kv(out)["accuracy"]) <= 1
    code, _, err = run(capsys, "predict", "--model", model, "--data", data, "--rule", "auto", "--from", 0, "--out", tmp_path / "p.txt")
    assert code == 2 and "two" in err


def test_predict_dimension_mismatch(tmp_path, capsys):
    data = tmp_path / "d.txt"
    data.write_text("# twhm-snapshots v1 p=5 n=0\n")
    code, _, _ = run(capsys, "predict", "--model", _zero_model(tmp_path, 4), "--data", data, "--out", tmp_path / "p.txt")
    assert code == 2


def test_diagnose_keys(tmp_path, capsys):
    data = tmp_path / "d.txt"
    run(capsys, "simulate", "--nodes", 40, "--steps", 20, "--setting", "const0", "--out", data)
    code, out, _ = run(capsys, "diagnose", "--model", _zero_model(tmp_path, 40), "--data", data)
    assert code == 0
    vals = kv(out)
    assert set(vals) == {"lambda_min", "pd_certificate", "grad_norm", "diag_balance_resid"}
    assert float(vals["lambda_min"]) > 0
    assert float(vals["diag_balance_resid"]) < 1e-10


def test_bench_unknown_table():
    with pytest.raises(SystemExit) as exc:
        main(["bench", "--table", "t9"])
    assert exc.value.code == 2


@pytest.mark.parametrize("table", ["t1", "t2", "ks", "cluster"])
def test_bench_smoke_is_reproducible(tmp_path, capsys, table):
    outs = []
    for k in range(2):
        d = tmp_path / f"o{k}"
        code, out, _ = run(capsys, "bench", "--table", table, "--reps", 1, "--nodes", 12, "--seed", 3, "--outdir", d)
        assert code == 0
        outs.append(((d / f"{table}.csv").read_bytes(), (d / f"{table}_summary.csv").read_bytes()))
    assert outs[0] == outs[1]
    with open(tmp_path / "o0" / f"{table}_summary.csv") as fh:
        assert len(list(csv.DictReader(fh))) >= 1
