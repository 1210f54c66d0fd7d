"""Command-line interface: wiring, determinism, manifests, exit codes."""

import json

import pytest

from graphprior.bench import read_csv
from graphprior.cli import main
from graphprior.pipeline import load_records


def run(capsys, *argv):
    rc = main(list(argv))
    captured = capsys.readouterr()
    return rc, captured.out, captured.err


def test_enumerate_counts(capsys):
    rc, out, _ = run(capsys, "enumerate", "--nodes", "5")
    assert rc == 0
    assert out.strip() == "34"


def test_mixing_er_analytic(capsys):
    rc, out, _ = run(capsys, "mixing", "--er", "--b", "0.5")
    assert rc == 0
    assert out.strip() == "1.442695"


def test_usage_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["fit"])  # missing required flags
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["no-such-command"])
    assert exc.value.code == 2


def test_module_errors_exit_1_with_structured_stderr(capsys):
    rc, _, err = run(capsys, "exclusions", "--in", "/nonexistent/records.jsonl")
    assert rc == 1
    obj = json.loads(err)
    assert obj["error"] == "FileNotFoundError"
    rc, _, err = run(capsys, "mixing", "--b", "0.5")  # no --er and no --in
    assert rc == 1
    assert json.loads(err)["error"] == "DataError"


def test_basis_command_lists_features(tmp_path, capsys):
    out_path = tmp_path / "basis.json"
    rc, _, _ = run(capsys, "basis", "--order", "2", "--nodes", "5", "--out", str(out_path))
    assert rc == 0
    rows = json.loads(out_path.read_text())
    assert [row["edge_count"] for row in rows] == [1, 2, 2]
    manifest = json.loads((tmp_path / "basis.json.manifest.json").read_text())
    assert manifest["command"] == "basis"
    assert manifest["outputs"] == [str(out_path)]


def test_density_command_exact_fraction(tmp_path, capsys):
    inp = tmp_path / "density.json"
    inp.write_text(
        json.dumps(
            {
                "motif": {"n": 2, "edges": [[0, 1]]},
                "graph": {"n": 3, "edges": [[0, 1], [1, 2]]},
            }
        )
    )
    rc, out, _ = run(capsys, "density", "--in", str(inp))
    assert rc == 0
    obj = json.loads(out)
    assert (obj["numerator"], obj["denominator"]) == (2, 3)


def test_simulate_is_byte_identical_given_seed(tmp_path, capsys):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    for path in (a, b):
        rc, _, _ = run(
            capsys, "simulate", "--nodes", "4", "--b", "0.5", "--records", "32",
            "--rounds", "8", "--seed", "7", "--out", str(path),
        )
        assert rc == 0
    assert a.read_bytes() == b.read_bytes()
    records = load_records(a)
    assert len(records) == 32
    assert {r.n for r in records} == {4}
    manifest = json.loads((tmp_path / "a.jsonl.manifest.json").read_text())
    assert manifest["seed"] == 7
    assert "wall_time_seconds" in manifest


def test_simulate_fit_cumulants_mixing_chain(tmp_path, capsys):
    sim = tmp_path / "sim.jsonl"
    rc, _, _ = run(
        capsys, "simulate", "--nodes", "4", "--b", "0.5", "--records", "200",
        "--rounds", "10", "--seed", "1", "--out", str(sim),
    )
    assert rc == 0
    fit = tmp_path / "fit.json"
    rc, _, _ = run(
        capsys, "fit", "--in", str(sim), "--nodes", "4", "--order", "1", "--out", str(fit),
    )
    assert rc == 0
    fitted = json.loads(fit.read_text())
    assert fitted["converged"]
    assert len(fitted["beta"]) == 1
    # the fitted model feeds straight back into the analysis commands
    cum = tmp_path / "cum.json"
    rc, _, _ = run(capsys, "cumulants", "--in", str(fit), "--order", "2", "--out", str(cum))
    assert rc == 0
    rows = json.loads(cum.read_text())
    assert len(rows) == 3
    assert all("scaled_cumulant" in row for row in rows)
    rc, out, _ = run(capsys, "mixing", "--in", str(fit), "--b", "0.5")
    assert rc == 0
    assert float(out) > 0


def test_crossval_command(tmp_path, capsys):
    sim = tmp_path / "sim.jsonl"
    run(capsys, "simulate", "--nodes", "4", "--b", "0.5", "--records", "120",
        "--rounds", "10", "--seed", "2", "--out", str(sim))
    rc, out, _ = run(
        capsys, "crossval", "--in", str(sim), "--nodes", "4", "--order", "1,2",
        "--reps", "6", "--seed", "0",
    )
    assert rc == 0
    obj = json.loads(out)
    assert obj["selected_r"] in (1, 2)
    assert set(obj["mean_avgll"]) == {"1", "2"}


def test_edgeonly_and_exclusions_commands(tmp_path, capsys):
    sim = tmp_path / "sim.jsonl"
    run(capsys, "simulate", "--nodes", "4", "--b", "0.5", "--records", "100",
        "--rounds", "10", "--seed", "3", "--out", str(sim))
    rc, out, _ = run(capsys, "edgeonly", "--in", str(sim), "--nodes", "4", "--order", "2")
    assert rc == 0
    obj = json.loads(out)
    assert obj["converged"]
    assert abs(sum(obj["probs"]) - 1.0) < 1e-9
    rc, out, _ = run(capsys, "exclusions", "--in", str(sim))
    assert rc == 0
    report = json.loads(out)
    assert report["total"] == 100
    assert report["kept"] == 100  # synthetic telemetry passes every rule
    assert report["percent_excluded"] == 0.0


def test_genmatrix_command(tmp_path, capsys):
    lines = []
    for story, seed in (("class", 4), ("work", 5)):
        sim = tmp_path / f"{story}.jsonl"
        run(capsys, "simulate", "--nodes", "4", "--b", "0.5", "--records", "100",
            "--rounds", "10", "--story", story, "--seed", str(seed), "--out", str(sim))
        lines += sim.read_text().splitlines()
    both = tmp_path / "both.jsonl"
    both.write_text("\n".join(lines) + "\n")
    out_csv = tmp_path / "gm.csv"
    rc, _, _ = run(
        capsys, "genmatrix", "--in", str(both), "--nodes", "4", "--order", "1",
        "--reps", "4", "--out", str(out_csv),
    )
    assert rc == 0
    rows = out_csv.read_text().strip().splitlines()
    assert rows[0] == "test_story,train_story,cell"
    assert len(rows) == 5  # header + 2x2 cells
    assert all(float(row.split(",")[2]) > 0 for row in rows[1:])


def test_bench_command_small(tmp_path, capsys):
    out_csv = tmp_path / "bench.csv"
    rc, _, _ = run(
        capsys, "bench-fit-vs-sample", "--nodes", "4", "--b", "0.5", "--records", "64",
        "--reps", "2", "--seed", "3", "--out", str(out_csv),
    )
    assert rc == 0
    points = read_csv(out_csv)
    # lengths dividing 64, fit and frequency rows for each
    assert [(p.chain_length, p.estimator) for p in points] == [
        (length, est) for length in (8, 16, 32, 64) for est in ("fit", "frequency")
    ]
    assert (tmp_path / "bench.csv.manifest.json").exists()


@pytest.mark.slow
def test_bench_command_orders_fit_below_frequency(tmp_path, capsys):
    out_csv = tmp_path / "bench.csv"
    rc, _, _ = run(
        capsys, "bench-fit-vs-sample", "--nodes", "5", "--b", "0.5",
        "--records", "2048", "--reps", "64", "--out", str(out_csv),
    )
    assert rc == 0
    points = read_csv(out_csv)
    fit = {p.chain_length: p.kl_mean for p in points if p.estimator == "fit"}
    freq = {p.chain_length: p.kl_mean for p in points if p.estimator == "frequency"}
    assert set(fit) == {8, 16, 32, 64, 128}
    for length in fit:
        assert fit[length] < freq[length]
