import json
from fractions import Fraction

import numpy as np
import pytest

from shallowreg import bench, cli
from shallowreg.bench import (ExperimentConfig, emit_csv, generate_exact, kernel_sum,
                              manifest_path, numeric_content, read_csv, run_experiment)
from shallowreg.regularization import RunRecord, RunRow


def test_single_term_solution():
    sol = kernel_sum([[0.5]], [1.0])
    assert sol.barron_norm == 1.5
    np.testing.assert_allclose(sol(np.linspace(0, 1, 5)), 0.5 * np.linspace(0, 1, 5) + 1)


def test_barron_identity_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(100):
        sol = generate_exact("kernel_sum", rng)
        phi = [Fraction(p) for p in sol.coefficients.tolist()]
        ell = [Fraction(l) for l in sol.nodes[:, 0].tolist()]
        u = sum(p * l for p, l in zip(phi, ell))
        assert sol.barron_norm == float(abs(u) + abs(sum(phi)))
        # and agrees with plain float arithmetic up to rounding
        naive = abs(sol.coefficients @ sol.nodes[:, 0]) + abs(sol.coefficients.sum())
        assert sol.barron_norm == pytest.approx(naive, rel=1e-14)


def test_example2_nonnegative():
    rng = np.random.default_rng(1)
    t = np.linspace(0, 1, 101)
    for _ in range(50):
        sol = bench.exact_for_example("autoconv", rng)
        assert sol.nodes.shape == (5, 1)
        assert np.all(sol.nodes >= 0) and np.all(sol.coefficients >= 0)
        assert np.all(sol(t) >= 0)


def test_eit_affine():
    sol = generate_exact("eit_affine", p0=1.0)
    X = np.array([[0, 0], [1, 0], [0.25, 0.5], [1, 1]])
    np.testing.assert_allclose(sol(X), X.sum(axis=1) + 1.0, atol=1e-15)
    assert sol.barron_norm == 3.0
    with pytest.raises(ValueError):
        generate_exact("eit_affine", p0=0.0)


def test_config_validation():
    with pytest.raises(bench.UsageError):
        ExperimentConfig("heat", "enn1", [0.1], [1]).validate()
    with pytest.raises(bench.UsageError):
        ExperimentConfig("fredholm", "enn1", [-0.1], [1]).validate()
    with pytest.raises(bench.UsageError):
        ExperimentConfig("fredholm", "enn1", [0.1], []).validate()


def _rows(k):
    return [RunRow(50 + 20 * i, 0.1 / (i + 1), 1 / 3 + i, np.pi * i, 12.5 * i) for i in range(k)]


def test_empty_record_header_only(tmp_path):
    p = emit_csv(RunRecord(), tmp_path / "e.csv")
    assert p.read_text().strip() == "n,misfit,rel_l2_error,path_norm,wall_ms"
    assert read_csv(p) == []


def test_csv_round_trip(tmp_path):
    rec = RunRecord(rows=_rows(3))
    back = read_csv(emit_csv(rec, tmp_path / "r.csv"))
    for a, b in zip(rec.rows, back):
        assert a.n == b.n
        for f in ("misfit", "rel_l2_error", "path_norm"):
            assert abs(getattr(a, f) - getattr(b, f)) <= 1e-15
        assert abs(a.wall_ms - b.wall_ms) <= 1e-3


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("runs")
    cfg = ExperimentConfig("fredholm", "enn1", [0.0, 0.15], [111], out=str(out), n_max=110,
                           iterations=150)
    return cfg, run_experiment(cfg)


def test_manifest_round_trip(small_run):
    cfg, paths = small_run
    assert len(paths) == 2
    man = json.loads(manifest_path(paths[0]).read_text())
    assert ExperimentConfig.from_dict(man["config"]) == cfg
    assert man["prng"] == "numpy.random.PCG64"
    assert man["operator"]["kind"] == "fredholm_green"
    assert man["exact_solution"]["barron_norm"] == bench.kernel_sum_barron_norm(
        man["exact_solution"]["nodes"], man["exact_solution"]["coefficients"])


def test_zero_noise_terminates_by_budget(small_run):
    _, paths = small_run
    man = json.loads(manifest_path(paths[0]).read_text())
    assert man["cell"]["delta"] == 0.0
    assert man["terminated_by"] == "budget" and man["stop_n"] is None
    assert [r.n for r in read_csv(paths[0])] == [50, 70, 90, 110]


def test_stopping_index_matches_rows(small_run):
    cfg, paths = small_run
    for p in paths:
        man = json.loads(manifest_path(p).read_text())
        rows = read_csv(p)
        thr = cfg.tau * man["cell"]["delta"]
        first = next((r.n for r in rows if r.misfit <= thr), None)
        assert man["stop_n"] == first
        if man["terminated_by"] == "discrepancy":
            assert rows[-1].n == first
    assert json.loads(manifest_path(paths[1]).read_text())["terminated_by"] == "discrepancy"


def test_reference_grid_record_count(tmp_path):
    cfg = ExperimentConfig("autoconv", "tikhonov", list(bench.REFERENCE_DELTAS),
                           bench.REFERENCE_SEEDS["autoconv"], out=str(tmp_path), n_max=50,
                           iterations=2)
    paths = run_experiment(cfg)
    assert len(paths) == 12 == len(list(tmp_path.glob("*.json")))


def test_cli_defaults(capsys):
    assert cli.main(["defaults"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["fredholm"]["seeds"] == [111, 666, 3333]
    assert d["eit"]["data_points"] == 124 and d["eit"]["solution_points"] == 961


def test_cli_usage_errors(capsys):
    with pytest.raises(SystemExit) as e:
        cli.main(["run", "--example", "heat", "--algorithm", "enn1"])
    assert e.value.code == 1
    assert cli.main(["run", "--example", "fredholm", "--algorithm", "enn1",
                     "--delta", "-1"]) == 1
    with pytest.raises(SystemExit) as e:
        cli.main([])
    assert e.value.code == 1


def test_cli_runtime_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["run", "--example", "fredholm", "--algorithm", "enn1", "--delta", "0.1",
                     "--seed", "1", "--n-max", "50", "--iterations", "1",
                     "--out", str(blocker / "sub")]) == 2


def test_cli_env_override(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv(bench.OUTPUT_ENV, str(tmp_path / "envout"))
    assert cli.main(["run", "--example", "fredholm", "--algorithm", "enn2", "--delta", "0.3",
                     "--seed", "5", "--n-max", "50", "--iterations", "3"]) == 0
    printed = capsys.readouterr().out.split()
    assert len(printed) == 1 and printed[0].startswith(str(tmp_path / "envout"))
    assert (tmp_path / "envout" / "fredholm_enn2_delta0.3_seed5.json").exists()


def test_cli_determinism(tmp_path):
    args = ["run", "--example", "autoconv", "--algorithm", "enn1", "--delta", "0.01",
            "--seed", "678", "--n-max", "90", "--iterations", "40"]
    assert cli.main(args + ["--out", str(tmp_path / "a")]) == 0
    assert cli.main(args + ["--out", str(tmp_path / "b")]) == 0
    name = "autoconv_enn1_delta0.01_seed678.csv"
    assert numeric_content(tmp_path / "a" / name) == numeric_content(tmp_path / "b" / name)
