import json

import numpy as np
import pytest

from dpmean import __version__
from dpmean.bench import read_histogram_csv, read_sweep_csv
from dpmean.cli import EXIT_BOTTOM, EXIT_IO, EXIT_OK, EXIT_USAGE, SEED_ENV_VAR, main


@pytest.fixture
def tiny_csv(tmp_path):
    p = tmp_path / "tiny.csv"
    p.write_text("salary\n4\n5\n9\n")
    return str(p)


@pytest.fixture
def five_identical_csv(tmp_path):
    p = tmp_path / "five.csv"
    p.write_text("x\n3.2\n3.2\n3.2\n3.2\n3.2\n")
    return str(p)


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


# ---------------------------------------------------------------------------
# estimate
# ---------------------------------------------------------------------------


def test_estimate_name_and_shame_delta_one_is_empirical_mean(tiny_csv, capsys):
    code, out, _ = run(
        ["estimate", "--mech", "name-and-shame", "--delta", "1", "--input", tiny_csv, "--column", "salary"],
        capsys,
    )
    assert code == EXIT_OK
    assert "estimate: 6" in out
    assert "budget: eps=0 delta=1" in out


def test_estimate_coarse_five_identical_points_bottoms_out(five_identical_csv, capsys):
    # documented test seed 7: the max noisy count stays below the
    # threshold 2 + 2 ln 20, so the coarse stage declines to answer
    code, out, _ = run(
        ["estimate", "--mech", "coarse", "--eps", "1", "--delta", "0.05",
         "--input", five_identical_csv, "--column", "x", "--seed", "7"],
        capsys,
    )
    assert code == EXIT_BOTTOM
    assert "bottom" in out


def test_estimate_missing_eps_names_the_flag(tiny_csv, capsys):
    code, _, err = run(
        ["estimate", "--mech", "threshold", "--threshold", "10", "--input", tiny_csv, "--column", "salary"],
        capsys,
    )
    assert code == EXIT_USAGE
    assert "--eps" in err


def test_estimate_unknown_mechanism_lists_valid_ids(tiny_csv, capsys):
    code, _, err = run(
        ["estimate", "--mech", "median", "--input", tiny_csv, "--column", "salary"], capsys
    )
    assert code == EXIT_USAGE
    assert "name-and-shame" in err and "smooth-sens" in err


def test_estimate_missing_file_is_io_error(capsys):
    code, _, err = run(
        ["estimate", "--mech", "name-and-shame", "--delta", "1",
         "--input", "/does/not/exist.csv", "--column", "x"],
        capsys,
    )
    assert code == EXIT_IO


def test_estimate_from_population_spec(capsys):
    code, out, _ = run(
        ["estimate", "--mech", "smooth-sens", "--eps", "1", "--a", "-1", "--b", "1",
         "--pop", "two-point:v=1,p=0.5", "--n", "50", "--seed", "3"],
        capsys,
    )
    assert code == EXIT_OK
    assert "estimate:" in out


def test_estimate_needs_exactly_one_source(tiny_csv, capsys):
    code, _, err = run(["estimate", "--mech", "name-and-shame", "--delta", "1"], capsys)
    assert code == EXIT_USAGE
    code, _, err = run(
        ["estimate", "--mech", "name-and-shame", "--delta", "1", "--input", tiny_csv,
         "--column", "salary", "--pop", "gaussian:mu=0"],
        capsys,
    )
    assert code == EXIT_USAGE


def test_estimate_remaining_mechanism_ids(tiny_csv, capsys):
    # clipped-mean: zero bias budget flag missing -> usage error naming it
    code, _, err = run(
        ["estimate", "--mech", "clipped-mean", "--eps", "1", "--a", "0", "--b", "10",
         "--input", tiny_csv, "--column", "salary"],
        capsys,
    )
    assert code == EXIT_USAGE and "--beta" in err
    # clipped-mean happy path
    code, out, _ = run(
        ["estimate", "--mech", "clipped-mean", "--eps", "1", "--beta", "0.1", "--a", "0",
         "--b", "10", "--input", tiny_csv, "--column", "salary", "--seed", "2"],
        capsys,
    )
    assert code == EXIT_OK and "budget: eps=1 delta=0" in out
    # combined reports the composed budget
    code, out, _ = run(
        ["estimate", "--mech", "combined", "--eps", "1", "--delta", "0.001", "--a", "0",
         "--b", "10", "--lambda", "4", "--psi", "2",
         "--input", tiny_csv, "--column", "salary", "--seed", "2"],
        capsys,
    )
    assert code == EXIT_OK and "delta=0.001" in out
    # fine / fine-kv with an explicit split
    for mech in ("fine", "fine-kv"):
        code, out, _ = run(
            ["estimate", "--mech", mech, "--eps", "1", "--delta", "0.2", "--n1", "2",
             "--c", "5", "--sigma", "1", "--input", tiny_csv, "--column", "salary",
             "--seed", "2"],
            capsys,
        )
        assert code in (EXIT_OK, EXIT_BOTTOM)


def test_estimate_seed_env_fallback(tiny_csv, capsys, monkeypatch):
    monkeypatch.setenv(SEED_ENV_VAR, "12345")
    code1, out1, _ = run(
        ["estimate", "--mech", "threshold", "--threshold", "10", "--eps", "1",
         "--input", tiny_csv, "--column", "salary"],
        capsys,
    )
    monkeypatch.delenv(SEED_ENV_VAR)
    code2, out2, _ = run(
        ["estimate", "--mech", "threshold", "--threshold", "10", "--eps", "1",
         "--input", tiny_csv, "--column", "salary", "--seed", "12345"],
        capsys,
    )
    assert code1 == code2 == EXIT_OK
    assert out1 == out2


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def test_sweep_single_cell(tmp_path, capsys):
    out_csv = tmp_path / "one.csv"
    code, _, _ = run(
        ["sweep", "--kind", "threshold", "--pop", "gaussian:mu=1,sigma=1",
         "--thresholds", "3", "--eps-grid", "1", "--n", "20", "--trials", "50",
         "--seed", "5", "--output", str(out_csv)],
        capsys,
    )
    assert code == EXIT_OK
    report, version = read_sweep_csv(out_csv)
    assert version == __version__
    assert len(report.rows) == 1
    assert report.rows[0].mechanism == "threshold"


def test_sweep_preset_cardinality_and_flag_override(tmp_path, capsys):
    out_csv = tmp_path / "fig1.csv"
    code, _, _ = run(
        ["sweep", "--preset", "fig1", "--trials", "4", "--n", "30",
         "--seed", "1", "--output", str(out_csv)],
        capsys,
    )
    assert code == EXIT_OK
    report, _ = read_sweep_csv(out_csv)
    # 12 thresholds x 4 epsilons from the preset; trials overridden to 4
    assert len(report.rows) == 48
    assert all(r.trials == 4 for r in report.rows)


def test_sweep_rerun_is_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    argv = ["sweep", "--kind", "kv", "--mu-grid", "0:0.4:0.2", "--n", "40", "--trials", "20",
            "--eps", "1", "--delta", "0.2", "--seed", "9"]
    assert main(argv + ["--output", str(a)]) == EXIT_OK
    assert main(argv + ["--output", str(b)]) == EXIT_OK
    capsys.readouterr()
    assert a.read_bytes() == b.read_bytes()


def test_sweep_header_config_round_trip(tmp_path, capsys):
    out_csv = tmp_path / "sweep.csv"
    argv = ["sweep", "--kind", "threshold", "--pop", "lognormal:median=1,sigma_log=1",
            "--thresholds", "1,2", "--eps-grid", "0.5", "--n", "10", "--trials", "10",
            "--seed", "21", "--output", str(out_csv)]
    assert main(argv) == EXIT_OK
    capsys.readouterr()
    report, _ = read_sweep_csv(out_csv)
    cfg = report.config
    assert cfg["version"] == __version__
    assert cfg["seed"] == 21
    assert cfg["pop"] == "lognormal:median=1,sigma_log=1"
    assert cfg["thresholds"] == "1,2"
    assert cfg["subcommand"] == "sweep"
    # the echoed config is complete enough to reproduce the file
    rebuilt = tmp_path / "rebuilt.csv"
    argv2 = ["sweep", "--kind", cfg["kind"], "--pop", cfg["pop"], "--thresholds", cfg["thresholds"],
             "--eps-grid", cfg["eps_grid"], "--n", cfg["n"], "--trials", cfg["trials"],
             "--seed", str(cfg["seed"]), "--output", str(rebuilt)]
    assert main(argv2) == EXIT_OK
    capsys.readouterr()
    assert rebuilt.read_bytes() == out_csv.read_bytes()


def test_sweep_hist_kind_writes_two_histograms(tmp_path, capsys):
    out_csv = tmp_path / "hist.csv"
    code, _, _ = run(
        ["sweep", "--kind", "hist", "--n", "100", "--trials", "40", "--bins", "10",
         "--eps", "1", "--delta", "0.05", "--seed", "2", "--output", str(out_csv)],
        capsys,
    )
    assert code == EXIT_OK
    tables, cfg, _ = read_histogram_csv(out_csv)
    assert [t.mechanism for t in tables] == ["fine", "fine-kv"]
    assert np.isfinite(tables[0].data_mean)


def test_sweep_config_file_supplies_defaults(tmp_path, capsys):
    conf = tmp_path / "run.conf"
    conf.write_text(
        "# threshold sweep defaults\n"
        "kind = threshold\n"
        "pop = gaussian:mu=1,sigma=1\n"
        "thresholds = 2,3\n"
        "eps-grid = 1\n"
        "n = 10\n"
        "trials = 10\n"
        "seed = 4\n"
    )
    out_csv = tmp_path / "conf.csv"
    code, _, _ = run(["sweep", "--config", str(conf), "--output", str(out_csv)], capsys)
    assert code == EXIT_OK
    report, _ = read_sweep_csv(out_csv)
    assert len(report.rows) == 2
    assert report.config["seed"] == 4


def test_sweep_unknown_preset(capsys):
    code, _, err = run(["sweep", "--preset", "fig9", "--output", "x.csv"], capsys)
    assert code == EXIT_USAGE
    assert "fig1" in err


# ---------------------------------------------------------------------------
# bounds
# ---------------------------------------------------------------------------


def _read_bounds_csv(path):
    rows = []
    header = None
    config = None
    for line in open(path):
        if line.startswith("# config:"):
            config = json.loads(line[len("# config:"):])
            continue
        if line.startswith("#"):
            continue
        if header is None:
            header = line.strip().split(",")
            continue
        rows.append(dict(zip(header, line.strip().split(","))))
    return header, rows, config


def test_bounds_nonprivate_floor_rows(tmp_path, capsys):
    out_csv = tmp_path / "floor.csv"
    code, _, _ = run(
        ["bounds", "--bound", "nonprivate-floor", "--n", "1,4", "--output", str(out_csv)], capsys
    )
    assert code == EXIT_OK
    header, rows, config = _read_bounds_csv(out_csv)
    assert header == ["n", "eps", "delta", "beta", "bound_name", "value", "regime_ok"]
    assert [float(r["value"]) for r in rows] == pytest.approx([1 / 18, 1 / 36], rel=1e-11)
    assert all(r["regime_ok"] == "true" for r in rows)
    assert config["bound"] == "nonprivate-floor"


def test_bounds_trilemma_gamma_grid_flags_clamp_violations(tmp_path, capsys):
    out_csv = tmp_path / "tri.csv"
    code, _, _ = run(
        ["bounds", "--bound", "trilemma", "--n", "100", "--eps", "1", "--delta", "1e-4",
         "--beta", "1e-3", "--gamma", "0.001,0.05,0.19,0.25", "--output", str(out_csv)],
        capsys,
    )
    assert code == EXIT_OK
    _, rows, _ = _read_bounds_csv(out_csv)
    # 16 beta = 0.016: gamma 0.001 below the clamp, 0.25 above 1/5
    assert [r["regime_ok"] for r in rows] == ["false", "true", "true", "false"]
    assert rows[0]["value"] == "nan" and rows[3]["value"] == "nan"


def test_bounds_shuffled_eps_floor_flagging(tmp_path, capsys):
    out_csv = tmp_path / "amp.csv"
    code, _, _ = run(
        ["bounds", "--bound", "shuffled-eps", "--eps", "1", "--m", "100,10000",
         "--delta1", "1e-6", "--output", str(out_csv)],
        capsys,
    )
    assert code == EXIT_OK
    _, rows, _ = _read_bounds_csv(out_csv)
    assert [r["regime_ok"] for r in rows] == ["false", "true"]
    assert float(rows[1]["value"]) == pytest.approx(0.214, abs=5e-4)


def test_bounds_requires_axes(capsys, tmp_path):
    code, _, err = run(
        ["bounds", "--bound", "ksu", "--n", "10", "--output", str(tmp_path / "x.csv")], capsys
    )
    assert code == EXIT_USAGE
    assert "--eps" in err


def test_bounds_unknown_bound(capsys, tmp_path):
    code, _, err = run(
        ["bounds", "--bound", "magic", "--n", "10", "--output", str(tmp_path / "x.csv")], capsys
    )
    assert code == EXIT_USAGE
    assert "nonprivate-floor" in err


def test_version_flag(capsys):
    with pytest.raises(SystemExit):
        main(["--version"])
    out = capsys.readouterr().out
    assert __version__ in out
