"""Command-line surface: exit codes, formats, determinism, config merge."""

import csv
import json

import numpy as np
import pytest

from rubberroll.cli import main

ARGS_XY = ["--alpha", "0.5", "--beta", "3", "--nu", "0.5", "--eta", "0.5"]


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def test_missing_required_flag_exits_one(capsys):
    code, _, err = run(["simulate", "--alpha", "0.5", "--kappa", "0.8",
                        "--theta0", "0.4678", "--tmax", "1"], capsys)
    assert code == 1
    assert "--beta is required" in err


def test_invalid_parameter_exits_one(capsys):
    code, _, err = run(["simulate", *ARGS_XY[:6], "--eta", "-1", "--kappa", "0.8",
                        "--theta0", "0.4678", "--tmax", "1"], capsys)
    assert code == 1
    assert "eta" in err


def test_energy_below_potential_exits_one(capsys):
    code, _, err = run(["simulate", *ARGS_XY, "--kappa", "0.8", "--theta0", "0.9",
                        "--energy", "1.0", "--tmax", "1"], capsys)
    assert code == 1
    assert "below the potential" in err


def test_conflicting_styles_exit_one(capsys):
    code, _, err = run(["simulate", *ARGS_XY, "--kappa", "0.8", "--theta0", "0.9",
                        "--omega", "0,0,1", "--gamma", "0,0,1",
                        "--tmax", "1"], capsys)
    assert code == 1


def test_off_leaf_full_state_exits_one(capsys):
    code, _, err = run(["simulate", *ARGS_XY, "--omega", "0,0,1",
                        "--gamma", "0,0,0", "--tmax", "1"], capsys)
    assert code == 1 and "unit vector" in err
    code, _, err = run(["simulate", *ARGS_XY, "--omega", "0,0,1",
                        "--gamma", "0,0,1", "--tmax", "1"], capsys)
    assert code == 1 and "vertical spin" in err


def test_simulate_reduced_csv_contract(tmp_path, capsys):
    out = tmp_path / "run.csv"
    code, _, err = run(["simulate", *ARGS_XY, "--kappa", "0.8",
                        "--theta0", "0.4678", "--ptheta0", "0",
                        "--tmax", "20", "--samples", "51",
                        "--out", str(out)], capsys)
    assert code == 0
    header, rows = read_csv(out)
    assert header == ["t", "theta", "p_theta", "psi", "phi", "x_c", "y_c",
                      "z_c", "x_p", "y_p", "E_drift", "F1_drift"]
    assert len(rows) == 51
    # 17 significant digits survive the round trip
    assert rows[1][1] == "%.17g" % float(rows[1][1])
    assert "max |E drift|" in err
    drift = float(err.split("=")[1].split(",")[0])
    assert abs(drift) <= 1e-8


def test_simulate_full_style_runs(tmp_path, capsys):
    out = tmp_path / "full.csv"
    code, _, err = run(["simulate", *ARGS_XY,
                        "--omega", "0.3,-0.18616978176397397,0.2346033803494251",
                        "--gamma", "0,0.78332690962748341,0.62160996827066439",
                        "--tmax", "10", "--samples", "41",
                        "--out", str(out)], capsys)
    assert code == 0
    _, rows = read_csv(out)
    assert len(rows) == 41
    # the F1 drift column is live for full-style runs
    f1 = [abs(float(r[11])) for r in rows]
    assert max(f1) < 1e-9


def test_simulate_deterministic_reruns(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    argv = ["simulate", *ARGS_XY, "--kappa", "0.8", "--theta0", "0.4678",
            "--tmax", "10", "--samples", "21"]
    assert main([*argv, "--out", str(a)]) == 0
    assert main([*argv, "--out", str(b)]) == 0
    capsys.readouterr()
    assert a.read_bytes() == b.read_bytes()


def test_config_file_merge_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nalpha = 0.5\nbeta = 3\nnu = 0.5\neta = 0.5\n"
                   "kappa = 0.8\ntheta0 = 0.4678\ntmax = 5\nsamples = 11\n")
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    assert main(["simulate", "--config", str(cfg), "--out", str(a)]) == 0
    assert main(["simulate", "--config", str(cfg), "--kappa", "0.9",
                 "--out", str(b)]) == 0
    capsys.readouterr()
    _, rows_a = read_csv(a)
    _, rows_b = read_csv(b)
    assert rows_a[5][5] != rows_b[5][5]


def test_config_rejects_malformed_line(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("alpha 0.5\n")
    code, _, err = run(["simulate", "--config", str(cfg)], capsys)
    assert code == 1
    assert "key = value" in err


def test_trajectory_angle_seeds(tmp_path, capsys):
    base = tmp_path / "t0.csv"
    seeded = tmp_path / "t1.csv"
    argv = ["trajectory", *ARGS_XY, "--kappa", "0.8", "--theta0", "0.4678",
            "--tmax", "5", "--samples", "11"]
    assert main([*argv, "--out", str(base)]) == 0
    assert main([*argv, "--psi0", "3.141592653589793", "--x0", "1.0",
                 "--out", str(seeded)]) == 0
    capsys.readouterr()
    _, r0 = read_csv(base)
    _, r1 = read_csv(seeded)
    assert float(r1[0][3]) == pytest.approx(np.pi)
    assert float(r1[0][5]) == 1.0
    assert r0[0][3] == "0"


@pytest.mark.parametrize("ab,want", [
    (("0.5", "0.5"), "a"),
    (("0.5", "1.1"), "b"),
    (("0.5", "3"), "c"),
    (("0", "0.5"), "d"),
    (("0", "1.5"), "e"),
])
def test_bifurcation_types(tmp_path, capsys, ab, want):
    out = tmp_path / "d.json"
    code, _, _ = run(["bifurcation", "--alpha", ab[0], "--beta", ab[1],
                      "--out", str(out)], capsys)
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["diagram_type"] == want
    assert doc["boundary"] is False


def test_bifurcation_sphere_boundary_flag(tmp_path, capsys):
    out = tmp_path / "d.json"
    assert main(["bifurcation", "--alpha", "0", "--beta", "1",
                 "--out", str(out)]) == 0
    capsys.readouterr()
    doc = json.loads(out.read_text())
    assert doc["boundary"] is True


def test_bifurcation_json_round_trip(tmp_path, capsys):
    out = tmp_path / "d.json"
    assert main(["bifurcation", "--alpha", "0.5", "--beta", "3",
                 "--out", str(out)]) == 0
    capsys.readouterr()
    doc = json.loads(out.read_text())
    assert json.loads(json.dumps(doc)) == doc
    assert {c["label"] for c in doc["curves"]} == {"sigma_s0", "sigma_spi",
                                                  "sigma_u"}
    for c in doc["curves"]:
        assert all(s["stability"] in ("center", "saddle") for s in c["samples"])


def test_rotation_number_grid_zero_kappa(tmp_path, capsys):
    out = tmp_path / "rn.csv"
    code, _, _ = run(["rotation-number", *ARGS_XY, "--kappa", "0",
                      "--energy-range", "3.2:3.6", "--n-energy", "5",
                      "--out", str(out)], capsys)
    assert code == 0
    _, rows = read_csv(out)
    assert len(rows) == 5
    assert all(r[2] == "0" for r in rows)


def test_rotation_number_grid_skips_empty_levels(tmp_path, capsys):
    # eps below the floor at this kappa: rows are dropped, not faked
    out = tmp_path / "rn.csv"
    code, _, _ = run(["rotation-number", *ARGS_XY, "--kappa", "0.8",
                      "--energy-range", "1.0:3.4", "--n-energy", "4",
                      "--out", str(out)], capsys)
    assert code == 0
    _, rows = read_csv(out)
    assert 0 < len(rows) < 4


def test_rotation_number_jobs_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    argv = ["rotation-number", *ARGS_XY, "--kappa-range", "0.4:0.6",
            "--n-kappa", "3", "--energy", "3.4"]
    assert main([*argv, "--out", str(a)]) == 0
    assert main([*argv, "--jobs", "3", "--out", str(b)]) == 0
    capsys.readouterr()
    assert a.read_bytes() == b.read_bytes()


def test_resonance_curve_known_point(tmp_path, capsys):
    out = tmp_path / "res.csv"
    code, _, _ = run(["resonance", *ARGS_XY, "--n", "0",
                      "--kappa-range", "0.5:0.5", "--n-kappa", "1",
                      "--out", str(out)], capsys)
    assert code == 0
    header, rows = read_csv(out)
    assert header == ["kappa", "eps", "N", "N_err", "branch"]
    assert len(rows) == 1
    assert float(rows[0][1]) == pytest.approx(3.1790302156, abs=1e-6)


def test_classify_json_output(capsys):
    code, out, _ = run(["classify", *ARGS_XY, "--kappa", "1",
                        "--energy", "3.056979338"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["kind"] == "QuasiPeriodicBounded"
    assert doc["resonance"] is None
    assert abs(doc["N"] + 0.759287942) < 1e-6


def test_classify_below_floor_exits_two(capsys):
    code, _, err = run(["classify", *ARGS_XY, "--kappa", "0.8",
                        "--energy", "1.2"], capsys)
    assert code == 2
    assert "numerical failure" in err


def test_verify_quick_passes(capsys):
    code, out, _ = run(["verify", "--quick"], capsys)
    assert code == 0
    lines = [ln for ln in out.splitlines() if ln.startswith(("PASS", "FAIL"))]
    assert len(lines) >= 6
    assert all(ln.startswith("PASS") for ln in lines)
    assert "all checks passed" in out


def test_verify_flipped_cross_term_fails(capsys):
    code, out, _ = run(["verify", "--quick", "--b-sign", "paper"], capsys)
    assert code == 3
    failed = [ln for ln in out.splitlines() if ln.startswith("FAIL")]
    assert any("energy-form" in ln for ln in failed)


def test_verify_seed_changes_draws_not_verdict(capsys):
    code0, out0, _ = run(["verify", "--quick", "--seed", "1"], capsys)
    code1, out1, _ = run(["verify", "--quick", "--seed", "2"], capsys)
    assert code0 == code1 == 0
    assert out0 != out1
