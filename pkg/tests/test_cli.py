"""Command line interface: CSV schemas, figure and manifest side effects,
deterministic re-runs, and exit codes on the error paths."""

import csv
import hashlib
import json
import math
import os

import pytest

from outagekit.cli import main
from outagekit.exponent import PER_BIT_DB_SHIFT


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle)
    return str(path)


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as handle:
        return list(csv.reader(handle))


def _read_bytes(path):
    with open(path, "rb") as handle:
        return handle.read()


@pytest.fixture()
def rayleigh_file(tmp_path):
    return _write_json(tmp_path / "rayleigh.json", {"kind": "rayleigh"})


def test_exponent_csv_schema_and_residuals(tmp_path, rayleigh_file, capsys):
    out = str(tmp_path / "curve.csv")
    code = main(
        [
            "exponent",
            "--model",
            rayleigh_file,
            "--eta-min",
            "1",
            "--eta-max",
            "100",
            "--points",
            "40",
            "--out",
            out,
        ]
    )
    assert code == 0
    rows = _read_csv(out)
    assert rows[0] == [
        "eta",
        "eta_db",
        "exponent",
        "lambda_star",
        "closed_form",
        "closed_minus_numeric",
    ]
    assert len(rows) == 41
    for row in rows[1:]:
        eta, eta_db, exponent, lam, closed, resid = map(float, row)
        assert eta_db == pytest.approx(10.0 * math.log10(eta), abs=1e-12)
        assert abs(resid) <= 1e-9
        assert abs(closed - exponent) == pytest.approx(abs(resid), abs=1e-15)
        assert exponent >= 0.0
        assert lam <= 0.0
    # floats are serialized exactly via repr
    assert float(rows[1][0]) == 1.0
    assert os.path.exists(str(tmp_path / "curve.png"))
    assert os.path.exists(out + ".manifest.json")


def test_exponent_per_bit_column(tmp_path, rayleigh_file):
    out = str(tmp_path / "curve.csv")
    assert (
        main(
            [
                "exponent",
                "--model",
                rayleigh_file,
                "--eta-min",
                "1",
                "--eta-max",
                "10",
                "--points",
                "5",
                "--per-bit",
                "--no-plot",
                "--out",
                out,
            ]
        )
        == 0
    )
    rows = _read_csv(out)
    assert rows[0][-1] == "eta_db_per_bit"
    for row in rows[1:]:
        assert float(row[-1]) == pytest.approx(float(row[1]) + PER_BIT_DB_SHIFT, abs=1e-12)
    assert not os.path.exists(str(tmp_path / "curve.png"))


def test_exponent_no_closed_form_columns_for_correlated(tmp_path):
    psi = [[[1.0, 0.0], [0.4, 0.0]], [[0.4, 0.0], [1.0, 0.0]]]
    sigma = [[[0.5, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.5, 0.0]]]
    model_file = _write_json(
        tmp_path / "corr.json",
        {"kind": "mimo_correlated", "psi": psi, "sigma": sigma, "n_t": 2, "n_r": 1},
    )
    out = str(tmp_path / "corr.csv")
    assert (
        main(
            [
                "exponent",
                "--model",
                model_file,
                "--eta-min",
                "1.2",
                "--eta-max",
                "20",
                "--points",
                "6",
                "--no-plot",
                "--out",
                out,
            ]
        )
        == 0
    )
    rows = _read_csv(out)
    assert rows[0] == ["eta", "eta_db", "exponent", "lambda_star"]


def test_exponent_rerun_is_byte_identical(tmp_path, rayleigh_file):
    args = [
        "exponent",
        "--model",
        rayleigh_file,
        "--eta-min",
        "1",
        "--eta-max",
        "50",
        "--points",
        "25",
    ]
    out_a = str(tmp_path / "a.csv")
    out_b = str(tmp_path / "b.csv")
    assert main(args + ["--out", out_a]) == 0
    assert main(args + ["--out", out_b]) == 0
    assert _read_bytes(out_a) == _read_bytes(out_b)
    assert _read_bytes(str(tmp_path / "a.png")) == _read_bytes(str(tmp_path / "b.png"))


def test_exponent_manifest_hashes_outputs(tmp_path, rayleigh_file):
    out = str(tmp_path / "curve.csv")
    argv = [
        "exponent",
        "--model",
        rayleigh_file,
        "--eta-min",
        "1",
        "--eta-max",
        "10",
        "--points",
        "8",
        "--out",
        out,
    ]
    assert main(argv) == 0
    with open(out + ".manifest.json", encoding="utf-8") as handle:
        manifest = json.load(handle)
    assert manifest["command"] == "exponent"
    assert manifest["argv"] == argv
    assert manifest["version"]
    assert manifest["duration_seconds"] >= 0.0
    paths = {os.path.basename(o["path"]) for o in manifest["outputs"]}
    assert paths == {"curve.csv", "curve.png"}
    for entry in manifest["outputs"]:
        digest = hashlib.sha256(_read_bytes(entry["path"])).hexdigest()
        assert digest == entry["sha256"]


def test_exponent_rician_ordering(tmp_path):
    outputs = {}
    for kappa in [0.5, 0.9]:
        model_file = _write_json(tmp_path / f"ric{kappa}.json", {"kind": "rician", "kappa": kappa})
        out = str(tmp_path / f"ric{kappa}.csv")
        assert (
            main(
                [
                    "exponent",
                    "--model",
                    model_file,
                    "--eta-min",
                    "1.05",
                    "--eta-max",
                    "50",
                    "--points",
                    "20",
                    "--no-plot",
                    "--out",
                    out,
                ]
            )
            == 0
        )
        outputs[kappa] = [float(r[2]) for r in _read_csv(out)[1:]]
    # stronger line-of-sight concentrates the fading law: larger exponent
    assert all(a >= b for a, b in zip(outputs[0.9], outputs[0.5]))


def test_feedback_csv_and_envelope(tmp_path):
    out = str(tmp_path / "fb.csv")
    code = main(
        [
            "feedback",
            "--tau",
            "0.5,1,2",
            "--g0",
            "0",
            "--eta-min",
            "1",
            "--eta-max",
            "10",
            "--points",
            "12",
            "--out",
            out,
        ]
    )
    assert code == 0
    rows = _read_csv(out)
    assert rows[0] == ["eta", "eta_db", "exponent", "regime", "x_star", "tau", "g0"]
    taus = {row[5] for row in rows[1:]}
    assert taus == {"0.5", "1.0", "2.0"}
    for row in rows[1:]:
        assert float(row[1]) == pytest.approx(10.0 * math.log10(float(row[0])), abs=1e-12)
        assert row[3] in {"below_threshold", "above_threshold"}
        if row[3] == "above_threshold":
            assert row[4] == ""

    env_rows = _read_csv(str(tmp_path / "fb_envelope.csv"))
    assert env_rows[0] == ["eta", "eta_db", "tau_opt", "exponent"]
    # eta-min 1 puts the documented point at the first grid row
    first = env_rows[1]
    assert float(first[0]) == 1.0
    assert float(first[2]) == pytest.approx(1.0, abs=1e-12)
    assert float(first[3]) == pytest.approx(0.45867514538708193, abs=1e-12)
    tau_opts = [float(r[2]) for r in env_rows[1:]]
    assert all(a > b for a, b in zip(tau_opts, tau_opts[1:]))
    # envelope dominates each fixed-threshold curve on the shared grid
    env_by_eta = {r[0]: float(r[3]) for r in env_rows[1:]}
    for row in rows[1:]:
        assert float(row[2]) <= env_by_eta[row[0]] + 1e-9
    assert os.path.exists(str(tmp_path / "fb.png"))


def test_feedback_positive_g0_uses_general_search(tmp_path):
    out = str(tmp_path / "fb.csv")
    assert (
        main(
            [
                "feedback",
                "--tau",
                "1",
                "--g0",
                "0,0.5",
                "--eta-min",
                "1.2",
                "--eta-max",
                "6",
                "--points",
                "5",
                "--no-plot",
                "--out",
                out,
            ]
        )
        == 0
    )
    rows = _read_csv(out)
    by_g0 = {}
    for row in rows[1:]:
        by_g0.setdefault(row[6], []).append((float(row[0]), float(row[2])))
    zero = by_g0["0.0"]
    half = by_g0["0.5"]
    assert [e for e, _ in zero] == [e for e, _ in half]
    # the g0=0 curve is flat at its plateau across this range
    assert all(v == pytest.approx(zero[0][1], abs=1e-12) for _, v in zero)
    for (eta, a), (_, b) in zip(zero, half):
        if eta <= 2.0:
            # below the reserved-power regime threshold the plateau wins
            assert a >= b - 1e-12
    # at large eta the reserved below-power keeps earning exponent
    assert half[-1][1] > zero[-1][1] + 1e-3


def test_feedback_conjecture_scan_output(tmp_path):
    out = str(tmp_path / "fb.csv")
    assert (
        main(
            [
                "feedback",
                "--tau",
                "1",
                "--g0",
                "0",
                "--eta-min",
                "1",
                "--eta-max",
                "4",
                "--points",
                "4",
                "--conjecture",
                "1.0",
                "--no-plot",
                "--out",
                out,
            ]
        )
        == 0
    )
    with open(str(tmp_path / "fb_conjecture.json"), encoding="utf-8") as handle:
        scan = json.load(handle)
    assert scan["eta"] == 1.0
    assert scan["supported"] is True
    assert scan["tau_expected"] == pytest.approx(1.0)
    assert scan["best"]["g0"] == 0.0
    assert scan["best"]["tau"] == pytest.approx(1.0)
    assert scan["best"]["exponent"] == pytest.approx(0.458675, abs=5e-6)


def test_simulate_tilted_model(tmp_path, rayleigh_file):
    out_dir = str(tmp_path / "sim")
    code = main(
        [
            "simulate",
            "--model",
            rayleigh_file,
            "--eta",
            "2",
            "--sampler",
            "tilted",
            "--trials",
            "20000",
            "--k-grid",
            "20,40,60,80",
            "--seed",
            "2024",
            "--out-dir",
            out_dir,
        ]
    )
    assert code == 0
    rows = _read_csv(os.path.join(out_dir, "outage.csv"))
    assert rows[0] == ["K", "outage", "std_err", "log_outage", "flagged"]
    assert [r[0] for r in rows[1:]] == ["20", "40", "60", "80"]
    assert all(r[4] == "false" for r in rows[1:])
    with open(os.path.join(out_dir, "summary.json"), encoding="utf-8") as handle:
        summary = json.load(handle)
    assert set(summary) == {
        "slope",
        "intercept",
        "r_squared",
        "n_points",
        "analytical_exponent",
        "ratio",
        "oracle_slope",
    }
    assert summary["n_points"] == 4
    assert summary["analytical_exponent"] == pytest.approx(0.1931471805599453, abs=1e-12)
    assert 0.9 < summary["ratio"] < 1.1
    assert summary["oracle_slope"] == pytest.approx(summary["slope"], rel=0.1)
    assert os.path.exists(os.path.join(out_dir, "outage.png"))
    assert os.path.exists(os.path.join(out_dir, "outage.csv.manifest.json"))


def test_simulate_config_file_with_flag_override(tmp_path):
    config = _write_json(
        tmp_path / "config.json",
        {
            "protocol": {"tau": 1.0, "g0": 0.0},
            "eta": 1.0,
            "trials": 100000,
            "k_grid": [4, 8, 12, 16],
            "seed": 7,
        },
    )
    out_dir = str(tmp_path / "sim")
    assert main(["simulate", "--config", config, "--seed", "9", "--out-dir", out_dir]) == 0
    with open(os.path.join(out_dir, "outage.csv.manifest.json"), encoding="utf-8") as handle:
        manifest = json.load(handle)
    assert manifest["seed"] == 9  # flag wins over the config file
    assert manifest["config"]["protocol"] == {"tau": 1.0, "g0": 0.0}
    with open(os.path.join(out_dir, "summary.json"), encoding="utf-8") as handle:
        summary = json.load(handle)
    assert summary["oracle_slope"] is None  # no Gamma-family oracle for protocols
    assert 0.85 < summary["ratio"] < 1.15


def test_simulate_exact_mode(tmp_path, rayleigh_file):
    out_dir = str(tmp_path / "sim")
    code = main(
        [
            "simulate",
            "--model",
            rayleigh_file,
            "--eta",
            "1.5",
            "--mode",
            "exact",
            "--rho",
            "1",
            "--trials",
            "100000",
            "--k-grid",
            "50,55,60,65",
            "--seed",
            "123",
            "--no-plot",
            "--out-dir",
            out_dir,
        ]
    )
    assert code == 0
    with open(os.path.join(out_dir, "summary.json"), encoding="utf-8") as handle:
        summary = json.load(handle)
    assert summary["oracle_slope"] is None  # oracle only covers the linearized law
    assert 0.8 < summary["ratio"] < 1.3


def test_simulate_rerun_matches_manifest(tmp_path, rayleigh_file):
    out_dir = str(tmp_path / "one")
    argv = [
        "simulate",
        "--model",
        rayleigh_file,
        "--eta",
        "2",
        "--sampler",
        "tilted",
        "--trials",
        "5000",
        "--k-grid",
        "20,40,60,80",
        "--seed",
        "5",
        "--out-dir",
        out_dir,
    ]
    assert main(argv) == 0
    with open(os.path.join(out_dir, "outage.csv.manifest.json"), encoding="utf-8") as handle:
        recorded = json.load(handle)["argv"]
    replay = [tok if tok != out_dir else str(tmp_path / "two") for tok in recorded]
    assert main(replay) == 0
    for name in ["outage.csv", "summary.json", "outage.png"]:
        assert _read_bytes(os.path.join(out_dir, name)) == _read_bytes(
            str(tmp_path / "two" / name)
        )


def test_shape_json_payload(tmp_path):
    psi = [
        [[1.0, 0.0], [0.9, 0.0], [0.0, 0.0], [0.0, 0.0]],
        [[0.9, 0.0], [1.0, 0.0], [0.0, 0.0], [0.0, 0.0]],
        [[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.9, 0.0]],
        [[0.0, 0.0], [0.0, 0.0], [0.9, 0.0], [1.0, 0.0]],
    ]
    psi_file = _write_json(tmp_path / "psi.json", {"psi": psi, "n_t": 2, "n_r": 2})
    out = str(tmp_path / "shape.json")
    assert (
        main(["shape", "--psi", psi_file, "--eta", "10", "--starts", "4", "--out", out]) == 0
    )
    with open(out, encoding="utf-8") as handle:
        payload = json.load(handle)
    assert payload["eta"] == 10.0
    assert payload["exponent"] > 5.0
    assert payload["lambda_star"] < 0.0
    sigma = payload["sigma"]
    trace = sigma[0][0][0] + sigma[1][1][0]
    assert trace == pytest.approx(1.0, abs=1e-9)
    assert os.path.exists(out + ".manifest.json")


def test_exit_code_descriptor_errors(tmp_path, rayleigh_file):
    # missing file
    assert main(["exponent", "--model", str(tmp_path / "nope.json"), "--out", "x.csv"]) == 2
    # malformed JSON
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["exponent", "--model", str(bad), "--out", "x.csv"]) == 2
    # unknown model kind
    unknown = _write_json(tmp_path / "unknown.json", {"kind": "lognormal"})
    assert main(["exponent", "--model", str(unknown), "--out", "x.csv"]) == 2
    # bad grid bounds
    assert (
        main(
            [
                "exponent",
                "--model",
                rayleigh_file,
                "--eta-min",
                "5",
                "--eta-max",
                "2",
                "--out",
                str(tmp_path / "x.csv"),
            ]
        )
        == 2
    )


def test_exit_code_domain_errors(tmp_path, rayleigh_file):
    # whole grid below the minimum energy per nat
    assert (
        main(
            [
                "exponent",
                "--model",
                rayleigh_file,
                "--eta-min",
                "0.1",
                "--eta-max",
                "0.5",
                "--out",
                str(tmp_path / "x.csv"),
            ]
        )
        == 3
    )
    # infeasible shaping budget
    psi_file = _write_json(tmp_path / "psi.json", {"psi": [[[1.0, 0.0]]], "n_t": 1, "n_r": 1})
    assert (
        main(
            [
                "shape",
                "--psi",
                psi_file,
                "--eta",
                "0.5",
                "--out",
                str(tmp_path / "s.json"),
            ]
        )
        == 3
    )


def test_exit_code_simulate_config_conflicts(tmp_path, rayleigh_file):
    out_dir = str(tmp_path / "sim")
    # model and protocol together
    assert (
        main(
            [
                "simulate",
                "--model",
                rayleigh_file,
                "--tau",
                "1",
                "--g0",
                "0",
                "--eta",
                "1",
                "--trials",
                "100",
                "--k-grid",
                "4,8,12,16",
                "--out-dir",
                out_dir,
            ]
        )
        == 2
    )
    # neither given
    assert (
        main(
            [
                "simulate",
                "--eta",
                "1",
                "--trials",
                "100",
                "--k-grid",
                "4,8,12,16",
                "--out-dir",
                out_dir,
            ]
        )
        == 2
    )
    # tilted sampling has no protocol analogue
    assert (
        main(
            [
                "simulate",
                "--tau",
                "1",
                "--g0",
                "0",
                "--eta",
                "1",
                "--sampler",
                "tilted",
                "--trials",
                "100",
                "--k-grid",
                "4,8,12,16",
                "--out-dir",
                out_dir,
            ]
        )
        == 3
    )


def test_missing_subcommand_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
