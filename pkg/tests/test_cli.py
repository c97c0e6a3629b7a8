import csv
import json

import pytest

from iruwb import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_config_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text("[system]\nbit_rate_mbps = 150.0\n")
    code, _, err = run(capsys, "ber-analytic", "--config", str(bad), "--out", str(tmp_path))
    assert code == cli.EXIT_CONFIG
    summary = json.loads(err)
    assert summary["error"] == "config" and summary["exit_code"] == 2
    assert "T_s <= T_f" in summary["message"]


def test_bad_override_is_config_error(tmp_path, capsys):
    code, _, err = run(capsys, "ber-sim", "--preset", "awgn", "--trials-cap", "0", "--out", str(tmp_path))
    assert code == cli.EXIT_CONFIG
    assert json.loads(err)["error"] == "config"


def test_io_error_exit_code(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    code, _, err = run(capsys, "ber-analytic", "--preset", "awgn", "--out", str(blocker / "sub"))
    assert code == cli.EXIT_IO
    assert json.loads(err)["error"] == "io"


def test_curve_writes_both_engines(tmp_path, capsys):
    code, out, _ = run(
        capsys, "curve", "--preset", "fig1_15mbps", "--trials-cap", "500", "--min-errors", "5",
        "--out", str(tmp_path),
    )
    assert code == 0, out
    rows = list(csv.DictReader(open(tmp_path / "fig1_15mbps_results.csv")))
    assert {r["engine"] for r in rows} == {"simulation", "analysis"}
    assert len(rows) == 22
    assert (tmp_path / "fig1_15mbps_breakdown.csv").exists()
    assert "matplotlib" in (tmp_path / "plot_curves.py").read_text()
    rec = json.loads((tmp_path / "manifest.jsonl").read_text().splitlines()[0])
    assert rec["seed"] == 1 and rec["command"] == "curve"
    assert rec["config"]["stop_rule"]["max_trials"] == 500


def test_manifest_reproduces_identical_files(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    code, *_ = run(
        capsys, "ber-sim", "--preset", "fig1_15mbps", "--trials-cap", "400", "--seed", "77",
        "--toggle-isi", "false", "--dump-components", "5", "--out", str(a),
    )
    assert code == 0
    code, *_ = run(capsys, "ber-sim", "--manifest", str(a / "manifest.jsonl"), "--dump-components", "5", "--out", str(b))
    assert code == 0
    for name in ("fig1_15mbps_results.csv", "fig1_15mbps_components.jsonl"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    rec = json.loads((b / "manifest.jsonl").read_text())
    assert rec["config"]["toggles"]["isi"] is False and rec["seed"] == 77


def test_ber_analytic_user_sweep(tmp_path, capsys):
    code, out, _ = run(capsys, "ber-analytic", "--preset", "fig2_users", "--out", str(tmp_path))
    assert code == 0
    bers = []
    for n in (1, 2, 4, 8):
        rows = list(csv.DictReader(open(tmp_path / f"fig2_users_{n}users_results.csv")))
        assert {r["engine"] for r in rows} == {"analysis"}
        bers.append([float(r["ber"]) for r in rows])
    for lo, hi in zip(bers, bers[1:]):
        assert all(b >= a for a, b in zip(lo, hi))
    runs = [json.loads(line)["run"] for line in (tmp_path / "manifest.jsonl").read_text().splitlines()]
    assert runs == [f"fig2_users_{n}users" for n in (1, 2, 4, 8)]


def test_channel_stats(capsys):
    code, out, _ = run(capsys, "channel-stats", "--samples", "100000", "--channels", "500")
    assert code == 0
    stats = json.loads(out)
    assert stats["mean_ray_interval_ns"]["empirical"] == pytest.approx(0.337, rel=0.02)
    assert stats["mean_cluster_interval_ns"]["empirical"] == pytest.approx(62.5, rel=0.02)
    assert stats["intra_cluster_decay_ns"]["fitted"] == pytest.approx(6.4, rel=0.2)


def test_channel_stats_rejects_single_tap(capsys):
    code, _, err = run(capsys, "channel-stats", "--preset", "awgn")
    assert code == cli.EXIT_CONFIG


@pytest.mark.slow
def test_validate_passes(capsys):
    code, out, _ = run(capsys, "validate", "--samples", "200000")
    report = json.loads(out)
    assert code == 0, [c for c in report["checks"] if not c["pass"]]
    assert report["passed"]


def test_validation_failure_exit_code(monkeypatch, capsys):
    monkeypatch.setattr(cli, "cmd_validate", lambda cfg, args: {"checks": [{"check": "x", "pass": False}], "passed": False})
    code, _, err = run(capsys, "validate")
    assert code == cli.EXIT_VALIDATION
    assert "x" in json.loads(err)["message"]


def test_numerical_error_exit_code(monkeypatch, tmp_path, capsys):
    from iruwb.analysis import SeriesError

    def boom(*a, **k):
        raise SeriesError("series did not converge")

    monkeypatch.setattr(cli, "run_engines", boom)
    code, _, err = run(capsys, "ber-analytic", "--preset", "awgn", "--out", str(tmp_path))
    assert code == cli.EXIT_NUMERICAL
