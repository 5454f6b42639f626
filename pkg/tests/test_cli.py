import json

import numpy as np
import pytest

from delaywarp.cli import main
from delaywarp.robust_decomp import pie_schema


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestApprox:
    def test_fig1_preset(self, tmp_path, capsys):
        code, out, _ = run_cli(capsys, "approx", "--preset", "fig1", "--out", str(tmp_path))
        assert code == 0
        csv_lines = (tmp_path / "hdot_curves.csv").read_text().splitlines()
        assert csv_lines[0] == "lambda,hdot_order1,hdot_order2,hdot_exact"
        assert len(csv_lines) == 602
        summary = json.loads((tmp_path / "approx_summary.json").read_text())
        assert summary["spreads"]["max_pairwise"] < 2e-3

    def test_fig2_spread_larger_than_fig1(self, tmp_path, capsys):
        code1, _, _ = run_cli(capsys, "approx", "--preset", "fig1", "--out", str(tmp_path / "a"))
        code2, _, _ = run_cli(capsys, "approx", "--preset", "fig2", "--out", str(tmp_path / "b"))
        assert code1 == 0 and code2 == 0
        s1 = json.loads((tmp_path / "a" / "approx_summary.json").read_text())
        s2 = json.loads((tmp_path / "b" / "approx_summary.json").read_text())
        assert s2["spreads"]["max_pairwise"] > s1["spreads"]["max_pairwise"]

    def test_eps_zero_all_columns_one(self, tmp_path, capsys):
        code, _, _ = run_cli(
            capsys, "approx", "--preset", "fig1", "--eps", "0", "--out", str(tmp_path)
        )
        assert code == 0
        rows = (tmp_path / "hdot_curves.csv").read_text().splitlines()[1:]
        data = np.array([[float(v) for v in row.split(",")] for row in rows])
        assert np.max(np.abs(data[:, 1:] - 1.0)) < 1e-12

    def test_determinism_byte_identical(self, tmp_path, capsys):
        run_cli(capsys, "approx", "--preset", "fig1", "--out", str(tmp_path / "r1"))
        run_cli(capsys, "approx", "--preset", "fig1", "--out", str(tmp_path / "r2"))
        for name in ("hdot_curves.csv", "approx_summary.json"):
            b1 = (tmp_path / "r1" / name).read_bytes()
            b2 = (tmp_path / "r2" / name).read_bytes()
            assert b1 == b2


class TestErrorSweep:
    def test_fig3_slopes(self, tmp_path, capsys):
        code, out, _ = run_cli(
            capsys, "error-sweep", "--preset", "fig3", "--out", str(tmp_path)
        )
        assert code == 0
        summary = json.loads((tmp_path / "error_sweep_summary.json").read_text())
        assert 1.8 <= summary["slope_order1"] <= 2.2
        assert 2.7 <= summary["slope_order2"] <= 3.3

    def test_csv_monotone(self, tmp_path, capsys):
        run_cli(capsys, "error-sweep", "--preset", "fig3", "--out", str(tmp_path))
        rows = (tmp_path / "error_sweep.csv").read_text().splitlines()
        assert rows[0] == "eps,e_order1,e_order2"
        data = np.array([[float(v) for v in row.split(",")] for row in rows[1:]])
        assert np.all(np.diff(data[:, 0]) > 0)  # eps strictly increasing
        # e -> 0 monotonically as eps -> 0 on this grid
        assert np.all(np.diff(data[:, 1]) > 0)
        assert np.all(np.diff(data[:, 2]) > 0)

    def test_thread_env(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("DELAYWARP_THREADS", "2")
        code, _, _ = run_cli(capsys, "error-sweep", "--preset", "fig3", "--out", str(tmp_path))
        assert code == 0
        summary = json.loads((tmp_path / "error_sweep_summary.json").read_text())
        assert summary["threads"] == 2


class TestEquivalence:
    def test_eps_zero_tiny(self, tmp_path, capsys):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({
            "tau0": 3.0, "eps": 0.0, "omega": 5.0, "kind": "sin",
            "tau_star": 3.0, "A0": [[-2.0, 0.0], [0.0, -0.9]],
            "A1": [[-1.0, 0.0], [-1.0, -1.0]], "t_end": 12.0,
        }))
        code, out, _ = run_cli(
            capsys, "equivalence", "--config", str(cfg), "--out", str(tmp_path)
        )
        assert code == 0
        summary = json.loads((tmp_path / "equivalence_summary.json").read_text())
        assert summary["sup_diff"] < 1e-7
        assert (tmp_path / "equivalence.csv").read_text().splitlines()[0] == "lambda,abs_diff"

    def test_missing_matrices_error(self, tmp_path, capsys):
        code, _, err = run_cli(capsys, "equivalence", "--preset", "fig1", "--out", str(tmp_path))
        assert code == 1
        payload = json.loads(err)
        assert "error" in payload


class TestProbe:
    def test_gu_preset_decays(self, tmp_path, capsys):
        code, out, _ = run_cli(capsys, "probe", "--preset", "gu-example", "--out", str(tmp_path))
        assert code == 0
        record = json.loads((tmp_path / "probe.json").read_text())
        assert record["verdict"] == "decayed"
        assert record["t_end"] == 200.0

    def test_eps_01_verdict_recorded(self, tmp_path, capsys):
        code, out, _ = run_cli(
            capsys, "probe", "--preset", "gu-example", "--eps", "0.1",
            "--horizon", "120", "--out", str(tmp_path),
        )
        assert code == 0
        record = json.loads((tmp_path / "probe.json").read_text())
        assert record["verdict"] in ("decayed", "grew", "inconclusive")


class TestPieExport:
    def test_schema_valid_and_deterministic(self, tmp_path, capsys):
        import jsonschema

        code, _, _ = run_cli(
            capsys, "pie-export", "--preset", "gu-example", "--out", str(tmp_path / "p1")
        )
        assert code == 0
        payload = json.loads((tmp_path / "p1" / "pie.json").read_text())
        jsonschema.validate(payload, pie_schema())
        assert payload["n"] == 2
        run_cli(capsys, "pie-export", "--preset", "gu-example", "--out", str(tmp_path / "p2"))
        assert (tmp_path / "p1" / "pie.json").read_bytes() == (
            tmp_path / "p2" / "pie.json"
        ).read_bytes()


class TestErrors:
    def test_resonant_config_exits_nonzero(self, tmp_path, capsys):
        code, _, err = run_cli(
            capsys, "approx",
            "--tau0", "1.2566370614359172",  # omega*tau0 = 2*pi
            "--omega", "5.0", "--eps", "0.01", "--out", str(tmp_path),
        )
        assert code == 1
        payload = json.loads(err)
        assert payload["error"]["type"] == "ResonanceError"
        assert payload["error"]["command"] == "approx"

    def test_unknown_preset(self, tmp_path, capsys):
        code, _, err = run_cli(capsys, "approx", "--preset", "nope", "--out", str(tmp_path))
        assert code == 1
        assert "unknown preset" in json.loads(err)["error"]["message"]

    def test_negative_tau0_rejected(self, tmp_path, capsys):
        code, _, err = run_cli(
            capsys, "approx", "--preset", "fig1", "--tau0", "-3", "--out", str(tmp_path)
        )
        assert code == 1
        assert json.loads(err)["error"]["type"] == "ValueError"
