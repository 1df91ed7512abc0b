import json

import pytest

from strongwalk.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestWalkCommand:
    def test_csv_deterministic(self, capsys):
        code, out1, _ = run_cli(capsys, "walk", "--seed", "3", "--levels",
                                "3", "--k-max", "16")
        code2, out2, _ = run_cli(capsys, "walk", "--seed", "3", "--levels",
                                 "3", "--k-max", "16")
        assert code == code2 == 0
        assert out1 == out2
        assert "# section: refinement" in out1
        assert "# section: sup_distance" in out1

    def test_refinement_all_ok(self, capsys):
        code, out, _ = run_cli(capsys, "--format", "json", "walk", "--seed",
                               "5", "--levels", "4", "--k-max", "32")
        assert code == 0
        payload = json.loads(out)
        assert all(row["ok"] == 1 for row in
                   payload["sections"]["refinement"])


class TestMarketCommand:
    def test_constants_and_path(self, capsys):
        code, out, _ = run_cli(capsys, "--format", "json", "market", "--m",
                               "3", "--seed", "2")
        assert code == 0
        payload = json.loads(out)
        assert payload["scalars"]["n_steps"] == 64
        assert len(payload["sections"]["path"]) == 65

    def test_guard_exit_code(self, capsys):
        code, _, err = run_cli(capsys, "market", "--m", "0", "--mu", "0.4",
                               "--sigma", "0.2")
        assert code == 3
        assert "numerical guard" in err


class TestPriceCommand:
    def test_call_with_bsm(self, capsys):
        code, out, _ = run_cli(capsys, "--format", "json", "price",
                               "--claim", "call", "--m", "3",
                               "--compare-bsm", "--no-surface")
        assert code == 0
        payload = json.loads(out)
        assert payload["scalars"]["gap_vs_bsm"] < 0.1

    def test_surface_dump_columns(self, capsys):
        code, out, _ = run_cli(capsys, "price", "--claim", "put", "--m",
                               "1", "--T", "0.25")
        assert code == 0
        assert "k,i,node_price,value" in out

    def test_custom_without_spec_is_config_error(self, capsys):
        code, _, err = run_cli(capsys, "price", "--claim", "custom", "--m",
                               "2")
        assert code == 2
        assert "config error" in err


class TestHedgeCommand:
    def test_summary(self, capsys):
        code, out, _ = run_cli(capsys, "--format", "json", "hedge", "--m",
                               "3", "--paths", "3")
        assert code == 0
        payload = json.loads(out)
        assert payload["scalars"]["max_terminal_error"] <= 1e-9
        assert len(payload["sections"]["summary"]) == 3

    def test_ledgers_flag(self, capsys):
        code, out, _ = run_cli(capsys, "--format", "json", "hedge", "--m",
                               "2", "--paths", "1", "--ledgers")
        payload = json.loads(out)
        assert len(payload["sections"]["ledgers"]) == 16


class TestSmoothCommand:
    def test_diagnostics(self, capsys):
        code, out, _ = run_cli(capsys, "--format", "json", "smooth", "--n",
                               "8", "--m", "4")
        assert code == 0
        payload = json.loads(out)
        assert payload["scalars"]["bump_constant"] == pytest.approx(
            2.25228, rel=1e-5)
        rows = payload["sections"]["price_delta_comparison"]
        assert all(row["price_gap"] <= row["band_probability"] / 16.0
                   + 1e-15 for row in rows)


class TestFKCommand:
    def test_forward_problem_file(self, capsys, tmp_path):
        spec = {
            "m": 3,
            "mu": {"kind": "linear", "coef": 0.1},
            "sigma": {"kind": "linear", "coef": 0.3},
            "rate": {"kind": "constant", "value": 0.05},
            "payoff": {"kind": "custom-table",
                       "x": [0.0, 1.0, 2.0], "y": [0.0, 1.0, 0.0]},
        }
        path = tmp_path / "problem.json"
        path.write_text(json.dumps(spec))
        code, out, _ = run_cli(capsys, "--format", "json", "fk", "--mode",
                               "forward", "--problem", str(path), "--k",
                               "6", "--x", "1.0")
        assert code == 0
        payload = json.loads(out)
        assert payload["scalars"]["strategy"] == "tree"
        assert 0.0 < payload["scalars"]["value"] <= 1.0

    def test_backward_specialized(self, capsys):
        code, out, _ = run_cli(capsys, "--format", "json", "fk", "--mode",
                               "backward", "--m", "3", "--claim", "put",
                               "--k", "0", "--x", "100.0")
        assert code == 0
        assert json.loads(out)["scalars"]["strategy"] == "lattice"

    def test_residual_mode(self, capsys):
        code, out, _ = run_cli(capsys, "--format", "json", "fk", "--mode",
                               "residual", "--m", "4", "--k", "128", "--x",
                               "100.0", "--smooth-n", "8")
        assert code == 0
        assert "residual" in json.loads(out)["scalars"]

    def test_forward_needs_problem(self, capsys):
        code, _, err = run_cli(capsys, "fk", "--mode", "forward")
        assert code == 2


class TestStudyCommand:
    def test_config_file_and_out(self, capsys, tmp_path):
        cfg = {
            "market": {"mu": 0.05, "sigma": 0.2, "r": 0.05, "s0": 100.0,
                       "horizon": 1},
            "claim": {"kind": "call", "strike": 100.0},
            "m_lo": 4, "m_hi": 7, "m_ref": 9, "seeds": [1, 2, 3, 4],
            "grid_points": 5,
        }
        cfg_path = tmp_path / "study.json"
        cfg_path.write_text(json.dumps(cfg))
        out_path = tmp_path / "report.csv"
        code, _, _ = run_cli(capsys, "--config", str(cfg_path), "--out",
                             str(out_path), "study")
        assert code == 0
        text = out_path.read_text()
        assert text.startswith("study,m,seed,metric,value")
        # byte-identical on a second run
        out2 = tmp_path / "report2.csv"
        run_cli(capsys, "--config", str(cfg_path), "--out", str(out2),
                "study")
        assert out2.read_text() == text

    def test_seed_list_override(self, capsys, tmp_path):
        cfg = {
            "market": {"mu": 0.05, "sigma": 0.2, "r": 0.05, "s0": 100.0,
                       "horizon": 1},
            "m_lo": 4, "m_hi": 5, "m_ref": 7, "seeds": [1, 2],
            "grid_points": 3,
        }
        cfg_path = tmp_path / "study.json"
        cfg_path.write_text(json.dumps(cfg))
        code, out, _ = run_cli(capsys, "--config", str(cfg_path),
                               "--seed-list", "9", "study")
        assert code == 0
        assert ",9,walk_sup," in out.replace("call-study,4", ",")\
            .replace("call-study,5", ",") or "9" in out

    def test_missing_config_file(self, capsys):
        code, _, err = run_cli(capsys, "--config", "/no/such/file.json",
                               "study")
        assert code == 2


class TestFKBackwardProblemFile:
    def test_general_backward_spec(self, capsys, tmp_path):
        spec = {
            "m": 2,
            "n_steps": 12,
            "mu": {"kind": "constant", "value": 0.0},
            "sigma": {"kind": "constant", "value": 1.0},
            "rho": {"kind": "constant", "value": 0.0},
            "payoff": {"kind": "custom-table",
                       "x": [-4.0, 0.0, 4.0], "y": [0.0, 2.0, 0.0]},
            "step_up": 0.25, "step_down": 0.25,
            "p_up": 0.5, "p_down": 0.5,
        }
        path = tmp_path / "backward.json"
        path.write_text(json.dumps(spec))
        code, out, _ = run_cli(capsys, "--format", "json", "fk", "--mode",
                               "backward", "--problem", str(path), "--k",
                               "0", "--x", "0.0")
        assert code == 0
        payload = json.loads(out)
        assert payload["scalars"]["strategy"] == "tree"
        assert 0.0 < payload["scalars"]["value"] <= 2.0

    def test_bad_problem_file(self, capsys, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{\"m\": 2}")
        code, _, err = run_cli(capsys, "fk", "--mode", "backward",
                               "--problem", str(path), "--k", "0")
        assert code == 2


class TestCustomClaim:
    def test_price_custom_claim_from_config(self, capsys, tmp_path):
        cfg = {
            "market": {"mu": 0.05, "sigma": 0.2, "r": 0.05, "s0": 100.0,
                       "horizon": 1},
            "claim": {"payoff": {"kind": "mollified-put", "n": 8,
                                 "strike": 100.0}},
        }
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        code, out, _ = run_cli(capsys, "--config", str(cfg_path),
                               "--format", "json", "price", "--claim",
                               "custom", "--m", "3", "--no-surface")
        assert code == 0
        value = json.loads(out)["scalars"]["price_explicit"]
        assert 0.0 < value < 100.0


class TestWalkGuards:
    def test_non_dyadic_horizon_exit_three(self, capsys):
        code, _, err = run_cli(capsys, "walk", "--seed", "1", "--levels",
                               "2", "--horizon", "0.3")
        assert code == 3
        assert "numerical guard" in err
