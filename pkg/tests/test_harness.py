"""Generators, experiment runner, report files, and the CLI surface."""

import json
import subprocess
import sys

import numpy as np
import pytest

from satpath import StructureError
from satpath.cli import cli_main
from satpath.dynamics import PathRecord, validate_path
from satpath.games import NormalFormGame
from satpath.harness import (
    ExperimentConfig,
    generate_game,
    named_game,
    parse_partition,
    parse_start_profile,
    run_experiment,
)
from satpath.jsonio import canonical_dumps, read_json


class TestNamedGames:
    def test_matching_pennies_tensor(self):
        game = named_game("matching_pennies")
        np.testing.assert_array_equal(game.payoffs[0], [[1, -1], [-1, 1]])
        np.testing.assert_array_equal(game.payoffs[1], [[-1, 1], [1, -1]])

    def test_rock_paper_scissors_antisymmetric(self):
        game = named_game("rock_paper_scissors")
        np.testing.assert_array_equal(game.payoffs[0], -game.payoffs[1])
        assert game.payoffs[0][0, 2] == 1.0  # rock beats scissors

    def test_all_zero(self):
        game = named_game("all_zero", players=3, actions=2)
        assert game.payoffs.max() == game.payoffs.min() == 0.0

    def test_unknown_name(self):
        with pytest.raises(StructureError):
            named_game("chicken")


class TestGenerateGame:
    def test_bit_identical_under_same_seed(self):
        params = {"players": {"min": 2, "max": 3}, "actions": {"min": 2, "max": 3}}
        a = generate_game("normal_form", params, 11)
        b = generate_game("normal_form", params, 11)
        assert canonical_dumps(a.to_json_dict()) == canonical_dumps(b.to_json_dict())

    def test_payoffs_rounded_and_bounded(self):
        game = generate_game("normal_form", {"players": 2, "actions": 3}, 4)
        flat = game.payoffs.ravel()
        assert np.abs(flat).max() <= 1.0
        np.testing.assert_array_equal(flat, np.round(flat, 6))

    def test_ranged_params_stay_in_bounds(self):
        for seed in range(20):
            game = generate_game(
                "normal_form", {"players": {"min": 2, "max": 3}, "actions": {"min": 2, "max": 3}}, seed
            )
            assert 2 <= game.num_players <= 3
            assert all(2 <= m <= 3 for m in game.action_counts)

    def test_stochastic_rows_sum_to_one(self):
        game = generate_game("stochastic", {"players": 2, "actions": 2, "states": 3}, 6)
        np.testing.assert_allclose(game.transition.sum(axis=2), 1.0, atol=1e-12)

    def test_unknown_kind(self):
        with pytest.raises(StructureError):
            generate_game("bayesian", {}, 0)


class TestParsers:
    def test_start_profile_pure(self):
        game = named_game("matching_pennies")
        profile = parse_start_profile("pure:0,1", game)
        np.testing.assert_array_equal(profile.distributions[0], [1.0, 0.0])
        np.testing.assert_array_equal(profile.distributions[1], [0.0, 1.0])

    def test_partition_specs(self):
        assert parse_partition("singletons", 3).groups == ((0,), (1,), (2,))
        assert parse_partition("single", 3).groups == ((0, 1, 2),)
        assert parse_partition("[[0,2],[1]]", 3).groups == ((0, 2), (1,))


class TestRunExperiment:
    def test_normal_form_path_report(self, tmp_path):
        out = tmp_path / "report.json"
        config = ExperimentConfig(
            kind="normal_form_path",
            seeds=tuple(range(6)),
            epsilon=1e-6,
            params={"players": 2, "actions": 2},
            out=str(out),
        )
        report = run_experiment(config)
        assert report.aggregate["num_seeds"] == 6
        assert report.aggregate["all_paths_valid"]
        assert out.exists() and out.with_suffix(".csv").exists()
        csv_lines = out.with_suffix(".csv").read_text().splitlines()
        assert csv_lines[0] == "seed,kind,steps,residual,success,millis"
        assert len(csv_lines) == 7

    def test_json_report_is_deterministic(self, tmp_path):
        config = ExperimentConfig(
            kind="topology_check",
            seeds=(0, 1, 2, 3),
            epsilon=0.0,
            params={"players": 2, "actions": 2},
        )
        first = canonical_dumps(run_experiment(config).to_json_dict())
        second = canonical_dumps(run_experiment(config).to_json_dict())
        assert first == second
        assert "millis" not in first

    def test_config_validation(self):
        with pytest.raises(StructureError):
            ExperimentConfig(kind="normal_form_path", seeds=())
        with pytest.raises(StructureError):
            ExperimentConfig(kind="mystery", seeds=(1,))
        with pytest.raises(StructureError):
            ExperimentConfig.from_json_dict({"kind": "normal_form_path", "seeds": [1], "frobnicate": 2})


class TestCli:
    def test_gen_then_path_round_trip(self, tmp_path):
        game_file = tmp_path / "g.json"
        assert cli_main(["gen", "--named", "matching_pennies", "--out", str(game_file)]) == 0
        path_file = tmp_path / "path.json"
        code = cli_main(
            [
                "path",
                "--game", str(game_file),
                "--start", "pure:0,0",
                "--epsilon", "1e-6",
                "--max-steps", "50",
                "--out", str(path_file),
            ]
        )
        assert code == 0
        record = PathRecord.from_json_dict(read_json(path_file))
        assert record.terminal_is_equilibrium
        game = NormalFormGame.from_json_dict(read_json(game_file))
        assert validate_path(game, record)

    def test_eval_single_state_closed_form(self, tmp_path, capsys):
        game_file = tmp_path / "sg.json"
        obj = {
            "players": 1,
            "states": 1,
            "actions": [1],
            "discounts": [0.9],
            "transition": [[[1.0]]],
            "stage_payoffs": [[[0.7]]],
        }
        game_file.write_text(json.dumps(obj))
        assert cli_main(["eval", "--game", str(game_file), "--tol", "1e-9"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["values"]["0"][0] == pytest.approx(0.7 / 0.1, abs=1e-7)

    def test_malformed_game_exits_one(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert cli_main(["path", "--game", str(bad)]) == 1
        assert "error" in capsys.readouterr().err

    def test_wrong_schema_exits_one(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"players": 2, "actions": [2, 2], "payoffs": [1.0]}))
        assert cli_main(["path", "--game", str(bad)]) == 1
        err = capsys.readouterr().err
        assert "payoffs" in err

    def test_unknown_flag_exits_two(self):
        assert cli_main(["gen", "--frobnicate"]) == 2

    def test_solve_command(self, tmp_path, capsys):
        game_file = tmp_path / "g.json"
        cli_main(["gen", "--named", "rock_paper_scissors", "--out", str(game_file)])
        assert cli_main(["solve", "--game", str(game_file), "--tol", "1e-8"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["method"] == "support_enum"
        assert payload["residual"] <= 1e-8

    def test_compile_kstep_command(self, tmp_path, capsys):
        game_file = tmp_path / "kg.json"
        cli_main([
            "gen", "--kind", "kstep", "--players", "1", "--actions", "2",
            "--states", "2", "--k", "1", "--out", str(game_file),
        ])
        assert cli_main(["compile-kstep", "--game", str(game_file)]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["game"]["states"] == 4
        assert len(payload["state_labels"]) == 4

    def test_check_topology_command(self, tmp_path, capsys):
        game_file = tmp_path / "g.json"
        cli_main(["gen", "--named", "matching_pennies", "--out", str(game_file)])
        code = cli_main([
            "check-topology", "--game", str(game_file),
            "--profile", "pure:0,0", "--epsilon", "0",
            "--grid-step", "0.5", "--budget", "20",
        ])
        assert code == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["consistent"]

    def test_report_command_deterministic_files(self, tmp_path):
        config_file = tmp_path / "cfg.json"
        out_a = tmp_path / "a.json"
        out_b = tmp_path / "b.json"
        base = {
            "kind": "normal_form_path",
            "seeds": [0, 1, 2],
            "epsilon": 1e-6,
            "params": {"players": 2, "actions": 2},
        }
        config_file.write_text(json.dumps(base))
        assert cli_main(["report", "--config", str(config_file), "--out", str(out_a)]) == 0
        assert cli_main(["report", "--config", str(config_file), "--out", str(out_b)]) == 0
        a_bytes = out_a.read_bytes()
        b_bytes = out_b.read_bytes()
        # the out path is echoed inside the config block; normalize it
        assert a_bytes.replace(b"a.json", b"x.json") == b_bytes.replace(b"b.json", b"x.json")

    def test_entry_point_subprocess(self, tmp_path):
        game_file = tmp_path / "g.json"
        proc = subprocess.run(
            [sys.executable, "-m", "satpath.cli", "gen", "--named", "all_zero", "--out", str(game_file)],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        game = NormalFormGame.from_json_dict(read_json(game_file))
        assert game.payoff_spread == 0.0
