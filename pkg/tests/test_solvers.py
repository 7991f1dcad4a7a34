"""Equilibrium solvers: exact cases, oracles, and escalation behavior."""

import numpy as np
import pytest

from satpath import (
    MixedProfile,
    NormalFormGame,
    SolverFailure,
    StructureError,
    is_eps_equilibrium,
    solve,
    solve_grid,
    solve_iterative,
    solve_one_player,
    solve_two_player,
)
from satpath.games import player_gaps
from satpath.harness import generate_game, named_game
from satpath.jsonio import canonical_dumps
from satpath.rng import substream

MP = named_game("matching_pennies")
RPS = named_game("rock_paper_scissors")


def one_player_game(values):
    values = np.asarray(values, dtype=np.float64)
    return NormalFormGame((values.size,), values[None, :])


class TestSolveOnePlayer:
    def test_argmax(self):
        out = solve_one_player(one_player_game([1.0, 3.0, 2.0]))
        assert out.residual == 0.0
        assert out.method == "argmax"
        np.testing.assert_array_equal(out.profile.distributions[0], [0.0, 1.0, 0.0])

    def test_tie_breaks_to_lowest_index(self):
        out = solve_one_player(one_player_game([2.0, 2.0, 2.0]))
        np.testing.assert_array_equal(out.profile.distributions[0], [1.0, 0.0, 0.0])

    def test_matches_exhaustive_scan(self):
        rng = substream(51)
        for _ in range(20):
            values = rng.uniform(-1, 1, size=int(rng.integers(1, 7)))
            out = solve_one_player(one_player_game(values))
            best = max(range(values.size), key=lambda a: values[a])
            assert out.profile.distributions[0][best] == 1.0

    def test_needs_one_player(self):
        with pytest.raises(StructureError):
            solve_one_player(MP)


class TestSolveTwoPlayer:
    def test_matching_pennies_unique_mixed(self):
        out = solve_two_player(MP, 1e-9)
        assert out.residual <= 1e-9
        assert out.method == "support_enum"
        for dist in out.profile.distributions:
            np.testing.assert_allclose(dist, [0.5, 0.5], atol=1e-12)
        # hand-check indifference: both actions of each player tie exactly
        for player in range(2):
            gaps = player_gaps(MP, out.profile)
            assert gaps[player] <= 1e-12

    def test_dominant_pure_pair_found_at_minimal_support(self):
        # action 0 strictly dominant for both players
        pay0 = np.array([[3.0, 3.0], [0.0, 0.0]])
        pay1 = np.array([[3.0, 0.0], [3.0, 0.0]])
        game = NormalFormGame((2, 2), np.stack([pay0, pay1]))
        out = solve_two_player(game, 1e-9)
        np.testing.assert_array_equal(out.profile.distributions[0], [1.0, 0.0])
        np.testing.assert_array_equal(out.profile.distributions[1], [1.0, 0.0])
        assert out.residual == 0.0

    def test_rock_paper_scissors_uniform(self):
        out = solve_two_player(RPS, 1e-9)
        for dist in out.profile.distributions:
            np.testing.assert_allclose(dist, [1 / 3] * 3, atol=1e-9)

    def test_action_cap(self):
        game = generate_game("normal_form", {"players": 2, "actions": 9}, 0)
        with pytest.raises(StructureError):
            solve_two_player(game)


class TestSolveIterative:
    def test_all_zero_three_player_immediate(self):
        game = named_game("all_zero", players=3, actions=2)
        out = solve_iterative(game, 1e-9, seed=0)
        assert out.residual == 0.0
        assert out.method in ("iterative", "support_enum")

    def test_strict_pure_equilibrium_reached_from_any_start(self):
        # every player's action 0 strictly dominates, so the damped
        # iteration contracts onto the pure profile from anywhere
        counts = (2, 2, 2)
        payoffs = np.zeros((3,) + counts)
        for player in range(3):
            idx = [slice(None)] * 3
            idx[player] = 0
            payoffs[(player,) + tuple(idx)] = 1.0
        game = NormalFormGame(counts, payoffs)
        for seed in range(4):
            out = solve_iterative(game, 1e-8, seed=seed, restarts=1)
            assert out.residual <= 1e-8
            expected = MixedProfile.pure(game, (0, 0, 0))
            assert out.profile.close_to(expected, tol=1e-6)
            assert is_eps_equilibrium(game, out.profile, 1e-8)

    def test_residual_within_tol_or_grid(self):
        for seed in range(6):
            game = generate_game("normal_form", {"players": 3, "actions": 2}, seed)
            out = solve_iterative(game, 1e-7, seed=seed)
            assert out.residual <= 1e-7 or out.method == "grid"

    def test_restarts_validated(self):
        with pytest.raises(StructureError):
            solve_iterative(MP, restarts=0)


class TestSolveGrid:
    def test_matching_pennies_near_uniform(self):
        out = solve_grid(MP, 1e-9)
        assert out.method == "grid"
        for dist in out.profile.distributions:
            assert np.abs(dist - 0.5).max() <= 0.05 + 1e-12

    def test_pure_equilibrium_hit_exactly(self):
        pay0 = np.array([[3.0, 3.0], [0.0, 0.0]])
        pay1 = np.array([[3.0, 0.0], [3.0, 0.0]])
        game = NormalFormGame((2, 2), np.stack([pay0, pay1]))
        out = solve_grid(game, 1e-9)
        assert out.residual == 0.0

    def test_best_over_scanned_lattice(self):
        # the returned residual is no worse than any coarse lattice point
        game = generate_game("normal_form", {"players": 2, "actions": 2}, 4)
        out = solve_grid(game, 1e-9)
        for i in range(21):
            for j in range(21):
                profile = MixedProfile(
                    (np.array([i / 20, 1 - i / 20]), np.array([j / 20, 1 - j / 20]))
                )
                assert out.residual <= max(0.0, player_gaps(game, profile).max()) + 1e-12


class TestDispatcher:
    def test_agreement_with_grid_on_small_games(self):
        for seed in range(4):
            for actions in (2, 3):
                game = generate_game("normal_form", {"players": 2, "actions": actions}, seed)
                exact = solve(game, 1e-9, seed)
                assert exact.residual <= 1e-9
                coarse = solve_grid(game, 1e-9)
                # the lattice point cannot beat an exact equilibrium by more
                # than the resolution allows
                bound = 0.15 * max(1.0, game.max_abs_payoff)
                assert coarse.residual <= bound

    def test_outcomes_satisfy_equilibrium_check(self):
        for seed in range(6):
            game = generate_game(
                "normal_form", {"players": {"min": 1, "max": 3}, "actions": {"min": 2, "max": 3}}, seed
            )
            out = solve(game, 1e-6, seed)
            if out.residual <= 1e-6:
                assert is_eps_equilibrium(game, out.profile, 1e-6)

    def test_deterministic_outcome_serialization(self):
        for seed in (0, 3):
            game = generate_game("normal_form", {"players": 3, "actions": 2}, seed)
            a = solve(game, 1e-6, seed)
            b = solve(game, 1e-6, seed)
            assert canonical_dumps(a.to_json_dict()) == canonical_dumps(b.to_json_dict())

    def test_solver_failure_carries_context(self):
        try:
            raise SolverFailure("nope", game=MP, best_residual=0.5)
        except SolverFailure as exc:
            assert exc.game is MP
            assert exc.best_residual == 0.5
