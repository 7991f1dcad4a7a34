"""Numba and numpy kernel paths agree; the env flag selects the fallback."""

import os
import subprocess
import sys

import numpy as np

from satpath import MixedProfile, kernels
from satpath.games import batch_player_gaps, player_gaps
from satpath.harness import generate_game
from satpath.kernels import _np_batch_gaps, _np_q_values
from satpath.rng import substream


def game_buffers(game):
    return game._flat, game._counts, game._strides, game._offsets


def test_q_values_paths_agree():
    rng = substream(101)
    for seed in range(10):
        game = generate_game(
            "normal_form", {"players": {"min": 2, "max": 4}, "actions": {"min": 2, "max": 3}}, seed
        )
        flat = np.concatenate([rng.dirichlet(np.ones(m)) for m in game.action_counts])
        active = kernels.q_values_flat(*game_buffers(game), flat)
        reference = _np_q_values(*game_buffers(game), flat)
        np.testing.assert_allclose(active, reference, atol=1e-12)


def test_batch_gaps_paths_agree():
    rng = substream(103)
    for seed in range(6):
        game = generate_game("normal_form", {"players": 3, "actions": 2}, seed)
        batch = np.stack(
            [
                np.concatenate([rng.dirichlet(np.ones(m)) for m in game.action_counts])
                for _ in range(64)
            ]
        )
        active = kernels.batch_gaps(*game_buffers(game), batch)
        reference = _np_batch_gaps(*game_buffers(game), batch)
        np.testing.assert_allclose(active, reference, atol=1e-12)


def test_batch_matches_single_profile_gaps():
    game = generate_game("normal_form", {"players": 2, "actions": 3}, 5)
    rng = substream(107)
    profiles = [
        MixedProfile(tuple(rng.dirichlet(np.ones(m)) for m in game.action_counts))
        for _ in range(16)
    ]
    batch = np.stack([p.flat() for p in profiles])
    gaps = batch_player_gaps(game, batch)
    for row, profile in zip(gaps, profiles):
        np.testing.assert_allclose(row, player_gaps(game, profile), atol=1e-12)


def test_env_flag_forces_numpy_fallback():
    code = (
        "from satpath import kernels;"
        "assert not kernels.USING_NUMBA;"
        "assert kernels.q_values_flat is kernels._np_q_values;"
        "import numpy as np;"
        "from satpath.harness import named_game;"
        "from satpath import MixedProfile;"
        "from satpath.games import player_gaps;"
        "mp = named_game('matching_pennies');"
        "gaps = player_gaps(mp, MixedProfile.uniform(mp));"
        "assert abs(gaps).max() < 1e-15"
    )
    env = dict(os.environ, SATPATH_NO_NUMBA="1")
    proc = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
