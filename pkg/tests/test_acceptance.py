"""Acceptance suite: one test per criterion, one printed verdict line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the verdict lines;
every tolerance is pinned here, nothing is deferred to calibration.
"""

import itertools
import subprocess
import sys
import time

import numpy as np

import satpath
from satpath import (
    GroupPartition,
    MixedProfile,
    SatisficingConfig,
    apply_value_operator,
    check_preservation,
    compile_k_step,
    construct_path,
    construct_path_stochastic,
    evaluate_policy,
    expected_payoff,
    freeze_players_stochastic,
    is_local_minimum,
    step_is_legal,
    validate_path,
)
from satpath.dynamics import sample_successors
from satpath.games import action_values
from satpath.harness import ExperimentConfig, generate_game, run_experiment
from satpath.markov import (
    StationaryPolicyProfile,
    joint_state_weights,
    validate_markov_path,
)
from satpath.rng import substream

from oracles import classical_step_legal, mc_policy_values


def _verdict(name: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


def random_profile(game, rng):
    return MixedProfile(tuple(rng.dirichlet(np.ones(m)) for m in game.action_counts))


def random_policy(game, rng):
    return StationaryPolicyProfile(
        tuple(rng.dirichlet(np.ones(m), size=game.num_states) for m in game.action_counts)
    )


def test_criterion_01_existence_in_n_player_games():
    """200 seeded games, eps=1e-6, singleton groups: >=95% reach equilibrium,
    every path legal, failures flagged, all inside five minutes."""
    params = {"players": {"min": 2, "max": 3}, "actions": {"min": 2, "max": 3}}
    successes = 0
    valid = 0
    flagged_failures = 0
    failures = []
    t0 = time.perf_counter()
    for seed in range(200):
        game = generate_game("normal_form", params, seed)
        config = SatisficingConfig(1e-6, GroupPartition.singletons(game.num_players))
        path = construct_path(
            game, MixedProfile.uniform(game), config, max_steps=100, seed=seed
        )
        if validate_path(game, path):
            valid += 1
        if path.terminal_is_equilibrium:
            successes += 1
        else:
            failures.append(seed)
            if path.termination in ("solver_failure", "max_steps"):
                flagged_failures += 1
    elapsed = time.perf_counter() - t0
    ok = (
        successes >= 190
        and valid == 200
        and flagged_failures == len(failures)
        and elapsed < 300.0
    )
    _verdict(
        "criterion 1 (N-player path existence)",
        ok,
        f"{successes}/200 equilibria, {valid}/200 valid paths, "
        f"{len(failures)} failures all flagged={flagged_failures == len(failures)}, {elapsed:.1f}s",
    )


def test_criterion_02_grouped_reduction_to_classical():
    """All-singleton legality coincides exactly with an independent
    per-player checker on 100 (game, path) pairs."""
    mismatches = 0
    pairs = 0
    for seed in range(100):
        rng = substream(1000 + seed)
        game = generate_game(
            "normal_form", {"players": {"min": 2, "max": 3}, "actions": 2}, seed
        )
        epsilon = float(rng.uniform(0.0, 0.3))
        config = SatisficingConfig(epsilon, GroupPartition.singletons(game.num_players))
        profiles = [random_profile(game, rng)]
        for _ in range(3):
            if rng.random() < 0.5:
                succs = sample_successors(
                    game, profiles[-1], config, 0.5, 8, int(rng.integers(2**31))
                )
                profiles.append(succs[int(rng.integers(len(succs)))])
            else:
                profiles.append(random_profile(game, rng))
        for s, s_next in itertools.pairwise(profiles):
            pairs += 1
            lib = step_is_legal(game, s, s_next, config)
            oracle = classical_step_legal(game, s, s_next, epsilon)
            if lib != oracle:
                mismatches += 1
    _verdict(
        "criterion 2 (grouped reduces to classical)",
        mismatches == 0,
        f"{pairs} steps compared, {mismatches} mismatches",
    )


def test_criterion_03_local_minimum_preservation_consistency():
    """Exhaustive 0.1 grids on 50 two-player instances: certified minima
    preserve satisfied groups; violations coincide with a count descent."""
    discrepancies = []
    certified = 0
    violations = 0
    for seed in range(50):
        game = generate_game("normal_form", {"players": 2, "actions": 2}, seed)
        config = SatisficingConfig(0.0, GroupPartition.singletons(2))
        rng = substream(seed, 1)
        s = random_profile(game, rng)
        if seed % 2 == 1:
            q = action_values(game, s)[0]
            vec = np.zeros(2)
            vec[int(np.argmax(q))] = 1.0
            s = s.replace(0, vec)
        lm = is_local_minimum(game, s, config, 0.1, 2000, seed)
        pv = check_preservation(game, s, config, 0.1, 2000, seed)
        certified += lm.certified
        violations += not pv.preserved
        if lm.certified and not pv.preserved:
            discrepancies.append(seed)
        if not pv.preserved and lm.certified:
            discrepancies.append(seed)
    _verdict(
        "criterion 3 (local-min/preservation consistency)",
        not discrepancies,
        f"50 instances, {certified} certified, {violations} violations, discrepancies={discrepancies}",
    )


def test_criterion_04_contraction_and_bounds():
    """1000 operator draws contract with modulus gamma; values respect the
    a-priori bound; the single-state closed form matches to 1e-9."""
    rng = substream(4)
    contraction_ok = True
    bound_ok = True
    draws = 0
    for seed in range(100):
        game = generate_game(
            "stochastic", {"players": 2, "actions": 2, "states": 2, "gamma": 0.9}, seed
        )
        tol = 1e-6
        for player in range(2):
            v = evaluate_policy(game, random_policy(game, rng), player, tol)
            if np.abs(v).max() > game.max_abs_payoff / (1.0 - 0.9) + tol:
                bound_ok = False
        for _ in range(10):
            pi = random_policy(game, rng)
            p = rng.uniform(-5.0, 5.0, size=game.num_states)
            q = rng.uniform(-5.0, 5.0, size=game.num_states)
            draws += 1
            lhs = np.abs(
                apply_value_operator(game, pi, 0, p) - apply_value_operator(game, pi, 0, q)
            ).max()
            if lhs > 0.9 * np.abs(p - q).max() + 1e-12:
                contraction_ok = False
    single = satpath.StochasticGame(
        (1,), 1, np.ones((1, 1, 1)), np.array([[[0.37]]]), (0.93,)
    )
    closed = evaluate_policy(single, StationaryPolicyProfile.uniform(single), 0, 1e-10)
    closed_ok = abs(closed[0] - 0.37 / 0.07) <= 1e-9
    _verdict(
        "criterion 4 (contraction and bounds)",
        contraction_ok and bound_ok and closed_ok,
        f"{draws} contraction draws ok={contraction_ok}, bound ok={bound_ok}, closed form ok={closed_ok}",
    )


def test_criterion_05_policy_evaluation_monte_carlo():
    """evaluate_policy matches 1e5-episode rollouts within 3 SE + tol on 20
    seeded games for every state."""
    tol = 2e-2
    episodes = 100_000
    gammas = [0.5, 0.8, 0.9]
    worst = -np.inf
    ok = True
    for seed in range(20):
        game = generate_game(
            "stochastic",
            {
                "players": 2,
                "actions": {"min": 2, "max": 3},
                "states": {"min": 1, "max": 3},
                "gamma": gammas[seed % 3],
            },
            seed,
        )
        rng = substream(seed, 5)
        pi = random_policy(game, rng)
        for player in range(2):
            values = evaluate_policy(game, pi, player, tol / 2)
            means, errors = mc_policy_values(
                game, pi, player, episodes, tol, substream(seed, 6 + player)
            )
            margin = np.abs(values - means) - (3.0 * errors + tol)
            worst = max(worst, float(margin.max()))
            if (margin > 0).any():
                ok = False
    _verdict(
        "criterion 5 (Monte Carlo policy evaluation)",
        ok,
        f"20 games x 2 players, worst margin {worst:.2e} (<= 0 means inside band)",
    )


def test_criterion_06_frozen_player_value_consistency():
    """Sub-game values equal base-game values within 2*tol per state on 50
    random instances."""
    tol = 1e-7
    worst = 0.0
    ok = True
    for seed in range(50):
        rng = substream(seed, 7)
        game = generate_game(
            "stochastic",
            {"players": {"min": 2, "max": 3}, "actions": 2, "states": {"min": 1, "max": 3}, "gamma": 0.8},
            seed,
        )
        pi = random_policy(game, rng)
        frozen_count = int(rng.integers(1, game.num_players))
        frozen = sorted(rng.choice(game.num_players, size=frozen_count, replace=False).tolist())
        restriction = freeze_players_stochastic(game, pi, frozen)
        sigma = random_policy(restriction.game, rng)
        full = restriction.embed(sigma)
        for k, i in enumerate(restriction.free_players):
            sub_value = evaluate_policy(restriction.game, sigma, k, tol)
            base_value = evaluate_policy(game, full, i, tol)
            delta = float(np.abs(sub_value - base_value).max())
            worst = max(worst, delta)
            if delta > 2 * tol:
                ok = False
    _verdict(
        "criterion 6 (frozen-player value consistency)",
        ok,
        f"50 instances, worst per-state gap {worst:.2e} <= {2 * tol:.1e}",
    )


def test_criterion_07_markov_path_existence():
    """50 stochastic games, eps=1e-4: >=90% reach a Markov equilibrium inside
    100 steps and every path freezes satisfied players state-by-state."""
    successes = 0
    all_legal = True
    failures = []
    for seed in range(50):
        game = generate_game(
            "stochastic",
            {"players": 2, "actions": 2, "states": {"min": 1, "max": 3}, "gamma": 0.8},
            seed,
        )
        pi0 = StationaryPolicyProfile.uniform(game)
        path = construct_path_stochastic(game, pi0, 1e-4, max_steps=100, seed=seed)
        if not validate_markov_path(game, path, 1e-4 / 8.0):
            all_legal = False
        if path.terminal_is_equilibrium:
            successes += 1
        else:
            failures.append((seed, path.termination))
    _verdict(
        "criterion 7 (Markov path existence)",
        successes >= 45 and all_legal,
        f"{successes}/50 equilibria, failures={failures}, all paths legal={all_legal}",
    )


def test_criterion_08_k_step_compiler():
    """k=1 kernel equals hand enumeration bit-exactly; trajectory chi-square
    is not rejected at 0.01 on any of 10 seeds."""
    kgame = generate_game(
        "kstep", {"players": 1, "actions": 2, "states": 2, "k": 1, "gamma": 0.5}, 0
    )
    compiled = compile_k_step(kgame)
    base = kgame.base
    a = base.joint_action_count
    hand = np.zeros_like(compiled.game.transition)
    for y, (x, hist) in enumerate(compiled.state_labels):
        for s in range(a):
            for y2, (x2, hist2) in enumerate(compiled.state_labels):
                if hist2 == (s,):
                    hand[y, s, y2] = base.transition[x, s, x2]
    bit_exact = np.array_equal(hand, compiled.game.transition)

    config = ExperimentConfig(
        kind="kstep_roundtrip",
        seeds=tuple(range(10)),
        epsilon=0.0,
        params={"players": 1, "actions": 2, "states": 2, "k": 1, "gamma": 0.5},
    )
    report = run_experiment(config)
    rejections = report.aggregate["rejections_at_0.01"]
    _verdict(
        "criterion 8 (k-step compiler)",
        bit_exact and rejections == 0,
        f"kernel bit-exact={bit_exact}, min p={report.aggregate['min_p_value']:.3f}, "
        f"rejections at 0.01: {rejections}/10",
    )


def test_criterion_09_utility_inequalities():
    """Product and Lipschitz inequalities on 1e4 draws each (1e-12 slack);
    multilinearity midpoint identity to 1e-9."""
    rng = substream(9)
    sizes = rng.integers(1, 9, size=10_000)
    product_ok = True
    for n in np.unique(sizes):
        count = int((sizes == n).sum())
        a = rng.random((count, n))
        b = rng.random((count, n))
        lhs = np.abs(a.prod(axis=1) - b.prod(axis=1))
        rhs = np.abs(a - b).sum(axis=1)
        if (lhs > rhs + 1e-12).any():
            product_ok = False

    lipschitz_ok = True
    games = [
        generate_game(
            "normal_form", {"players": {"min": 2, "max": 3}, "actions": {"min": 2, "max": 3}}, s
        )
        for s in range(20)
    ]
    for draw in range(10_000):
        game = games[draw % len(games)]
        sigma = random_profile(game, rng)
        eta = random_profile(game, rng)
        player = draw % game.num_players
        delta = abs(
            expected_payoff(game, sigma, player) - expected_payoff(game, eta, player)
        )
        if delta > game.max_abs_payoff * sigma.l1_distance(eta) + 1e-12:
            lipschitz_ok = False

    midpoint_ok = True
    for draw in range(200):
        game = games[draw % len(games)]
        profile = random_profile(game, rng)
        j = draw % game.num_players
        other = rng.dirichlet(np.ones(game.action_counts[j]))
        mid = profile.replace(j, 0.5 * profile.distributions[j] + 0.5 * other)
        for player in range(game.num_players):
            f0 = expected_payoff(game, profile.replace(j, other), player)
            f1 = expected_payoff(game, profile, player)
            if abs(expected_payoff(game, mid, player) - 0.5 * (f0 + f1)) > 1e-9:
                midpoint_ok = False
    _verdict(
        "criterion 9 (utility inequalities)",
        product_ok and lipschitz_ok and midpoint_ok,
        f"product={product_ok}, lipschitz={lipschitz_ok}, midpoint={midpoint_ok}",
    )


def test_criterion_10_cli_determinism(tmp_path):
    """A fixed-seed CLI experiment writes byte-identical JSON on rerun."""
    config_file = tmp_path / "cfg.json"
    out = tmp_path / "report.json"
    config_file.write_text(
        '{"kind": "normal_form_path", "seeds": [0, 1, 2, 3, 4],'
        ' "epsilon": 1e-6, "params": {"players": 2, "actions": 2}}'
    )
    blobs = []
    for _ in range(2):
        proc = subprocess.run(
            [
                sys.executable, "-m", "satpath.cli", "report",
                "--config", str(config_file), "--out", str(out),
            ],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        blobs.append(out.read_bytes())
    identical = blobs[0] == blobs[1]
    _verdict(
        "criterion 10 (CLI determinism)",
        identical,
        f"two runs, {len(blobs[0])} bytes, byte-identical={identical}",
    )
