#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Runs the same workloads through both code paths and prints per-op timings
and speedups.  Launch with SATPATH_NO_NUMBA=1 to confirm the fallback is
what the flag selects at import time.
"""

import time

import numpy as np

from satpath import kernels
from satpath.games import NormalFormGame
from satpath.harness import generate_game
from satpath.lattice import simplex_lattice
from satpath.rng import substream


def build_batch(game, rows, rng):
    return np.stack(
        [
            np.concatenate([rng.dirichlet(np.ones(m)) for m in game.action_counts])
            for _ in range(rows)
        ]
    )


def build_lattice_batch(game, step):
    per_player = [simplex_lattice(m, step) for m in game.action_counts]
    rows = []
    import itertools

    for combo in itertools.product(*per_player):
        rows.append(np.concatenate(combo))
    return np.stack(rows)


def time_fn(fn, *args, repeats=5):
    fn(*args)  # warm-up (and JIT compile on the numba path)
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    rng = substream(0)
    results = []

    if kernels.USING_NUMBA:
        from satpath.kernels import _nb_batch_gaps, _nb_q_values

        pairs = {
            "q_values": (_nb_q_values, kernels._np_q_values),
            "batch_gaps": (_nb_batch_gaps, kernels._np_batch_gaps),
        }
    else:
        print("numba disabled (SATPATH_NO_NUMBA=1 or import failure); nothing to compare")
        print("timing the numpy fallback only\n")
        pairs = {
            "q_values": (None, kernels._np_q_values),
            "batch_gaps": (None, kernels._np_batch_gaps),
        }

    workloads = []
    g3 = generate_game("normal_form", {"players": 3, "actions": 3}, 1)
    workloads.append(("3p/3a single profile", g3, "q_values",
                      (np.concatenate([rng.dirichlet(np.ones(3)) for _ in range(3)]),)))
    g4 = generate_game("normal_form", {"players": 4, "actions": 3}, 2)
    workloads.append(("4p/3a batch 20k", g4, "batch_gaps", (build_batch(g4, 20_000, rng),)))
    g2 = generate_game("normal_form", {"players": 2, "actions": 4}, 3)
    lattice = build_lattice_batch(g2, 0.05)
    workloads.append((f"2p/4a lattice {lattice.shape[0]} pts", g2, "batch_gaps", (lattice,)))

    print(f"{'workload':<28} {'numba':>12} {'numpy':>12} {'speedup':>9}")
    print("-" * 64)
    for label, game, op, extra in workloads:
        buffers = (game._flat, game._counts, game._strides, game._offsets)
        nb_fn, np_fn = pairs[op]
        t_np = time_fn(np_fn, *buffers, *extra)
        if nb_fn is not None:
            t_nb = time_fn(nb_fn, *buffers, *extra)
            print(f"{label:<28} {t_nb * 1e3:>9.3f} ms {t_np * 1e3:>9.3f} ms {t_np / t_nb:>8.2f}x")
            results.append(t_np / t_nb)
        else:
            print(f"{label:<28} {'-':>12} {t_np * 1e3:>9.3f} ms {'-':>9}")
    if results:
        print("-" * 64)
        print(f"geometric-mean speedup: {np.exp(np.mean(np.log(results))):.2f}x")


if __name__ == "__main__":
    main()
