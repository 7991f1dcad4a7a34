"""Desk-scale equilibrium solvers used as the sub-game oracle.

Exact argmax for one player, support enumeration for two, damped
best-response iteration with a local polish for three or more, and an
exhaustive lattice scan as the last resort.  Every outcome's residual is
verified against the full game, never assumed from the method.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import BudgetError, SolverFailure, StructureError
from .games import (
    FP_TOL,
    MixedProfile,
    NormalFormGame,
    action_values,
    batch_player_gaps,
    player_gaps,
)
from .lattice import lattice_size, simplex_lattice
from .rng import substream

DEFAULT_TOL = 1e-6
ALPHA = 0.5  # fixed damping for the best-response iteration
SUPPORT_ACTION_CAP = 8
GRID_STEP = 0.05
GRID_POINT_CAP = 10**7
_SYSTEM_RESIDUAL_TOL = 1e-9

METHOD_ARGMAX = "argmax"
METHOD_SUPPORT_ENUM = "support_enum"
METHOD_ITERATIVE = "iterative"
METHOD_GRID = "grid"


@dataclass(frozen=True)
class SolverOutcome:
    profile: MixedProfile
    residual: float
    method: str

    def to_json_dict(self) -> dict:
        return {
            "method": self.method,
            "residual": float(self.residual),
            "profile": self.profile.to_json(),
        }


def _residual(game: NormalFormGame, profile: MixedProfile) -> float:
    return float(max(0.0, player_gaps(game, profile).max()))


def solve_one_player(game: NormalFormGame) -> SolverOutcome:
    """Pure argmax; ties broken by the lowest action index."""
    if game.num_players != 1:
        raise StructureError(f"solve_one_player needs 1 player, got {game.num_players}")
    best = int(np.argmax(game.payoffs[0]))
    return SolverOutcome(MixedProfile.pure(game, (best,)), 0.0, METHOD_ARGMAX)


def _support_vector(payoff_rows: np.ndarray, support: tuple[int, ...], size: int):
    """Mixture over ``support`` equalizing the opponent's payoff rows, or None.

    ``payoff_rows`` has one row per opponent support action; the unknown
    mixture must make all rows equal and sum to one.
    """
    rows = [payoff_rows[0] - payoff_rows[k] for k in range(1, payoff_rows.shape[0])]
    rows.append(np.ones(payoff_rows.shape[1]))
    mat = np.vstack(rows)
    rhs = np.zeros(mat.shape[0])
    rhs[-1] = 1.0
    if mat.shape[0] == mat.shape[1]:
        try:
            x = np.linalg.solve(mat, rhs)
        except np.linalg.LinAlgError:
            return None
    else:
        x, *_ = np.linalg.lstsq(mat, rhs, rcond=None)
    if not np.all(np.isfinite(x)):
        return None
    if np.abs(mat @ x - rhs).max() > _SYSTEM_RESIDUAL_TOL:
        return None
    if x.min() < -1e-9:
        return None
    full = np.zeros(size)
    full[list(support)] = np.clip(x, 0.0, None)
    total = full.sum()
    if total <= 0:
        return None
    return full / total


def solve_two_player(game: NormalFormGame, tol: float = DEFAULT_TOL) -> SolverOutcome:
    """Support enumeration ordered by total support size.

    For each support pair the indifference-and-feasibility system is solved
    and the candidate is verified against the full game; the first candidate
    with residual <= tol wins.  Raises SolverFailure when no pair works
    (numerical degeneracy); callers escalate to the grid.
    """
    if game.num_players != 2:
        raise StructureError(f"solve_two_player needs 2 players, got {game.num_players}")
    m0, m1 = game.action_counts
    if max(m0, m1) > SUPPORT_ACTION_CAP:
        raise StructureError(f"support enumeration capped at {SUPPORT_ACTION_CAP} actions per player")
    pay0, pay1 = game.payoffs[0], game.payoffs[1]
    best_seen = np.inf
    for total in range(2, m0 + m1 + 1):
        for r_size in range(max(1, total - m1), min(m0, total - 1) + 1):
            c_size = total - r_size
            for rows in itertools.combinations(range(m0), r_size):
                rows_l = list(rows)
                for cols in itertools.combinations(range(m1), c_size):
                    cols_l = list(cols)
                    # player 0 indifferent across its support given sigma_1
                    sigma1 = _support_vector(pay0[np.ix_(rows_l, cols_l)], cols, m1)
                    if sigma1 is None:
                        continue
                    # player 1 indifferent across its support given sigma_0
                    sigma0 = _support_vector(pay1[np.ix_(rows_l, cols_l)].T, rows, m0)
                    if sigma0 is None:
                        continue
                    profile = MixedProfile((sigma0, sigma1))
                    res = _residual(game, profile)
                    if res <= tol:
                        return SolverOutcome(profile, res, METHOD_SUPPORT_ENUM)
                    best_seen = min(best_seen, res)
    raise SolverFailure(
        f"no support pair reached residual {tol:.3e} (best seen {best_seen:.3e})",
        game=game,
        best_residual=best_seen,
    )


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def _polish(game: NormalFormGame, start: MixedProfile, tol: float):
    """Local residual minimization (Nelder-Mead over softmax coordinates).

    The fixed-damping iteration stalls at a distance O(alpha) from interior
    mixed equilibria; this pushes the residual the rest of the way down.
    Returns a polished profile with residual <= tol, or None.
    """
    counts = game.action_counts
    x0 = np.concatenate([np.log(np.clip(d, 1e-12, None)) for d in start.distributions])

    def unpack(z: np.ndarray) -> MixedProfile:
        dists = []
        pos = 0
        for m in counts:
            dists.append(_softmax(z[pos:pos + m]))
            pos += m
        return MixedProfile(tuple(dists))

    def objective(z: np.ndarray) -> float:
        return _residual(game, unpack(z))

    result = minimize(
        objective,
        x0,
        method="Nelder-Mead",
        options={"maxfev": 6000, "xatol": 1e-10, "fatol": tol * 1e-3, "adaptive": True},
    )
    profile = unpack(result.x)
    res = _residual(game, profile)
    if res <= tol:
        return SolverOutcome(profile, res, METHOD_ITERATIVE)
    return None


def _partial_pure_search(game: NormalFormGame, tol: float, budget: int = 200):
    """Equilibria in which at most two players mix.

    Every pure assignment of all but two players induces a two-player
    sub-game that support enumeration solves exactly; the lifted profile is
    verified against the full game.  Cheap, and it covers the common case of
    random games whose equilibria leave most players pure.
    """
    from .games import restrict_subgame

    n = game.num_players
    if n < 3:
        return None
    tried = 0
    for keep in itertools.combinations(range(n), 2):
        frozen = [i for i in range(n) if i not in keep]
        if max(game.action_counts[i] for i in keep) > SUPPORT_ACTION_CAP:
            continue
        for assignment in itertools.product(*(range(game.action_counts[i]) for i in frozen)):
            tried += 1
            if tried > budget:
                return None
            actions = [0] * n
            for i, a in zip(frozen, assignment):
                actions[i] = a
            restriction = restrict_subgame(game, MixedProfile.pure(game, actions), keep)
            try:
                sub = solve_two_player(restriction.game, tol)
            except SolverFailure:
                continue
            full = restriction.embed(sub.profile)
            res = _residual(game, full)
            if res <= tol:
                return SolverOutcome(full, res, METHOD_SUPPORT_ENUM)
    return None


def solve_iterative(
    game: NormalFormGame,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    restarts: int = 16,
    max_iters: int = 2000,
) -> SolverOutcome:
    """Damped simultaneous best-response iteration from random starts.

    Each iterate is residual-checked and the first one within tol is
    accepted; a stalled restart gets a local polish from its best iterate.
    A partial-pure support search runs first, and if every restart fails the
    search escalates to the exhaustive grid (whose best point gets one final
    polish), so the returned outcome either meets tol or carries
    method="grid".
    """
    if restarts < 1:
        raise StructureError(f"restarts must be >= 1, got {restarts}")
    partial = _partial_pure_search(game, tol)
    if partial is not None:
        return partial
    best_profile = None
    best_res = np.inf
    for r in range(restarts):
        if r == 0:
            profile = MixedProfile.uniform(game)
        else:
            rng = substream(seed, r)
            profile = MixedProfile(
                tuple(rng.dirichlet(np.ones(m)) for m in game.action_counts)
            )
        stall = 0
        restart_best = None
        restart_res = np.inf
        for _ in range(max_iters):
            qs = action_values(game, profile)
            res = max(
                0.0,
                max(float(q.max() - q @ d) for q, d in zip(qs, profile.distributions)),
            )
            if res <= tol:
                return SolverOutcome(profile, res, METHOD_ITERATIVE)
            if res < restart_res - FP_TOL:
                restart_res = res
                restart_best = profile
                stall = 0
            else:
                stall += 1
                if stall > 200:
                    break
            dists = []
            for q, d in zip(qs, profile.distributions):
                vertex = np.zeros_like(d)
                vertex[int(np.argmax(q))] = 1.0
                dists.append((1.0 - ALPHA) * d + ALPHA * vertex)
            profile = MixedProfile(tuple(dists))
        if restart_best is not None:
            polished = _polish(game, restart_best, tol)
            if polished is not None:
                return polished
            if restart_res < best_res:
                best_res = restart_res
                best_profile = restart_best
    try:
        grid = solve_grid(game, tol)
    except BudgetError as exc:
        raise SolverFailure(
            f"iterative search stalled at residual {best_res:.3e} and grid fallback is unavailable: {exc}",
            game=game,
            best_residual=best_res,
        ) from exc
    if grid.residual > tol:
        polished = _polish(game, grid.profile, tol)
        if polished is not None:
            return polished
    return grid


def _scan_lattice(game: NormalFormGame, per_player: list[list[np.ndarray]], chunk: int = 16384):
    """Residual-minimizing point over the product of per-player lattices."""
    total = 1
    for pts in per_player:
        total *= len(pts)
    if total > GRID_POINT_CAP:
        raise BudgetError(f"lattice budget exceeded: {total} points, cap {GRID_POINT_CAP}")
    width = int(sum(p[0].size for p in per_player))
    best_res = np.inf
    best_row = None
    rows = np.empty((min(chunk, total), width))
    pending = 0
    iterator = itertools.product(*per_player)
    for combo in iterator:
        rows[pending] = np.concatenate(combo)
        pending += 1
        if pending == rows.shape[0]:
            gaps = batch_player_gaps(game, rows[:pending])
            res = gaps.max(axis=1)
            idx = int(np.argmin(res))
            if res[idx] < best_res:
                best_res = float(res[idx])
                best_row = rows[idx].copy()
            pending = 0
    if pending:
        gaps = batch_player_gaps(game, rows[:pending])
        res = gaps.max(axis=1)
        idx = int(np.argmin(res))
        if res[idx] < best_res:
            best_res = float(res[idx])
            best_row = rows[idx].copy()
    return best_row, max(0.0, best_res)


def _row_to_profile(game: NormalFormGame, row: np.ndarray) -> MixedProfile:
    off = np.concatenate([[0], np.cumsum(game.action_counts)])
    return MixedProfile(tuple(row[off[i]:off[i + 1]] for i in range(game.num_players)))


def solve_grid(game: NormalFormGame, tol: float = DEFAULT_TOL) -> SolverOutcome:
    """Exhaustive lattice scan at step 0.05 plus two halving local refinements.

    Returns the best profile found even when its residual exceeds tol; the
    caller decides whether that is acceptable.
    """
    step = GRID_STEP
    per_player = [simplex_lattice(m, step) for m in game.action_counts]
    best_row, best_res = _scan_lattice(game, per_player)
    cur_step = step
    for _ in range(2):
        fine = cur_step / 2.0
        best_profile = _row_to_profile(game, best_row)
        local = []
        for i, m in enumerate(game.action_counts):
            center = best_profile.distributions[i]
            pts = [
                p
                for p in simplex_lattice(m, fine)
                if np.abs(p - center).max() <= cur_step + 1e-12
            ]
            local.append(pts)
        row, res = _scan_lattice(game, local)
        if res < best_res:
            best_res = res
            best_row = row
        cur_step = fine
    return SolverOutcome(_row_to_profile(game, best_row), best_res, METHOD_GRID)


def solve(game: NormalFormGame, tol: float = DEFAULT_TOL, seed: int = 0) -> SolverOutcome:
    """Dispatch by player count: argmax, support enumeration, then iterative."""
    if game.num_players == 1:
        return solve_one_player(game)
    if game.num_players == 2 and max(game.action_counts) <= SUPPORT_ACTION_CAP:
        try:
            return solve_two_player(game, tol)
        except SolverFailure:
            return solve_grid(game, tol)
    return solve_iterative(game, tol, seed)
