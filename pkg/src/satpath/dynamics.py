"""Grouped satisficing-path legality, successor probing, and path construction.

A step s -> s' is legal when every group whose members all eps-best-respond
at s keeps every member's distribution unchanged at s'.  The admissible
successor set therefore factorizes into frozen coordinates (the union of
satisfied groups) times free coordinates, which is what the sampler and the
constructive procedure exploit.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import BudgetError, SolverFailure, StructureError
from .games import (
    FP_TOL,
    TAU_SIMPLEX,
    MixedProfile,
    NormalFormGame,
    SatisficingConfig,
    batch_player_gaps,
    is_eps_equilibrium,
    restrict_subgame,
    satisfied_groups,
)
from .lattice import simplex_lattice
from .rng import substream

TERMINATION_EQUILIBRIUM = "equilibrium"
TERMINATION_MAX_STEPS = "max_steps"
TERMINATION_SOLVER_FAILURE = "solver_failure"

DEFAULT_GRID_STEP = 0.1
DEFAULT_BUDGET = 2000
DEFAULT_MAX_STEPS = 100

# A (satisfied set, rounded profile) signature revisited more than this many
# times counts as a cycle and triggers descent probing.
_CYCLE_LIMIT = 2


@dataclass(frozen=True)
class SuccessorSpec:
    """Which players are pinned (satisfied groups) and which may move."""

    frozen_players: frozenset[int]
    free_players: frozenset[int]


@dataclass(frozen=True)
class PathRecord:
    """A strategy path with per-step satisfied groups and termination flags."""

    profiles: tuple[MixedProfile, ...]
    config: SatisficingConfig
    per_step_satisfied: tuple[frozenset[int], ...]
    terminal_is_equilibrium: bool
    termination: str
    failure_message: str | None = None

    @property
    def step_count(self) -> int:
        return len(self.profiles) - 1

    def group_counts(self) -> list[int]:
        """The satisfied-group count at each step of the path."""
        return [len(s) for s in self.per_step_satisfied]

    def to_json_dict(self) -> dict:
        return {
            "profiles": [p.to_json() for p in self.profiles],
            "config": self.config.to_json_dict(),
            "satisfied": [sorted(s) for s in self.per_step_satisfied],
            "terminal_is_equilibrium": bool(self.terminal_is_equilibrium),
            "termination": self.termination,
            "failure_message": self.failure_message,
            "step_count": self.step_count,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "PathRecord":
        return cls(
            profiles=tuple(MixedProfile.from_json(p) for p in obj["profiles"]),
            config=SatisficingConfig.from_json_dict(obj["config"]),
            per_step_satisfied=tuple(frozenset(s) for s in obj["satisfied"]),
            terminal_is_equilibrium=bool(obj["terminal_is_equilibrium"]),
            termination=obj["termination"],
            failure_message=obj.get("failure_message"),
        )


def step_is_legal(
    game: NormalFormGame,
    s: MixedProfile,
    s_next: MixedProfile,
    config: SatisficingConfig,
) -> bool:
    """True iff every group satisfied at s keeps all members unchanged at s_next."""
    sat = satisfied_groups(game, s, config)
    for g in sat:
        for i in config.partition.groups[g]:
            a, b = s.distributions[i], s_next.distributions[i]
            if a.shape != b.shape or np.abs(a - b).max() > TAU_SIMPLEX:
                return False
    return True


def validate_path(game: NormalFormGame, path: PathRecord) -> bool:
    """Recompute satisfied sets and check stepwise legality of the whole record."""
    if len(path.profiles) == 0:
        raise StructureError("path must contain at least one profile")
    if len(path.per_step_satisfied) != len(path.profiles):
        return False
    for profile, recorded in zip(path.profiles, path.per_step_satisfied):
        if satisfied_groups(game, profile, path.config) != recorded:
            return False
    for s, s_next in itertools.pairwise(path.profiles):
        if not step_is_legal(game, s, s_next, path.config):
            return False
    return True


def successor_spec(
    game: NormalFormGame, s: MixedProfile, config: SatisficingConfig
) -> SuccessorSpec:
    sat = satisfied_groups(game, s, config)
    frozen: set[int] = set()
    for g in sat:
        frozen.update(config.partition.groups[g])
    free = frozenset(range(game.num_players)) - frozen
    return SuccessorSpec(frozen_players=frozenset(frozen), free_players=free)


def sample_successors(
    game: NormalFormGame,
    s: MixedProfile,
    config: SatisficingConfig,
    grid_step: float = DEFAULT_GRID_STEP,
    budget: int = DEFAULT_BUDGET,
    seed=0,
) -> list[MixedProfile]:
    """Deterministic-under-seed legal successors of s.

    Free players' distributions come from the simplex lattice at
    ``grid_step`` (lexicographic product order, truncated at ``budget``)
    topped up with uniform-random simplex points; frozen players are copied
    from s, so every output is legal by construction.
    """
    if budget < 1:
        raise StructureError(f"budget must be >= 1, got {budget}")
    spec = successor_spec(game, s, config)
    free = sorted(spec.free_players)
    if not free:
        return [s]
    lattices = [simplex_lattice(game.action_counts[i], grid_step) for i in free]
    out: list[MixedProfile] = []
    for combo in itertools.islice(itertools.product(*lattices), budget):
        dists = list(s.distributions)
        for i, vec in zip(free, combo):
            dists[i] = vec
        out.append(MixedProfile(tuple(dists)))
    rng = _rng_from(seed)
    while len(out) < budget:
        dists = list(s.distributions)
        for i in free:
            dists[i] = rng.dirichlet(np.ones(game.action_counts[i]))
        out.append(MixedProfile(tuple(dists)))
    return out


def _rng_from(seed) -> np.random.Generator:
    if isinstance(seed, (int, np.integer)):
        return substream(int(seed))
    key = tuple(int(k) for k in seed)
    return substream(key[0], *key[1:])


def _group_matrix(
    game: NormalFormGame, profiles: list[MixedProfile], config: SatisficingConfig
) -> np.ndarray:
    """Boolean (num_profiles, num_groups) satisfaction matrix."""
    batch = np.stack([p.flat() for p in profiles])
    gaps = batch_player_gaps(game, batch)
    sat_players = gaps <= config.epsilon + FP_TOL
    cols = [sat_players[:, list(g)].all(axis=1) for g in config.partition.groups]
    return np.stack(cols, axis=1)


@dataclass(frozen=True)
class LocalMinimumCheck:
    """Sampled certificate: no probed successor had a smaller group count."""

    certified: bool
    start_count: int
    counterexample: MixedProfile | None = None
    counterexample_count: int | None = None


def is_local_minimum(
    game: NormalFormGame,
    s: MixedProfile,
    config: SatisficingConfig,
    grid_step: float = DEFAULT_GRID_STEP,
    budget: int = DEFAULT_BUDGET,
    seed=0,
) -> LocalMinimumCheck:
    """Probe successors for one with a strictly smaller satisfied-group count.

    The certificate is only as strong as the sample: with an exhaustive grid
    it is exhaustive over that grid, never a proof over the full successor
    set.
    """
    n_s = len(satisfied_groups(game, s, config))
    succs = sample_successors(game, s, config, grid_step, budget, seed)
    counts = _group_matrix(game, succs, config).sum(axis=1)
    below = np.flatnonzero(counts < n_s)
    if below.size:
        b = int(below[0])
        return LocalMinimumCheck(False, n_s, succs[b], int(counts[b]))
    return LocalMinimumCheck(True, n_s)


@dataclass(frozen=True)
class PreservationCheck:
    """Whether every group satisfied at s stays satisfied at probed successors."""

    preserved: bool
    witness: MixedProfile | None = None
    witness_group: int | None = None


def check_preservation(
    game: NormalFormGame,
    s: MixedProfile,
    config: SatisficingConfig,
    grid_step: float = DEFAULT_GRID_STEP,
    budget: int = DEFAULT_BUDGET,
    seed=0,
) -> PreservationCheck:
    sat = sorted(satisfied_groups(game, s, config))
    if not sat:
        return PreservationCheck(True)
    succs = sample_successors(game, s, config, grid_step, budget, seed)
    matrix = _group_matrix(game, succs, config)
    kept = matrix[:, sat]
    bad_rows = np.flatnonzero(~kept.all(axis=1))
    if bad_rows.size:
        b = int(bad_rows[0])
        g = sat[int(np.flatnonzero(~kept[b])[0])]
        return PreservationCheck(False, succs[b], g)
    return PreservationCheck(True)


def path_minimum_index(path: PathRecord) -> int:
    """Smallest index attaining the minimum satisfied-group count along the path."""
    counts = path.group_counts()
    if not counts:
        raise StructureError("path must contain at least one profile")
    return int(np.argmin(counts))


def _find_descent(
    game: NormalFormGame,
    s: MixedProfile,
    config: SatisficingConfig,
    grid_step: float,
    budget: int,
    seed,
) -> MixedProfile | None:
    check = is_local_minimum(game, s, config, grid_step, budget, seed)
    return check.counterexample


def construct_path(
    game: NormalFormGame,
    s0: MixedProfile,
    config: SatisficingConfig,
    solver=None,
    max_steps: int = DEFAULT_MAX_STEPS,
    seed: int = 0,
    probe_grid_step: float = DEFAULT_GRID_STEP,
    probe_budget: int = DEFAULT_BUDGET,
) -> PathRecord:
    """Freeze-and-solve construction of a grouped satisficing path from s0.

    Per step: freeze the satisfied groups, solve the free players'
    restricted sub-game to an epsilon/2 equilibrium, and jump there.  A jump
    may unsettle previously satisfied groups, so the step is iterated.  When
    the (satisfied set, rounded profile) signature repeats more than twice
    the procedure probes for a successor with a strictly smaller group
    count; descending to zero satisfied groups makes the whole player set
    free, and the following solve attacks the full game.

    Solver failures and exhausted budgets terminate the path with a flag;
    the returned prefix is always legal.
    """
    if max_steps < 1:
        raise StructureError(f"max_steps must be >= 1, got {max_steps}")
    config.partition.check_covers(game.num_players)
    if solver is None:
        from .solvers import solve as solver
    num_groups = config.partition.num_groups
    profiles = [s0]
    sat_sets = [satisfied_groups(game, s0, config)]
    termination = TERMINATION_MAX_STEPS
    failure_message = None
    signatures: Counter = Counter()
    step = 0
    while len(profiles) - 1 < max_steps:
        cur = profiles[-1]
        sat = sat_sets[-1]
        if len(sat) == num_groups:
            termination = TERMINATION_EQUILIBRIUM
            break
        step += 1
        sig = (sat, np.round(cur.flat(), 6).tobytes())
        signatures[sig] += 1
        if signatures[sig] > _CYCLE_LIMIT:
            probe = _find_descent(
                game, cur, config, probe_grid_step, probe_budget, (seed, step)
            )
            if probe is not None:
                profiles.append(probe)
                sat_sets.append(satisfied_groups(game, probe, config))
                continue
        free = sorted(successor_spec(game, cur, config).free_players)
        restriction = restrict_subgame(game, cur, free)
        solver_seed = int(substream(seed, step).integers(2**63))
        try:
            outcome = solver(restriction.game, config.epsilon / 2.0, solver_seed)
        except (SolverFailure, BudgetError) as exc:
            termination = TERMINATION_SOLVER_FAILURE
            failure_message = f"sub-game over players {free}: {exc}"
            break
        if outcome.residual > config.epsilon / 2.0 + FP_TOL:
            termination = TERMINATION_SOLVER_FAILURE
            failure_message = (
                f"sub-game over players {free}: best residual {outcome.residual:.3e} "
                f"exceeds {config.epsilon / 2.0:.3e} (method {outcome.method})"
            )
            break
        nxt = restriction.embed(outcome.profile)
        profiles.append(nxt)
        sat_sets.append(satisfied_groups(game, nxt, config))
    else:
        if len(sat_sets[-1]) == num_groups:
            termination = TERMINATION_EQUILIBRIUM
    return PathRecord(
        profiles=tuple(profiles),
        config=config,
        per_step_satisfied=tuple(sat_sets),
        terminal_is_equilibrium=is_eps_equilibrium(game, profiles[-1], config.epsilon),
        termination=termination,
        failure_message=failure_message,
    )
