"""Finite normal-form games, mixed profiles, and best-response machinery.

Payoff tensors are dense float64 with shape ``(num_players, m_0, ..., m_{n-1})``
(player-major outer axis, joint actions in C order with player 0 slowest).
The JSON form flattens exactly that layout.  Player and action indices are
0-based everywhere.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import BudgetError, StructureError

TAU_SIMPLEX = 1e-9
# Absolute float slack layered *under* epsilon in best-response comparisons.
FP_TOL = 1e-12
TENSOR_ENTRY_CAP = 10**7


def _as_readonly(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class NormalFormGame:
    """A finite game: per-player action counts plus a dense payoff tensor."""

    action_counts: tuple[int, ...]
    payoffs: np.ndarray
    _flat: np.ndarray = field(init=False, repr=False, compare=False)
    _counts: np.ndarray = field(init=False, repr=False, compare=False)
    _strides: np.ndarray = field(init=False, repr=False, compare=False)
    _offsets: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        counts = tuple(int(c) for c in self.action_counts)
        if len(counts) < 1 or any(c < 1 for c in counts):
            raise StructureError(f"need >= 1 player and >= 1 action each, got {counts}")
        n = len(counts)
        entries = n * int(np.prod(counts))
        if entries > TENSOR_ENTRY_CAP:
            raise BudgetError(f"payoff tensor has {entries} entries, cap is {TENSOR_ENTRY_CAP}")
        payoffs = np.asarray(self.payoffs, dtype=np.float64)
        if payoffs.shape != (n,) + counts:
            raise StructureError(
                f"payoff tensor shape {payoffs.shape} does not match (players,)+actions {(n,) + counts}"
            )
        if not np.all(np.isfinite(payoffs)):
            raise StructureError("payoff tensor contains non-finite entries")
        object.__setattr__(self, "action_counts", counts)
        object.__setattr__(self, "payoffs", _as_readonly(payoffs))
        object.__setattr__(self, "_flat", _as_readonly(payoffs.reshape(n, -1)))
        object.__setattr__(self, "_counts", np.asarray(counts, dtype=np.int64))
        strides = np.ones(n, dtype=np.int64)
        for i in range(n - 2, -1, -1):
            strides[i] = strides[i + 1] * counts[i + 1]
        object.__setattr__(self, "_strides", strides)
        offsets = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(counts, out=offsets[1:])
        object.__setattr__(self, "_offsets", offsets)

    @property
    def num_players(self) -> int:
        return len(self.action_counts)

    @property
    def joint_action_count(self) -> int:
        return int(np.prod(self.action_counts))

    @property
    def max_abs_payoff(self) -> float:
        return float(np.abs(self.payoffs).max())

    @property
    def payoff_spread(self) -> float:
        return float(self.payoffs.max() - self.payoffs.min())

    def to_json_dict(self) -> dict:
        return {
            "players": self.num_players,
            "actions": list(self.action_counts),
            "payoffs": [float(v) for v in self.payoffs.ravel()],
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "NormalFormGame":
        try:
            n = int(obj["players"])
            counts = tuple(int(c) for c in obj["actions"])
            flat = np.asarray(obj["payoffs"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise StructureError(f"bad game JSON: {exc}") from exc
        if len(counts) != n:
            raise StructureError(f"'actions' lists {len(counts)} players, 'players' says {n}")
        expected = n * int(np.prod(counts)) if counts else 0
        if flat.size != expected:
            raise StructureError(
                f"'payoffs' has {flat.size} entries, schema requires players*prod(actions) = {expected}"
            )
        return cls(counts, flat.reshape((n,) + counts))


@dataclass(frozen=True)
class MixedProfile:
    """One probability vector per player.

    Vectors are renormalized on construction; an entry below ``-TAU_SIMPLEX``
    is rejected rather than clipped.
    """

    distributions: tuple[np.ndarray, ...]

    def __post_init__(self):
        cleaned = []
        for i, dist in enumerate(self.distributions):
            vec = np.asarray(dist, dtype=np.float64)
            if vec.ndim != 1 or vec.size < 1:
                raise StructureError(f"player {i}: distribution must be a nonempty vector")
            if not np.all(np.isfinite(vec)):
                raise StructureError(f"player {i}: distribution has non-finite entries")
            if vec.min() < -TAU_SIMPLEX:
                raise StructureError(
                    f"player {i}: entry {vec.min():.3e} below -{TAU_SIMPLEX}"
                )
            vec = np.clip(vec, 0.0, None)
            total = vec.sum()
            if total <= 0.0:
                raise StructureError(f"player {i}: distribution sums to {total}")
            cleaned.append(_as_readonly(vec / total))
        object.__setattr__(self, "distributions", tuple(cleaned))

    @classmethod
    def uniform(cls, game: NormalFormGame) -> "MixedProfile":
        return cls(tuple(np.full(m, 1.0 / m) for m in game.action_counts))

    @classmethod
    def pure(cls, game: NormalFormGame, actions) -> "MixedProfile":
        actions = tuple(int(a) for a in actions)
        if len(actions) != game.num_players:
            raise StructureError(f"expected {game.num_players} actions, got {len(actions)}")
        dists = []
        for m, a in zip(game.action_counts, actions):
            if not 0 <= a < m:
                raise StructureError(f"action {a} out of range for {m} actions")
            vec = np.zeros(m)
            vec[a] = 1.0
            dists.append(vec)
        return cls(tuple(dists))

    @property
    def num_players(self) -> int:
        return len(self.distributions)

    def flat(self) -> np.ndarray:
        return np.concatenate(self.distributions)

    def replace(self, player: int, dist: np.ndarray) -> "MixedProfile":
        dists = list(self.distributions)
        dists[player] = dist
        return MixedProfile(tuple(dists))

    def close_to(self, other: "MixedProfile", tol: float = TAU_SIMPLEX) -> bool:
        """Entrywise equality within ``tol``, per player."""
        if self.num_players != other.num_players:
            return False
        return all(
            a.shape == b.shape and np.abs(a - b).max() <= tol
            for a, b in zip(self.distributions, other.distributions)
        )

    def l1_distance(self, other: "MixedProfile") -> float:
        """Sum over players of the L1 distance between the two vectors."""
        return float(
            sum(np.abs(a - b).sum() for a, b in zip(self.distributions, other.distributions))
        )

    def to_json(self) -> list:
        return [[float(v) for v in d] for d in self.distributions]

    @classmethod
    def from_json(cls, obj) -> "MixedProfile":
        return cls(tuple(np.asarray(d, dtype=np.float64) for d in obj))


def _check_profile(game: NormalFormGame, profile: MixedProfile) -> None:
    if profile.num_players != game.num_players:
        raise StructureError(
            f"profile has {profile.num_players} players, game has {game.num_players}"
        )
    for i, (dist, m) in enumerate(zip(profile.distributions, game.action_counts)):
        if dist.size != m:
            raise StructureError(f"player {i}: {dist.size} probabilities for {m} actions")


@dataclass(frozen=True)
class GroupPartition:
    """An ordered partition of the player set; group indices are positions."""

    groups: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        groups = tuple(tuple(sorted(int(i) for i in g)) for g in self.groups)
        seen: set[int] = set()
        for g in groups:
            if not g:
                raise StructureError("empty group in partition")
            if seen.intersection(g):
                raise StructureError("groups are not pairwise disjoint")
            seen.update(g)
        object.__setattr__(self, "groups", groups)

    @classmethod
    def singletons(cls, num_players: int) -> "GroupPartition":
        return cls(tuple((i,) for i in range(num_players)))

    @classmethod
    def single_group(cls, num_players: int) -> "GroupPartition":
        return cls((tuple(range(num_players)),))

    @property
    def num_groups(self) -> int:
        return len(self.groups)

    def players(self) -> frozenset[int]:
        return frozenset(itertools.chain.from_iterable(self.groups))

    def check_covers(self, num_players: int) -> None:
        if self.players() != frozenset(range(num_players)):
            raise StructureError(
                f"partition covers {sorted(self.players())}, game has players 0..{num_players - 1}"
            )

    def to_json(self) -> list:
        return [list(g) for g in self.groups]

    @classmethod
    def from_json(cls, obj) -> "GroupPartition":
        return cls(tuple(tuple(g) for g in obj))


@dataclass(frozen=True)
class SatisficingConfig:
    """Tolerance and grouping under which path legality is judged."""

    epsilon: float
    partition: GroupPartition

    def __post_init__(self):
        if not np.isfinite(self.epsilon) or self.epsilon < 0:
            raise StructureError(f"epsilon must be >= 0, got {self.epsilon}")

    def to_json_dict(self) -> dict:
        return {"epsilon": float(self.epsilon), "groups": self.partition.to_json()}

    @classmethod
    def from_json_dict(cls, obj: dict) -> "SatisficingConfig":
        return cls(float(obj["epsilon"]), GroupPartition.from_json(obj["groups"]))


# ---------------------------------------------------------------------------
# best-response operations


def action_values(game: NormalFormGame, profile: MixedProfile) -> list[np.ndarray]:
    """Player-by-player payoff of each own pure action against the profile."""
    _check_profile(game, profile)
    q = kernels.q_values_flat(game._flat, game._counts, game._strides, game._offsets, profile.flat())
    off = game._offsets
    return [q[off[i]:off[i + 1]] for i in range(game.num_players)]


def expected_payoff(game: NormalFormGame, profile: MixedProfile, player: int) -> float:
    """Mixed-extension payoff: sum over joint actions of payoff times probability."""
    q = action_values(game, profile)[player]
    return float(q @ profile.distributions[player])


def best_response_value(game: NormalFormGame, profile: MixedProfile, player: int) -> float:
    """Best deviation payoff; by multilinearity the max over pure actions."""
    return float(action_values(game, profile)[player].max())


def player_gaps(game: NormalFormGame, profile: MixedProfile) -> np.ndarray:
    """Per-player ``best_response_value - expected_payoff`` (>= 0 up to rounding)."""
    qs = action_values(game, profile)
    return np.array([float(q.max() - q @ d) for q, d in zip(qs, profile.distributions)])


def equilibrium_residual(game: NormalFormGame, profile: MixedProfile) -> float:
    """Max over players of the best-response gap; zero exactly at equilibrium."""
    return float(max(0.0, player_gaps(game, profile).max()))


def is_eps_best_response(
    game: NormalFormGame, profile: MixedProfile, player: int, epsilon: float
) -> bool:
    if epsilon < 0:
        raise StructureError(f"epsilon must be >= 0, got {epsilon}")
    qs = action_values(game, profile)[player]
    expected = float(qs @ profile.distributions[player])
    return expected >= float(qs.max()) - epsilon - FP_TOL


def satisfied_players(game: NormalFormGame, profile: MixedProfile, epsilon: float) -> frozenset[int]:
    gaps = player_gaps(game, profile)
    return frozenset(int(i) for i in np.flatnonzero(gaps <= epsilon + FP_TOL))


def is_eps_equilibrium(game: NormalFormGame, profile: MixedProfile, epsilon: float) -> bool:
    if epsilon < 0:
        raise StructureError(f"epsilon must be >= 0, got {epsilon}")
    return len(satisfied_players(game, profile, epsilon)) == game.num_players


def satisfied_groups(
    game: NormalFormGame, profile: MixedProfile, config: SatisficingConfig
) -> frozenset[int]:
    """Indices of groups whose members are all eps-best responders; |result| is the group count."""
    config.partition.check_covers(game.num_players)
    sat = satisfied_players(game, profile, config.epsilon)
    return frozenset(
        g for g, members in enumerate(config.partition.groups) if sat.issuperset(members)
    )


def batch_player_gaps(game: NormalFormGame, batch: np.ndarray) -> np.ndarray:
    """Vectorized ``player_gaps`` over rows of concatenated profiles."""
    batch = np.ascontiguousarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != int(game._offsets[-1]):
        raise StructureError(
            f"batch shape {batch.shape} does not match profile length {int(game._offsets[-1])}"
        )
    return kernels.batch_gaps(game._flat, game._counts, game._strides, game._offsets, batch)


# ---------------------------------------------------------------------------
# sub-game restriction


@dataclass(frozen=True)
class SubgameRestriction:
    """A game over the free players with everyone else frozen at fixed mixtures.

    ``free_players`` maps the restricted game's player k back to player
    ``free_players[k]`` of the base game.
    """

    base: NormalFormGame
    free_players: tuple[int, ...]
    frozen_profile: MixedProfile
    game: NormalFormGame

    def embed(self, sub_profile: MixedProfile) -> MixedProfile:
        """Lift a restricted-game profile back to a full profile.

        Frozen players keep their distribution from ``frozen_profile``.
        """
        if sub_profile.num_players != len(self.free_players):
            raise StructureError(
                f"sub-profile has {sub_profile.num_players} players, restriction frees {len(self.free_players)}"
            )
        dists = list(self.frozen_profile.distributions)
        for k, i in enumerate(self.free_players):
            dists[i] = sub_profile.distributions[k]
        return MixedProfile(tuple(dists))


def restrict_subgame(
    game: NormalFormGame, frozen_profile: MixedProfile, free_players
) -> SubgameRestriction:
    """Freeze every player outside ``free_players`` at its ``frozen_profile`` mixture.

    The restricted payoff tensor is the exact expectation of the base payoffs
    over the frozen mixtures (no sampling), holding only free players' axes.
    """
    _check_profile(game, frozen_profile)
    free = tuple(sorted(int(i) for i in set(free_players)))
    if not free:
        raise StructureError("free_players must be nonempty")
    if free[0] < 0 or free[-1] >= game.num_players:
        raise StructureError(f"free players {free} out of range")
    frozen = [i for i in range(game.num_players) if i not in free]
    sub_counts = tuple(game.action_counts[i] for i in free)
    sub_payoffs = np.empty((len(free),) + sub_counts)
    for k, i in enumerate(free):
        arr = game.payoffs[i]
        for j in reversed(frozen):
            arr = np.tensordot(arr, frozen_profile.distributions[j], axes=([j], [0]))
        sub_payoffs[k] = arr
    return SubgameRestriction(
        base=game,
        free_players=free,
        frozen_profile=frozen_profile,
        game=NormalFormGame(sub_counts, sub_payoffs),
    )
