"""Finite-state stochastic games: policy evaluation, induced-MDP best
responses, frozen-player sub-games, the k-step-to-stationary compiler, and
the satisficing-path constructor over stationary policies.

A player counts as one group across all of its states: it is satisfied only
when its value is within epsilon of its induced-MDP optimum at *every*
state, and a satisfied player's whole per-state policy is pinned for the
next step.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import BudgetError, SolverFailure, StructureError
from .games import FP_TOL, TAU_SIMPLEX, MixedProfile, NormalFormGame, _as_readonly
from .lattice import simplex_lattice
from .rng import substream

TRANSITION_ROW_TOL = 1e-9
KSTEP_STATE_CAP = 10**6
# The compiled kernel is stored dense, so its entry count gets its own guard.
KSTEP_KERNEL_ENTRY_CAP = 5 * 10**7
DEFAULT_VI_TOL = 1e-6

TERMINATION_EQUILIBRIUM = "equilibrium"
TERMINATION_MAX_STEPS = "max_steps"
TERMINATION_SOLVER_FAILURE = "solver_failure"

_CYCLE_LIMIT = 2
_PURE_SCREEN_CAP = 256
_GRID_FALLBACK_CAP = 4096


@dataclass(frozen=True)
class StochasticGame:
    """Finite states, dense kernel and stage payoffs, per-player discounts.

    ``transition`` has shape ``(states, joint_actions, states)`` and
    ``stage_payoffs`` has shape ``(players, states, joint_actions)``; joint
    actions are C-ordered with player 0 slowest, as in NormalFormGame.
    """

    action_counts: tuple[int, ...]
    num_states: int
    transition: np.ndarray
    stage_payoffs: np.ndarray
    discounts: tuple[float, ...]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.action_counts)
        if len(counts) < 1 or any(c < 1 for c in counts):
            raise StructureError(f"need >= 1 player and >= 1 action each, got {counts}")
        n = len(counts)
        x = int(self.num_states)
        if x < 1:
            raise StructureError(f"need >= 1 state, got {x}")
        a = int(np.prod(counts))
        transition = np.asarray(self.transition, dtype=np.float64)
        if transition.shape != (x, a, x):
            raise StructureError(
                f"transition shape {transition.shape}, expected {(x, a, x)}"
            )
        if transition.min() < -1e-12:
            raise StructureError("transition kernel has negative entries")
        row_sums = transition.sum(axis=2)
        if np.abs(row_sums - 1.0).max() > TRANSITION_ROW_TOL:
            raise StructureError(
                f"transition rows must sum to 1 within {TRANSITION_ROW_TOL}"
            )
        payoffs = np.asarray(self.stage_payoffs, dtype=np.float64)
        if payoffs.shape != (n, x, a):
            raise StructureError(
                f"stage payoffs shape {payoffs.shape}, expected {(n, x, a)}"
            )
        if not np.all(np.isfinite(payoffs)):
            raise StructureError("stage payoffs contain non-finite entries")
        discounts = tuple(float(g) for g in self.discounts)
        if len(discounts) != n or any(not 0.0 <= g < 1.0 for g in discounts):
            raise StructureError(f"discounts must be in [0, 1) per player, got {discounts}")
        object.__setattr__(self, "action_counts", counts)
        object.__setattr__(self, "num_states", x)
        object.__setattr__(self, "transition", _as_readonly(transition))
        object.__setattr__(self, "stage_payoffs", _as_readonly(payoffs))
        object.__setattr__(self, "discounts", discounts)

    @property
    def num_players(self) -> int:
        return len(self.action_counts)

    @property
    def joint_action_count(self) -> int:
        return int(np.prod(self.action_counts))

    @property
    def max_abs_payoff(self) -> float:
        return float(np.abs(self.stage_payoffs).max())

    def joint_strides(self) -> np.ndarray:
        n = len(self.action_counts)
        strides = np.ones(n, dtype=np.int64)
        for i in range(n - 2, -1, -1):
            strides[i] = strides[i + 1] * self.action_counts[i + 1]
        return strides

    def stage_game(self, state: int) -> NormalFormGame:
        """The one-shot game played at ``state`` (ignores transitions)."""
        shape = (self.num_players,) + self.action_counts
        return NormalFormGame(self.action_counts, self.stage_payoffs[:, state, :].reshape(shape))

    def to_json_dict(self) -> dict:
        return {
            "players": self.num_players,
            "states": self.num_states,
            "actions": list(self.action_counts),
            "discounts": [float(g) for g in self.discounts],
            "transition": [[list(map(float, row)) for row in per_state] for per_state in self.transition],
            "stage_payoffs": [
                [list(map(float, per_state)) for per_state in per_player]
                for per_player in self.stage_payoffs
            ],
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "StochasticGame":
        try:
            counts = tuple(int(c) for c in obj["actions"])
            return cls(
                action_counts=counts,
                num_states=int(obj["states"]),
                transition=np.asarray(obj["transition"], dtype=np.float64),
                stage_payoffs=np.asarray(obj["stage_payoffs"], dtype=np.float64),
                discounts=tuple(float(g) for g in obj["discounts"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise StructureError(f"bad stochastic game JSON: {exc}") from exc


@dataclass(frozen=True)
class StationaryPolicyProfile:
    """Per player, per state: a distribution over that player's actions."""

    policies: tuple[np.ndarray, ...]

    def __post_init__(self):
        cleaned = []
        for i, pol in enumerate(self.policies):
            mat = np.asarray(pol, dtype=np.float64)
            if mat.ndim != 2 or mat.shape[0] < 1 or mat.shape[1] < 1:
                raise StructureError(f"player {i}: policy must be (states, actions)")
            if not np.all(np.isfinite(mat)):
                raise StructureError(f"player {i}: policy has non-finite entries")
            if mat.min() < -TAU_SIMPLEX:
                raise StructureError(f"player {i}: entry {mat.min():.3e} below -{TAU_SIMPLEX}")
            mat = np.clip(mat, 0.0, None)
            sums = mat.sum(axis=1, keepdims=True)
            if sums.min() <= 0.0:
                raise StructureError(f"player {i}: some state row sums to 0")
            cleaned.append(_as_readonly(mat / sums))
        object.__setattr__(self, "policies", tuple(cleaned))

    @classmethod
    def uniform(cls, game: StochasticGame) -> "StationaryPolicyProfile":
        return cls(
            tuple(np.full((game.num_states, m), 1.0 / m) for m in game.action_counts)
        )

    @classmethod
    def pure(cls, game: StochasticGame, actions) -> "StationaryPolicyProfile":
        """``actions[i][x]`` is the action player i plays in state x."""
        pols = []
        for i, m in enumerate(game.action_counts):
            mat = np.zeros((game.num_states, m))
            for x in range(game.num_states):
                a = int(actions[i][x])
                if not 0 <= a < m:
                    raise StructureError(f"action {a} out of range for {m} actions")
                mat[x, a] = 1.0
            pols.append(mat)
        return cls(tuple(pols))

    @property
    def num_players(self) -> int:
        return len(self.policies)

    def flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.policies])

    def replace(self, player: int, policy: np.ndarray) -> "StationaryPolicyProfile":
        pols = list(self.policies)
        pols[player] = policy
        return StationaryPolicyProfile(tuple(pols))

    def close_to(self, other: "StationaryPolicyProfile", tol: float = TAU_SIMPLEX) -> bool:
        if self.num_players != other.num_players:
            return False
        return all(
            a.shape == b.shape and np.abs(a - b).max() <= tol
            for a, b in zip(self.policies, other.policies)
        )

    def state_profile(self, state: int) -> MixedProfile:
        return MixedProfile(tuple(p[state] for p in self.policies))

    def to_json(self) -> list:
        return [[list(map(float, row)) for row in p] for p in self.policies]

    @classmethod
    def from_json(cls, obj) -> "StationaryPolicyProfile":
        return cls(tuple(np.asarray(p, dtype=np.float64) for p in obj))


def _check_policy(game: StochasticGame, pi: StationaryPolicyProfile) -> None:
    if pi.num_players != game.num_players:
        raise StructureError(
            f"policy profile has {pi.num_players} players, game has {game.num_players}"
        )
    for i, (pol, m) in enumerate(zip(pi.policies, game.action_counts)):
        if pol.shape != (game.num_states, m):
            raise StructureError(
                f"player {i}: policy shape {pol.shape}, expected {(game.num_states, m)}"
            )


def joint_state_weights(game: StochasticGame, pi: StationaryPolicyProfile) -> np.ndarray:
    """Probability of each joint action in each state: shape (states, joint)."""
    _check_policy(game, pi)
    w = np.ones((game.num_states, 1))
    for pol in pi.policies:
        w = (w[:, :, None] * pol[:, None, :]).reshape(game.num_states, -1)
    return w


# ---------------------------------------------------------------------------
# value computation


def apply_value_operator(
    game: StochasticGame, pi: StationaryPolicyProfile, player: int, values: np.ndarray
) -> np.ndarray:
    """One application of the per-player expected-payoff-plus-discounted-continuation operator."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (game.num_states,):
        raise StructureError(f"values shape {values.shape}, expected {(game.num_states,)}")
    w = joint_state_weights(game, pi)
    stage = (w * game.stage_payoffs[player]).sum(axis=1)
    nxt = (w * (game.transition @ values)).sum(axis=1)
    return stage + game.discounts[player] * nxt


def _policy_lin(game, pi, player):
    """Stage reward vector and state-to-state kernel under the joint policy."""
    w = joint_state_weights(game, pi)
    r = (w * game.stage_payoffs[player]).sum(axis=1)
    p = np.einsum("xa,xay->xy", w, game.transition)
    return r, p


def evaluate_policy(
    game: StochasticGame, pi: StationaryPolicyProfile, player: int, tol: float = DEFAULT_VI_TOL
) -> np.ndarray:
    """Fixed-point iteration from zero with the gamma-scaled stopping rule.

    Stops once the sup-norm change is <= tol*(1-gamma)/gamma, which bounds
    both the distance to the true fixed point and the Bellman residual of
    the returned table by tol.  For gamma = 0 a single pass is exact.
    """
    if tol <= 0:
        raise StructureError(f"tol must be > 0, got {tol}")
    gamma = game.discounts[player]
    r, p = _policy_lin(game, pi, player)
    if gamma == 0.0:
        return r
    threshold = tol * (1.0 - gamma) / gamma
    v = np.zeros(game.num_states)
    while True:
        v_new = r + gamma * (p @ v)
        delta = float(np.abs(v_new - v).max())
        v = v_new
        if delta <= threshold:
            return v


def _induced_mdp(game, pi, player):
    """Reward (states, own_actions) and kernel (states, own_actions, states)
    of the MDP the player faces when everyone else follows ``pi``."""
    _check_policy(game, pi)
    x = game.num_states
    m = game.action_counts[player]
    strides = game.joint_strides()
    opp = [j for j in range(game.num_players) if j != player]
    w = np.ones((x, 1))
    base = np.zeros(1, dtype=np.int64)
    for j in opp:
        w = (w[:, :, None] * pi.policies[j][:, None, :]).reshape(x, -1)
        base = (base[:, None] + strides[j] * np.arange(game.action_counts[j])[None, :]).reshape(-1)
    joint = strides[player] * np.arange(m)[:, None] + base[None, :]  # (m, opp_combos)
    rewards = np.einsum("xk,xak->xa", w, game.stage_payoffs[player][:, joint])
    kernel = np.einsum("xk,xaky->xay", w, game.transition[:, joint, :])
    return rewards, kernel


def _mdp_optimal(rewards, kernel, gamma, tol):
    """Optimal values and a greedy deterministic policy for a finite MDP."""
    if gamma == 0.0:
        v = rewards.max(axis=1)
        greedy = rewards.argmax(axis=1)
        return v, greedy
    threshold = tol * (1.0 - gamma) / gamma
    v = np.zeros(rewards.shape[0])
    while True:
        q = rewards + gamma * (kernel @ v)
        v_new = q.max(axis=1)
        delta = float(np.abs(v_new - v).max())
        v = v_new
        if delta <= threshold:
            return v, q.argmax(axis=1)


def induced_mdp_best_value(
    game: StochasticGame, pi: StationaryPolicyProfile, player: int, tol: float = DEFAULT_VI_TOL
) -> np.ndarray:
    """Per-state optimum of the player's induced MDP (opponents follow pi)."""
    if tol <= 0:
        raise StructureError(f"tol must be > 0, got {tol}")
    rewards, kernel = _induced_mdp(game, pi, player)
    v, _ = _mdp_optimal(rewards, kernel, game.discounts[player], tol)
    return v


def markov_player_gaps(
    game: StochasticGame, pi: StationaryPolicyProfile, tol: float = DEFAULT_VI_TOL
) -> np.ndarray:
    """Per (player, state): induced-MDP optimum minus achieved value."""
    gaps = np.empty((game.num_players, game.num_states))
    for i in range(game.num_players):
        gaps[i] = induced_mdp_best_value(game, pi, i, tol) - evaluate_policy(game, pi, i, tol)
    return gaps


# Exact linear-algebra evaluation for the solver's inner loops.  The public
# operations above keep the contraction iteration and its stopping rule; the
# solver only needs a fast residual, and anything it accepts is re-judged by
# the public checks downstream.


def _exact_policy_value(game, pi, player):
    gamma = game.discounts[player]
    r, p = _policy_lin(game, pi, player)
    if gamma == 0.0:
        return r
    return np.linalg.solve(np.eye(game.num_states) - gamma * p, r)


def _exact_mdp_optimal(rewards, kernel, gamma):
    """Policy iteration with exact evaluation; ties never switch actions."""
    x = rewards.shape[0]
    idx = np.arange(x)
    policy = rewards.argmax(axis=1)
    for _ in range(64 * x + 16):
        if gamma == 0.0:
            v = rewards[idx, policy]
        else:
            p_pi = kernel[idx, policy]
            v = np.linalg.solve(np.eye(x) - gamma * p_pi, rewards[idx, policy])
        q = rewards + gamma * (kernel @ v)
        improved = q.max(axis=1) > q[idx, policy] + 1e-13
        if not improved.any():
            return q.max(axis=1), policy
        policy = np.where(improved, q.argmax(axis=1), policy)
    return q.max(axis=1), policy  # pragma: no cover - PI converges long before


def _exact_player_gaps(game, pi):
    gaps = np.empty((game.num_players, game.num_states))
    for i in range(game.num_players):
        rewards, kernel = _induced_mdp(game, pi, i)
        best, _ = _exact_mdp_optimal(rewards, kernel, game.discounts[i])
        gaps[i] = best - _exact_policy_value(game, pi, i)
    return gaps


def _exact_residual(game, pi) -> float:
    return float(max(0.0, _exact_player_gaps(game, pi).max()))


def markov_residual(
    game: StochasticGame, pi: StationaryPolicyProfile, tol: float = DEFAULT_VI_TOL
) -> float:
    return float(max(0.0, markov_player_gaps(game, pi, tol).max()))


def stationary_satisfied_players(
    game: StochasticGame,
    pi: StationaryPolicyProfile,
    epsilon: float,
    tol: float = DEFAULT_VI_TOL,
) -> frozenset[int]:
    """Players within epsilon of their induced-MDP optimum at every state.

    Both sides of the comparison carry up to ``tol`` of iteration error, so
    2*tol is absorbed into the slack.
    """
    if epsilon < 0:
        raise StructureError(f"epsilon must be >= 0, got {epsilon}")
    gaps = markov_player_gaps(game, pi, tol)
    slack = epsilon + 2.0 * tol + FP_TOL
    return frozenset(int(i) for i in np.flatnonzero(gaps.max(axis=1) <= slack))


def is_markov_eps_equilibrium(
    game: StochasticGame,
    pi: StationaryPolicyProfile,
    epsilon: float,
    tol: float = DEFAULT_VI_TOL,
) -> bool:
    return len(stationary_satisfied_players(game, pi, epsilon, tol)) == game.num_players


# ---------------------------------------------------------------------------
# frozen-player sub-games


@dataclass(frozen=True)
class MarkovRestriction:
    """Stochastic sub-game over the free players; the rest follow a fixed policy."""

    base: StochasticGame
    free_players: tuple[int, ...]
    frozen_policy: StationaryPolicyProfile
    game: StochasticGame

    def embed(self, sub_pi: StationaryPolicyProfile) -> StationaryPolicyProfile:
        if sub_pi.num_players != len(self.free_players):
            raise StructureError(
                f"sub-profile has {sub_pi.num_players} players, restriction frees {len(self.free_players)}"
            )
        pols = list(self.frozen_policy.policies)
        for k, i in enumerate(self.free_players):
            pols[i] = sub_pi.policies[k]
        return StationaryPolicyProfile(tuple(pols))


def freeze_players_stochastic(
    game: StochasticGame, pi: StationaryPolicyProfile, frozen_players
) -> MarkovRestriction:
    """Marginalize the kernel and stage payoffs over frozen players' per-state mixtures."""
    _check_policy(game, pi)
    frozen = tuple(sorted(int(i) for i in set(frozen_players)))
    if any(i < 0 or i >= game.num_players for i in frozen):
        raise StructureError(f"frozen players {frozen} out of range")
    free = tuple(i for i in range(game.num_players) if i not in frozen)
    if not free:
        raise StructureError("cannot freeze every player")
    if not frozen:
        return MarkovRestriction(game, free, pi, game)
    x = game.num_states
    strides = game.joint_strides()
    free_base = np.zeros(1, dtype=np.int64)
    for j in free:
        free_base = (
            free_base[:, None] + strides[j] * np.arange(game.action_counts[j])[None, :]
        ).reshape(-1)
    wf = np.ones((x, 1))
    frozen_base = np.zeros(1, dtype=np.int64)
    for j in frozen:
        wf = (wf[:, :, None] * pi.policies[j][:, None, :]).reshape(x, -1)
        frozen_base = (
            frozen_base[:, None] + strides[j] * np.arange(game.action_counts[j])[None, :]
        ).reshape(-1)
    joint = free_base[:, None] + frozen_base[None, :]  # (sub_joint, frozen_combos)
    sub_transition = np.einsum("xk,xfky->xfy", wf, game.transition[:, joint, :])
    sub_payoffs = np.einsum(
        "xk,ixfk->ixf", wf, game.stage_payoffs[list(free)][:, :, joint]
    )
    sub_counts = tuple(game.action_counts[i] for i in free)
    sub = StochasticGame(
        action_counts=sub_counts,
        num_states=x,
        transition=sub_transition,
        stage_payoffs=sub_payoffs,
        discounts=tuple(game.discounts[i] for i in free),
    )
    return MarkovRestriction(game, free, pi, sub)


# ---------------------------------------------------------------------------
# k-step games


@dataclass(frozen=True)
class KStepGame:
    """A stochastic game whose policies may condition on the last k joint actions."""

    base: StochasticGame
    k: int

    def __post_init__(self):
        if int(self.k) < 1:
            raise StructureError(f"history length k must be >= 1, got {self.k}")
        object.__setattr__(self, "k", int(self.k))

    def to_json_dict(self) -> dict:
        obj = self.base.to_json_dict()
        obj["k"] = self.k
        return obj

    @classmethod
    def from_json_dict(cls, obj: dict) -> "KStepGame":
        base = StochasticGame.from_json_dict({k: v for k, v in obj.items() if k != "k"})
        return cls(base, int(obj["k"]))


@dataclass(frozen=True)
class CompiledKStep:
    """Stationary compilation of a k-step game over states (x, s^-1, ..., s^-k)."""

    game: StochasticGame
    state_labels: tuple[tuple[int, tuple[int, ...]], ...]

    def index_of(self, x: int, history) -> int:
        a = self.game_base_joint
        code = 0
        for h in history:
            code = code * a + int(h)
        return int(x) * a ** len(tuple(history)) + code

    @property
    def game_base_joint(self) -> int:
        return self.game.joint_action_count

    def to_json_dict(self) -> dict:
        return {
            "game": self.game.to_json_dict(),
            "state_labels": [[x, list(h)] for x, h in self.state_labels],
        }


def compile_k_step(kgame: KStepGame) -> CompiledKStep:
    """Expand histories into the state: Y = X * (joint actions)^k.

    Compiled states are indexed lexicographically with x slowest, then the
    most recent joint action, back to the oldest.  The history-shift part of
    the kernel is exact (indicator structure); payoffs ignore the history
    coordinates.
    """
    base = kgame.base
    x_count = base.num_states
    a = base.joint_action_count
    hist = a**kgame.k
    y_count = x_count * hist
    if y_count > KSTEP_STATE_CAP:
        raise BudgetError(
            f"compiled state space {y_count} exceeds cap {KSTEP_STATE_CAP}"
        )
    if y_count * a * y_count > KSTEP_KERNEL_ENTRY_CAP:
        raise BudgetError(
            f"compiled kernel would hold {y_count * a * y_count} entries, cap {KSTEP_KERNEL_ENTRY_CAP}"
        )
    ys = np.arange(y_count)
    xs = ys // hist
    hs = ys % hist
    transition = np.zeros((y_count, a, y_count))
    for s in range(a):
        next_hist = s * (hist // a) + hs // a
        targets = np.arange(x_count)[None, :] * hist + next_hist[:, None]  # (Y, X)
        transition[ys[:, None], s, targets] = base.transition[xs, s, :]
    payoffs = base.stage_payoffs[:, xs, :]
    labels = []
    for y in range(y_count):
        code = int(hs[y])
        digits = []
        for _ in range(kgame.k):
            digits.append(code % a)
            code //= a
        labels.append((int(xs[y]), tuple(reversed(digits))))
    compiled = StochasticGame(
        action_counts=base.action_counts,
        num_states=y_count,
        transition=transition,
        stage_payoffs=payoffs,
        discounts=base.discounts,
    )
    return CompiledKStep(compiled, tuple(labels))


# ---------------------------------------------------------------------------
# Markov equilibrium solver and path construction


@dataclass(frozen=True)
class MarkovSolverOutcome:
    profile: StationaryPolicyProfile
    residual: float
    method: str

    def to_json_dict(self) -> dict:
        return {
            "method": self.method,
            "residual": float(self.residual),
            "profile": self.profile.to_json(),
        }


def _pure_policy_combos(game: StochasticGame):
    per_player = [
        list(itertools.product(range(m), repeat=game.num_states))
        for m in game.action_counts
    ]
    return itertools.product(*per_player)


def _pure_policy_count(game: StochasticGame) -> int:
    count = 1
    for m in game.action_counts:
        count *= m**game.num_states
    return count


def _greedy_vertex(game, pi, player):
    rewards, kernel = _induced_mdp(game, pi, player)
    _, greedy = _exact_mdp_optimal(rewards, kernel, game.discounts[player])
    vertex = np.zeros((game.num_states, game.action_counts[player]))
    vertex[np.arange(game.num_states), greedy] = 1.0
    return vertex


def _markov_polish(game, start, tol):
    shapes = [(game.num_states, m) for m in game.action_counts]
    x0 = np.concatenate(
        [np.log(np.clip(p, 1e-12, None)).ravel() for p in start.policies]
    )

    def unpack(z):
        pols = []
        pos = 0
        for x, m in shapes:
            block = z[pos:pos + x * m].reshape(x, m)
            block = block - block.max(axis=1, keepdims=True)
            e = np.exp(block)
            pols.append(e / e.sum(axis=1, keepdims=True))
            pos += x * m
        return StationaryPolicyProfile(tuple(pols))

    def objective(z):
        return _exact_residual(game, unpack(z))

    result = minimize(
        objective,
        x0,
        method="Nelder-Mead",
        options={"maxfev": 6000, "xatol": 1e-10, "fatol": tol * 1e-3, "adaptive": True},
    )
    profile = unpack(result.x)
    res = _exact_residual(game, profile)
    if res <= tol:
        return MarkovSolverOutcome(profile, res, "iterative")
    return None


def _single_state_reduction(game: StochasticGame, tol: float, seed: int):
    """One-state stochastic games are their stage game with values scaled by
    1/(1-gamma); solve the stage game exactly and rescale the residual."""
    from . import solvers
    from .games import player_gaps as nf_player_gaps

    stage = game.stage_game(0)
    scale = max(1.0 / (1.0 - g) for g in game.discounts)
    stage_tol = tol / scale
    outcome = solvers.solve(stage, stage_tol, seed)
    pi = StationaryPolicyProfile(
        tuple(d[None, :] for d in outcome.profile.distributions)
    )
    gaps = nf_player_gaps(stage, outcome.profile)
    res = max(0.0, max(float(g) / (1.0 - game.discounts[i]) for i, g in enumerate(gaps)))
    return MarkovSolverOutcome(pi, res, outcome.method)


def markov_solve(
    game: StochasticGame,
    tol: float,
    seed: int = 0,
    restarts: int = 16,
    max_iters: int = 10**4,
) -> MarkovSolverOutcome:
    """Markov equilibrium search: damped best response in policy space.

    Single-state games reduce to the stage game.  Otherwise: screen all pure
    stationary profiles when few enough, then damped greedy iteration with
    residual verification and a local polish, then a per-state-lattice grid
    fallback.  Residuals inside the search come from exact linear solves;
    the returned residual may exceed tol only with method "grid".
    """
    if game.num_states == 1:
        return _single_state_reduction(game, tol, seed)
    best: tuple[float, StationaryPolicyProfile] | None = None
    if _pure_policy_count(game) <= _PURE_SCREEN_CAP:
        for combo in _pure_policy_combos(game):
            pi = StationaryPolicyProfile.pure(game, combo)
            res = _exact_residual(game, pi)
            if res <= tol:
                return MarkovSolverOutcome(pi, res, "iterative")
            if best is None or res < best[0]:
                best = (res, pi)
    polish_budget = 4
    for r in range(restarts):
        if r == 0:
            pi = StationaryPolicyProfile.uniform(game)
        else:
            rng = substream(seed, r)
            pi = StationaryPolicyProfile(
                tuple(
                    rng.dirichlet(np.ones(m), size=game.num_states)
                    for m in game.action_counts
                )
            )
        stall = 0
        restart_best: tuple[float, StationaryPolicyProfile] | None = None
        for _ in range(max_iters):
            res = _exact_residual(game, pi)
            if res <= tol:
                return MarkovSolverOutcome(pi, res, "iterative")
            if restart_best is None or res < restart_best[0] - FP_TOL:
                restart_best = (res, pi)
                stall = 0
            else:
                stall += 1
                if stall > 100:
                    break
            pols = tuple(
                0.5 * p + 0.5 * _greedy_vertex(game, pi, i)
                for i, p in enumerate(pi.policies)
            )
            pi = StationaryPolicyProfile(pols)
        if restart_best is not None:
            if polish_budget > 0:
                polish_budget -= 1
                polished = _markov_polish(game, restart_best[1], tol)
                if polished is not None:
                    return polished
            if best is None or restart_best[0] < best[0]:
                best = restart_best
    # grid fallback over per-state lattices at step 0.1
    lattices = [simplex_lattice(m, 0.1) for m in game.action_counts]
    slots = [(i, x) for i in range(game.num_players) for x in range(game.num_states)]
    total = 1
    for i, _ in slots:
        total *= len(lattices[i])
        if total > _GRID_FALLBACK_CAP:
            break
    rng = substream(seed, 10**6)
    candidates: list[StationaryPolicyProfile] = []
    if total <= _GRID_FALLBACK_CAP:
        for combo in itertools.product(*(lattices[i] for i, _ in slots)):
            pols = [np.empty((game.num_states, m)) for m in game.action_counts]
            for (i, x), vec in zip(slots, combo):
                pols[i][x] = vec
            candidates.append(StationaryPolicyProfile(tuple(pols)))
    else:
        for _ in range(_GRID_FALLBACK_CAP):
            pols = [np.empty((game.num_states, m)) for m in game.action_counts]
            for i, x in slots:
                pols[i][x] = lattices[i][rng.integers(len(lattices[i]))]
            candidates.append(StationaryPolicyProfile(tuple(pols)))
    for pi in candidates:
        res = _exact_residual(game, pi)
        if best is None or res < best[0]:
            best = (res, pi)
    assert best is not None
    if best[0] > tol:
        polished = _markov_polish(game, best[1], tol)
        if polished is not None:
            return polished
    return MarkovSolverOutcome(best[1], best[0], "grid")


@dataclass(frozen=True)
class MarkovPathRecord:
    """A stationary-policy path with per-step satisfied players and flags."""

    policies: tuple[StationaryPolicyProfile, ...]
    epsilon: float
    per_step_satisfied: tuple[frozenset[int], ...]
    terminal_is_equilibrium: bool
    termination: str
    failure_message: str | None = None

    @property
    def step_count(self) -> int:
        return len(self.policies) - 1

    def group_counts(self) -> list[int]:
        return [len(s) for s in self.per_step_satisfied]

    def to_json_dict(self) -> dict:
        return {
            "policies": [p.to_json() for p in self.policies],
            "epsilon": float(self.epsilon),
            "satisfied": [sorted(s) for s in self.per_step_satisfied],
            "terminal_is_equilibrium": bool(self.terminal_is_equilibrium),
            "termination": self.termination,
            "failure_message": self.failure_message,
            "step_count": self.step_count,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "MarkovPathRecord":
        return cls(
            policies=tuple(StationaryPolicyProfile.from_json(p) for p in obj["policies"]),
            epsilon=float(obj["epsilon"]),
            per_step_satisfied=tuple(frozenset(s) for s in obj["satisfied"]),
            terminal_is_equilibrium=bool(obj["terminal_is_equilibrium"]),
            termination=obj["termination"],
            failure_message=obj.get("failure_message"),
        )


def validate_markov_path(
    game: StochasticGame, path: MarkovPathRecord, tol: float = DEFAULT_VI_TOL
) -> bool:
    """Recorded satisfied sets match recomputation and satisfied players never move."""
    if len(path.policies) == 0:
        raise StructureError("path must contain at least one profile")
    if len(path.per_step_satisfied) != len(path.policies):
        return False
    for pi, recorded in zip(path.policies, path.per_step_satisfied):
        if stationary_satisfied_players(game, pi, path.epsilon, tol) != recorded:
            return False
    for (pi, sat), nxt in zip(
        zip(path.policies, path.per_step_satisfied), path.policies[1:]
    ):
        for i in sat:
            if np.abs(pi.policies[i] - nxt.policies[i]).max() > TAU_SIMPLEX:
                return False
    return True


def _markov_descent(game, pi, epsilon, vi_tol, free, seed, budget=200):
    """Probe free players' policy space for a successor with fewer satisfied players."""
    n_cur = len(stationary_satisfied_players(game, pi, epsilon, vi_tol))
    rng = _seed_rng(seed)
    candidates = []
    pure_total = 1
    for i in free:
        pure_total *= game.action_counts[i] ** game.num_states
    if pure_total <= budget:
        per_player = [
            list(itertools.product(range(game.action_counts[i]), repeat=game.num_states))
            for i in free
        ]
        for combo in itertools.product(*per_player):
            pols = list(pi.policies)
            for i, actions in zip(free, combo):
                mat = np.zeros((game.num_states, game.action_counts[i]))
                mat[np.arange(game.num_states), list(actions)] = 1.0
                pols[i] = mat
            candidates.append(StationaryPolicyProfile(tuple(pols)))
    while len(candidates) < budget:
        pols = list(pi.policies)
        for i in free:
            pols[i] = rng.dirichlet(np.ones(game.action_counts[i]), size=game.num_states)
        candidates.append(StationaryPolicyProfile(tuple(pols)))
    for cand in candidates:
        if len(stationary_satisfied_players(game, cand, epsilon, vi_tol)) < n_cur:
            return cand
    return None


def _seed_rng(seed) -> np.random.Generator:
    if isinstance(seed, (int, np.integer)):
        return substream(int(seed))
    key = tuple(int(k) for k in seed)
    return substream(key[0], *key[1:])


def construct_path_stochastic(
    game: StochasticGame,
    pi0: StationaryPolicyProfile,
    epsilon: float,
    solver=None,
    max_steps: int = 100,
    seed: int = 0,
    vi_tol: float | None = None,
) -> MarkovPathRecord:
    """Satisficing path over stationary policies, one group per player.

    Mirrors the normal-form constructor: freeze satisfied players, solve the
    free players' stochastic sub-game to an epsilon/2 Markov equilibrium,
    jump, repeat; probe for a satisfied-count descent when the iteration
    revisits a signature.
    """
    if max_steps < 1:
        raise StructureError(f"max_steps must be >= 1, got {max_steps}")
    _check_policy(game, pi0)
    if vi_tol is None:
        vi_tol = min(DEFAULT_VI_TOL, epsilon / 8.0) if epsilon > 0 else 1e-9
    if solver is None:
        solver = markov_solve
    policies = [pi0]
    sat_sets = [stationary_satisfied_players(game, pi0, epsilon, vi_tol)]
    termination = TERMINATION_MAX_STEPS
    failure_message = None
    signatures: Counter = Counter()
    step = 0
    while len(policies) - 1 < max_steps:
        cur = policies[-1]
        sat = sat_sets[-1]
        if len(sat) == game.num_players:
            termination = TERMINATION_EQUILIBRIUM
            break
        step += 1
        sig = (sat, np.round(cur.flat(), 6).tobytes())
        signatures[sig] += 1
        free = sorted(set(range(game.num_players)) - sat)
        if signatures[sig] > _CYCLE_LIMIT:
            probe = _markov_descent(game, cur, epsilon, vi_tol, free, (seed, step))
            if probe is not None:
                policies.append(probe)
                sat_sets.append(
                    stationary_satisfied_players(game, probe, epsilon, vi_tol)
                )
                continue
        restriction = freeze_players_stochastic(game, cur, sorted(sat))
        solver_seed = int(substream(seed, step).integers(2**63))
        try:
            outcome = solver(restriction.game, epsilon / 2.0, solver_seed)
        except (SolverFailure, BudgetError) as exc:
            termination = TERMINATION_SOLVER_FAILURE
            failure_message = f"sub-game over players {free}: {exc}"
            break
        if outcome.residual > epsilon / 2.0 + FP_TOL:
            termination = TERMINATION_SOLVER_FAILURE
            failure_message = (
                f"sub-game over players {free}: best residual {outcome.residual:.3e} "
                f"exceeds {epsilon / 2.0:.3e} (method {outcome.method})"
            )
            break
        nxt = restriction.embed(outcome.profile)
        policies.append(nxt)
        sat_sets.append(stationary_satisfied_players(game, nxt, epsilon, vi_tol))
    else:
        if len(sat_sets[-1]) == game.num_players:
            termination = TERMINATION_EQUILIBRIUM
    return MarkovPathRecord(
        policies=tuple(policies),
        epsilon=float(epsilon),
        per_step_satisfied=tuple(sat_sets),
        terminal_is_equilibrium=len(
            stationary_satisfied_players(game, policies[-1], epsilon, vi_tol)
        )
        == game.num_players,
        termination=termination,
        failure_message=failure_message,
    )
