"""Instance generators, experiment runner, and report emission.

Every random draw descends from the experiment seed through
``rng.substream``; rerunning a config reproduces the JSON report
byte-for-byte.  Wall-clock timings are kept out of the JSON for exactly that
reason and appear only in the CSV projection.
"""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import dynamics, markov, solvers
from .errors import StructureError
from .games import (
    GroupPartition,
    MixedProfile,
    NormalFormGame,
    SatisficingConfig,
    equilibrium_residual,
)
from .jsonio import write_json
from .rng import substream

NAMED_GAMES = ("matching_pennies", "rock_paper_scissors", "all_zero")
EXPERIMENT_KINDS = ("normal_form_path", "stochastic_path", "topology_check", "kstep_roundtrip")
CSV_COLUMNS = ("seed", "kind", "steps", "residual", "success", "millis")

PAYOFF_DECIMALS = 6


def named_game(name: str, players: int = 2, actions: int = 2) -> NormalFormGame:
    """Canonical small instances used throughout the tests and docs."""
    if name == "matching_pennies":
        row = np.array([[1.0, -1.0], [-1.0, 1.0]])
        return NormalFormGame((2, 2), np.stack([row, -row]))
    if name == "rock_paper_scissors":
        row = np.zeros((3, 3))
        for a in range(3):
            row[a, (a + 1) % 3] = -1.0  # next symbol beats this one
            row[a, (a + 2) % 3] = 1.0
        return NormalFormGame((3, 3), np.stack([row, -row]))
    if name == "all_zero":
        counts = (actions,) * players
        return NormalFormGame(counts, np.zeros((players,) + counts))
    raise StructureError(f"unknown named game {name!r}; choose from {NAMED_GAMES}")


def _draw_int(rng: np.random.Generator, value, what: str) -> int:
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, dict) and {"min", "max"} <= set(value):
        return int(rng.integers(int(value["min"]), int(value["max"]) + 1))
    raise StructureError(f"{what}: expected an int or {{'min':..,'max':..}}, got {value!r}")


def _resolve_shape(rng: np.random.Generator, params: dict) -> tuple[int, ...]:
    players = _draw_int(rng, params.get("players", 2), "players")
    actions = params.get("actions", 2)
    if isinstance(actions, (list, tuple)):
        counts = tuple(int(a) for a in actions)
        if len(counts) != players:
            raise StructureError(f"actions list {counts} does not match players={players}")
        return counts
    return tuple(_draw_int(rng, actions, "actions") for _ in range(players))


def generate_game(kind: str, params: dict, seed: int):
    """Seeded instance generator.

    Payoffs are i.i.d. uniform on [-1, 1] rounded to 1e-6.  Integer params
    may be given as {'min': lo, 'max': hi} to draw per seed; transition rows
    are Dirichlet(1) draws and are not rounded, so they sum to one exactly.
    """
    params = dict(params or {})
    rng = substream(int(seed))
    if kind == "normal_form":
        counts = _resolve_shape(rng, params)
        shape = (len(counts),) + counts
        payoffs = np.round(rng.uniform(-1.0, 1.0, size=shape), PAYOFF_DECIMALS)
        return NormalFormGame(counts, payoffs)
    if kind in ("stochastic", "kstep"):
        counts = _resolve_shape(rng, params)
        n = len(counts)
        states = _draw_int(rng, params.get("states", 2), "states")
        a = int(np.prod(counts))
        payoffs = np.round(rng.uniform(-1.0, 1.0, size=(n, states, a)), PAYOFF_DECIMALS)
        transition = rng.dirichlet(np.ones(states), size=(states, a))
        gamma = params.get("gamma", 0.8)
        if isinstance(gamma, (list, tuple)):
            discounts = tuple(float(g) for g in gamma)
        else:
            discounts = (float(gamma),) * n
        game = markov.StochasticGame(counts, states, transition, payoffs, discounts)
        if kind == "stochastic":
            return game
        return markov.KStepGame(game, _draw_int(rng, params.get("k", 1), "k"))
    raise StructureError(f"unknown game kind {kind!r}")


def parse_start_profile(spec: str, game: NormalFormGame) -> MixedProfile:
    """``pure:a_0,...,a_{n-1}``, ``uniform``, or a JSON file of nested arrays."""
    if spec == "uniform":
        return MixedProfile.uniform(game)
    if spec.startswith("pure:"):
        actions = [int(tok) for tok in spec[len("pure:"):].split(",") if tok != ""]
        return MixedProfile.pure(game, actions)
    from .jsonio import read_json

    return MixedProfile.from_json(read_json(spec))


def parse_partition(spec: str, num_players: int) -> GroupPartition:
    if spec == "singletons":
        return GroupPartition.singletons(num_players)
    if spec == "single":
        return GroupPartition.single_group(num_players)
    import json

    try:
        groups = json.loads(spec)
    except json.JSONDecodeError as exc:
        raise StructureError(f"partition must be 'singletons', 'single', or JSON: {exc}") from exc
    return GroupPartition.from_json(groups)


@dataclass(frozen=True)
class ExperimentConfig:
    """One reproducible study: a kind, instance params, and a seed list."""

    kind: str
    seeds: tuple[int, ...]
    epsilon: float = 1e-6
    params: dict = field(default_factory=dict)
    max_steps: int = dynamics.DEFAULT_MAX_STEPS
    grid_step: float = dynamics.DEFAULT_GRID_STEP
    budget: int = dynamics.DEFAULT_BUDGET
    tol: float = solvers.DEFAULT_TOL
    out: str | None = None

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise StructureError(f"unknown experiment kind {self.kind!r}")
        if not self.seeds:
            raise StructureError("seeds must be nonempty")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "seeds": list(self.seeds),
            "epsilon": float(self.epsilon),
            "params": self.params,
            "max_steps": self.max_steps,
            "grid_step": self.grid_step,
            "budget": self.budget,
            "tol": self.tol,
            "out": self.out,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "ExperimentConfig":
        known = {
            "kind", "seeds", "epsilon", "params", "max_steps", "grid_step",
            "budget", "tol", "out",
        }
        unknown = set(obj) - known
        if unknown:
            raise StructureError(f"unknown config keys: {sorted(unknown)}")
        if "kind" not in obj or "seeds" not in obj:
            raise StructureError("experiment config needs at least 'kind' and 'seeds'")
        return cls(**obj)


@dataclass(frozen=True)
class RunReport:
    """Per-seed records plus the aggregate; timings live only in the CSV."""

    kind: str
    records: tuple[dict, ...]
    aggregate: dict
    config: ExperimentConfig

    def to_json_dict(self) -> dict:
        records = [{k: v for k, v in rec.items() if k != "millis"} for rec in self.records]
        return {
            "kind": self.kind,
            "config": self.config.to_json_dict(),
            "records": records,
            "aggregate": self.aggregate,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for rec in self.records:
            writer.writerow([
                rec["seed"],
                self.kind,
                rec.get("steps", 0),
                f"{rec.get('residual', 0.0):.9e}",
                int(rec.get("success", False)),
                f"{rec.get('millis', 0.0):.3f}",
            ])
        return buf.getvalue()


def _quantiles(values: list[int]) -> dict:
    if not values:
        return {}
    arr = np.asarray(sorted(values), dtype=np.float64)
    return {
        "min": float(arr[0]),
        "p25": float(np.percentile(arr, 25)),
        "p50": float(np.percentile(arr, 50)),
        "p75": float(np.percentile(arr, 75)),
        "max": float(arr[-1]),
    }


def _run_normal_form_path(config: ExperimentConfig, seed: int) -> dict:
    game = generate_game("normal_form", config.params, seed)
    partition = parse_partition(config.params.get("partition", "singletons"), game.num_players)
    sat_config = SatisficingConfig(config.epsilon, partition)
    start = parse_start_profile(config.params.get("start", "uniform"), game)
    t0 = time.perf_counter()
    path = dynamics.construct_path(
        game,
        start,
        sat_config,
        max_steps=config.max_steps,
        seed=seed,
        probe_grid_step=config.grid_step,
        probe_budget=config.budget,
    )
    millis = (time.perf_counter() - t0) * 1e3
    return {
        "seed": int(seed),
        "steps": path.step_count,
        "residual": equilibrium_residual(game, path.profiles[-1]),
        "success": bool(path.terminal_is_equilibrium),
        "termination": path.termination,
        "group_counts": path.group_counts(),
        "path_valid": dynamics.validate_path(game, path),
        "millis": millis,
    }


def _run_stochastic_path(config: ExperimentConfig, seed: int) -> dict:
    game = generate_game("stochastic", config.params, seed)
    pi0 = markov.StationaryPolicyProfile.uniform(game)
    t0 = time.perf_counter()
    path = markov.construct_path_stochastic(
        game, pi0, config.epsilon, max_steps=config.max_steps, seed=seed
    )
    millis = (time.perf_counter() - t0) * 1e3
    vi_tol = min(markov.DEFAULT_VI_TOL, config.epsilon / 8.0) if config.epsilon > 0 else 1e-9
    return {
        "seed": int(seed),
        "steps": path.step_count,
        "residual": markov.markov_residual(game, path.policies[-1], vi_tol),
        "success": bool(path.terminal_is_equilibrium),
        "termination": path.termination,
        "group_counts": path.group_counts(),
        "path_valid": markov.validate_markov_path(game, path, vi_tol),
        "millis": millis,
    }


def _run_topology_check(config: ExperimentConfig, seed: int) -> dict:
    game = generate_game("normal_form", config.params, seed)
    partition = parse_partition(config.params.get("partition", "singletons"), game.num_players)
    sat_config = SatisficingConfig(config.epsilon, partition)
    rng = substream(seed, 1)
    profile = MixedProfile(tuple(rng.dirichlet(np.ones(m)) for m in game.action_counts))
    if seed % 2 == 1:
        # odd seeds start with player 0 exactly best-responding, so the
        # preservation question is non-vacuous
        from .games import action_values

        q = action_values(game, profile)[0]
        vec = np.zeros(game.action_counts[0])
        vec[int(np.argmax(q))] = 1.0
        profile = profile.replace(0, vec)
    t0 = time.perf_counter()
    lm = dynamics.is_local_minimum(game, profile, sat_config, config.grid_step, config.budget, seed)
    pv = dynamics.check_preservation(game, profile, sat_config, config.grid_step, config.budget, seed)
    millis = (time.perf_counter() - t0) * 1e3
    # certified minimum must preserve; a violation must come with a descent
    consistent = pv.preserved or not lm.certified
    return {
        "seed": int(seed),
        "steps": 0,
        "residual": 0.0,
        "certified_local_min": bool(lm.certified),
        "preserved": bool(pv.preserved),
        "success": bool(consistent),
        "millis": millis,
    }


def _run_kstep_roundtrip(config: ExperimentConfig, seed: int) -> dict:
    kgame = generate_game("kstep", config.params, seed)
    compiled = markov.compile_k_step(kgame)
    steps = int(config.params.get("sim_steps", 100_000))
    burn_in = int(config.params.get("burn_in", 100))
    stride = int(config.params.get("thin_stride", 10))
    t0 = time.perf_counter()
    base_pi = markov.StationaryPolicyProfile.uniform(kgame.base)
    compiled_pi = markov.StationaryPolicyProfile.uniform(compiled.game)
    base_states = simulate_states(kgame.base, base_pi, steps, substream(seed, 2))
    comp_states = simulate_states(compiled.game, compiled_pi, steps, substream(seed, 3))
    hist = compiled.game.joint_action_count ** kgame.k
    comp_projected = comp_states // hist
    counts_base = np.bincount(base_states[burn_in::stride], minlength=kgame.base.num_states)
    counts_comp = np.bincount(comp_projected[burn_in::stride], minlength=kgame.base.num_states)
    p_value = _two_sample_chi_square(counts_base, counts_comp)
    millis = (time.perf_counter() - t0) * 1e3
    return {
        "seed": int(seed),
        "steps": steps,
        "residual": float(p_value),
        "p_value": float(p_value),
        "success": bool(p_value >= 0.01),
        "millis": millis,
    }


def simulate_states(game: markov.StochasticGame, pi, steps: int, rng: np.random.Generator, x0: int = 0):
    """State trajectory under a stationary profile; inverse-CDF sampling."""
    action_cdf = np.cumsum(markov.joint_state_weights(game, pi), axis=1)
    next_cdf = np.cumsum(game.transition, axis=2)
    states = np.empty(steps, dtype=np.int64)
    x = int(x0)
    uniforms = rng.random((steps, 2))
    for t in range(steps):
        states[t] = x
        a = int(np.searchsorted(action_cdf[x], uniforms[t, 0], side="right"))
        a = min(a, game.joint_action_count - 1)
        y = int(np.searchsorted(next_cdf[x, a], uniforms[t, 1], side="right"))
        x = min(y, game.num_states - 1)
    return states


def _two_sample_chi_square(counts_a: np.ndarray, counts_b: np.ndarray) -> float:
    """Homogeneity test for two count vectors; p-value, pooling empty cells."""
    keep = (counts_a + counts_b) > 0
    table = np.stack([counts_a[keep], counts_b[keep]])
    if table.shape[1] < 2:
        return 1.0
    _, p, _, _ = stats.chi2_contingency(table)
    return float(p)


_RUNNERS = {
    "normal_form_path": _run_normal_form_path,
    "stochastic_path": _run_stochastic_path,
    "topology_check": _run_topology_check,
    "kstep_roundtrip": _run_kstep_roundtrip,
}


def run_experiment(config: ExperimentConfig) -> RunReport:
    """Execute the study over all seeds and assemble the deterministic report."""
    runner = _RUNNERS[config.kind]
    records = []
    for seed in sorted(config.seeds):
        try:
            records.append(runner(config, seed))
        except Exception as exc:
            raise type(exc)(f"seed {seed}: {exc}") from exc
    successes = [r for r in records if r.get("success")]
    aggregate = {
        "num_seeds": len(records),
        "success_rate": len(successes) / len(records),
    }
    if config.kind in ("normal_form_path", "stochastic_path"):
        aggregate["length_quantiles"] = _quantiles([r["steps"] for r in records])
        aggregate["all_paths_valid"] = all(r["path_valid"] for r in records)
    if config.kind == "topology_check":
        aggregate["discrepancies"] = sum(1 for r in records if not r["success"])
    if config.kind == "kstep_roundtrip":
        aggregate["min_p_value"] = min(r["p_value"] for r in records)
        aggregate["rejections_at_0.01"] = sum(1 for r in records if not r["success"])
    report = RunReport(config.kind, tuple(records), aggregate, config)
    if config.out:
        write_json(config.out, report.to_json_dict())
        csv_path = str(config.out)
        csv_path = csv_path[:-5] + ".csv" if csv_path.endswith(".json") else csv_path + ".csv"
        with open(csv_path, "w", encoding="utf-8") as fh:
            fh.write(report.to_csv())
    return report
