"""Grouped satisficing-path machinery for finite and finite-state Markov games."""

from .dynamics import (
    LocalMinimumCheck,
    PathRecord,
    PreservationCheck,
    SuccessorSpec,
    check_preservation,
    construct_path,
    is_local_minimum,
    path_minimum_index,
    sample_successors,
    step_is_legal,
    successor_spec,
    validate_path,
)
from .errors import BudgetError, SatpathError, SolverFailure, StructureError
from .games import (
    GroupPartition,
    MixedProfile,
    NormalFormGame,
    SatisficingConfig,
    SubgameRestriction,
    best_response_value,
    equilibrium_residual,
    expected_payoff,
    is_eps_best_response,
    is_eps_equilibrium,
    restrict_subgame,
    satisfied_groups,
    satisfied_players,
)
from .harness import ExperimentConfig, RunReport, generate_game, named_game, run_experiment
from .markov import (
    CompiledKStep,
    KStepGame,
    MarkovPathRecord,
    StationaryPolicyProfile,
    StochasticGame,
    apply_value_operator,
    compile_k_step,
    construct_path_stochastic,
    evaluate_policy,
    freeze_players_stochastic,
    induced_mdp_best_value,
    markov_solve,
    stationary_satisfied_players,
)
from .solvers import (
    SolverOutcome,
    solve,
    solve_grid,
    solve_iterative,
    solve_one_player,
    solve_two_player,
)

__version__ = "0.1.0"

__all__ = [
    "BudgetError",
    "CompiledKStep",
    "ExperimentConfig",
    "GroupPartition",
    "KStepGame",
    "LocalMinimumCheck",
    "MarkovPathRecord",
    "MixedProfile",
    "NormalFormGame",
    "PathRecord",
    "PreservationCheck",
    "RunReport",
    "SatisficingConfig",
    "SatpathError",
    "SolverFailure",
    "SolverOutcome",
    "StationaryPolicyProfile",
    "StochasticGame",
    "StructureError",
    "SubgameRestriction",
    "SuccessorSpec",
    "apply_value_operator",
    "best_response_value",
    "check_preservation",
    "compile_k_step",
    "construct_path",
    "construct_path_stochastic",
    "equilibrium_residual",
    "evaluate_policy",
    "expected_payoff",
    "freeze_players_stochastic",
    "generate_game",
    "induced_mdp_best_value",
    "is_eps_best_response",
    "is_eps_equilibrium",
    "is_local_minimum",
    "markov_solve",
    "named_game",
    "path_minimum_index",
    "restrict_subgame",
    "run_experiment",
    "sample_successors",
    "satisfied_groups",
    "satisfied_players",
    "solve",
    "solve_grid",
    "solve_iterative",
    "solve_one_player",
    "solve_two_player",
    "stationary_satisfied_players",
    "step_is_legal",
    "successor_spec",
    "validate_path",
]
