"""Command-line interface.

Exit codes: 0 success, 1 domain error (bad game file, solver failure,
budget), 2 usage error.
"""

from __future__ import annotations

import argparse
import sys

from . import dynamics, harness, markov, solvers
from .errors import SatpathError, StructureError
from .games import NormalFormGame, SatisficingConfig, equilibrium_residual
from .jsonio import canonical_dumps, read_json, write_json
from .markov import KStepGame, StationaryPolicyProfile, StochasticGame


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="root seed for all randomness")
    common.add_argument("--epsilon", type=float, default=1e-6, help="satisficing tolerance")
    common.add_argument("--grid-step", type=float, default=dynamics.DEFAULT_GRID_STEP)
    common.add_argument("--budget", type=int, default=dynamics.DEFAULT_BUDGET)
    common.add_argument("--max-steps", type=int, default=dynamics.DEFAULT_MAX_STEPS)
    common.add_argument("--tol", type=float, default=solvers.DEFAULT_TOL)
    common.add_argument("--out", default=None, help="write JSON here instead of stdout")
    common.add_argument("--format", choices=["json", "csv"], default="json")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="satpath",
        description="Satisficing-path construction and equilibrium checking for finite games.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", parents=[common], help="generate a game instance")
    gen.add_argument("--named", choices=harness.NAMED_GAMES)
    gen.add_argument("--kind", choices=["normal_form", "stochastic", "kstep"], default="normal_form")
    gen.add_argument("--players", type=int, default=2)
    gen.add_argument("--actions", default="2", help="per-player count, e.g. '2' or '2,3'")
    gen.add_argument("--states", type=int, default=2)
    gen.add_argument("--k", type=int, default=1)
    gen.add_argument("--gamma", type=float, default=0.8)

    path = sub.add_parser("path", parents=[common], help="construct a satisficing path")
    path.add_argument("--game", required=True)
    path.add_argument("--start", default="uniform", help="'uniform', 'pure:a0,a1,...', or a JSON file")
    path.add_argument("--partition", default="singletons", help="'singletons', 'single', or JSON groups")

    solve = sub.add_parser("solve", parents=[common], help="solve for an equilibrium")
    solve.add_argument("--game", required=True)

    ev = sub.add_parser("eval", parents=[common], help="evaluate a stationary policy profile")
    ev.add_argument("--game", required=True)
    ev.add_argument("--policy", default="uniform", help="'uniform' or a JSON file")
    ev.add_argument("--player", type=int, default=None)

    ck = sub.add_parser("compile-kstep", parents=[common], help="compile a k-step game to stationary")
    ck.add_argument("--game", required=True)

    ct = sub.add_parser("check-topology", parents=[common], help="local-minimum and preservation probes")
    ct.add_argument("--game", required=True)
    ct.add_argument("--profile", default="uniform")
    ct.add_argument("--partition", default="singletons")

    rp = sub.add_parser("report", parents=[common], help="run an experiment config")
    rp.add_argument("--config", required=True)
    return parser


def load_game_file(path: str):
    obj = read_json(path)
    if not isinstance(obj, dict):
        raise StructureError(f"{path}: top level must be a JSON object with a game schema")
    if "k" in obj:
        return KStepGame.from_json_dict(obj)
    if "states" in obj:
        return StochasticGame.from_json_dict(obj)
    return NormalFormGame.from_json_dict(obj)


def _emit(obj: dict, out: str | None) -> None:
    if out:
        write_json(out, obj)
    else:
        sys.stdout.write(canonical_dumps(obj))


def _cmd_gen(args) -> int:
    if args.named:
        game = harness.named_game(args.named, players=args.players, actions=int(str(args.actions).split(",")[0]))
    else:
        actions = [int(tok) for tok in str(args.actions).split(",")]
        params = {"players": args.players, "actions": actions if len(actions) > 1 else actions[0]}
        if args.kind in ("stochastic", "kstep"):
            params["states"] = args.states
            params["gamma"] = args.gamma
        if args.kind == "kstep":
            params["k"] = args.k
        game = harness.generate_game(args.kind, params, args.seed)
    _emit(game.to_json_dict(), args.out)
    return 0


def _cmd_path(args) -> int:
    game = load_game_file(args.game)
    if isinstance(game, KStepGame):
        raise StructureError("run compile-kstep first; paths are built on stationary games")
    if isinstance(game, StochasticGame):
        if args.start == "uniform":
            pi0 = StationaryPolicyProfile.uniform(game)
        else:
            pi0 = StationaryPolicyProfile.from_json(read_json(args.start))
        record = markov.construct_path_stochastic(
            game, pi0, args.epsilon, max_steps=args.max_steps, seed=args.seed
        )
        _emit(record.to_json_dict(), args.out)
        return 0
    partition = harness.parse_partition(args.partition, game.num_players)
    config = SatisficingConfig(args.epsilon, partition)
    start = harness.parse_start_profile(args.start, game)
    record = dynamics.construct_path(
        game,
        start,
        config,
        max_steps=args.max_steps,
        seed=args.seed,
        probe_grid_step=args.grid_step,
        probe_budget=args.budget,
    )
    _emit(record.to_json_dict(), args.out)
    return 0


def _cmd_solve(args) -> int:
    game = load_game_file(args.game)
    if isinstance(game, KStepGame):
        raise StructureError("run compile-kstep first; the solver works on stationary games")
    if isinstance(game, StochasticGame):
        outcome = markov.markov_solve(game, args.tol, args.seed)
    else:
        outcome = solvers.solve(game, args.tol, args.seed)
    _emit(outcome.to_json_dict(), args.out)
    return 0


def _cmd_eval(args) -> int:
    game = load_game_file(args.game)
    if not isinstance(game, StochasticGame):
        raise StructureError("eval needs a stochastic game (JSON with a 'states' field)")
    if args.policy == "uniform":
        pi = StationaryPolicyProfile.uniform(game)
    else:
        pi = StationaryPolicyProfile.from_json(read_json(args.policy))
    players = range(game.num_players) if args.player is None else [args.player]
    values = {
        str(i): [float(v) for v in markov.evaluate_policy(game, pi, i, args.tol)]
        for i in players
    }
    _emit({"values": values, "tol": args.tol}, args.out)
    return 0


def _cmd_compile_kstep(args) -> int:
    game = load_game_file(args.game)
    if not isinstance(game, KStepGame):
        raise StructureError("compile-kstep needs a k-step game (JSON with a 'k' field)")
    compiled = markov.compile_k_step(game)
    _emit(compiled.to_json_dict(), args.out)
    return 0


def _cmd_check_topology(args) -> int:
    game = load_game_file(args.game)
    if not isinstance(game, NormalFormGame):
        raise StructureError("check-topology works on normal-form games")
    partition = harness.parse_partition(args.partition, game.num_players)
    config = SatisficingConfig(args.epsilon, partition)
    profile = harness.parse_start_profile(args.profile, game)
    lm = dynamics.is_local_minimum(game, profile, config, args.grid_step, args.budget, args.seed)
    pv = dynamics.check_preservation(game, profile, config, args.grid_step, args.budget, args.seed)
    result = {
        "certified_local_min": lm.certified,
        "start_group_count": lm.start_count,
        "preserved": pv.preserved,
        "consistent": pv.preserved or not lm.certified,
        "counterexample": None if lm.counterexample is None else lm.counterexample.to_json(),
        "witness": None if pv.witness is None else pv.witness.to_json(),
        "witness_group": pv.witness_group,
        "residual": equilibrium_residual(game, profile),
    }
    _emit(result, args.out)
    return 0


def _cmd_report(args) -> int:
    obj = read_json(args.config)
    if not isinstance(obj, dict):
        raise StructureError(f"{args.config}: config must be a JSON object")
    if args.out:
        obj = dict(obj, out=args.out)
    config = harness.ExperimentConfig.from_json_dict(obj)
    report = harness.run_experiment(config)
    if args.format == "csv":
        sys.stdout.write(report.to_csv())
    else:
        sys.stdout.write(canonical_dumps(report.to_json_dict()))
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "path": _cmd_path,
    "solve": _cmd_solve,
    "eval": _cmd_eval,
    "compile-kstep": _cmd_compile_kstep,
    "check-topology": _cmd_check_topology,
    "report": _cmd_report,
}


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code
        return int(code) if code is not None else 0
    try:
        return _COMMANDS[args.command](args)
    except SatpathError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
