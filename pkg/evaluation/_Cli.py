import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from dcm import (
    Grouping,
    estimate,
    expected_accuracy,
    k_fold_cv,
    predict_accuracy,
    read_model,
    read_observations,
    read_spec,
    synthesize_observations,
    write_model,
    write_observations,
)
from engine import audit_log, read_events, read_run_info, read_scenario, replicate, run, write_run
from network import read_network

from ._Metrics import ARRIVE_STATION, DEFAULT_BIN_WIDTH, EXIT, arrivals, compare_replications
from ._Report import config_hash, format_report, read_series, series_frame, write_report, write_series

logger = logging.getLogger(__name__)

OUT_ENV = "CROWDSIM_OUT"


class UsageError(ValueError):
    """Bad command-line usage."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _out_dir(args) -> Path:
    return Path(args.out or os.environ.get(OUT_ENV, "out"))


def _configure_logging(args) -> None:
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def _load_observations(args):
    spec = read_spec(args.spec) if args.spec else None
    return read_observations(args.observations, spec)


def _estimation_table(result, accuracy: float) -> str:
    lines = [f"{'parameter':<12}{'estimate':>12}{'std.err':>12}{'t':>10}"]
    names = result.spec.parameter_names
    theta = result.params.free(result.spec)
    for name, value, se, t in zip(names, theta, result.standard_errors, result.t_statistics):
        lines.append(f"{name:<12}{value:>12.4f}{se:>12.4f}{t:>10.2f}")
    lines.append(f"LL {result.log_likelihood:.3f}  null LL {result.null_log_likelihood:.3f}  rho^2 {result.rho_squared:.3f}")
    lines.append(f"N {result.n_observations}  iterations {result.iterations}  converged {result.converged}")
    lines.append(f"In-sample accuracy {accuracy:.3f}")
    return "\n".join(lines)


def _cmd_estimate(args) -> int:
    data = _load_observations(args)
    result = estimate(data.spec, data)
    print(_estimation_table(result, predict_accuracy(result.model, data)))
    if args.folds and args.folds >= 2:
        cv = k_fold_cv(data.spec, data, args.folds, Grouping(args.grouping), args.seed)
        print(f"{args.folds}-fold accuracy: mean {cv.mean_accuracy:.3f}, pooled {cv.pooled_accuracy:.3f}")
    write_model(args.model or _out_dir(args) / "model.xml", result.model, result)
    return 0


def _cmd_cv(args) -> int:
    data = _load_observations(args)
    cv = k_fold_cv(data.spec, data, args.folds, Grouping(args.grouping), args.seed)
    for fold in cv.folds:
        print(f"fold {fold.fold}: train {fold.n_train}, test {fold.n_test}, accuracy {fold.accuracy:.3f}")
    print(f"mean accuracy {cv.mean_accuracy:.3f}  pooled accuracy {cv.pooled_accuracy:.3f}  seed {cv.seed}")
    return 0


def _scenario(args, model=None):
    network = read_network(args.network) if getattr(args, "network", None) else None
    if model is None and getattr(args, "model", None) and Path(args.model).is_file():
        model = read_model(args.model)
    return read_scenario(
        args.scenario,
        network=network,
        model=model,
        policy=getattr(args, "policy", None),
        replications=getattr(args, "replications", None),
        seed=args.seed,
    )


def _provenance(scenario, *extra) -> str:
    return config_hash(*scenario.sources, scenario.policy.value, scenario.replications, scenario.base_seed, *extra)


def _simulate(scenario, args) -> tuple[list, Path]:
    outputs = replicate(scenario, workers=args.workers, audit=getattr(args, "audit", False))
    directory = _out_dir(args) / f"{scenario.name}_{scenario.policy.value.lower()}"
    for output in outputs:
        write_run(directory, output)
    truncated = sum(o.truncated for o in outputs)
    elapsed = sum(o.elapsed_s for o in outputs)
    print(f"{len(outputs)} replications of {scenario.name} ({scenario.policy.value}) written to {directory}, {elapsed:.1f} s of compute")
    if truncated:
        print(f"{truncated} replications were TRUNCATED")
    return outputs, directory


def _cmd_simulate(args) -> int:
    _simulate(_scenario(args), args)
    return 0


def _event_files(directory: Path) -> list[Path]:
    files = sorted(directory.glob("events_*.csv"), key=lambda p: int(p.stem.split("_")[-1]))
    if not files:
        raise UsageError(f"No events_*.csv files in {directory}")
    return files


def _evaluate(logs, seeds, args, scenario_name: str, policy: str, junctions, digest: str, directory: Path, alternatives=None, elapsed=None) -> int:
    kind = ARRIVE_STATION if any((log["event"] == ARRIVE_STATION).any() for log in logs) else EXIT
    reference = read_series(args.reference)
    report = compare_replications(
        reference,
        logs,
        seeds,
        cumulative=args.cumulative,
        junctions=junctions,
        include_scripted=args.include_scripted,
        kind=kind,
        scenario=scenario_name,
        policy=policy,
        config_hash=digest,
        bin_width=args.bin_width,
        alternatives=alternatives,
        elapsed=elapsed,
    )
    simulated = [arrivals(log, args.bin_width, kind) for log in logs]
    write_report(directory / "metrics.xml", report)
    write_series(directory / "series.csv", series_frame(reference, simulated, seeds))
    print(format_report(report))
    return 0


def _junction_alternatives(network) -> dict[str, list[str]]:
    return {node: list(junction.names) for node, junction in network.junctions.items()}


def _recorded_elapsed(directory: Path, seeds: list[int]) -> Optional[list[float]]:
    files = [directory / f"run_{seed}.xml" for seed in seeds]
    if not all(f.is_file() for f in files):
        return None
    return [read_run_info(f)["elapsed_s"] for f in files]


def _cmd_evaluate(args) -> int:
    directory = Path(args.runs) if args.runs else _out_dir(args)
    files = _event_files(directory)
    logs = [read_events(f) for f in files]
    seeds = [int(f.stem.split("_")[-1]) for f in files]
    alternatives, name, policy = None, directory.name, ""
    if args.scenario:
        scenario = _scenario(args)
        alternatives = _junction_alternatives(scenario.network)
        junctions, name, policy = sorted(scenario.network.junctions), scenario.name, scenario.policy.value
    else:
        junctions = sorted({str(j) for log in logs for j in log.loc[log["event"] == "DECIDE", "junction"]})
    digest = config_hash(args.reference, *files)
    return _evaluate(
        logs, seeds, args, name, policy, junctions, digest, directory, alternatives, _recorded_elapsed(directory, seeds)
    )


def _cmd_pipeline(args) -> int:
    data = _load_observations(args)
    result = estimate(data.spec, data)
    print(_estimation_table(result, predict_accuracy(result.model, data)))
    write_model(_out_dir(args) / "model.xml", result.model, result)
    scenario = _scenario(args, model=result.model)
    outputs, directory = _simulate(scenario, args)
    digest = _provenance(scenario, args.observations, args.reference)
    return _evaluate(
        [o.events for o in outputs],
        [o.seed for o in outputs],
        args,
        scenario.name,
        scenario.policy.value,
        sorted(scenario.network.junctions),
        digest,
        directory,
        _junction_alternatives(scenario.network),
        [o.elapsed_s for o in outputs],
    )


def _cmd_synth(args) -> int:
    out = _out_dir(args)
    if args.kind == "observations":
        if not args.model:
            raise UsageError("synth observations needs --model")
        model = read_model(args.model)
        rng = np.random.Generator(np.random.SFC64(np.random.SeedSequence(args.seed)))
        data = synthesize_observations(model, args.n, rng, per_individual=args.per_individual)
        write_observations(out / "observations.csv", data)
        print(f"{len(data)} observations, expected accuracy {expected_accuracy(model, data):.3f}")
        return 0
    if not args.scenario:
        raise UsageError("synth reference needs --scenario")
    args.policy = "dcm"
    scenario = _scenario(args)
    output = run(scenario, scenario.base_seed)
    kind = ARRIVE_STATION if scenario.network.station is not None else EXIT
    series = arrivals(output.events, args.bin_width, kind)
    write_series(out / "reference.csv", series.to_frame())
    print(f"Reference series from seed {scenario.base_seed}: {series.total} arrivals in {series.counts.size} bins")
    return 0


def _cmd_audit(args) -> int:
    directory = Path(args.runs) if args.runs else _out_dir(args)
    mode, capacities = None, None
    if args.scenario:
        scenario = _scenario(args)
        mode = scenario.mode
        if scenario.network.station is not None:
            capacities = [t.capacity for t in scenario.network.station.timetable]
    failed = 0
    for path in _event_files(directory):
        problems = audit_log(read_events(path), mode, capacities)
        print(f"{path.name}: {'ok' if not problems else f'{len(problems)} problems'}")
        for problem in problems:
            print(f"  {problem}")
        failed += bool(problems)
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help=f"Output directory (default ${OUT_ENV} or ./out)")
    common.add_argument("--seed", type=int, default=None, help="Base seed")
    common.add_argument("--workers", "--threads", dest="workers", type=int, default=1, help="Processes running replications concurrently")
    common.add_argument("--verbose", action="store_true", help="Debug logging")
    common.add_argument("--quiet", action="store_true", help="Warnings only")

    observations = argparse.ArgumentParser(add_help=False)
    observations.add_argument("--observations", required=True, help="Observation CSV")
    observations.add_argument("--spec", help="Utility spec file (default: inferred from the CSV header)")
    observations.add_argument("--folds", type=int, default=5, help="Folds for cross-validation")
    observations.add_argument("--grouping", choices=[g.value for g in Grouping], default=Grouping.BY_INDIVIDUAL.value)

    simulation = argparse.ArgumentParser(add_help=False)
    simulation.add_argument("--network", help="Network file overriding the scenario's")
    simulation.add_argument("--policy", choices=["sp", "follow", "dcm"], help="Route-choice policy")
    simulation.add_argument("--replications", type=int, help="Number of replications")
    simulation.add_argument("--audit", action="store_true", help="Check safety invariants at every step")

    evaluation = argparse.ArgumentParser(add_help=False)
    evaluation.add_argument("--bin-width", type=float, default=DEFAULT_BIN_WIDTH, help="Arrival bin width in s")
    evaluation.add_argument("--cumulative", action="store_true", help="Compare running totals")
    evaluation.add_argument("--include-scripted", action="store_true", help="Count scripted agents in route shares")

    parser = _Parser(prog="crowdsim", description="Route-choice estimation and crowd simulation")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = commands.add_parser("estimate", parents=[common, observations], help="Fit a choice model")
    p.add_argument("--model", help="Model file to write (default <out>/model.xml)")
    p.set_defaults(func=_cmd_estimate)

    p = commands.add_parser("cv", parents=[common, observations], help="k-fold cross-validation")
    p.set_defaults(func=_cmd_cv)

    p = commands.add_parser("simulate", parents=[common, simulation], help="Run scenario replications")
    p.add_argument("--scenario", required=True)
    p.add_argument("--model", help="Model file for the DCM policy")
    p.set_defaults(func=_cmd_simulate)

    p = commands.add_parser("evaluate", parents=[common, evaluation], help="Compare runs with a reference")
    p.add_argument("--runs", help="Directory with events_<seed>.csv (default --out)")
    p.add_argument("--reference", required=True, help="Reference arrival series CSV")
    p.add_argument("--scenario", help="Scenario file for junctions and provenance")
    p.add_argument("--model")
    p.set_defaults(func=_cmd_evaluate)

    p = commands.add_parser("pipeline", parents=[common, observations, simulation, evaluation], help="estimate, simulate, evaluate")
    p.add_argument("--scenario", required=True)
    p.add_argument("--reference", required=True)
    p.set_defaults(func=_cmd_pipeline, policy="dcm")

    p = commands.add_parser("synth", parents=[common], help="Synthetic observations or a truth-run reference")
    p.add_argument("kind", choices=["observations", "reference"])
    p.add_argument("--model", help="Model file")
    p.add_argument("--scenario", help="Scenario file (reference)")
    p.add_argument("--network")
    p.add_argument("--n", type=int, default=10000, help="Number of observations")
    p.add_argument("--per-individual", type=int, default=1, help="Observations per individual")
    p.add_argument("--bin-width", type=float, default=DEFAULT_BIN_WIDTH)
    p.set_defaults(func=_cmd_synth)

    p = commands.add_parser("audit", parents=[common], help="Check event logs for run invariants")
    p.add_argument("--runs", help="Directory with events_<seed>.csv (default --out)")
    p.add_argument("--scenario")
    p.set_defaults(func=_cmd_audit)
    return parser


def cli(argv: Optional[Sequence[str]] = None) -> int:
    """Run a subcommand. Returns 0 on success, 1 on validation errors, 2 on other failures."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"crowdsim: error: {e}", file=sys.stderr)
        return 1
    except SystemExit as e:
        return int(e.code or 0)
    _configure_logging(args)
    if args.seed is None and args.command in ("estimate", "cv", "synth"):
        args.seed = 0
    try:
        return args.func(args)
    except ValueError as e:
        logger.error("%s", e)
        print(f"crowdsim: error: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        logger.exception("%s failed", args.command)
        print(f"crowdsim: {args.command} failed: {e}", file=sys.stderr)
        return 2
