"""
Command-line entry point for the JOFC manifold-matching toolkit.

Subcommands:
    embed     embed an omnibus problem described by a run configuration file
    oos       embed one new object out of sample into a saved embedding
    simulate  write a synthetic matched or anomaly problem to disk
    bench     time dense JOFC against fJOFC over a grid of problem sizes
    eval      score a saved embedding against ground-truth labels

Exit codes: 0 on success, 1 on invalid input, 2 on numerical failure.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
from pydantic import ValidationError

from bench import BenchGrid, bench
from config import Config, RunConfig, WeightSettings, config
from data_io import (
    load_dissimilarities,
    load_embedding,
    load_oos_deltas,
    load_vector,
    save_embedding,
    save_problem,
    save_vector,
)
from embed_core import SolveOptions, fjofc_embed, jofc_embed_reference
from errors import InputValidationError, JofcError
from metrics import MetricsReport, clustering_ari, confusion_ratio
from oos import OosOptions, oos_embed
from simulation import generate_anomaly, generate_matched
from weights import GeneralSymmetricWeights, ProductWeights, UniformWeights, WeightSpec

logger = logging.getLogger(__name__)


class _ArgumentParser(argparse.ArgumentParser):
    """Argument parser that reports usage errors as validation errors (exit code 1)."""

    def error(self, message: str):
        raise InputValidationError(f"{self.prog}: {message}")


def weight_spec_from_settings(settings: WeightSettings) -> WeightSpec:
    """Turn the WEIGHT_* keys of a run configuration into a weight family."""
    if settings.kind == "general":
        matrix = np.loadtxt(settings.matrix_path, delimiter=",", ndmin=2)
        return GeneralSymmetricWeights(matrix=matrix)
    if settings.kind == "product":
        return ProductWeights(weights=tuple(settings.within_weights), c=settings.fidelity_scale)
    return UniformWeights(w=settings.w)


def _report_path(output: Path) -> Path:
    return output.with_name(output.stem + ".report.json")


def _write_json(path: Optional[Path], payload: str) -> None:
    if path is None:
        print(payload)
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(payload + "\n", encoding="utf-8")
    logger.info(f"Report written to {path}")


def cmd_embed(args: argparse.Namespace) -> int:
    run = RunConfig.from_file(
        args.config,
        {
            "algorithm": args.algorithm,
            "w": args.w,
            "d": args.d,
            "eps": args.eps,
            "seed": args.seed,
            "parallel": True if args.parallel else None,
            "output": args.out,
        },
    )

    anomalies = np.array([], dtype=int)
    if run.inputs is not None:
        problem = load_dissimilarities(run.inputs)
    elif run.generator.setting == "anomaly":
        g = run.generator
        problem, anomalies = generate_anomaly(g.n, g.m, g.n_anomalies, g.dim, run.seed)
    else:
        g = run.generator
        problem, _ = generate_matched(g.n, g.m, g.dim, run.seed)

    spec = weight_spec_from_settings(run.weights)
    options = SolveOptions(
        d=run.d,
        eps=run.eps,
        max_iterations=run.max_iterations,
        init=run.init,
        parallel=run.parallel,
        normalize=run.normalize,
        keep_trace=run.keep_trace,
    )
    solver = fjofc_embed if run.algorithm == "fjofc" else jofc_embed_reference
    result = solver(problem, spec, options)

    extra = {"seed": run.seed}
    if run.generator is not None:
        extra["ari"] = clustering_ari(result.config, anomalies=anomalies, seed=run.seed)
        if anomalies.size and problem.m > 1:
            extra["confusion_ratio"] = confusion_ratio(result.config, anomalies)
    report = MetricsReport.from_result(result, **extra)

    if run.output is not None:
        save_embedding(result.config, run.output)
        logger.info(f"Embedding written to {run.output}")
    _write_json(_report_path(run.output) if run.output else None, report.model_dump_json(indent=2))
    return 0


def cmd_oos(args: argparse.Namespace) -> int:
    X = load_embedding(args.embedding)
    deltas = load_oos_deltas(args.deltas)
    result = oos_embed(
        X, deltas, args.w, OosOptions(eps=args.eps, max_iterations=args.max_iterations), seed=args.seed
    )
    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        np.savetxt(args.out, result.y, delimiter=",", fmt="%.17g")
        logger.info(f"Out-of-sample points written to {args.out}")
    else:
        np.savetxt(sys.stdout, result.y, delimiter=",", fmt="%.17g")
    logger.info(f"OOS finished after {result.iterations} iterations ({result.terminated})")
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    if args.setting == "anomaly":
        problem, anomalies = generate_anomaly(args.n, args.m, args.n_anomalies, args.dim, args.seed)
        save_vector(anomalies, args.out / "anomalies.csv")
    else:
        problem, _ = generate_matched(args.n, args.m, args.dim, args.seed)
    paths = save_problem(problem, args.out)
    save_vector(np.arange(problem.n), args.out / "labels.csv")
    logger.info(f"Wrote {len(paths)} modalities of {problem.n} objects to {args.out}")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    grid = BenchGrid.from_file(args.grid)
    if args.out is not None:
        grid = grid.model_copy(update={"output": args.out})
    table = bench(grid)
    if grid.output is None:
        print(table.to_csv(index=False))
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    X = load_embedding(args.embedding)
    labels = load_vector(args.labels).astype(int)
    anomalies = load_vector(args.anomalies).astype(int) if args.anomalies else np.array([], dtype=int)

    report = MetricsReport(
        ari=clustering_ari(X, labels=labels, anomalies=anomalies, seed=args.seed),
        confusion_ratio=confusion_ratio(X, anomalies) if anomalies.size else None,
        seed=args.seed,
    )
    _write_json(args.out, report.model_dump_json(indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="jofc", description="Joint optimization of fidelity and commensurability")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    embed = sub.add_parser("embed", help="Embed an omnibus problem")
    embed.add_argument("--config", type=Path, required=True, help="KEY=VALUE run configuration file")
    embed.add_argument("--algorithm", choices=["fjofc", "jofc"])
    embed.add_argument("--w", type=float)
    embed.add_argument("--d", type=int)
    embed.add_argument("--eps", type=float)
    embed.add_argument("--seed", type=int)
    embed.add_argument("--parallel", action="store_true")
    embed.add_argument("--out", type=Path, help="Embedding output (.csv or .jofc)")
    embed.set_defaults(handler=cmd_embed)

    oos = sub.add_parser("oos", help="Embed one new object out of sample")
    oos.add_argument("--embedding", type=Path, required=True)
    oos.add_argument("--deltas", type=Path, nargs="+", required=True, help="One dissimilarity vector per modality")
    oos.add_argument("--w", type=float, required=True)
    oos.add_argument("--eps", type=float, default=1e-6)
    oos.add_argument("--max-iterations", type=int, default=1000)
    oos.add_argument("--seed", type=int, default=config.DEFAULT_SEED)
    oos.add_argument("--out", type=Path)
    oos.set_defaults(handler=cmd_oos)

    simulate = sub.add_parser("simulate", help="Write a synthetic problem")
    simulate.add_argument("--setting", choices=["matched", "anomaly"], default="matched")
    simulate.add_argument("--n", type=int, default=400)
    simulate.add_argument("--m", type=int, default=3)
    simulate.add_argument("--dim", type=int, default=2)
    simulate.add_argument("--n-anomalies", type=int, default=10)
    simulate.add_argument("--seed", type=int, default=config.DEFAULT_SEED)
    simulate.add_argument("--out", type=Path, required=True, help="Output directory")
    simulate.set_defaults(handler=cmd_simulate)

    bench_cmd = sub.add_parser("bench", help="Time JOFC against fJOFC")
    bench_cmd.add_argument("--grid", type=Path, required=True, help="KEY=VALUE grid file")
    bench_cmd.add_argument("--out", type=Path, help="CSV output (overrides OUTPUT in the grid file)")
    bench_cmd.set_defaults(handler=cmd_bench)

    evaluate = sub.add_parser("eval", help="Score an embedding")
    evaluate.add_argument("--embedding", type=Path, required=True)
    evaluate.add_argument("--labels", type=Path, required=True, help="One integer label per object")
    evaluate.add_argument("--anomalies", type=Path, help="0-based anomalous object indices")
    evaluate.add_argument("--seed", type=int, default=config.DEFAULT_SEED)
    evaluate.add_argument("--out", type=Path, help="JSON report path (stdout if omitted)")
    evaluate.set_defaults(handler=cmd_eval)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments, run one subcommand and map failures to exit codes.

    Args:
        argv (List[str]): Arguments without the program name; ``sys.argv[1:]`` if omitted

    Returns:
        int: Process exit code
    """
    Config.setup_logging()
    try:
        Config.validate()
        args = build_parser().parse_args(argv)
        return args.handler(args)
    except JofcError as e:
        logger.error(str(e))
        return e.exit_code
    except (ValidationError, ValueError, OSError) as e:
        logger.error(f"Invalid input: {e}")
        return 1
    except (ArithmeticError, np.linalg.LinAlgError) as e:
        logger.error(f"Numerical failure: {e}")
        return 2
    except KeyboardInterrupt:
        logger.info("Interrupted by user")
        return 1


if __name__ == "__main__":
    sys.exit(main())
