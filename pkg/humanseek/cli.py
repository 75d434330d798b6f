"""
Command-line surface: ``humanseek <command> [flags]``.

Every command resolves a RunConfig (flag > ``--config`` YAML > defaults), builds the matching
computation graph and evaluates it with ``force=True`` so the final artifacts under ``--out`` are
always rewritten. Exit codes: 0 ok, 1 failed episodes (``eval --fail-on-failures``), 2 usage or
configuration errors.
"""
import argparse
import sys
from typing import Any
from typing import Callable
from typing import Dict
from typing import List
from typing import Optional

from loguru import logger

from humanseek import pipeline
from humanseek.config import RunConfig
from humanseek.config import resolve_config
from humanseek.exceptions import ConfigError
from humanseek.exceptions import HumanSeekException
from humanseek.search import Method
from humanseek.sim import ApproachMethod
from humanseek.version import __version__

__all__ = ["build_parser", "overrides_from_args", "main"]

EXIT_OK = 0
EXIT_FAILURES = 1
EXIT_USAGE = 2


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="YAML configuration file")
    parser.add_argument("--dump-config", action="store_true", help="print the effective configuration and exit")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", default=None, help="output directory (default: out)")
    parser.add_argument("--jobs", type=int, default=None, help="parallel episodes; -1 uses every core")
    parser.add_argument("--format", choices=("csv", "json"), default=None, help="results table format")
    parser.add_argument("--no-plots", action="store_true", help="skip SVG figures")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true")
    verbosity.add_argument("--quiet", action="store_true")


def _sentence_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--sentences-g0", default=None, help="replay file of gaze-0 approach sentences")
    parser.add_argument("--sentences-g1", default=None, help="replay file of gaze-1 approach sentences")
    parser.add_argument("--captions", default=None, help="scene captions; sentences are generated over HTTP")
    parser.add_argument("--llm-url", default=None, help="sentence endpoint (overrides SOCRATES_LLM_URL)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="humanseek", description="Human search and approach experiments")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", metavar="command")
    commands.required = True

    search = commands.add_parser("search", help="run search episodes over a world or a suite")
    _common(search)
    search.add_argument("--world", default=None)
    search.add_argument("--suite", default=None)
    search.add_argument("--map", default=None, help="replace the map of every world")
    search.add_argument("--embeddings", default=None)
    search.add_argument("--sentences", default=None, help="replay file of prior sentences")
    search.add_argument("--llm-url", default=None)
    search.add_argument("--method", "--methods", dest="methods", default=None, help="comma separated, or 'all'")
    search.add_argument("--max-path", type=float, default=None)
    search.add_argument("--max-false-detections", type=int, default=None)

    train = commands.add_parser("train-reward", help="fit the demonstration reward field")
    _common(train)
    train.add_argument("--demos", default=None)

    distill = commands.add_parser("distill", help="build the text-distilled reward field")
    _common(distill)
    _sentence_flags(distill)

    plan = commands.add_parser("plan", help="plan an approach to the target person")
    _common(plan)
    _sentence_flags(plan)
    plan.add_argument("--world", default=None)
    plan.add_argument("--demos", default=None)
    plan.add_argument("--reward-lfd", default=None)
    plan.add_argument("--reward-kd", default=None)
    plan.add_argument("--method", dest="approach", choices=[m.value for m in ApproachMethod], default=None)
    plan.add_argument("--baseline", action="store_true", help="drive straight at constant speed")
    plan.add_argument("--samples", type=int, default=None)

    evaluate = commands.add_parser("eval", help="metrics of a results table and the theory report")
    _common(evaluate)
    evaluate.add_argument("--results", default=None)
    evaluate.add_argument("--theory", action="store_true")
    evaluate.add_argument("--theory-trials", type=int, default=None)
    evaluate.add_argument("--fail-on-failures", action="store_true", help="exit 1 when any episode failed")

    plot = commands.add_parser("plot", help="render an event log or a reward field")
    _common(plot)
    plot.add_argument("--log", default=None)
    plot.add_argument("--field", dest="reward_field", default=None)
    plot.add_argument("--world", default=None)
    plot.add_argument("--map", default=None)
    return parser


def _methods(value: Optional[str]) -> Optional[List[str]]:
    if value is None:
        return None
    if value.strip().lower() == "all":
        return [m.value for m in Method]
    try:
        return [Method.parse(name).value for name in value.split(",") if name.strip()]
    except ValueError as ex:
        raise ConfigError(str(ex))


_PATH_FLAGS = (
    "out",
    "world",
    "suite",
    "map",
    "embeddings",
    "sentences",
    "sentences_g0",
    "sentences_g1",
    "captions",
    "demos",
    "reward_lfd",
    "reward_kd",
    "results",
    "log",
    "reward_field",
)


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    """Dotted RunConfig keys for the flags that were given."""
    given = vars(args)
    overrides = {f"paths.{name}": given[name] for name in _PATH_FLAGS if name in given}
    overrides.update(
        seed=given.get("seed"),
        jobs=given.get("jobs"),
        format=given.get("format"),
        llm_url=given.get("llm_url"),
        methods=_methods(given.get("methods")),
        approach=given.get("approach"),
        theory_trials=given.get("theory_trials"),
    )
    if given.get("no_plots"):
        overrides["plots"] = False
    if given.get("theory"):
        overrides["theory"] = True
    if given.get("baseline"):
        overrides["approach"] = ApproachMethod.Baseline.value
    overrides["planner.samples"] = given.get("samples")
    overrides["search.max_path"] = given.get("max_path")
    overrides["search.max_false_detections"] = given.get("max_false_detections")
    return overrides


def _configure_logging(args: argparse.Namespace) -> None:
    level = "DEBUG" if args.verbose else "WARNING" if args.quiet else "INFO"
    logger.remove()
    logger.add(sys.stderr, level=level)


def _report_training(evaluations: Dict) -> int:
    summary = evaluations["train_summary"]
    print(f"objective {summary['objective']:.6f}")
    print(f"alpha_norm {summary['alpha_norm']:.6f}")
    return EXIT_OK


def _report_eval(evaluations: Dict, fail_on_failures: bool) -> int:
    metrics = evaluations.get("metrics")
    if metrics is not None:
        overall = metrics["all"]
        print(f"SR {overall['SR']:.4f}  SPL {overall['SPL']:.4f}  SPF {overall['SPF']:.4f}  episodes {overall['episodes']}")
        if fail_on_failures and overall["SR"] < 1.0:
            return EXIT_FAILURES
    theory = evaluations.get("theory")
    if theory is not None:
        print(f"theory trials {theory['trials']}  violations {theory['violations']}  max_ratio {theory['max_ratio']:.4f}")
    return EXIT_OK


_GRAPHS: Dict[str, Callable[[RunConfig], Any]] = {
    "search": pipeline.search_graph,
    "train-reward": pipeline.train_graph,
    "distill": pipeline.distill_graph,
    "plan": pipeline.plan_graph,
    "eval": pipeline.eval_graph,
    "plot": pipeline.plot_graph,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args)
    try:
        config = resolve_config(args.config, overrides_from_args(args))
        if args.dump_config:
            sys.stdout.write(config.to_yaml())
            return EXIT_OK
        graph = _GRAPHS[args.command](config)
        evaluations = graph.evaluate(force=True)
    except (HumanSeekException, FileNotFoundError) as ex:
        logger.error(f"{type(ex).__name__}: {ex}")
        return EXIT_USAGE

    if args.command == "train-reward":
        return _report_training(evaluations)
    if args.command == "eval":
        return _report_eval(evaluations, args.fail_on_failures)
    logger.info(f"Artifacts written to {config.paths.out}")
    return EXIT_OK
