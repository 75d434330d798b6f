"""
Computation graphs behind the command-line surface. Each builder returns a graph whose collected
nodes are the final artifacts of one command; intermediate nodes that are expensive to recompute
(label priors, fitted and distilled reward fields) are persisted under ``<out>/cache/<digest>/`` so a
rerun with the same inputs and parameters deserialises them.

Evaluate with ``graph.evaluate(force=True)``: the final artifacts are rewritten, cached intermediates
are reused.
"""
import hashlib
import json
from dataclasses import replace
from functools import partial
from pathlib import Path
from typing import Dict
from typing import List
from typing import Optional

import numpy as np
import pandas as pd
from loguru import logger

from humanseek.backends import CsvBackend
from humanseek.backends import JsonBackend
from humanseek.backends import JsonLinesBackend
from humanseek.backends import NumpyBackend
from humanseek.backends import SvgBackend
from humanseek.backends import YamlBackend
from humanseek.compgraph import ComputationGraph
from humanseek.compgraph import config_digest
from humanseek.config import RunConfig
from humanseek.core import StateGrid
from humanseek.core import load_map
from humanseek.distill import distill_reward
from humanseek.distill import generate_kd_sentences
from humanseek.exceptions import ConfigError
from humanseek.kdmrl import fit_kdmrl
from humanseek.kdmrl import load_demonstrations
from humanseek.planner import straight_path
from humanseek.plotting import plot_plan
from humanseek.plotting import plot_reward_slice
from humanseek.plotting import plot_search_log
from humanseek.prior import HttpSentenceSource
from humanseek.prior import ReplaySentenceSource
from humanseek.prior import load_embeddings
from humanseek.prior import read_sentences
from humanseek.reward import RewardField
from humanseek.search import Method
from humanseek.sim import BASELINE_SPEED
from humanseek.sim import ApproachMethod
from humanseek.sim import compute_metrics
from humanseek.sim import constant_speed_trajectory
from humanseek.sim import frontal_cone_ratio
from humanseek.sim import heading_total_variation
from humanseek.sim import load_suite
from humanseek.sim import load_world
from humanseek.sim import results_frame
from humanseek.sim import results_from_frame
from humanseek.sim import run_approach_episode
from humanseek.sim import run_search_suite
from humanseek.sim import world_priors
from humanseek.theory import theory_report

__all__ = [
    "SPF_DEFINITION",
    "file_digest",
    "search_graph",
    "train_graph",
    "distill_graph",
    "plan_graph",
    "eval_graph",
    "plot_graph",
    "summarise",
]

SPF_DEFINITION = "SPF = mean of S_i / (1 + FD_i); success discounted by the number of false feedback requests"


def _require(path: Optional[str], what: str) -> Path:
    if path is None:
        raise ConfigError(f"No {what} given")
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"{what} {path} does not exist")
    return path


def _parse(kind, name: str):
    """`Method` or `ApproachMethod` by name; an unknown name is a configuration error."""
    try:
        return kind.parse(name)
    except ValueError as ex:
        raise ConfigError(str(ex))


def file_digest(path) -> str:
    """sha1 of a file's bytes; part of every cache key so edited inputs never hit a stale artifact."""
    return hashlib.sha1(Path(path).read_bytes()).hexdigest()


def _cache_dir(config: RunConfig, key: Dict) -> Path:
    return Path(config.paths.out) / "cache" / config_digest(key)


def _record_config(graph: ComputationGraph, config: RunConfig) -> None:
    """The effective configuration next to the artifacts it produced."""
    graph.make_node(func=_identity, args=(config,), backend=YamlBackend(config.paths.out), name="config")


def _field_values(field: Dict) -> np.ndarray:
    return RewardField.from_dict(field).values


def _slices(graph: ComputationGraph, backend: SvgBackend, field_node, stem: str) -> None:
    """Per-gaze SVG heat map and long-format CSV of the field, side by side."""
    tables = CsvBackend(backend.path)
    for g in (0, 1):
        name = f"{stem}_g{g}"
        graph.make_node(func=_slice_figure, kwargs=dict(field=field_node, g=g, title=f"{stem}, g = {g}"), backend=backend, name=name)
        graph.make_node(
            func=_slice_table, kwargs=dict(field=field_node, g=g), backend=tables, name=name, key=f"{name}_table"
        )


def _slice_figure(field: Dict, g: int, title: str):
    return plot_reward_slice(RewardField.from_dict(field), g=g, title=title)


def _slice_table(field: Dict, g: int) -> pd.DataFrame:
    return RewardField.from_dict(field).slice_frame(g)


# Search


def _load_worlds(config: RunConfig):
    paths = config.paths
    if paths.suite is not None:
        worlds = load_suite(_require(paths.suite, "suite file"))
    else:
        worlds = [load_world(_require(paths.world, "world file"))]
    if paths.map is not None:
        annotated_map = load_map(_require(paths.map, "map file"))
        worlds = [replace(w, map=annotated_map) for w in worlds]
    return worlds


def _priors(worlds, embeddings_path: str, M: int, sentences: Optional[str], llm_url: Optional[str]) -> List[Dict]:
    embeddings = load_embeddings(embeddings_path)
    if sentences is not None:
        source = ReplaySentenceSource(sentences)
    elif llm_url is not None:
        source = HttpSentenceSource(llm_url)
    else:
        source = None
    return [world_priors(world, embeddings, M, source) for world in worlds]


def _episodes(worlds, priors, config: RunConfig):
    return run_search_suite(
        worlds,
        config=config.search,
        methods=config.methods,
        seed=config.seed,
        jobs=config.jobs,
        sensor=config.sensor,
        priors=priors,
    )


def _results_table(episodes, fmt: str):
    frame = results_frame(episodes)
    return frame if fmt == "csv" else frame.to_dict(orient="records")


def summarise(results) -> Dict:
    """Metrics over all episodes and per method, in order of first appearance."""
    out = dict(all=compute_metrics(results).to_dict(), spf_definition=SPF_DEFINITION)
    by_method: Dict[str, list] = dict()
    for result in results:
        by_method.setdefault(result.method or "unknown", []).append(result)
    out["methods"] = {method: compute_metrics(group).to_dict() for method, group in by_method.items()}
    return out


def _pick_events(episodes, index: int):
    return episodes[index].events


def _episode_figure(episodes, index: int, annotated_map, floor: int):
    episode = episodes[index]
    title = f"{episode.world} / {episode.method} / target {episode.target_id}"
    return plot_search_log(episode.events, annotated_map, floor, title=title)


def search_graph(config: RunConfig) -> ComputationGraph:
    for method in config.methods:
        _parse(Method, method)
    paths = config.paths.with_defaults()
    worlds = _load_worlds(config)
    embeddings = _require(paths.embeddings, "embedding table")
    if paths.sentences is not None:
        _require(paths.sentences, "sentence file")

    graph = ComputationGraph(name="search")
    _record_config(graph, config)
    world_files = [f for w in worlds for f in w.sentence_files.values()]
    key = dict(
        kind="priors",
        inputs=[file_digest(f) for f in dict.fromkeys(world_files)],
        embeddings=file_digest(embeddings),
        sentences=file_digest(paths.sentences) if paths.sentences else None,
        llm_url=config.llm_url,
        M=config.search.M,
        episodes=[(w.name, w.target_id, w.map.labels, [p.to_dict() for p in w.persons]) for w in worlds],
    )
    priors = graph.make_node(
        func=_priors,
        kwargs=dict(worlds=worlds, embeddings_path=str(embeddings), M=config.search.M, sentences=paths.sentences, llm_url=config.llm_url),
        backend=JsonBackend(_cache_dir(config, key)),
        name="priors",
        collect=False,
    )
    episodes = graph.make_node(
        func=_episodes, kwargs=dict(worlds=worlds, priors=priors, config=config), name="episodes", collect=False
    )

    out = Path(paths.out)
    table_backend = CsvBackend(out) if config.format == "csv" else JsonBackend(out, indent=1)
    graph.make_node(func=_results_table, kwargs=dict(episodes=episodes, fmt=config.format), backend=table_backend, name="results")
    graph.make_node(func=summarise, kwargs=dict(results=episodes), backend=JsonBackend(out, indent=2), name="metrics")

    methods = [_parse(Method, m) for m in config.methods]
    logs, plots = JsonLinesBackend(out / "logs"), SvgBackend(out / "plots")
    for index, world in enumerate(worlds):
        for offset, method in enumerate(methods):
            position = index * len(methods) + offset
            stem = f"{index:03d}-{world.name}-{world.target_id}-{method.value}"
            graph.make_node(
                func=partial(_pick_events, index=position), kwargs=dict(episodes=episodes), backend=logs, name=stem, key=f"log-{stem}"
            )
            if config.plots:
                graph.make_node(
                    func=partial(_episode_figure, index=position, annotated_map=world.map, floor=world.robot.z),
                    kwargs=dict(episodes=episodes),
                    backend=plots,
                    name=stem,
                    key=f"plot-{stem}",
                )
    return graph


# Reward training


def _fit(demos_path: str, config: RunConfig) -> Dict:
    demos = load_demonstrations(demos_path)
    fit = fit_kdmrl(demos, config.kdmrl, StateGrid())
    return dict(field=fit.field.to_dict(), objective=fit.objective, alpha_norm=fit.alpha_norm, demos=len(demos))


def _fit_node(graph: ComputationGraph, config: RunConfig, demos: Path):
    key = dict(kind="kdmrl", demos=file_digest(demos), params=config.kdmrl.to_dict())
    return graph.make_node(
        func=_fit,
        kwargs=dict(demos_path=str(demos), config=config),
        backend=JsonBackend(_cache_dir(config, key)),
        name="kdmrl_fit",
        collect=False,
    )


def _field_of(fit: Dict) -> Dict:
    return fit["field"]


def _fit_summary(fit: Dict) -> Dict:
    return dict(objective=fit["objective"], alpha_norm=fit["alpha_norm"], demos=fit["demos"])


def train_graph(config: RunConfig) -> ComputationGraph:
    paths = config.paths.with_defaults()
    demos = _require(paths.demos, "demonstration file")
    graph = ComputationGraph(name="train-reward")
    _record_config(graph, config)
    fit = _fit_node(graph, config, demos)
    out = Path(paths.out)
    field = graph.make_node(func=_field_of, kwargs=dict(fit=fit), backend=JsonBackend(out), name="reward_lfd")
    graph.make_node(func=_fit_summary, kwargs=dict(fit=fit), backend=JsonBackend(out, indent=2), name="train_summary")
    graph.make_node(func=_field_values, kwargs=dict(field=field), backend=NumpyBackend(out), name="reward_lfd", key="reward_lfd_values")
    if config.plots:
        _slices(graph, SvgBackend(out / "plots"), field, "reward_lfd")
    return graph


# Distillation


def _kd_sentences(paths, config: RunConfig) -> Dict[int, List[str]]:
    if paths.captions is not None:
        captions = read_sentences(_require(paths.captions, "caption file"))
        source = HttpSentenceSource(config.llm_url)
        return {g: generate_kd_sentences(captions, g, config.distill.n, source) for g in (0, 1)}
    return {
        0: read_sentences(_require(paths.sentences_g0, "gaze-0 sentence file")),
        1: read_sentences(_require(paths.sentences_g1, "gaze-1 sentence file")),
    }


def _distill(sentences: Dict[int, List[str]], config: RunConfig) -> Dict:
    return distill_reward(sentences, StateGrid(), config.distill).to_dict()


def _distill_node(graph: ComputationGraph, config: RunConfig, paths):
    sentences = _kd_sentences(paths, config)
    key = dict(kind="distill", sentences={str(g): s for g, s in sentences.items()}, params=config.distill.to_dict())
    return graph.make_node(
        func=_distill,
        kwargs=dict(sentences=sentences, config=config),
        backend=JsonBackend(_cache_dir(config, key)),
        name="kd_field",
        collect=False,
    )


def _identity(value):
    return value


def distill_graph(config: RunConfig) -> ComputationGraph:
    paths = config.paths.with_defaults()
    graph = ComputationGraph(name="distill")
    _record_config(graph, config)
    field = _distill_node(graph, config, paths)
    out = Path(paths.out)
    export = graph.make_node(func=_identity, args=(field,), backend=JsonBackend(out), name="reward_kd")
    graph.make_node(func=_field_values, kwargs=dict(field=export), backend=NumpyBackend(out), name="reward_kd", key="reward_kd_values")
    if config.plots:
        _slices(graph, SvgBackend(out / "plots"), export, "reward_kd")
    return graph


# Planning


def _load_field(path: str) -> Dict:
    with open(path, "r") as fil:
        try:
            return json.load(fil)
        except json.JSONDecodeError as ex:
            raise ConfigError(f"{path} is not a reward field: {ex}")


def _approach(world, R_I: Dict, R_L: Dict, method: str, config: RunConfig):
    fields = dict(R_I=RewardField.from_dict(R_I), R_L=RewardField.from_dict(R_L))
    return run_approach_episode(world, method, fields, config.planner, config.seed)


def _trajectory_records(approach):
    return approach[1].to_records()


def _approach_summary(approach, world) -> Dict:
    result, trajectory = approach
    human = world.target.pose
    row = result.to_row()
    row.update(
        frontal_cone_ratio=frontal_cone_ratio(trajectory, human),
        heading_total_variation=heading_total_variation(trajectory),
        final_distance=float(np.hypot(*(trajectory.xy[-1] - human.xy))),
    )
    return row


def _plan_figure(approach, world, goal_radius: float):
    result, trajectory = approach
    human = world.target.pose
    baseline = None
    if result.method != ApproachMethod.Baseline.value:
        baseline = constant_speed_trajectory(straight_path(world.robot.pose, human, goal_radius), BASELINE_SPEED)
    return plot_plan(trajectory, human, world.map, world.robot.z, goal_radius, baseline, title=result.method)


def plan_graph(config: RunConfig) -> ComputationGraph:
    method = _parse(ApproachMethod, config.approach)
    paths = config.paths.with_defaults(world="approach.json")
    world = load_world(_require(paths.world, "world file"))
    graph = ComputationGraph(name="plan")
    _record_config(graph, config)

    if paths.reward_lfd is not None:
        R_I = graph.make_node(func=_load_field, args=(str(_require(paths.reward_lfd, "LfD reward field")),), name="R_I", collect=False)
    else:
        fit = _fit_node(graph, config, _require(paths.demos, "demonstration file"))
        R_I = graph.make_node(func=_field_of, kwargs=dict(fit=fit), name="R_I", collect=False)
    if paths.reward_kd is not None:
        R_L = graph.make_node(func=_load_field, args=(str(_require(paths.reward_kd, "KD reward field")),), name="R_L", collect=False)
    else:
        R_L = _distill_node(graph, config, paths)

    approach = graph.make_node(
        func=_approach,
        kwargs=dict(world=world, R_I=R_I, R_L=R_L, method=method.value, config=config),
        name="approach_episode",
        collect=False,
    )
    out = Path(paths.out)
    graph.make_node(func=_trajectory_records, args=(approach,), backend=JsonLinesBackend(out), name="trajectory")
    graph.make_node(
        func=_approach_summary, kwargs=dict(approach=approach, world=world), backend=JsonBackend(out, indent=2), name="approach"
    )
    if config.plots:
        graph.make_node(
            func=_plan_figure,
            kwargs=dict(approach=approach, world=world, goal_radius=config.planner.goal_radius),
            backend=SvgBackend(out),
            name="plan",
        )
    return graph


# Evaluation and plotting


def _read_results(path: str):
    path = Path(path)
    try:
        if path.suffix == ".json":
            with open(path, "r") as fil:
                frame = pd.DataFrame(json.load(fil))
        else:
            frame = pd.read_csv(path)
        return results_from_frame(frame)
    except (ValueError, KeyError, TypeError) as ex:
        raise ConfigError(f"{path} is not a results table: {ex}")


def eval_graph(config: RunConfig) -> ComputationGraph:
    graph = ComputationGraph(name="eval")
    _record_config(graph, config)
    out = Path(config.paths.out)
    if config.paths.results is not None:
        results = graph.make_node(
            func=_read_results, args=(str(_require(config.paths.results, "results file")),), name="episodes", collect=False
        )
        graph.make_node(func=summarise, kwargs=dict(results=results), backend=JsonBackend(out, indent=2), name="metrics")
    elif not config.theory:
        raise ConfigError("eval needs --results and/or --theory")
    if config.theory:
        graph.make_node(
            func=theory_report,
            kwargs=dict(n_trials=config.theory_trials, seed=config.seed),
            backend=JsonBackend(out, indent=2),
            name="theory",
        )
    return graph


def _read_log(path: str) -> List[Dict]:
    with open(path, "r") as fil:
        try:
            return [json.loads(line) for line in fil if line.strip()]
        except json.JSONDecodeError as ex:
            raise ConfigError(f"{path} is not an event log: {ex}")


def _log_figure(events: List[Dict], annotated_map, floor: int, title: str):
    return plot_search_log(events, annotated_map, floor, title=title)


def plot_graph(config: RunConfig) -> ComputationGraph:
    paths = config.paths
    graph = ComputationGraph(name="plot")
    _record_config(graph, config)
    out = Path(paths.out)
    if paths.log is None and paths.reward_field is None:
        raise ConfigError("plot needs --log and/or --field")
    if paths.log is not None:
        log = _require(paths.log, "event log")
        annotated_map, floor = None, 0
        if paths.map is not None:
            annotated_map = load_map(_require(paths.map, "map file"))
        elif paths.world is not None:
            world = load_world(_require(paths.world, "world file"))
            annotated_map, floor = world.map, world.robot.z
        events = graph.make_node(func=_read_log, args=(str(log),), name="events", collect=False)
        graph.make_node(
            func=_log_figure,
            kwargs=dict(events=events, annotated_map=annotated_map, floor=floor, title=log.stem),
            backend=SvgBackend(out),
            name=log.stem,
        )
    if paths.reward_field is not None:
        field_path = _require(paths.reward_field, "reward field")
        field = graph.make_node(func=_load_field, args=(str(field_path),), name="field", collect=False)
        _slices(graph, SvgBackend(out), field, field_path.stem)
    return graph
