"""
Search prior over map labels from generated sentences and word embeddings, and the global-search
label cost that combines it with the distance to each area.
"""
import json
import math
import os
import re
import urllib.error
import urllib.request
from abc import ABC
from abc import abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Dict
from typing import Iterable
from typing import List
from typing import Optional
from typing import Sequence
from typing import Tuple
from typing import Union

import numpy as np
from loguru import logger

from humanseek.core import FLOOR_CHANGE_COST
from humanseek.core import FREE
from humanseek.core import AnnotatedMap
from humanseek.core import Waypoint
from humanseek.exceptions import ConfigError
from humanseek.exceptions import SentenceCountError
from humanseek.exceptions import SentenceSourceError
from humanseek.gridmap import nearest_free_cell
from humanseek.gridmap import reachable_mask

__all__ = [
    "LLM_URL_ENV",
    "LLM_URL_FALLBACK_ENV",
    "default_llm_url",
    "LocationClue",
    "SentenceBatch",
    "EmbeddingTable",
    "LabelPrior",
    "SentenceSource",
    "ReplaySentenceSource",
    "HttpSentenceSource",
    "TemplateSentenceSource",
    "tokenize",
    "read_sentences",
    "load_embeddings",
    "build_prior_prompt",
    "generate_sentences",
    "occurrence_score",
    "compute_label_priors",
    "closest_reachable_position",
    "label_cost",
]

LLM_URL_ENV = "SOCRATES_LLM_URL"
LLM_URL_FALLBACK_ENV = "HUMANSEEK_LLM_URL"

def default_llm_url() -> Optional[str]:
    return os.environ.get(LLM_URL_ENV) or os.environ.get(LLM_URL_FALLBACK_ENV) or None


_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")


def tokenize(text: str) -> List[str]:
    """Lowercase, split on non-alphanumerics, drop tokens shorter than two characters."""
    return [token for token in _TOKEN_SPLIT.split(text.lower()) if len(token) >= 2]


@dataclass(frozen=True)
class LocationClue:
    text: str

    def __post_init__(self):
        if not self.text or not self.text.strip():
            raise ValueError("A location clue must be non-empty")
        object.__setattr__(self, "text", self.text.strip())


@dataclass(frozen=True)
class SentenceBatch:
    sentences: Tuple[str, ...]
    source: str = "replay"

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))
        if self.source not in ("replay", "http", "template"):
            raise ValueError(f"Unknown sentence source tag {self.source}")

    def __len__(self) -> int:
        return len(self.sentences)


class EmbeddingTable(object):
    """Word vectors keyed by lowercase word."""

    def __init__(self, entries: Dict[str, np.ndarray]):
        if not entries:
            raise ValueError("An embedding table needs at least one entry")
        self.entries = {word.lower(): np.asarray(vec, dtype=float) for word, vec in entries.items()}
        dims = {vec.shape for vec in self.entries.values()}
        if len(dims) != 1:
            raise ValueError(f"All embedding vectors must share one dimension, found {sorted(dims)}")
        self.dimension = next(iter(dims))[0]

    def __contains__(self, word: str) -> bool:
        return word.lower() in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def lookup(self, word: str) -> Optional[np.ndarray]:
        return self.entries.get(word.lower())

    def vectors(self, tokens: Iterable[str]) -> List[np.ndarray]:
        return [self.entries[t] for t in tokens if t in self.entries]

    def phrase_vector(self, text: str) -> Optional[np.ndarray]:
        """Unnormalised mean of the in-vocabulary token vectors, None when every token is missing."""
        vectors = self.vectors(tokenize(text))
        if not vectors:
            return None
        return np.mean(vectors, axis=0)


def load_embeddings(path: Union[str, Path]) -> EmbeddingTable:
    """Read word2vec text format; a leading "N D" header line is optional."""
    entries = dict()
    with open(path, "r") as fil:
        for lineno, line in enumerate(fil, start=1):
            parts = line.split()
            if not parts:
                continue
            if lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                continue
            try:
                entries[parts[0]] = np.array([float(p) for p in parts[1:]])
            except ValueError:
                raise ConfigError(f"{path}:{lineno} is not a word vector line")
    logger.debug(f"Loaded {len(entries)} word vectors from {path}")
    return EmbeddingTable(entries)


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


@dataclass(frozen=True)
class LabelPrior:
    label: str
    score: float
    oov: bool = False

    def clamped(self) -> float:
        return min(1.0, max(0.0, self.score))


class SentenceSource(ABC):
    """Produces `n` sentences for a prompt."""

    tag = "replay"

    @abstractmethod
    def generate(self, prompt: str, n: int, clue: Optional[str] = None, labels: Sequence[str] = ()) -> List[str]:
        ...


def read_sentences(path: Union[str, Path]) -> List[str]:
    """One sentence per non-empty line."""
    with open(path, "r") as fil:
        return [line.strip() for line in fil if line.strip()]


class ReplaySentenceSource(SentenceSource):
    """Sentences recorded earlier, one per line."""

    tag = "replay"

    def __init__(self, path: Union[str, Path, None] = None, sentences: Optional[Sequence[str]] = None):
        if sentences is None:
            if path is None:
                raise ValueError("Either a path or sentences are required")
            sentences = read_sentences(path)
        self.path = path
        self.sentences = list(sentences)

    def generate(self, prompt, n, clue=None, labels=()):
        if n is not None and len(self.sentences) != n:
            logger.warning(f"Replay source {self.path} holds {len(self.sentences)} sentences, {n} requested")
            raise SentenceCountError(expected=n, found=len(self.sentences))
        return list(self.sentences)


class HttpSentenceSource(SentenceSource):
    """
    POSTs ``{"prompt": ..., "n": ...}`` as JSON to `url` and expects ``{"sentences": [...]}`` back.
    The url defaults to ``SOCRATES_LLM_URL``, then ``HUMANSEEK_LLM_URL``.
    """

    tag = "http"

    def __init__(self, url: Optional[str] = None, timeout: float = 30.0):
        url = url or default_llm_url()
        if not url:
            raise SentenceSourceError(f"No sentence endpoint configured (set {LLM_URL_ENV} or --llm-url)")
        self.url = url
        self.timeout = timeout

    def generate(self, prompt, n, clue=None, labels=()):
        body = json.dumps({"prompt": prompt, "n": int(n)}).encode("utf-8")
        request = urllib.request.Request(self.url, data=body, headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as response:
                payload = json.loads(response.read().decode("utf-8"))
        except (urllib.error.URLError, OSError, ValueError) as ex:
            raise SentenceSourceError(f"Sentence endpoint {self.url} failed: {ex}", prompt=prompt)
        sentences = payload.get("sentences") if isinstance(payload, dict) else None
        if not isinstance(sentences, list) or not all(isinstance(s, str) for s in sentences):
            raise SentenceSourceError(f"Malformed response from {self.url}", prompt=prompt)
        return sentences


class TemplateSentenceSource(SentenceSource):
    """
    Emits "X can be found in the <label>." where <label> is the map label most similar to the clue.
    Without labels it repeats `fallback`, which the approach pipeline uses for smoke runs.
    """

    tag = "template"

    def __init__(self, embeddings: Optional[EmbeddingTable] = None, fallback: str = "approach straight slowly"):
        self.embeddings = embeddings
        self.fallback = fallback

    def best_label(self, clue: str, labels: Sequence[str]) -> str:
        clue_vec = self.embeddings.phrase_vector(clue) if self.embeddings is not None else None
        best, best_score = labels[0], -math.inf
        for label in labels:
            label_vec = self.embeddings.phrase_vector(label) if self.embeddings is not None else None
            score = 0.0 if clue_vec is None or label_vec is None else _cosine(clue_vec, label_vec)
            if score > best_score:
                best, best_score = label, score
        return best

    def generate(self, prompt, n, clue=None, labels=()):
        if clue is None or not labels:
            return [self.fallback] * n
        return [f"X can be found in the {self.best_label(clue, labels)}."] * n


def build_prior_prompt(clue: Union[str, LocationClue], labels: Sequence[str]) -> str:
    text = clue.text if isinstance(clue, LocationClue) else clue
    return (
        f"The lab is composed of {', '.join(labels)}. X is a {text} but not always. Where can I find X in the lab?"
    )


def generate_sentences(
    clue: Union[str, LocationClue], labels: Sequence[str], M: int, source: SentenceSource
) -> SentenceBatch:
    if not labels:
        raise ValueError("At least one map label is required")
    clue = clue if isinstance(clue, LocationClue) else LocationClue(clue)
    prompt = build_prior_prompt(clue, labels)
    sentences = source.generate(prompt, M, clue=clue.text, labels=list(labels))
    return SentenceBatch(sentences=tuple(sentences), source=source.tag)


def occurrence_score(label: str, batch: SentenceBatch, emb: EmbeddingTable) -> float:
    """Mean over sentences of the best cosine similarity between the label and any sentence token."""
    label_vec = emb.phrase_vector(label)
    if label_vec is None:
        logger.warning(f"Label '{label}' has no in-vocabulary token; its occurrence score is 0")
        return 0.0
    if len(batch) == 0:
        return 0.0
    total = 0.0
    for sentence in batch.sentences:
        vectors = emb.vectors(tokenize(sentence))
        if vectors:
            total += max(_cosine(label_vec, vec) for vec in vectors)
    return total / len(batch)


def compute_label_priors(labels: Sequence[str], batch: SentenceBatch, emb: EmbeddingTable) -> List[LabelPrior]:
    return [
        LabelPrior(label=label, score=occurrence_score(label, batch, emb), oov=emb.phrase_vector(label) is None)
        for label in labels
    ]


def closest_reachable_position(
    robot: Waypoint, label: str, annotated_map: AnnotatedMap
) -> Tuple[Optional[Waypoint], float]:
    """
    Nearest free cell of the labelled area reachable from the robot, with the Euclidean distance to it
    plus the floor-change charge. Returns (None, inf) when no such cell exists.
    """
    floor = annotated_map.area_floor(label)
    grid = annotated_map.grid(floor)
    start = annotated_map.world_to_cell(robot.x, robot.y)
    if not annotated_map.in_bounds(*start) or grid[start] != FREE:
        start = nearest_free_cell(grid, start)
        if start is None:
            return None, math.inf
    mask = annotated_map.area_mask(label, floor) & reachable_mask(grid, start)
    if not mask.any():
        return None, math.inf
    floor_cost = FLOOR_CHANGE_COST * abs(floor - robot.z)
    robot_cell = annotated_map.world_to_cell(robot.x, robot.y)
    if annotated_map.in_bounds(*robot_cell) and mask[robot_cell]:
        return Waypoint(robot.x, robot.y, floor, robot.theta), floor_cost
    xs, ys = annotated_map.cell_centers()
    dist = np.where(mask, np.hypot(xs - robot.x, ys - robot.y), np.inf)
    flat = int(np.argmin(dist))
    row, col = divmod(flat, dist.shape[1])
    x, y = annotated_map.cell_center(row, col)
    return Waypoint(x, y, floor, math.atan2(y - robot.y, x - robot.x)), float(dist.flat[flat]) + floor_cost


def label_cost(
    robot: Waypoint,
    label: str,
    annotated_map: AnnotatedMap,
    prior: Union[LabelPrior, float],
    w_e: float = 30.0,
    clamp: bool = True,
) -> float:
    """Distance to the closest reachable position of the area plus ``w_e * (1 - p)``."""
    if w_e < 0:
        raise ValueError("w_e must be non-negative")
    if isinstance(prior, LabelPrior):
        p = prior.clamped() if clamp else prior.score
    else:
        p = min(1.0, max(0.0, float(prior))) if clamp else float(prior)
    _, distance = closest_reachable_position(robot, label, annotated_map)
    if not math.isfinite(distance):
        logger.debug(f"Label '{label}' is unreachable")
        return math.inf
    return distance + w_e * (1.0 - p)
