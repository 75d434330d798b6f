"""
Reward construction from natural-language approach descriptions: prompt filling, keyword extraction,
keyword-to-segment expansion and accumulation of the segments into the approach-state grid.
"""
import math
import re
from dataclasses import asdict
from dataclasses import dataclass
from typing import Dict
from typing import List
from typing import Mapping
from typing import Sequence
from typing import Tuple

import numpy as np
from loguru import logger

from humanseek.core import StateGrid
from humanseek.core import discretize_array
from humanseek.exceptions import UnknownKeywordError
from humanseek.prior import SentenceSource
from humanseek.reward import RewardField
from humanseek.reward import rbf_apply

__all__ = [
    "POSITION_WORDS",
    "DistillParams",
    "KdPrompt",
    "KeywordSeq",
    "Cursor",
    "SegmentSet",
    "build_prompt",
    "extract_keywords",
    "word_to_segments",
    "estimate_kd_reward",
    "smooth_reward",
    "distill_reward",
    "generate_kd_sentences",
]

POSITION_WORDS = ("straight", "45", "side", "behind", "curve", "curved", "front")
NEGATION = "not"
SLOW_WORDS = ("slow", "slowly")


@dataclass(frozen=True)
class DistillParams:
    step: float = 0.2
    sigma_r: float = 1.0
    n: int = 5
    branching: bool = False
    slow_speed: float = 0.15
    fast_speed: float = 0.6
    initial_heading: float = 0.0

    def __post_init__(self):
        if not (self.step > 0 and self.sigma_r > 0 and self.n >= 1):
            raise ValueError("step and sigma_r must be positive and n at least 1")

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass(frozen=True)
class KdPrompt:
    caption: str
    gaze: int

    def __post_init__(self):
        if not self.caption.strip():
            raise ValueError("A caption must be non-empty")
        if self.gaze not in (0, 1):
            raise ValueError("gaze must be 0 or 1")

    @property
    def text(self) -> str:
        return build_prompt(self.caption, self.gaze)


def build_prompt(caption: str, g: int) -> str:
    looking = "looking" if g else "not looking"
    return f"{caption} and the robot is {looking} at a person. What is the trajectory for the robots to gently approach a person?"


@dataclass(frozen=True)
class KeywordSeq:
    words: Tuple[str, ...]
    slow_flag: bool = False


def extract_keywords(sentence: str) -> KeywordSeq:
    """
    Position keywords in order of appearance. "not" suppresses the next position keyword; the slow
    flag is set by "slow" or "slowly" anywhere in the sentence.
    """
    tokens = re.findall(r"[a-z0-9]+", sentence.lower())
    words, negated = [], False
    for token in tokens:
        if token == NEGATION:
            negated = True
        elif token in POSITION_WORDS:
            if negated:
                negated = False
            else:
                words.append(token)
    return KeywordSeq(words=tuple(words), slow_flag=any(token in SLOW_WORDS for token in tokens))


@dataclass
class Cursor:
    x: float = 0.0
    y: float = 0.0
    theta: float = 0.0

    @property
    def sign(self) -> float:
        return 1.0 if self.x >= 0 else -1.0


@dataclass(frozen=True)
class SegmentSet:
    candidates: Tuple[Tuple[Tuple[float, float], ...], ...]
    step: float = 0.2


_ARC = np.arange(1, 9) * np.pi / 8


def word_to_segments(word: str, cursor: Cursor, step: float = 0.2) -> SegmentSet:
    """Candidate polylines of offsets from the cursor for one position keyword."""
    s, ell = cursor.sign, step
    diag = ell * math.cos(math.pi / 4)
    if word == "straight":
        candidates = (((ell * math.cos(cursor.theta), ell * math.sin(cursor.theta)),),)
    elif word == "45":
        candidates = (((diag * s, diag * s),), ((diag * s, -diag * s),))
    elif word == "side":
        candidates = (((0.0, ell),), ((0.0, -ell),))
    elif word in ("curve", "curved"):
        xs = s * ell * (1.0 - np.cos(_ARC))
        ys = ell * np.sin(_ARC)
        candidates = (
            tuple((float(x), float(y)) for x, y in zip(xs, ys)),
            tuple((float(x), float(-y)) for x, y in zip(xs, ys)),
        )
    elif word == "front":
        candidates = (((ell, 0.0),),)
    elif word == "behind":
        candidates = (((-ell, 0.0),),)
    else:
        raise UnknownKeywordError(f"'{word}' is not a position keyword (expected one of {POSITION_WORDS})")
    return SegmentSet(candidates=candidates, step=step)


def _speed_bin(speed: float, grid: StateGrid) -> float:
    return grid.v_bins[int(np.argmin(np.abs(np.asarray(grid.v_bins) - speed)))]


def estimate_kd_reward(
    sentences: Sequence[str], grid: StateGrid = StateGrid(), params: DistillParams = DistillParams(), gaze: int = 1
) -> RewardField:
    """
    Accumulate every sentence's keyword segments into the `gaze` slice of the grid and divide by the
    number of sentences. Keywords are expanded last to first from a cursor at the person; each
    candidate increments the bins of all its points with the heading of its last offset, and the
    cursor then advances by that offset (all candidates share the cursor in branching mode).
    """
    values = np.zeros(grid.shape)
    if not sentences:
        return RewardField(values=values, grid=grid, meta=dict(source="kd", gaze=gaze, sentences=0))

    for sentence in sentences:
        keywords = extract_keywords(sentence)
        speed = _speed_bin(params.slow_speed if keywords.slow_flag else params.fast_speed, grid)
        cursor = Cursor(theta=params.initial_heading)
        for word in reversed(keywords.words):
            segments = word_to_segments(word, cursor, params.step)
            origin = Cursor(cursor.x, cursor.y, cursor.theta)
            ends = []
            for candidate in segments.candidates:
                base = origin if params.branching else cursor
                last_dx, last_dy = candidate[-1]
                heading = math.atan2(last_dy, last_dx)
                points = np.array([[base.x + dx, base.y + dy, heading, gaze, speed] for dx, dy in candidate])
                for index in discretize_array(points, grid):
                    values[tuple(index)] += 1.0
                ends.append((last_dx, last_dy, heading))
                if not params.branching:
                    cursor = Cursor(cursor.x + last_dx, cursor.y + last_dy, heading)
            if params.branching:
                mean_dx = float(np.mean([e[0] for e in ends]))
                mean_dy = float(np.mean([e[1] for e in ends]))
                heading = math.atan2(mean_dy, mean_dx) if (mean_dx, mean_dy) != (0.0, 0.0) else origin.theta
                cursor = Cursor(origin.x + mean_dx, origin.y + mean_dy, heading)

    values /= len(sentences)
    return RewardField(values=values, grid=grid, meta=dict(source="kd", gaze=gaze, sentences=len(sentences)))


def smooth_reward(field: RewardField, sigma_r: float = 1.0) -> RewardField:
    """R'(x) = sum_y k_r(x, y) R(y) with the scaled-metric RBF."""
    if not sigma_r > 0:
        raise ValueError("sigma_r must be positive")
    meta = dict(field.meta, smoothed=sigma_r)
    return RewardField(values=rbf_apply(field.values, sigma_r, field.grid), grid=field.grid, meta=meta)


def distill_reward(
    sentences_by_gaze: Mapping[int, Sequence[str]], grid: StateGrid = StateGrid(), params: DistillParams = DistillParams()
) -> RewardField:
    """One accumulation per gaze condition, each writing its own slice, then smoothing."""
    values = np.zeros(grid.shape)
    for gaze in sorted(sentences_by_gaze):
        sentences = sentences_by_gaze[gaze]
        logger.info(f"Distilling {len(sentences)} sentences for gaze={gaze}")
        values += estimate_kd_reward(sentences, grid, params, gaze=gaze).values
    meta = dict(source="kd", params=params.to_dict(), sentences={str(g): len(s) for g, s in sorted(sentences_by_gaze.items())})
    return smooth_reward(RewardField(values=values, grid=grid, meta=meta), params.sigma_r)


def generate_kd_sentences(captions: Sequence[str], g: int, n: int, source: SentenceSource) -> List[str]:
    """`n` generations per caption, in caption order."""
    sentences = []
    for caption in captions:
        sentences.extend(source.generate(build_prompt(caption, g), n))
    return sentences
