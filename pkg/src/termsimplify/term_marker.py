"""Complex-term candidates, science/lifestyle IDF contrast and bracket marking."""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Iterable

from .corpus_index import IdfIndex, normalize_term

DEFAULT_THRESHOLD = 0.1
# threshold used by the earlier system this pipeline builds on
LEGACY_THRESHOLD = 0.01
MAX_WINDOW = 4

SCIENCE_MINUS_LIFESTYLE = "science-minus-lifestyle"
LIFESTYLE_MINUS_SCIENCE = "lifestyle-minus-science"
CONTRAST_DIRECTIONS = (SCIENCE_MINUS_LIFESTYLE, LIFESTYLE_MINUS_SCIENCE)

_WORD_RE = re.compile(r"\w+(?:[-'’]\w+)*")


@lru_cache(maxsize=1)
def stopwords() -> frozenset[str]:
    text = resources.files(__package__).joinpath("stopwords_en_v1.txt").read_text(encoding="utf-8")
    return frozenset(
        line.strip() for line in text.splitlines() if line.strip() and not line.startswith("#")
    )


@dataclass(frozen=True)
class KeyphraseCandidate:
    phrase: str
    span: tuple[int, int]
    score: float = 0.0

    @property
    def length(self) -> int:
        return self.span[1] - self.span[0]


@dataclass(frozen=True)
class ComplexityVerdict:
    phrase: str
    idf_science: float
    idf_lifestyle: float
    contrast: float
    is_complex: bool
    direction: str = SCIENCE_MINUS_LIFESTYLE


@dataclass(frozen=True)
class MarkedText:
    original: str
    spans: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        spans = tuple(tuple(s) for s in self.spans)
        prev_end = 0
        for start, end in spans:
            if not (prev_end <= start < end <= len(self.original)):
                raise ValueError(f"spans must be sorted, disjoint and inside the text: {spans}")
            prev_end = end
        object.__setattr__(self, "spans", spans)

    @property
    def marked_count(self) -> int:
        return len(self.spans)

    def phrases(self) -> list[str]:
        return [self.original[s:e] for s, e in self.spans]


def _boundary_ok(token: str) -> bool:
    return token.lower() not in stopwords() and any(ch.isalpha() for ch in token)


def _segments(text: str) -> list[list[re.Match]]:
    """Runs of word tokens separated only by whitespace; punctuation splits runs."""
    segments: list[list[re.Match]] = []
    current: list[re.Match] = []
    prev_end = None
    for match in _WORD_RE.finditer(text):
        if current and not text[prev_end : match.start()].isspace():
            segments.append(current)
            current = []
        current.append(match)
        prev_end = match.end()
    if current:
        segments.append(current)
    return segments


def extract_candidates(text: str, salience: IdfIndex | None = None) -> list[KeyphraseCandidate]:
    """Stopword-bounded windows of 1-4 tokens that never cross punctuation.

    ``score`` is the mean IDF of the window's tokens in ``salience`` (the
    science index), or 0 when no index is given. Candidates may overlap.
    """
    candidates = []
    for segment in _segments(text):
        for i, first in enumerate(segment):
            if not _boundary_ok(first.group()):
                continue
            for j in range(i, min(i + MAX_WINDOW, len(segment))):
                last = segment[j]
                if not _boundary_ok(last.group()):
                    continue
                start, end = first.start(), last.end()
                phrase = normalize_term(text[start:end])
                if not phrase:
                    continue
                score = 0.0
                if salience is not None:
                    toks = segment[i : j + 1]
                    score = sum(salience.idf(t.group()) for t in toks) / len(toks)
                candidates.append(KeyphraseCandidate(phrase, (start, end), score))
    return candidates


def classify(
    phrase: str,
    science: IdfIndex,
    lifestyle: IdfIndex,
    threshold: float = DEFAULT_THRESHOLD,
    direction: str = SCIENCE_MINUS_LIFESTYLE,
) -> ComplexityVerdict:
    idf_sci = science.idf(phrase)
    idf_life = lifestyle.idf(phrase)
    contrast = idf_sci - idf_life
    if direction == SCIENCE_MINUS_LIFESTYLE:
        signal = contrast
    elif direction == LIFESTYLE_MINUS_SCIENCE:
        signal = -contrast
    else:
        raise ValueError(f"unknown contrast direction {direction!r}")
    return ComplexityVerdict(phrase, idf_sci, idf_life, contrast, signal > threshold, direction)


def resolve_overlaps(candidates: Iterable[KeyphraseCandidate]) -> list[KeyphraseCandidate]:
    """Pick a pairwise-disjoint subset of candidates.

    Ranked lexicographically: most spans first, then longest total span,
    then highest total score, then leftmost. Maximising the span count keeps
    marked_count monotone when candidates are removed (e.g. by a stricter
    threshold); among equally many spans the longer phrase wins, so a
    phrase nested in a longer complex phrase is absorbed by it.
    """
    items = sorted(set(candidates), key=lambda c: (c.span[1], c.span[0], -c.score, c.phrase))
    if not items:
        return []
    ends = [c.span[1] for c in items]
    # best[k]: (weight, chosen) over the first k items
    best: list[tuple[tuple, tuple[int, ...]]] = [((0, 0, 0.0, 0), ())]
    for k, cand in enumerate(items):
        # last item (by end) that finishes before cand starts
        lo, hi = 0, k
        while lo < hi:
            mid = (lo + hi) // 2
            if ends[mid] <= cand.span[0]:
                lo = mid + 1
            else:
                hi = mid
        base_weight, base_chosen = best[lo]
        w = (
            base_weight[0] + 1,
            base_weight[1] + cand.length,
            base_weight[2] + cand.score,
            base_weight[3] - cand.span[0],
        )
        take = (w, base_chosen + (k,))
        best.append(max(best[k], take, key=lambda t: t[0]))
    return [items[k] for k in best[-1][1]]


def mark(
    text: str,
    science: IdfIndex,
    lifestyle: IdfIndex,
    threshold: float = DEFAULT_THRESHOLD,
    direction: str = SCIENCE_MINUS_LIFESTYLE,
) -> MarkedText:
    candidates = extract_candidates(text, salience=science)
    verdicts: dict[str, bool] = {}
    complex_ones = []
    for cand in candidates:
        if cand.phrase not in verdicts:
            verdicts[cand.phrase] = classify(
                cand.phrase, science, lifestyle, threshold, direction
            ).is_complex
        if verdicts[cand.phrase]:
            complex_ones.append(cand)
    chosen = resolve_overlaps(complex_ones)
    return MarkedText(text, tuple(sorted(c.span for c in chosen)))


def render_brackets(marked: MarkedText) -> str:
    parts = []
    pos = 0
    for start, end in marked.spans:
        parts.append(marked.original[pos:start])
        parts.append("[" + marked.original[start:end] + "]")
        pos = end
    parts.append(marked.original[pos:])
    return "".join(parts)


def strip_brackets(text: str) -> str:
    """Undo render_brackets. Square brackets already present in a text are removed too."""
    return text.replace("[", "").replace("]", "")
