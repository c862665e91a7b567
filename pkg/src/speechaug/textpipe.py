"""Monolingual cleaning, translation fan-out and parallel-pair filtering.

The stage takes a corpus in the synthesis target language, cleans each
sentence, translates the survivors back into the source language through a
pluggable port, and filters the resulting pairs. Rejection is data, not an
error: every input sentence ends up in exactly one bucket (accepted,
rejected-with-reason, or translator failure).
"""

from __future__ import annotations

import re
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from itertools import groupby
from pathlib import Path
from typing import Any, Iterable, Sequence

from .errors import PortError
from .ports import TranslatorPort


class RejectReason(str, Enum):
    EMPTY = "empty"
    URL = "url"
    BRACKETED = "bracketed"
    SPECIAL_CHARS = "special_chars"
    TOO_SHORT = "too_short"
    TOO_LONG = "too_long"
    LENGTH_RATIO = "length_ratio"
    REPETITION = "repetition"


@dataclass(frozen=True)
class FilterPolicy:
    """Thresholds for cleaning and pair filtering.

    The defaults are deliberate, testable choices rather than tuned values:
    a pair is dropped when one side is more than 3x longer than the other
    (whitespace tokens), when a token repeats more than 3 times in a row,
    when either side falls outside 1..200 tokens, or, at the cleaning
    stage, when more than 20% of a sentence's characters are neither
    letters, digits, whitespace nor common punctuation.
    """

    max_length_ratio: float = 3.0
    max_repetition_run: int = 3
    min_tokens: int = 1
    max_tokens: int = 200
    reject_urls: bool = True
    reject_bracketed: bool = True
    max_special_char_ratio: float = 0.2

    def __post_init__(self) -> None:
        if self.max_length_ratio < 1.0:
            raise ValueError("max_length_ratio must be at least 1")
        if self.max_repetition_run < 1:
            raise ValueError("max_repetition_run must be at least 1")
        if self.min_tokens < 1:
            raise ValueError("min_tokens must be at least 1")
        if self.max_tokens < self.min_tokens:
            raise ValueError("max_tokens must be at least min_tokens")
        if not 0.0 <= self.max_special_char_ratio <= 1.0:
            raise ValueError("max_special_char_ratio must be in [0, 1]")


_URL_RE = re.compile(r"(?i)(?:https?://|\bwww\.)")
_BRACKET_SPANS = (
    re.compile(r"\(.*?\)", re.DOTALL),
    re.compile(r"\[.*?\]", re.DOTALL),
    re.compile(r"\{.*?\}", re.DOTALL),
)
_COMMON_PUNCT = set(".,!?;:'\"-–—‘’“”…%¿¡")


@dataclass(frozen=True)
class CleanResult:
    """Outcome of cleaning one sentence: the normalized text or a reason."""

    text: str | None
    reason: RejectReason | None

    @property
    def accepted(self) -> bool:
        return self.reason is None


def clean_sentence(sentence: str, policy: FilterPolicy | None = None) -> CleanResult:
    """Normalize whitespace and vet one sentence.

    Rejects sentences that are empty after normalization, that contain a
    URL (http://, https:// or a www. host), a bracketed span of any of
    () [] {}, or too high a share of unusual characters. Cleaning an
    already-clean sentence returns it unchanged.
    """
    policy = policy or FilterPolicy()
    normalized = " ".join(sentence.split())
    if not normalized:
        return CleanResult(None, RejectReason.EMPTY)
    if policy.reject_urls and _URL_RE.search(normalized):
        return CleanResult(None, RejectReason.URL)
    if policy.reject_bracketed and any(rx.search(normalized) for rx in _BRACKET_SPANS):
        return CleanResult(None, RejectReason.BRACKETED)
    unusual = sum(
        1
        for ch in normalized
        if not (ch.isalnum() or ch.isspace() or ch in _COMMON_PUNCT)
    )
    if unusual / len(normalized) > policy.max_special_char_ratio:
        return CleanResult(None, RejectReason.SPECIAL_CHARS)
    return CleanResult(normalized, None)


@dataclass(frozen=True)
class TextPair:
    """One parallel sentence pair with a stable id."""

    id: str
    source: str
    target: str

    def __post_init__(self) -> None:
        if not self.source or not self.target:
            raise ValueError(f"pair {self.id!r} has an empty side")


def _longest_run(tokens: Sequence[str]) -> int:
    return max((len(list(g)) for _, g in groupby(tokens)), default=0)


def filter_pair(pair: TextPair, policy: FilterPolicy | None = None) -> RejectReason | None:
    """Return why a pair should be dropped, or None to keep it.

    Checks are symmetric in the two sides: token-count bounds first, then
    the length ratio, then consecutive token repetition.
    """
    policy = policy or FilterPolicy()
    src = pair.source.split()
    tgt = pair.target.split()
    lo, hi = min(len(src), len(tgt)), max(len(src), len(tgt))
    if lo < policy.min_tokens:
        return RejectReason.TOO_SHORT
    if hi > policy.max_tokens:
        return RejectReason.TOO_LONG
    if hi / lo > policy.max_length_ratio:
        return RejectReason.LENGTH_RATIO
    if max(_longest_run(src), _longest_run(tgt)) > policy.max_repetition_run:
        return RejectReason.REPETITION
    return None


@dataclass(frozen=True)
class TextCorpus:
    """A list of raw sentences, all in one language."""

    sentences: tuple[str, ...]
    language: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "sentences", tuple(self.sentences))

    def __len__(self) -> int:
        return len(self.sentences)

    @classmethod
    def from_file(cls, path: str | Path, language: str) -> "TextCorpus":
        """One sentence per line; blank lines are kept and rejected later,
        so the accounting still covers every input line."""
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls(tuple(lines), language)


@dataclass
class RejectionStats:
    """Where every input sentence of a stage run ended up."""

    input_sentences: int = 0
    clean_rejected: Counter = field(default_factory=Counter)
    translator_failures: int = 0
    pair_rejected: Counter = field(default_factory=Counter)
    accepted: int = 0

    @property
    def total_rejected(self) -> int:
        return sum(self.clean_rejected.values()) + sum(self.pair_rejected.values())

    def is_conserved(self) -> bool:
        return (
            self.accepted + self.total_rejected + self.translator_failures
            == self.input_sentences
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "input_sentences": self.input_sentences,
            "clean_rejected": {str(k.value): v for k, v in sorted(self.clean_rejected.items())},
            "translator_failures": self.translator_failures,
            "pair_rejected": {str(k.value): v for k, v in sorted(self.pair_rejected.items())},
            "accepted": self.accepted,
        }


def run_text_stage(
    corpus: TextCorpus,
    translator: TranslatorPort,
    to_language: str,
    policy: FilterPolicy | None = None,
    max_in_flight: int = 1,
) -> tuple[list[TextPair], RejectionStats]:
    """Clean a corpus, translate the survivors and filter the pairs.

    Each kept pair has the translation as its source side and the cleaned
    original as its target side. Pair ids encode the original line number,
    so they are stable across runs and insensitive to how many earlier
    lines were rejected. Translation runs through a bounded thread pool
    (``max_in_flight``, further capped by the port's declared
    max_concurrency); results are re-ordered by line number afterwards, so
    concurrency never changes the output.
    """
    policy = policy or FilterPolicy()
    stats = RejectionStats(input_sentences=len(corpus))
    survivors: list[tuple[int, str]] = []
    for idx, raw in enumerate(corpus.sentences):
        result = clean_sentence(raw, policy)
        if not result.accepted:
            stats.clean_rejected[result.reason] += 1
            continue
        survivors.append((idx, result.text))

    limit = max(1, max_in_flight)
    declared = getattr(translator, "max_concurrency", None)
    if declared is not None:
        limit = min(limit, max(1, declared))

    def _translate(text: str) -> str | PortError:
        try:
            return translator.translate(text, corpus.language, to_language)
        except PortError as err:
            return err

    if limit == 1:
        outcomes: Iterable[str | PortError] = [_translate(t) for _, t in survivors]
    else:
        with ThreadPoolExecutor(max_workers=limit) as pool:
            outcomes = list(pool.map(_translate, [t for _, t in survivors]))

    pairs: list[TextPair] = []
    for (idx, target_text), outcome in zip(survivors, outcomes):
        if isinstance(outcome, PortError):
            stats.translator_failures += 1
            continue
        source_text = " ".join(outcome.split())
        if not source_text:
            stats.pair_rejected[RejectReason.EMPTY] += 1
            continue
        pair = TextPair(id=f"p{idx:08d}", source=source_text, target=target_text)
        reason = filter_pair(pair, policy)
        if reason is not None:
            stats.pair_rejected[reason] += 1
            continue
        stats.accepted += 1
        pairs.append(pair)
    return pairs, stats


def reservoir_take(lines: Iterable[str], n: int, rng: Any) -> list[str]:
    """Uniformly sample ``n`` lines in one pass, preserving input order.

    Standard reservoir sampling; ``rng`` is a numpy Generator. Returns all
    lines when the input holds fewer than ``n``.
    """
    if n <= 0:
        return []
    reservoir: list[tuple[int, str]] = []
    for idx, line in enumerate(lines):
        if idx < n:
            reservoir.append((idx, line))
            continue
        j = int(rng.integers(0, idx + 1))
        if j < n:
            reservoir[j] = (idx, line)
    reservoir.sort()
    return [line for _, line in reservoir]


def write_pairs_tsv(pairs: Sequence[TextPair], path: str | Path) -> None:
    """id, source, target as one tab-separated line per pair."""
    with open(path, "w", encoding="utf-8") as fh:
        for p in pairs:
            fh.write(f"{p.id}\t{p.source}\t{p.target}\n")


def read_pairs_tsv(path: str | Path) -> list[TextPair]:
    pairs = []
    for line_no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not raw.strip():
            continue
        parts = raw.split("\t")
        if len(parts) != 3:
            raise ValueError(f"{path}:{line_no}: expected 3 tab-separated fields")
        pairs.append(TextPair(id=parts[0], source=parts[1], target=parts[2]))
    return pairs
