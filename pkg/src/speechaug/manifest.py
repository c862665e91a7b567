"""Training manifests: building, parsing, weighted sampling and statistics.

A manifest is a JSON-lines file. The first line is a fixed header object
identifying the schema; every following line is one record that points at a
WAV file on disk and carries the reduced target units, the data origin
("real" or "text_aug") and the language pair.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterator, Mapping, Sequence

import numpy as np

from .audio import AudioBuffer, save_wav
from .chain import AppliedTrace, ChainConfig, apply_chain
from .effects import NoiseBank
from .errors import EmptyCorpus, MalformedManifest, PortError, SpeechAugError
from .ports import SynthesizerPort, UnitizerPort, UnitSequence, reduce_units
from .textpipe import TextPair

log = logging.getLogger(__name__)

MANIFEST_SCHEMA = "speechaug-manifest-v1"

ORIGINS = ("real", "text_aug")

_RECORD_KEYS = ("id", "source_audio", "duration_s", "target_units", "origin", "src_lang", "tgt_lang")


@dataclass(frozen=True)
class ManifestRecord:
    """One training example: source audio on disk plus reduced target units."""

    id: str
    source_audio: str
    duration_s: float
    target_units: UnitSequence
    origin: str
    src_lang: str
    tgt_lang: str

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("record id must not be empty")
        if self.duration_s <= 0:
            raise ValueError(f"record {self.id!r}: duration must be positive")
        if not self.target_units.reduced:
            raise ValueError(f"record {self.id!r}: target units must be reduced")
        if self.origin not in ORIGINS:
            raise ValueError(f"record {self.id!r}: origin must be one of {ORIGINS}")

    def to_json(self) -> str:
        return json.dumps(
            {
                "id": self.id,
                "source_audio": self.source_audio,
                "duration_s": self.duration_s,
                "target_units": " ".join(str(u) for u in self.target_units.units),
                "origin": self.origin,
                "src_lang": self.src_lang,
                "tgt_lang": self.tgt_lang,
            },
            ensure_ascii=False,
        )

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ManifestRecord":
        missing = [k for k in _RECORD_KEYS if k not in data]
        if missing:
            raise ValueError(f"missing fields: {', '.join(missing)}")
        units_field = data["target_units"]
        if not isinstance(units_field, str):
            raise ValueError("target_units must be a space-separated string")
        units = tuple(int(tok) for tok in units_field.split())
        return cls(
            id=str(data["id"]),
            source_audio=str(data["source_audio"]),
            duration_s=float(data["duration_s"]),
            target_units=UnitSequence(units, reduced=True),
            origin=str(data["origin"]),
            src_lang=str(data["src_lang"]),
            tgt_lang=str(data["tgt_lang"]),
        )


def write_manifest(records: Sequence[ManifestRecord], path: str | Path) -> None:
    """Write the header line followed by one JSON line per record."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"schema": MANIFEST_SCHEMA}) + "\n")
        for record in records:
            fh.write(record.to_json() + "\n")


def read_manifest(path: str | Path) -> list[ManifestRecord]:
    """Parse a manifest, raising MalformedManifest with the offending line number."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise MalformedManifest(1, "file is empty, expected a schema header")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as err:
        raise MalformedManifest(1, f"header is not valid JSON: {err}") from err
    if not isinstance(header, dict) or header.get("schema") != MANIFEST_SCHEMA:
        raise MalformedManifest(1, f"expected schema header {MANIFEST_SCHEMA!r}")
    records = []
    for line_no, raw in enumerate(lines[1:], 2):
        if not raw.strip():
            continue
        try:
            data = json.loads(raw)
            records.append(ManifestRecord.from_dict(data))
        except (json.JSONDecodeError, ValueError) as err:
            raise MalformedManifest(line_no, str(err)) from err
    return records


def _build_one(
    pair: TextPair,
    synthesizer: SynthesizerPort,
    unitizer: UnitizerPort,
    chain: ChainConfig | None,
    bank: NoiseBank | None,
    audio_dir: Path,
    src_lang: str,
    tgt_lang: str,
    origin: str,
    augment_source: bool,
    augment_target: bool,
    wav_encoding: str,
) -> tuple[ManifestRecord, AppliedTrace | None]:
    source_audio = synthesizer.synthesize(pair.source, src_lang)
    target_audio = synthesizer.synthesize(pair.target, tgt_lang)
    trace = None
    if chain is not None and augment_source:
        source_audio, trace = apply_chain(chain, source_audio, f"{pair.id}:src", bank)
    if chain is not None and augment_target:
        # target perturbation happens before unitization so the units
        # describe the audio the model will actually hear
        target_audio, _ = apply_chain(chain, target_audio, f"{pair.id}:tgt", bank)
    units = reduce_units(unitizer.unitize(target_audio))
    wav_path = audio_dir / f"{pair.id}.wav"
    save_wav(source_audio, wav_path, encoding=wav_encoding)
    record = ManifestRecord(
        id=pair.id,
        source_audio=f"audio/{pair.id}.wav",
        duration_s=source_audio.duration_seconds,
        target_units=units,
        origin=origin,
        src_lang=src_lang,
        tgt_lang=tgt_lang,
    )
    return record, trace


@dataclass
class BuildOutcome:
    manifest_path: Path
    records: list[ManifestRecord]
    failures: list[tuple[str, str]]


def build_manifest(
    pairs: Sequence[TextPair],
    synthesizer: SynthesizerPort,
    unitizer: UnitizerPort,
    out_dir: str | Path,
    *,
    chain: ChainConfig | None = None,
    bank: NoiseBank | None = None,
    src_lang: str = "src",
    tgt_lang: str = "tgt",
    origin: str = "text_aug",
    augment_source: bool = True,
    augment_target: bool = False,
    wav_encoding: str = "float32",
    workers: int = 1,
) -> BuildOutcome:
    """Synthesize, optionally perturb, unitize and index a pair list.

    For each pair the source sentence is spoken, run through the chain
    (when one is given; the chain is seeded per record id, so worker count
    and ordering cannot change any output), and written to
    ``out_dir/audio/<id>.wav``; the target sentence is spoken and collapsed
    into reduced units. Records land in the manifest in pair order. Pairs
    whose port calls fail are logged, reported in the outcome and skipped;
    the manifest holds only successes.
    """
    out_path = Path(out_dir)
    audio_dir = out_path / "audio"
    audio_dir.mkdir(parents=True, exist_ok=True)

    def task(pair: TextPair) -> tuple[ManifestRecord, AppliedTrace | None]:
        return _build_one(
            pair,
            synthesizer,
            unitizer,
            chain,
            bank,
            audio_dir,
            src_lang,
            tgt_lang,
            origin,
            augment_source,
            augment_target,
            wav_encoding,
        )

    results: list[ManifestRecord | None] = [None] * len(pairs)
    failures: list[tuple[str, str]] = []

    limit = max(1, workers)
    declared = getattr(synthesizer, "max_concurrency", None)
    if declared is not None:
        limit = min(limit, max(1, declared))

    def run_one(i: int, pair: TextPair) -> None:
        try:
            record, _trace = task(pair)
            results[i] = record
        except (PortError, SpeechAugError) as err:
            log.warning("skipping pair %s: %s", pair.id, err)
            failures.append((pair.id, str(err)))

    if limit == 1:
        for i, pair in enumerate(pairs):
            run_one(i, pair)
    else:
        with ThreadPoolExecutor(max_workers=limit) as pool:
            list(pool.map(run_one, range(len(pairs)), pairs))

    records = [r for r in results if r is not None]
    manifest_path = out_path / "manifest.jsonl"
    write_manifest(records, manifest_path)
    return BuildOutcome(manifest_path=manifest_path, records=records, failures=failures)


@dataclass(frozen=True)
class SamplerConfig:
    """Origin weights plus the seed that makes the stream reproducible."""

    weights: Mapping[str, float]
    seed: int

    def __post_init__(self) -> None:
        if not self.weights:
            raise ValueError("weights must not be empty")
        if any(w < 0 for w in self.weights.values()):
            raise ValueError("weights must be non-negative")
        if sum(self.weights.values()) <= 0:
            raise ValueError("at least one weight must be positive")
        object.__setattr__(self, "weights", dict(self.weights))


def sample_stream(
    manifests: Sequence[tuple[Sequence[ManifestRecord], str]],
    config: SamplerConfig,
) -> Iterator[ManifestRecord]:
    """Yield records forever: pick an origin by weight, then a record
    uniformly within it.

    Origins with weight zero are never drawn. An origin with positive
    weight but no records raises EmptyCorpus up front.
    """
    pools: dict[str, list[ManifestRecord]] = {}
    for records, origin in manifests:
        pools.setdefault(origin, []).extend(records)

    active = [(origin, w) for origin, w in sorted(config.weights.items()) if w > 0]
    for origin, _ in active:
        if not pools.get(origin):
            raise EmptyCorpus(f"origin {origin!r} has positive weight but no records")

    names = [origin for origin, _ in active]
    weights = np.array([w for _, w in active], dtype=np.float64)
    cumulative = np.cumsum(weights / weights.sum())
    rng = np.random.Generator(np.random.PCG64(config.seed))
    while True:
        u = rng.random()
        pick = min(int(np.searchsorted(cumulative, u, side="right")), len(names) - 1)
        pool = pools[names[pick]]
        yield pool[int(rng.integers(0, len(pool)))]


def corpus_stats(path: str | Path) -> dict[str, Any]:
    """Summarize a manifest: totals, per-origin breakdown and a histogram
    of reduced-unit sequence lengths."""
    records = read_manifest(path)
    total_s = float(sum(r.duration_s for r in records))
    origins: dict[str, dict[str, Any]] = {}
    histogram: dict[int, int] = {}
    for r in records:
        bucket = origins.setdefault(r.origin, {"records": 0, "duration_s": 0.0})
        bucket["records"] += 1
        bucket["duration_s"] += r.duration_s
        histogram[len(r.target_units)] = histogram.get(len(r.target_units), 0) + 1
    return {
        "records": len(records),
        "total_duration_s": total_s,
        "total_hours": total_s / 3600.0,
        "origins": {k: origins[k] for k in sorted(origins)},
        "unit_length_histogram": {str(k): histogram[k] for k in sorted(histogram)},
    }
