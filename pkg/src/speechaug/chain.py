"""Probabilistic effect chains.

A chain is an ordered list of effect specs. Applying the chain walks the
specs from the last to the first: each one fires independently with its
configured probability, drawing its parameters uniformly from the
configured ranges. All randomness comes from one generator seeded by a
stable hash of (global_seed, utterance_id), so results do not depend on
processing order, worker count, or the process hash seed.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .audio import AudioBuffer
from .effects import (
    NoiseBank,
    _mix_segments,
    apply_lowpass,
    apply_pitch,
    apply_speed,
)
from .errors import ChainStageError, EmptyNoiseBank, SpeechAugError

KIND_SPEED = "speed"
KIND_PITCH = "pitch"
KIND_LOWPASS = "lowpass"
KIND_NOISE_MIX = "noise_mix"

_KNOWN_KINDS = (KIND_SPEED, KIND_PITCH, KIND_LOWPASS, KIND_NOISE_MIX)


@dataclass(frozen=True)
class EffectSpec:
    """One slot in a chain: an effect kind, a firing probability and the
    closed range its parameter is drawn from.

    For noise_mix the range is the SNR window in dB and ``max_segments``
    bounds how many bank entries are layered per application (the count is
    drawn uniformly from 1..max_segments). Other kinds ignore
    ``max_segments``.
    """

    kind: str
    probability: float
    param_range: tuple[float, float]
    max_segments: int = 4

    def __post_init__(self) -> None:
        if self.kind not in _KNOWN_KINDS:
            raise ValueError(f"unknown effect kind {self.kind!r}")
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError(f"probability {self.probability} outside [0, 1]")
        low, high = self.param_range
        if not (low <= high):
            raise ValueError(f"param_range {self.param_range} is not ordered")
        object.__setattr__(self, "param_range", (float(low), float(high)))
        if self.max_segments < 1:
            raise ValueError(f"max_segments must be at least 1, got {self.max_segments}")


@dataclass(frozen=True)
class ChainConfig:
    """An immutable chain description plus the seed all utterances derive from."""

    specs: tuple[EffectSpec, ...]
    global_seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "specs", tuple(self.specs))

    def with_seed(self, global_seed: int) -> "ChainConfig":
        return replace(self, global_seed=global_seed)

    def to_dict(self) -> dict[str, Any]:
        specs = []
        for s in self.specs:
            entry: dict[str, Any] = {
                "kind": s.kind,
                "probability": s.probability,
                "param_range": [s.param_range[0], s.param_range[1]],
            }
            if s.kind == KIND_NOISE_MIX:
                entry["max_segments"] = s.max_segments
            specs.append(entry)
        return {"global_seed": self.global_seed, "specs": specs}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ChainConfig":
        try:
            specs = tuple(
                EffectSpec(
                    kind=entry["kind"],
                    probability=float(entry["probability"]),
                    param_range=(
                        float(entry["param_range"][0]),
                        float(entry["param_range"][1]),
                    ),
                    max_segments=int(entry.get("max_segments", 4)),
                )
                for entry in data["specs"]
            )
            seed = int(data.get("global_seed", 0))
        except (KeyError, TypeError, IndexError) as err:
            raise ValueError(f"malformed chain config: {err}") from err
        return cls(specs=specs, global_seed=seed)


def save_chain(config: ChainConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2) + "\n", encoding="utf-8")


def load_chain(path: str | Path) -> ChainConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise ValueError(f"{path} is not valid JSON: {err}") from err
    return ChainConfig.from_dict(data)


def default_chain(global_seed: int = 0) -> ChainConfig:
    """The standard four-effect recipe.

    Every effect fires at probability 0.5. Speed and pitch draw their factor
    from [0.95, 1.05], the low-pass draws its cutoff from [300, 1000] Hz,
    and noise mixing layers up to 4 bank entries at an SNR drawn from
    [25, 35] dB. The noise stage sits last in the list, so it is applied
    first and the others perturb the already-noisy signal.
    """
    return ChainConfig(
        specs=(
            EffectSpec(KIND_SPEED, 0.5, (0.95, 1.05)),
            EffectSpec(KIND_PITCH, 0.5, (0.95, 1.05)),
            EffectSpec(KIND_LOWPASS, 0.5, (300.0, 1000.0)),
            EffectSpec(KIND_NOISE_MIX, 0.5, (25.0, 35.0), max_segments=4),
        ),
        global_seed=global_seed,
    )


@dataclass(frozen=True)
class StageTrace:
    """What one spec did to one utterance: fired or not, and with what."""

    index: int
    kind: str
    applied: bool
    params: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class AppliedTrace:
    """Full per-utterance record, sufficient to replay the output bit-exactly."""

    utterance_id: str
    stages: tuple[StageTrace, ...]

    def to_json(self) -> str:
        return json.dumps(
            {
                "utterance_id": self.utterance_id,
                "stages": [
                    {
                        "index": s.index,
                        "kind": s.kind,
                        "applied": s.applied,
                        "params": s.params,
                    }
                    for s in self.stages
                ],
            },
            ensure_ascii=False,
        )

    @classmethod
    def from_json(cls, line: str) -> "AppliedTrace":
        data = json.loads(line)
        stages = tuple(
            StageTrace(
                index=int(s["index"]),
                kind=s["kind"],
                applied=bool(s["applied"]),
                params=dict(s["params"]),
            )
            for s in data["stages"]
        )
        return cls(utterance_id=data["utterance_id"], stages=stages)


def utterance_seed(global_seed: int, utterance_id: str) -> int:
    """Stable 64-bit seed for one utterance.

    Uses blake2b rather than Python's hash(), which is salted per process
    and would wreck cross-run reproducibility.
    """
    digest = hashlib.blake2b(
        f"{global_seed}\x1f{utterance_id}".encode("utf-8"), digest_size=8
    ).digest()
    return int.from_bytes(digest, "little")


def _uniform(u: float, low: float, high: float) -> float:
    return low + u * (high - low)


def _needs_bank(config: ChainConfig) -> bool:
    return any(s.kind == KIND_NOISE_MIX and s.probability > 0.0 for s in config.specs)


def _run_noise_stage(
    buffer: AudioBuffer,
    spec: EffectSpec,
    bank: NoiseBank,
    snr_db: float,
    u_count: float,
    u_pairs: np.ndarray,
) -> tuple[AudioBuffer, dict[str, Any]]:
    count = min(spec.max_segments, 1 + int(u_count * spec.max_segments))
    n = len(buffer)
    segments = []
    ids = []
    offsets = []
    for j in range(count):
        entry = bank.entries[min(len(bank) - 1, int(u_pairs[2 * j] * len(bank)))]
        offset = min(n - 1, int(u_pairs[2 * j + 1] * n))
        segments.append((entry.buffer.samples.astype(np.float64), offset))
        ids.append(entry.id)
        offsets.append(offset)
    out, _track, gain, scale, degenerate = _mix_segments(
        buffer.samples.astype(np.float64), segments, snr_db
    )
    params = {
        "snr_db": snr_db,
        "entries": ids,
        "offsets": offsets,
        "gain": gain,
        "peak_scale": scale,
        "degenerate": degenerate,
    }
    if degenerate:
        return AudioBuffer(buffer.samples, buffer.sample_rate), params
    return AudioBuffer(out, buffer.sample_rate), params


def apply_chain(
    config: ChainConfig,
    buffer: AudioBuffer,
    utterance_id: str,
    bank: NoiseBank | None = None,
) -> tuple[AudioBuffer, AppliedTrace]:
    """Run one utterance through the chain.

    Specs are applied from the last to the first. Per spec, one uniform
    draw gates the effect against its probability and further draws pick
    its parameters; the draws happen whether or not the effect fires, so
    changing one spec's probability never shifts the random values any
    other spec sees. Returns the output and a trace of what fired.
    """
    if len(buffer) == 0:
        raise ValueError("cannot augment an empty buffer")
    if _needs_bank(config):
        if bank is None or len(bank) == 0:
            raise EmptyNoiseBank("this chain mixes noise but no bank entries were given")
        bank = bank.at_rate(buffer.sample_rate)

    rng = np.random.Generator(np.random.PCG64(utterance_seed(config.global_seed, utterance_id)))
    current = buffer
    stages: list[StageTrace | None] = [None] * len(config.specs)
    for pos in range(len(config.specs) - 1, -1, -1):
        spec = config.specs[pos]
        index = pos + 1
        low, high = spec.param_range
        u_gate = rng.random()
        applied = u_gate < spec.probability
        params: dict[str, Any] = {}
        try:
            if spec.kind == KIND_NOISE_MIX:
                u_snr = rng.random()
                u_count = rng.random()
                u_pairs = rng.random(2 * spec.max_segments)
                if applied:
                    current, params = _run_noise_stage(
                        current, spec, bank, _uniform(u_snr, low, high), u_count, u_pairs
                    )
            else:
                u_param = rng.random()
                if applied:
                    value = _uniform(u_param, low, high)
                    if spec.kind == KIND_SPEED:
                        current = apply_speed(current, value)
                        params = {"factor": value}
                    elif spec.kind == KIND_PITCH:
                        current = apply_pitch(current, value)
                        params = {"factor": value}
                    else:
                        current = apply_lowpass(current, value)
                        params = {"cutoff_hz": value}
        except SpeechAugError as err:
            raise ChainStageError(index, spec.kind, err) from err
        stages[pos] = StageTrace(index=index, kind=spec.kind, applied=applied, params=params)

    trace = AppliedTrace(utterance_id=utterance_id, stages=tuple(stages))  # type: ignore[arg-type]
    return AudioBuffer(current.samples, current.sample_rate), trace


def replay_trace(
    config: ChainConfig,
    buffer: AudioBuffer,
    trace: AppliedTrace,
    bank: NoiseBank | None = None,
) -> AudioBuffer:
    """Re-apply exactly what a trace records, bypassing all randomness.

    Given the same input buffer, the same chain and the bank the trace's
    noise entries came from, the result is bit-identical to the original
    apply_chain output.
    """
    if len(trace.stages) != len(config.specs):
        raise ValueError("trace does not match the chain's spec count")
    current = buffer
    for stage in sorted(trace.stages, key=lambda s: -s.index):
        if not stage.applied:
            continue
        spec = config.specs[stage.index - 1]
        if stage.kind != spec.kind:
            raise ValueError(
                f"trace stage {stage.index} is {stage.kind!r}, chain has {spec.kind!r}"
            )
        try:
            if stage.kind == KIND_SPEED:
                current = apply_speed(current, float(stage.params["factor"]))
            elif stage.kind == KIND_PITCH:
                current = apply_pitch(current, float(stage.params["factor"]))
            elif stage.kind == KIND_LOWPASS:
                current = apply_lowpass(current, float(stage.params["cutoff_hz"]))
            else:
                if stage.params.get("degenerate"):
                    continue
                if bank is None or len(bank) == 0:
                    raise EmptyNoiseBank("replaying a noise stage needs the original bank")
                aligned = bank.at_rate(current.sample_rate)
                segments = [
                    (aligned.entry(eid).buffer.samples.astype(np.float64), int(off))
                    for eid, off in zip(stage.params["entries"], stage.params["offsets"])
                ]
                out, _track, _gain, _scale, degenerate = _mix_segments(
                    current.samples.astype(np.float64),
                    segments,
                    float(stage.params["snr_db"]),
                )
                if not degenerate:
                    current = AudioBuffer(out, current.sample_rate)
        except SpeechAugError as err:
            raise ChainStageError(stage.index, stage.kind, err) from err
    return AudioBuffer(current.samples, current.sample_rate)
