"""Pluggable translation, synthesis and unitization ports, plus mocks.

The pipeline only ever sees these interfaces. The bundled mocks are
deterministic functions of their inputs, cheap enough to run the whole
pipeline end to end in tests; the subprocess adapters bridge to real
engines over a line-oriented stdin/stdout protocol (documented in the
README).
"""

from __future__ import annotations

import math
import subprocess
from dataclasses import dataclass
from itertools import groupby
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .audio import AudioBuffer, load_wav, resample
from .errors import EmptyText, MockRejected, PortError


@runtime_checkable
class TranslatorPort(Protocol):
    """Synchronous text translation. ``max_concurrency`` is None when the
    implementation is safe for unlimited concurrent calls, else the cap."""

    max_concurrency: int | None

    def translate(self, sentence: str, from_language: str, to_language: str) -> str: ...


@runtime_checkable
class SynthesizerPort(Protocol):
    """Text to speech at a fixed sample rate."""

    sample_rate: int
    max_concurrency: int | None

    def synthesize(self, sentence: str, language: str) -> AudioBuffer: ...


@runtime_checkable
class UnitizerPort(Protocol):
    """Speech to a sequence of discrete unit ids in [0, vocabulary_size)."""

    vocabulary_size: int

    def unitize(self, buffer: AudioBuffer) -> "UnitSequence": ...


@dataclass(frozen=True)
class UnitSequence:
    """Discrete unit ids; ``reduced`` promises no two neighbours are equal."""

    units: tuple[int, ...]
    reduced: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "units", tuple(int(u) for u in self.units))
        if any(u < 0 for u in self.units):
            raise ValueError("unit ids must be non-negative")
        if self.reduced and any(a == b for a, b in zip(self.units, self.units[1:])):
            raise ValueError("sequence is marked reduced but has equal neighbours")

    def __len__(self) -> int:
        return len(self.units)


def reduce_units(sequence: UnitSequence) -> UnitSequence:
    """Collapse consecutive duplicate units into one.

    [5, 5, 7, 7, 7, 5] becomes [5, 7, 5]. Reducing an already-reduced
    sequence returns it unchanged.
    """
    if sequence.reduced:
        return sequence
    return UnitSequence(tuple(key for key, _ in groupby(sequence.units)), reduced=True)


class MockTranslator:
    """Reverses the token order and, by default, prefixes the target
    language in square brackets: "a b c" -> "[tgt] c b a".

    ``tag_output=False`` drops the prefix, leaving plain word reversal.
    Refuses inputs with no tokens.
    """

    max_concurrency: int | None = None

    def __init__(self, tag_output: bool = True):
        self.tag_output = tag_output

    def translate(self, sentence: str, from_language: str, to_language: str) -> str:
        tokens = sentence.split()
        if not tokens:
            raise MockRejected("cannot translate an empty sentence")
        reversed_text = " ".join(reversed(tokens))
        if self.tag_output:
            return f"[{to_language}] {reversed_text}"
        return reversed_text


class MockSynthesizer:
    """Maps each character to a 50 ms sine segment.

    Character with code point c becomes a tone at 200 + 10*(c mod 100) Hz
    with amplitude 0.3, so output duration is exactly 0.05 * len(sentence)
    seconds and identical characters produce identical segments.
    """

    max_concurrency: int | None = None

    def __init__(self, sample_rate: int = 16000):
        if sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        self.sample_rate = sample_rate

    def synthesize(self, sentence: str, language: str) -> AudioBuffer:
        if not sentence:
            raise EmptyText("cannot synthesize an empty sentence")
        segment = round(0.05 * self.sample_rate)
        codes = np.array([ord(ch) for ch in sentence], dtype=np.float64)
        freqs = 200.0 + 10.0 * np.mod(codes, 100.0)
        t = np.arange(segment, dtype=np.float64) / self.sample_rate
        waves = 0.3 * np.sin(2.0 * math.pi * freqs[:, None] * t[None, :])
        return AudioBuffer(waves.ravel(), self.sample_rate)


class MockUnitizer:
    """Frames the signal with a 20 ms hop and quantizes each frame's RMS
    into ``vocabulary_size`` uniform bins over [0, 1]. Silence is unit 0.
    The trailing partial frame, if any, is kept and measured on its own
    samples. Output is unreduced: one unit per frame.
    """

    def __init__(self, vocabulary_size: int, hop_seconds: float = 0.02):
        if vocabulary_size < 2:
            raise ValueError("vocabulary_size must be at least 2")
        if hop_seconds <= 0:
            raise ValueError("hop_seconds must be positive")
        self.vocabulary_size = vocabulary_size
        self.hop_seconds = hop_seconds

    def unitize(self, buffer: AudioBuffer) -> UnitSequence:
        hop = max(1, round(self.hop_seconds * buffer.sample_rate))
        x = buffer.samples.astype(np.float64)
        n = len(x)
        if n == 0:
            return UnitSequence((), reduced=False)
        full = n // hop
        units: list[int] = []
        if full:
            frames = x[: full * hop].reshape(full, hop)
            rms = np.sqrt(np.mean(frames * frames, axis=1))
            k = self.vocabulary_size
            units.extend(int(u) for u in np.minimum(k - 1, (rms * k).astype(np.int64)))
        tail = x[full * hop :]
        if len(tail):
            rms_tail = float(np.sqrt(np.mean(tail * tail)))
            units.append(min(self.vocabulary_size - 1, int(rms_tail * self.vocabulary_size)))
        return UnitSequence(tuple(units), reduced=False)


class _LineProcess:
    """A child process spoken to one line at a time over stdin/stdout."""

    def __init__(self, command: Sequence[str]):
        if not command:
            raise ValueError("command must not be empty")
        self.command = tuple(command)
        self._proc = subprocess.Popen(
            self.command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )

    def request(self, line: str) -> str:
        if "\n" in line:
            raise ValueError("protocol lines must not contain newlines")
        proc = self._proc
        if proc.poll() is not None:
            raise PortError(f"{self.command[0]} exited with code {proc.returncode}")
        assert proc.stdin is not None and proc.stdout is not None
        proc.stdin.write(line + "\n")
        proc.stdin.flush()
        response = proc.stdout.readline()
        if response == "":
            raise PortError(f"{self.command[0]} closed its stdout mid-conversation")
        return response.rstrip("\n")

    def close(self) -> None:
        proc = self._proc
        if proc.poll() is None:
            if proc.stdin is not None:
                proc.stdin.close()
            proc.wait(timeout=10)


class SubprocessTranslator:
    """Adapter around an external line-oriented translation command.

    Protocol: one request per line on the child's stdin,
    ``from_lang<TAB>to_lang<TAB>sentence``, answered by exactly one
    translated line on its stdout. The child must answer requests in order;
    calls are therefore serialized (max_concurrency is 1).
    """

    max_concurrency: int | None = 1

    def __init__(self, command: Sequence[str]):
        self._proc = _LineProcess(command)

    def translate(self, sentence: str, from_language: str, to_language: str) -> str:
        flat = " ".join(sentence.split())
        return self._proc.request(f"{from_language}\t{to_language}\t{flat}")

    def close(self) -> None:
        self._proc.close()

    def __enter__(self) -> "SubprocessTranslator":
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()


class SubprocessSynthesizer:
    """Adapter around an external line-oriented text-to-speech command.

    Protocol: one request per line on the child's stdin,
    ``language<TAB>sentence``, answered by one line holding the path of a
    WAV file the child has finished writing. The file is loaded and, if its
    rate differs from the adapter's declared ``sample_rate``, resampled.
    """

    max_concurrency: int | None = 1

    def __init__(self, command: Sequence[str], sample_rate: int = 16000):
        if sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        self.sample_rate = sample_rate
        self._proc = _LineProcess(command)

    def synthesize(self, sentence: str, language: str) -> AudioBuffer:
        flat = " ".join(sentence.split())
        path = self._proc.request(f"{language}\t{flat}")
        try:
            buffer = load_wav(path)
        except OSError as err:
            raise PortError(f"synthesizer reported {path!r} but it cannot be read: {err}") from err
        if buffer.sample_rate != self.sample_rate:
            buffer = resample(buffer, self.sample_rate)
        return buffer

    def close(self) -> None:
        self._proc.close()

    def __enter__(self) -> "SubprocessSynthesizer":
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()
