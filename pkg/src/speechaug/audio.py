"""Mono audio container, WAV file I/O and sample-rate conversion.

Audio is held as float32 samples in [-1, 1] at an explicit sample rate.
Files are read and written as RIFF/WAVE with either 16-bit PCM or 32-bit
IEEE float payloads; everything else is refused with a typed error rather
than decoded approximately.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import EmptyAudio, IoFailure, MalformedWav, UnsupportedEncoding

DEFAULT_SAMPLE_RATE = 16000

PCM16_SCALE = 32768.0

# Windowed-sinc kernel length. 64 taps keeps the resampler deterministic and
# dependency-free while holding aliasing well below the tolerances of the
# speed/pitch effects built on top of it.
RESAMPLE_TAPS = 64

_RESAMPLE_BLOCK = 65536

_WAVE_FORMAT_PCM = 0x0001
_WAVE_FORMAT_IEEE_FLOAT = 0x0003


@dataclass(frozen=True, eq=False)
class AudioBuffer:
    """Immutable mono audio: float32 samples plus a sample rate.

    The constructor rejects NaN/inf and clamps samples into [-1, 1], so a
    buffer that came out of any operation in this package is always safe to
    hand to the next one.
    """

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self) -> None:
        if int(self.sample_rate) <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "sample_rate", int(self.sample_rate))
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("samples must be one-dimensional (mono)")
        if samples.size and not np.all(np.isfinite(samples)):
            raise ValueError("samples contain NaN or infinity")
        samples = np.clip(samples, -1.0, 1.0).astype(np.float32)
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return int(self.samples.shape[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AudioBuffer):
            return NotImplemented
        return self.sample_rate == other.sample_rate and np.array_equal(
            self.samples, other.samples
        )

    __hash__ = None  # type: ignore[assignment]

    @property
    def duration_seconds(self) -> float:
        return len(self) / self.sample_rate


def _decode_pcm16(payload: bytes) -> np.ndarray:
    codes = np.frombuffer(payload, dtype="<i2")
    return codes.astype(np.float32) / PCM16_SCALE


def _decode_float32(payload: bytes) -> np.ndarray:
    return np.frombuffer(payload, dtype="<f4").astype(np.float32)


def load_wav(path: str | Path) -> AudioBuffer:
    """Read a RIFF/WAVE file into an AudioBuffer.

    Accepts 16-bit PCM and 32-bit IEEE float payloads, mono or stereo
    (stereo is downmixed by averaging the channels). Chunks other than
    ``fmt `` and ``data`` are skipped. PCM16 samples are scaled by 1/32768.

    Raises MalformedWav for container damage, UnsupportedEncoding for
    valid containers in encodings we do not decode, and EmptyAudio for a
    zero-length data payload.
    """
    data = Path(path).read_bytes()
    if len(data) < 12 or data[0:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise MalformedWav(f"{path}: missing RIFF/WAVE header")

    fmt_fields: tuple[int, int, int, int] | None = None
    payload: bytes | None = None
    offset = 12
    while offset + 8 <= len(data):
        chunk_id = data[offset : offset + 4]
        (chunk_size,) = struct.unpack_from("<I", data, offset + 4)
        body_start = offset + 8
        if body_start + chunk_size > len(data):
            raise MalformedWav(f"{path}: chunk {chunk_id!r} overruns the file")
        if chunk_id == b"fmt ":
            if chunk_size < 16:
                raise MalformedWav(f"{path}: fmt chunk too short")
            tag, channels, rate, _byte_rate, _block, bits = struct.unpack_from(
                "<HHIIHH", data, body_start
            )
            fmt_fields = (tag, channels, rate, bits)
        elif chunk_id == b"data":
            if fmt_fields is None:
                raise MalformedWav(f"{path}: data chunk before fmt chunk")
            payload = data[body_start : body_start + chunk_size]
            break
        # any other chunk is skipped; chunk bodies are word-aligned
        offset = body_start + chunk_size + (chunk_size & 1)

    if fmt_fields is None:
        raise MalformedWav(f"{path}: no fmt chunk")
    if payload is None:
        raise MalformedWav(f"{path}: no data chunk")

    tag, channels, rate, bits = fmt_fields
    if rate <= 0:
        raise MalformedWav(f"{path}: invalid sample rate {rate}")
    if channels not in (1, 2):
        raise UnsupportedEncoding(f"{path}: {channels} channels (mono or stereo only)")
    if tag == _WAVE_FORMAT_PCM and bits == 16:
        decode, sample_bytes = _decode_pcm16, 2
    elif tag == _WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        decode, sample_bytes = _decode_float32, 4
    else:
        raise UnsupportedEncoding(
            f"{path}: format tag {tag} with {bits}-bit samples is not supported"
        )

    frame_bytes = sample_bytes * channels
    if len(payload) % frame_bytes:
        raise MalformedWav(f"{path}: data chunk holds a partial frame")
    if not payload:
        raise EmptyAudio(f"{path}: data chunk is empty")

    samples = decode(payload)
    if channels == 2:
        samples = samples.reshape(-1, 2).mean(axis=1, dtype=np.float64)
    return AudioBuffer(samples, rate)


def save_wav(buffer: AudioBuffer, path: str | Path, encoding: str = "float32") -> None:
    """Write a buffer as a RIFF/WAVE file.

    ``encoding`` is "pcm16" or "float32". PCM16 conversion rounds and then
    clamps to the int16 range, so a sample of exactly 1.0 is stored as the
    largest positive code instead of wrapping around.
    """
    if len(buffer) == 0:
        raise EmptyAudio("refusing to write a WAV with no samples")
    if encoding == "pcm16":
        codes = np.round(buffer.samples.astype(np.float64) * PCM16_SCALE)
        payload = np.clip(codes, -32768, 32767).astype("<i2").tobytes()
        tag, bits = _WAVE_FORMAT_PCM, 16
    elif encoding == "float32":
        payload = buffer.samples.astype("<f4").tobytes()
        tag, bits = _WAVE_FORMAT_IEEE_FLOAT, 32
    else:
        raise ValueError(f"unknown encoding {encoding!r}")

    block = bits // 8
    fmt_body = struct.pack(
        "<HHIIHH", tag, 1, buffer.sample_rate, buffer.sample_rate * block, block, bits
    )
    body = b"WAVE"
    body += b"fmt " + struct.pack("<I", len(fmt_body)) + fmt_body
    if tag == _WAVE_FORMAT_IEEE_FLOAT:
        # non-PCM encodings carry a fact chunk with the frame count
        body += b"fact" + struct.pack("<II", 4, len(buffer))
    body += b"data" + struct.pack("<I", len(payload)) + payload
    try:
        Path(path).write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)
    except OSError as err:
        raise IoFailure(f"could not write {path}: {err}") from err


def _round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def _resample_ratio(x: np.ndarray, ratio: float) -> np.ndarray:
    """Resample a float array by an arbitrary rate ratio (out/in).

    Windowed-sinc interpolation with a fixed 64-tap Hann-windowed kernel.
    When downsampling the sinc cutoff is lowered to the output Nyquist so
    the kernel doubles as the anti-aliasing filter. Each output sample is
    normalized by its kernel sum, which pins the passband gain at 1.
    """
    n = len(x)
    n_out = _round_half_up(n * ratio)
    if n_out <= 0 or n == 0:
        return np.zeros(max(n_out, 0), dtype=np.float64)

    half = RESAMPLE_TAPS // 2
    offsets = np.arange(1 - half, half + 1, dtype=np.int64)
    cutoff = 0.5 * min(1.0, ratio)
    out = np.empty(n_out, dtype=np.float64)
    for start in range(0, n_out, _RESAMPLE_BLOCK):
        stop = min(start + _RESAMPLE_BLOCK, n_out)
        pos = np.arange(start, stop, dtype=np.float64) / ratio
        base = np.floor(pos).astype(np.int64)
        idx = base[:, None] + offsets[None, :]
        delta = pos[:, None] - idx
        kernel = 2.0 * cutoff * np.sinc(2.0 * cutoff * delta)
        kernel *= 0.5 + 0.5 * np.cos((np.pi / half) * delta)
        inside = (idx >= 0) & (idx < n)
        gathered = np.where(inside, x[np.clip(idx, 0, n - 1)], 0.0)
        ksum = kernel.sum(axis=1)
        out[start:stop] = (gathered * kernel).sum(axis=1) / np.maximum(ksum, 1e-12)
    return out


def resample(buffer: AudioBuffer, target_rate: int) -> AudioBuffer:
    """Convert a buffer to ``target_rate``.

    Output length is round(len * target_rate / source_rate). Resampling to
    the current rate returns an identical copy.
    """
    if target_rate <= 0:
        raise ValueError(f"target_rate must be positive, got {target_rate}")
    if target_rate == buffer.sample_rate:
        return AudioBuffer(buffer.samples, buffer.sample_rate)
    x = buffer.samples.astype(np.float64)
    y = _resample_ratio(x, target_rate / buffer.sample_rate)
    return AudioBuffer(y, target_rate)
