"""Speech-translation data synthesis toolkit.

Two halves that meet in a training manifest: an acoustic side (WAV I/O,
resampling, and a probabilistic chain of speed, pitch, low-pass and
SNR-controlled noise perturbations) and a text side (corpus cleaning,
translation through pluggable ports, pair filtering, speech synthesis and
discrete-unit reduction).
"""

from .audio import DEFAULT_SAMPLE_RATE, AudioBuffer, load_wav, resample, save_wav
from .chain import (
    AppliedTrace,
    ChainConfig,
    EffectSpec,
    StageTrace,
    apply_chain,
    default_chain,
    load_chain,
    replay_trace,
    save_chain,
    utterance_seed,
)
from .effects import (
    MixReport,
    NoiseBank,
    NoiseEntry,
    apply_lowpass,
    apply_pitch,
    apply_speed,
    compute_snr,
    mix_noise,
)
from .errors import (
    ChainStageError,
    CutoffAboveNyquist,
    EmptyAudio,
    EmptyCorpus,
    EmptyNoiseBank,
    EmptyText,
    FactorOutOfRange,
    IoFailure,
    LengthMismatch,
    MalformedManifest,
    MalformedWav,
    MockRejected,
    PortError,
    SpeechAugError,
    TranslatorFailure,
    UnsupportedEncoding,
    ZeroNoisePower,
)
from .manifest import (
    BuildOutcome,
    ManifestRecord,
    SamplerConfig,
    build_manifest,
    corpus_stats,
    read_manifest,
    sample_stream,
    write_manifest,
)
from .ports import (
    MockSynthesizer,
    MockTranslator,
    MockUnitizer,
    SubprocessSynthesizer,
    SubprocessTranslator,
    SynthesizerPort,
    TranslatorPort,
    UnitizerPort,
    UnitSequence,
    reduce_units,
)
from .textpipe import (
    CleanResult,
    FilterPolicy,
    RejectionStats,
    RejectReason,
    TextCorpus,
    TextPair,
    clean_sentence,
    filter_pair,
    read_pairs_tsv,
    reservoir_take,
    run_text_stage,
    write_pairs_tsv,
)

__version__ = "0.1.0"

__all__ = [
    "AppliedTrace",
    "AudioBuffer",
    "BuildOutcome",
    "ChainConfig",
    "ChainStageError",
    "CleanResult",
    "CutoffAboveNyquist",
    "DEFAULT_SAMPLE_RATE",
    "EffectSpec",
    "EmptyAudio",
    "EmptyCorpus",
    "EmptyNoiseBank",
    "EmptyText",
    "FactorOutOfRange",
    "FilterPolicy",
    "IoFailure",
    "LengthMismatch",
    "MalformedManifest",
    "MalformedWav",
    "ManifestRecord",
    "MixReport",
    "MockRejected",
    "MockSynthesizer",
    "MockTranslator",
    "MockUnitizer",
    "NoiseBank",
    "NoiseEntry",
    "PortError",
    "RejectReason",
    "RejectionStats",
    "SamplerConfig",
    "SpeechAugError",
    "StageTrace",
    "SubprocessSynthesizer",
    "SubprocessTranslator",
    "SynthesizerPort",
    "TextCorpus",
    "TextPair",
    "TranslatorFailure",
    "TranslatorPort",
    "UnitSequence",
    "UnitizerPort",
    "UnsupportedEncoding",
    "ZeroNoisePower",
    "apply_chain",
    "apply_lowpass",
    "apply_pitch",
    "apply_speed",
    "build_manifest",
    "clean_sentence",
    "compute_snr",
    "corpus_stats",
    "default_chain",
    "filter_pair",
    "load_chain",
    "load_wav",
    "mix_noise",
    "read_manifest",
    "read_pairs_tsv",
    "reduce_units",
    "replay_trace",
    "resample",
    "reservoir_take",
    "run_text_stage",
    "sample_stream",
    "save_chain",
    "save_wav",
    "utterance_seed",
    "write_manifest",
    "write_pairs_tsv",
]
