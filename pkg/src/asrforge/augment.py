"""Selective noise insertion: five transforms, one chosen per eligible file.

Clips whose dataset is in the policy's low-noise set receive exactly one of
{additive noise, room impulse response, gain perturbation, pitch shift,
Gaussian noise}, chosen uniformly by a per-file seed; everything else passes
through untouched. Every application is captured as a NoiseAction that can
be serialized to JSON and replayed bit-identically.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.signal import fftconvolve

from . import audio_io
from .audio_io import AudioClip
from .corpus import ManifestEntry
from .errors import (
    EmptyRir,
    NoiseBankEmpty,
    RirBankEmpty,
    SilentNoise,
    SilentSignal,
)
from .gain import apply_gain_db_counted
from .seeds import file_seed


class NoiseKind(str, Enum):
    ADDITIVE_NOISE = "additive_noise"
    ROOM_IMPULSE_RESPONSE = "room_impulse_response"
    GAIN_PERTURB = "gain_perturb"
    PITCH_SHIFT = "pitch_shift"
    GAUSSIAN_NOISE = "gaussian_noise"


# Fixed draw order; the per-file RNG indexes into this tuple.
_KIND_ORDER = (
    NoiseKind.ADDITIVE_NOISE,
    NoiseKind.ROOM_IMPULSE_RESPONSE,
    NoiseKind.GAIN_PERTURB,
    NoiseKind.PITCH_SHIFT,
    NoiseKind.GAUSSIAN_NOISE,
)


@dataclass(frozen=True)
class NoiseAction:
    """One applied transform; params plus seed fully determine the output."""

    kind: NoiseKind
    params: dict
    seed: int

    def to_json(self) -> str:
        return json.dumps(
            {"kind": self.kind.value, "params": self.params, "seed": self.seed},
            ensure_ascii=False,
            sort_keys=True,
        )

    @staticmethod
    def from_json(text: str) -> "NoiseAction":
        obj = json.loads(text)
        return NoiseAction(NoiseKind(obj["kind"]), obj["params"], int(obj["seed"]))


@dataclass(frozen=True)
class ParamRanges:
    """Uniform sampling ranges. Defaults are toolkit choices, not reported
    values; override via configuration when a protocol specifies its own."""

    additive_snr_db: tuple[float, float] = (5.0, 30.0)
    gaussian_snr_db: tuple[float, float] = (10.0, 40.0)
    gain_db: tuple[float, float] = (-6.0, 6.0)
    pitch_semitones: tuple[float, float] = (-2.0, 2.0)
    rir_wet_level: tuple[float, float] = (0.3, 1.0)


@dataclass(frozen=True)
class AugmentPolicy:
    low_noise_datasets: frozenset[str] = frozenset({"MLS", "CETUC"})
    noise_dir: Path | None = None
    rir_dir: Path | None = None
    ranges: ParamRanges = field(default_factory=ParamRanges)
    global_seed: int = 0


@dataclass(frozen=True)
class Banks:
    """Lexicographically sorted WAV banks, loaded once and then read-only."""

    noise_files: tuple[str, ...]
    rir_files: tuple[str, ...]
    noise_dir: Path | None
    rir_dir: Path | None


def _list_bank(directory: Path | None) -> tuple[str, ...]:
    if directory is None or not Path(directory).is_dir():
        return ()
    return tuple(sorted(p.name for p in Path(directory).glob("*.wav")))


def load_banks(policy: AugmentPolicy) -> Banks:
    return Banks(
        noise_files=_list_bank(policy.noise_dir),
        rir_files=_list_bank(policy.rir_dir),
        noise_dir=policy.noise_dir,
        rir_dir=policy.rir_dir,
    )


@lru_cache(maxsize=64)
def _cached_clip(path: str) -> AudioClip:
    return audio_io.read_wav(path)


def mix_additive(clip: AudioClip, noise: AudioClip, snr_db: float) -> AudioClip:
    """Mix looped/cropped noise into the clip at the requested SNR.

    SNR is 20*log10(rms_signal / rms_scaled_noise) measured over the mixed
    segment; the sum is hard-clipped to [-1, 1].
    """
    if not math.isfinite(snr_db):
        raise ValueError("snr_db must be finite")
    if clip.sample_rate_hz != noise.sample_rate_hz:
        raise ValueError("clip and noise sample rates differ; resample the noise first")
    sig_stats = audio_io.level_stats(clip)
    if sig_stats.is_silent:
        raise SilentSignal("cannot set an SNR against a silent signal")
    if len(noise.samples) == 0:
        raise SilentNoise("noise clip has no samples")

    n = len(clip.samples)
    reps = -(-n // len(noise.samples))  # ceil division
    tiled = np.tile(noise.samples, reps)[:n]
    noise_rms = math.sqrt(float(np.mean(np.square(tiled))))
    if noise_rms < audio_io.SILENCE_RMS:
        raise SilentNoise("noise segment is silent")

    signal_rms = 10.0 ** (sig_stats.rms_dbfs / 20.0)
    scale = signal_rms * 10.0 ** (-snr_db / 20.0) / noise_rms
    mixed, _ = audio_io.hard_clip(clip.samples + tiled * scale)
    return AudioClip(mixed, clip.sample_rate_hz)


def convolve_rir(clip: AudioClip, rir: AudioClip, wet_level: float) -> AudioClip:
    """Wet/dry mix of the clip with its reverberant version.

    The impulse response is normalized to unit peak, the full convolution is
    truncated to the clip length, and the result is scaled back to the dry
    clip's RMS so reverberation does not disturb gain normalization.
    """
    if not 0.0 <= wet_level <= 1.0:
        raise ValueError("wet_level must be in [0, 1]")
    if clip.sample_rate_hz != rir.sample_rate_hz:
        raise ValueError("clip and RIR sample rates differ; resample the RIR first")
    if len(rir.samples) == 0:
        raise EmptyRir("impulse response has no samples")
    peak = float(np.max(np.abs(rir.samples)))
    if peak == 0.0:
        raise EmptyRir("impulse response is identically zero")
    if wet_level == 0.0:
        return clip.copy()

    kernel = rir.samples / peak
    wet = fftconvolve(clip.samples, kernel)[: len(clip.samples)]
    out = (1.0 - wet_level) * clip.samples + wet_level * wet

    dry_rms = math.sqrt(float(np.mean(np.square(clip.samples))))
    out_rms = math.sqrt(float(np.mean(np.square(out))))
    if out_rms > 0.0:
        out = out * (dry_rms / out_rms)
    out, _ = audio_io.hard_clip(out)
    return AudioClip(out, clip.sample_rate_hz)


def pitch_shift(clip: AudioClip, semitones: float) -> AudioClip:
    """Resampling-based pitch shift: +s semitones scales frequencies by
    2^(s/12) and shortens the clip by the same factor."""
    if len(clip.samples) == 0:
        raise ValueError("cannot pitch-shift an empty clip")
    if semitones == 0.0:
        return clip.copy()
    rate = 2.0 ** (semitones / 12.0)
    ratio = Fraction(1.0 / rate).limit_denominator(200)
    out = audio_io.resample_rational(clip.samples, ratio.numerator, ratio.denominator)
    n_out = int(math.floor(len(clip.samples) / rate + 0.5))
    if len(out) > n_out:
        out = out[:n_out]
    elif len(out) < n_out:
        out = np.concatenate([out, np.zeros(n_out - len(out))])
    out, _ = audio_io.hard_clip(out)
    return AudioClip(out, clip.sample_rate_hz)


def add_gaussian(clip: AudioClip, snr_db: float, seed: int) -> AudioClip:
    """Add i.i.d. zero-mean Gaussian noise at the requested SNR.

    sigma is chosen so the noise RMS satisfies the same SNR equation as
    mix_additive; output is bit-reproducible for a given seed.
    """
    if not math.isfinite(snr_db):
        raise ValueError("snr_db must be finite")
    stats = audio_io.level_stats(clip)
    if stats.is_silent:
        raise SilentSignal("cannot set an SNR against a silent signal")
    signal_rms = 10.0 ** (stats.rms_dbfs / 20.0)
    sigma = signal_rms * 10.0 ** (-snr_db / 20.0)
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(len(clip.samples)) * sigma
    out, _ = audio_io.hard_clip(clip.samples + noise)
    return AudioClip(out, clip.sample_rate_hz)


def _uniform(rng: np.random.Generator, bounds: tuple[float, float]) -> float:
    return float(rng.uniform(bounds[0], bounds[1]))


def draw_action(
    entry: ManifestEntry, policy: AugmentPolicy, banks: Banks
) -> NoiseAction | None:
    """Sample the NoiseAction for one manifest entry (None if not eligible).

    All randomness comes from the per-file seed, so the draw is independent
    of processing order. Bank files are picked by index into the sorted
    file list.
    """
    if entry.dataset not in policy.low_noise_datasets:
        return None
    seed = file_seed(policy.global_seed, entry.audio_path)
    rng = np.random.default_rng(seed)
    kind = _KIND_ORDER[int(rng.integers(0, len(_KIND_ORDER)))]
    ranges = policy.ranges

    if kind is NoiseKind.ADDITIVE_NOISE:
        if not banks.noise_files:
            raise NoiseBankEmpty("additive noise chosen but the noise bank is empty")
        idx = int(rng.integers(0, len(banks.noise_files)))
        params = {
            "noise_file": banks.noise_files[idx],
            "snr_db": _uniform(rng, ranges.additive_snr_db),
        }
    elif kind is NoiseKind.ROOM_IMPULSE_RESPONSE:
        if not banks.rir_files:
            raise RirBankEmpty("RIR chosen but the impulse-response bank is empty")
        idx = int(rng.integers(0, len(banks.rir_files)))
        params = {
            "rir_file": banks.rir_files[idx],
            "wet_level": _uniform(rng, ranges.rir_wet_level),
        }
    elif kind is NoiseKind.GAIN_PERTURB:
        params = {"gain_db": _uniform(rng, ranges.gain_db)}
    elif kind is NoiseKind.PITCH_SHIFT:
        params = {"semitones": _uniform(rng, ranges.pitch_semitones)}
    else:
        params = {
            "snr_db": _uniform(rng, ranges.gaussian_snr_db),
            "noise_seed": int(rng.integers(0, 2**63)),
        }
    return NoiseAction(kind=kind, params=params, seed=seed)


def apply_action(clip: AudioClip, action: NoiseAction, banks: Banks) -> AudioClip:
    """Apply a recorded action; replays produce bit-identical audio."""
    params = action.params
    if action.kind is NoiseKind.ADDITIVE_NOISE:
        if banks.noise_dir is None:
            raise NoiseBankEmpty("action requires a noise bank directory")
        noise = _cached_clip(str(Path(banks.noise_dir) / params["noise_file"]))
        if noise.sample_rate_hz != clip.sample_rate_hz:
            noise = audio_io.resample(noise, clip.sample_rate_hz)
        return mix_additive(clip, noise, params["snr_db"])
    if action.kind is NoiseKind.ROOM_IMPULSE_RESPONSE:
        if banks.rir_dir is None:
            raise RirBankEmpty("action requires an impulse-response bank directory")
        rir = _cached_clip(str(Path(banks.rir_dir) / params["rir_file"]))
        if rir.sample_rate_hz != clip.sample_rate_hz:
            rir = audio_io.resample(rir, clip.sample_rate_hz)
        return convolve_rir(clip, rir, params["wet_level"])
    if action.kind is NoiseKind.GAIN_PERTURB:
        out, _ = apply_gain_db_counted(clip, params["gain_db"])
        return out
    if action.kind is NoiseKind.PITCH_SHIFT:
        return pitch_shift(clip, params["semitones"])
    return add_gaussian(clip, params["snr_db"], params["noise_seed"])


def select_and_apply(
    entry: ManifestEntry,
    clip: AudioClip,
    policy: AugmentPolicy,
    banks: Banks | None = None,
) -> tuple[AudioClip, NoiseAction | None]:
    """Apply the policy to one clip; returns the action taken, if any."""
    if banks is None:
        banks = load_banks(policy)
    action = draw_action(entry, policy, banks)
    if action is None:
        return clip, None
    return apply_action(clip, action, banks), action
