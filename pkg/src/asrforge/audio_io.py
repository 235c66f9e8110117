"""WAV reading/writing, resampling and level measurement.

Everything downstream works on :class:`AudioClip`: mono float64 samples in
[-1, 1] plus a sample rate. Readers accept PCM-16 and IEEE float-32 RIFF
files with 1 or 2 channels; the writer emits PCM-16 mono only.
"""

from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.signal import firwin, resample_poly

from .errors import CorruptHeader, EmptyAudio, IoFailure, UnsupportedFormat

log = logging.getLogger(__name__)

CANONICAL_SAMPLE_RATE = 16000

# RMS amplitude below this is treated as silence (dBFS would be ~ -160).
SILENCE_RMS = 1e-8

_PCM16_FULL_SCALE = 32768.0
_WAVE_FORMAT_PCM = 0x0001
_WAVE_FORMAT_IEEE_FLOAT = 0x0003
_WAVE_FORMAT_EXTENSIBLE = 0xFFFE


@dataclass
class AudioClip:
    """Mono audio buffer. ``samples`` is 1-D float64 in [-1, 1]."""

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError("AudioClip samples must be 1-D (mono)")
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz

    def copy(self) -> "AudioClip":
        return AudioClip(self.samples.copy(), self.sample_rate_hz)


@dataclass(frozen=True)
class LevelStats:
    """RMS/peak level in dBFS (full scale = 1.0). Silent clips report -inf."""

    rms_dbfs: float
    peak_dbfs: float
    is_silent: bool


def hard_clip(samples: np.ndarray) -> tuple[np.ndarray, int]:
    """Clamp to [-1, 1]; returns (clipped array, number of samples clamped)."""
    count = int(np.count_nonzero((samples > 1.0) | (samples < -1.0)))
    if count:
        samples = np.clip(samples, -1.0, 1.0)
    return samples, count


def level_stats(clip: AudioClip) -> LevelStats:
    """Measure RMS and peak level of a non-empty clip."""
    if len(clip.samples) == 0:
        raise EmptyAudio("cannot measure level of an empty clip")
    rms = math.sqrt(float(np.mean(np.square(clip.samples))))
    peak = float(np.max(np.abs(clip.samples)))
    if rms < SILENCE_RMS:
        peak_db = 20.0 * math.log10(peak) if peak > 0.0 else float("-inf")
        return LevelStats(rms_dbfs=float("-inf"), peak_dbfs=peak_db, is_silent=True)
    return LevelStats(
        rms_dbfs=20.0 * math.log10(rms),
        peak_dbfs=20.0 * math.log10(peak),
        is_silent=False,
    )


def _parse_fmt_chunk(payload: bytes) -> tuple[int, int, int, int]:
    if len(payload) < 16:
        raise CorruptHeader("fmt chunk shorter than 16 bytes")
    fmt_tag, channels, sample_rate, _byte_rate, _block_align, bits = struct.unpack(
        "<HHIIHH", payload[:16]
    )
    if fmt_tag == _WAVE_FORMAT_EXTENSIBLE:
        # sub-format GUID starts with the real format code
        if len(payload) < 26:
            raise CorruptHeader("extensible fmt chunk truncated")
        fmt_tag = struct.unpack_from("<H", payload, 24)[0]
    return fmt_tag, channels, sample_rate, bits


def read_wav(path: str | Path) -> AudioClip:
    """Read a PCM-16 or float-32 RIFF/WAVE file as a mono clip.

    Stereo input is mixed down by per-sample channel mean. Float payloads
    outside [-1, 1] are clamped. The file's sample rate is preserved.
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        raise IoFailure(f"no such file: {path}") from None
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc

    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise CorruptHeader(f"{path}: not a RIFF/WAVE file")

    fmt: tuple[int, int, int, int] | None = None
    payload: bytes | None = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos : pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8 : pos + 8 + size]
        if chunk_id == b"fmt ":
            fmt = _parse_fmt_chunk(body)
        elif chunk_id == b"data":
            if len(body) < size:
                raise CorruptHeader(f"{path}: data chunk truncated")
            payload = body
        pos += 8 + size + (size & 1)

    if fmt is None or payload is None:
        raise CorruptHeader(f"{path}: missing fmt or data chunk")
    fmt_tag, channels, sample_rate, bits = fmt
    if sample_rate <= 0:
        raise CorruptHeader(f"{path}: invalid sample rate {sample_rate}")
    if channels not in (1, 2):
        raise UnsupportedFormat(f"{path}: {channels} channels (only mono/stereo)")

    if fmt_tag == _WAVE_FORMAT_PCM and bits == 16:
        raw = np.frombuffer(payload[: len(payload) - len(payload) % 2], dtype="<i2")
        samples = raw.astype(np.float64) / _PCM16_FULL_SCALE
    elif fmt_tag == _WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        raw = np.frombuffer(payload[: len(payload) - len(payload) % 4], dtype="<f4")
        samples, clipped = hard_clip(raw.astype(np.float64))
        if clipped:
            log.warning("%s: %d float samples outside [-1,1] clamped", path, clipped)
    else:
        raise UnsupportedFormat(
            f"{path}: format tag {fmt_tag} with {bits}-bit samples "
            "(only PCM-16 and IEEE float-32)"
        )

    if channels == 2:
        samples = samples[: len(samples) - len(samples) % 2]
        samples = samples.reshape(-1, 2).mean(axis=1)
    if len(samples) == 0:
        raise EmptyAudio(f"{path}: zero samples")
    return AudioClip(samples, int(sample_rate))


def write_wav(clip: AudioClip, path: str | Path) -> int:
    """Write a clip as PCM-16 mono WAV. Returns the clipped-sample count.

    Quantization is round(s * 32768) clamped to the int16 range, so reading
    back reproduces every sample within one 16-bit step (1/32768) and full
    scale maps to 32767/32768.
    """
    samples, clipped = hard_clip(clip.samples)
    if clipped:
        log.warning("%s: %d samples hard-clipped on write", path, clipped)
    pcm = np.minimum(np.round(samples * 32768.0), 32767.0).astype("<i2")
    payload = pcm.tobytes()
    header = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    header += b"fmt " + struct.pack(
        "<IHHIIHH",
        16,
        _WAVE_FORMAT_PCM,
        1,
        clip.sample_rate_hz,
        clip.sample_rate_hz * 2,
        2,
        16,
    )
    header += b"data" + struct.pack("<I", len(payload))
    path = Path(path)
    try:
        path.write_bytes(header + payload)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return clipped


@lru_cache(maxsize=256)
def _design_filter(up: int, down: int) -> np.ndarray:
    # 64 taps per polyphase branch, Kaiser beta 8.6; odd length keeps the
    # group delay an integer so resample_poly centers output exactly.
    taps = 64 * up + 1
    return firwin(taps, 1.0 / max(up, down), window=("kaiser", 8.6))


def resample_rational(samples: np.ndarray, up: int, down: int) -> np.ndarray:
    """Polyphase windowed-sinc resample by the rational factor up/down."""
    g = math.gcd(up, down)
    up //= g
    down //= g
    if up == down:
        return samples.copy()
    return resample_poly(samples, up, down, window=_design_filter(up, down))


def resample(clip: AudioClip, target_hz: int) -> AudioClip:
    """Band-limited resample to ``target_hz``.

    Output length is round(len * target / source); a clip resampled to its
    own rate comes back unchanged.
    """
    if target_hz <= 0:
        raise ValueError("target_hz must be positive")
    if len(clip.samples) == 0:
        raise EmptyAudio("cannot resample an empty clip")
    if target_hz == clip.sample_rate_hz:
        return clip.copy()
    out = resample_rational(clip.samples, target_hz, clip.sample_rate_hz)
    n_out = int(math.floor(len(clip.samples) * target_hz / clip.sample_rate_hz + 0.5))
    if len(out) > n_out:
        out = out[:n_out]
    elif len(out) < n_out:
        out = np.concatenate([out, np.zeros(n_out - len(out))])
    return AudioClip(out, target_hz)
