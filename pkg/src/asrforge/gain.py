"""Corpus mean-gain estimation and RMS gain normalization.

"Gain" here means RMS level in dBFS. The corpus target is the arithmetic
mean of per-clip dBFS levels over the non-silent clips of a split; each
clip is then scaled by a pure gain so its RMS hits that target.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from . import audio_io
from .audio_io import AudioClip, LevelStats
from .corpus import ManifestEntry, Split
from .errors import AllSilent, MissingFile, SilentInput

log = logging.getLogger(__name__)


class GainSource(str, Enum):
    CORPUS_MEAN = "corpus_mean"
    EXPLICIT = "explicit"


@dataclass(frozen=True)
class GainTarget:
    target_rms_dbfs: float
    source: GainSource

    def __post_init__(self):
        if not math.isfinite(self.target_rms_dbfs):
            raise ValueError("target_rms_dbfs must be finite")


def measure_levels(
    entries: list[ManifestEntry], audio_root: str | Path
) -> list[tuple[ManifestEntry, LevelStats]]:
    """level_stats for every entry's audio, in manifest order."""
    root = Path(audio_root)
    out = []
    for entry in entries:
        path = root / entry.audio_path
        if not path.is_file():
            raise MissingFile(f"manifest references missing audio: {path}")
        out.append((entry, audio_io.level_stats(audio_io.read_wav(path))))
    return out


def corpus_mean_gain(
    entries: list[ManifestEntry],
    split_filter: Split,
    audio_root: str | Path,
) -> GainTarget:
    """Mean RMS dBFS over the non-silent clips of one split.

    Silent clips are excluded (and logged); raises AllSilent when nothing
    usable remains. The mean is taken in the dB domain and is independent
    of manifest order.
    """
    selected = [e for e in entries if e.split is split_filter]
    levels = measure_levels(selected, audio_root)
    values = [stats.rms_dbfs for _, stats in levels if not stats.is_silent]
    excluded = len(levels) - len(values)
    if excluded:
        log.warning("corpus_mean_gain: excluded %d silent clip(s)", excluded)
    if not values:
        raise AllSilent(f"no non-silent clip in split {split_filter.value!r}")
    return GainTarget(sum(values) / len(values), GainSource.CORPUS_MEAN)


def apply_gain_db(clip: AudioClip, gain_db: float) -> AudioClip:
    """Scale every sample by 10^(gain_db/20), hard-clipping to [-1, 1]."""
    out, _ = apply_gain_db_counted(clip, gain_db)
    return out


def apply_gain_db_counted(clip: AudioClip, gain_db: float) -> tuple[AudioClip, int]:
    """Like apply_gain_db but also returns the clipped-sample count."""
    if len(clip.samples) == 0:
        raise ValueError("cannot apply gain to an empty clip")
    if gain_db == 0.0:
        return clip.copy(), 0
    scaled = clip.samples * (10.0 ** (gain_db / 20.0))
    scaled, clipped = audio_io.hard_clip(scaled)
    if clipped:
        log.warning("apply_gain_db: %d samples clipped at %+.2f dB", clipped, gain_db)
    return AudioClip(scaled, clip.sample_rate_hz), clipped


def normalize_clip(clip: AudioClip, target: GainTarget) -> AudioClip:
    """Scale a non-silent clip so its RMS equals the target dBFS."""
    out, _, _ = normalize_clip_counted(clip, target)
    return out


def normalize_clip_counted(
    clip: AudioClip, target: GainTarget
) -> tuple[AudioClip, float, int]:
    """Returns (normalized clip, applied gain dB, clipped-sample count)."""
    stats = audio_io.level_stats(clip)
    if stats.is_silent:
        raise SilentInput("cannot normalize a silent clip")
    gain_db = target.target_rms_dbfs - stats.rms_dbfs
    out, clipped = apply_gain_db_counted(clip, gain_db)
    return out, gain_db, clipped
