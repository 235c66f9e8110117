"""Manifest schema, dataset/split/track taxonomy, stats and validation.

A manifest is UTF-8 CSV with header
``audio_path,text,duration_s,dataset,speech_style,variant,split``.
Enum columns use lowercase snake values ("prepared", "pt_br", "train").
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import IoFailure, ManifestError, MissingHeader
from . import audio_io

MANIFEST_HEADER = [
    "audio_path",
    "text",
    "duration_s",
    "dataset",
    "speech_style",
    "variant",
    "split",
]

# Dev-set breakdown column order used by the report renderer; datasets not
# listed here follow alphabetically.
CANONICAL_DATASET_ORDER = ("ALIP", "NURC-Recife", "C-ORAL-BRASIL I", "SP2010")


class SpeechStyle(str, Enum):
    PREPARED = "prepared"
    SPONTANEOUS = "spontaneous"


class Variant(str, Enum):
    PT_BR = "pt_br"
    PT_PT = "pt_pt"


class Split(str, Enum):
    TRAIN = "train"
    DEV = "dev"
    TEST = "test"


class Track(str, Enum):
    PREPARED_PT_BR = "prepared_pt_br"
    PREPARED_PT_PT = "prepared_pt_pt"
    SPONTANEOUS = "spontaneous"
    MIXED = "mixed"


@dataclass
class ManifestEntry:
    audio_path: str
    text: str
    duration_s: float
    dataset: str
    speech_style: SpeechStyle
    variant: Variant
    split: Split


def load_manifest(path: str | Path) -> list[ManifestEntry]:
    """Parse a manifest CSV; collects every bad row before raising."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise IoFailure(f"no such manifest: {path}") from None
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return parse_manifest(text)


def parse_manifest(text: str) -> list[ManifestEntry]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise MissingHeader("manifest is empty") from None
    if header != MANIFEST_HEADER:
        raise MissingHeader(
            f"expected header {','.join(MANIFEST_HEADER)}, got {','.join(header)}"
        )

    entries: list[ManifestEntry] = []
    problems: list[tuple[int, str]] = []
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(MANIFEST_HEADER):
            problems.append((line_no, f"expected {len(MANIFEST_HEADER)} fields, got {len(row)}"))
            continue
        audio_path, entry_text, duration_raw, dataset, style_raw, variant_raw, split_raw = row
        try:
            duration = float(duration_raw)
            if duration < 0 or duration != duration:
                raise ValueError
        except ValueError:
            problems.append((line_no, f"bad duration {duration_raw!r}"))
            continue
        try:
            style = SpeechStyle(style_raw)
            variant = Variant(variant_raw)
            split = Split(split_raw)
        except ValueError as exc:
            problems.append((line_no, f"bad enum value: {exc}"))
            continue
        entries.append(
            ManifestEntry(audio_path, entry_text, duration, dataset, style, variant, split)
        )
    if problems:
        raise ManifestError(problems)
    return entries


def save_manifest(entries: list[ManifestEntry], path: str | Path) -> None:
    """Write entries as RFC-4180 CSV; round-trips through load_manifest."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_HEADER)
        for e in entries:
            writer.writerow(
                [
                    e.audio_path,
                    e.text,
                    repr(e.duration_s),
                    e.dataset,
                    e.speech_style.value,
                    e.variant.value,
                    e.split.value,
                ]
            )


def filter_track(entries: list[ManifestEntry], track: Track) -> list[ManifestEntry]:
    """Select the entries belonging to one evaluation track."""
    if track is Track.MIXED:
        return list(entries)
    if track is Track.SPONTANEOUS:
        return [e for e in entries if e.speech_style is SpeechStyle.SPONTANEOUS]
    variant = Variant.PT_BR if track is Track.PREPARED_PT_BR else Variant.PT_PT
    return [
        e
        for e in entries
        if e.speech_style is SpeechStyle.PREPARED and e.variant is variant
    ]


@dataclass
class SplitStats:
    """Seconds per (dataset, split); hours are derived at render time."""

    seconds: dict[tuple[str, Split], float] = field(default_factory=dict)

    def add(self, entry: ManifestEntry) -> None:
        key = (entry.dataset, entry.split)
        self.seconds[key] = self.seconds.get(key, 0.0) + entry.duration_s

    def hours(self, dataset: str, split: Split) -> float | None:
        sec = self.seconds.get((dataset, split))
        return None if sec is None else sec / 3600.0

    def total_hours(self, split: Split) -> float:
        return sum(sec for (_, s), sec in self.seconds.items() if s is split) / 3600.0

    @property
    def datasets(self) -> list[str]:
        return sorted({d for d, _ in self.seconds})


def split_stats(entries: list[ManifestEntry]) -> SplitStats:
    stats = SplitStats()
    for entry in entries:
        stats.add(entry)
    return stats


def _fmt_hours(h: float | None) -> str:
    return "--" if h is None else f"{h:.2f}h"


def render_split_stats(stats: SplitStats) -> str:
    """Space-joined text table, one dataset per row plus a Total row."""
    lines = ["dataset train dev test"]
    for dataset in stats.datasets:
        cells = [dataset.replace(" ", "_")] + [
            _fmt_hours(stats.hours(dataset, split)) for split in Split
        ]
        lines.append(" ".join(cells))
    totals = [_fmt_hours(stats.total_hours(split)) for split in Split]
    lines.append(" ".join(["Total"] + totals))
    return "\n".join(lines)


def split_stats_records(stats: SplitStats) -> list[dict]:
    """JSON-friendly stats, one record per (dataset, split) plus totals."""
    records = [
        {"dataset": d, "split": s.value, "hours": round(sec / 3600.0, 2)}
        for (d, s), sec in sorted(stats.seconds.items(), key=lambda kv: (kv[0][0], kv[0][1].value))
    ]
    for split in Split:
        records.append(
            {"dataset": None, "split": split.value, "hours": round(stats.total_hours(split), 2)}
        )
    return records


@dataclass
class ValidationReport:
    missing: list[str] = field(default_factory=list)
    unreadable: list[tuple[str, str]] = field(default_factory=list)
    duration_mismatch: list[tuple[str, float, float]] = field(default_factory=list)
    empty_transcript: list[str] = field(default_factory=list)
    checked: int = 0

    @property
    def ok(self) -> bool:
        return not (
            self.missing or self.unreadable or self.duration_mismatch or self.empty_transcript
        )

    def render(self) -> str:
        lines = [
            f"checked {self.checked}",
            f"missing {len(self.missing)}",
            f"unreadable {len(self.unreadable)}",
            f"duration_mismatch {len(self.duration_mismatch)}",
            f"empty_transcript {len(self.empty_transcript)}",
        ]
        for p in self.missing:
            lines.append(f"missing {p}")
        for p, err in self.unreadable:
            lines.append(f"unreadable {p} {err}")
        for p, want, got in self.duration_mismatch:
            lines.append(f"duration_mismatch {p} manifest={want:.3f}s decoded={got:.3f}s")
        for p in self.empty_transcript:
            lines.append(f"empty_transcript {p}")
        return "\n".join(lines)

    def to_jsonl(self) -> str:
        rows = []
        for p in self.missing:
            rows.append({"problem": "missing", "path": p})
        for p, err in self.unreadable:
            rows.append({"problem": "unreadable", "path": p, "error": err})
        for p, want, got in self.duration_mismatch:
            rows.append(
                {"problem": "duration_mismatch", "path": p, "manifest_s": want, "decoded_s": got}
            )
        for p in self.empty_transcript:
            rows.append({"problem": "empty_transcript", "path": p})
        return "\n".join(json.dumps(r, ensure_ascii=False) for r in rows)


DURATION_TOLERANCE_S = 0.1


def validate_corpus(entries: list[ManifestEntry], audio_root: str | Path) -> ValidationReport:
    """Probe every referenced file; reports all offenders, never aborts."""
    root = Path(audio_root)
    report = ValidationReport()
    for entry in sorted(entries, key=lambda e: e.audio_path):
        report.checked += 1
        if not entry.text.strip():
            report.empty_transcript.append(entry.audio_path)
        path = root / entry.audio_path
        if not path.is_file():
            report.missing.append(entry.audio_path)
            continue
        try:
            clip = audio_io.read_wav(path)
        except Exception as exc:  # report and move on, never abort
            report.unreadable.append((entry.audio_path, str(exc)))
            continue
        if abs(clip.duration_s - entry.duration_s) > DURATION_TOLERANCE_S:
            report.duration_mismatch.append(
                (entry.audio_path, entry.duration_s, clip.duration_s)
            )
    return report
