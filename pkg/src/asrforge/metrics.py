"""Text normalization, edit distance, CER/WER and per-track reports.

Rates are corpus-level micro-averages: pooled edit distances divided by
pooled reference lengths, never means of per-utterance percentages. CER is
computed on the normalized strings with spaces counted as characters
(toggleable), WER on whitespace tokens of the same normalization.
"""

from __future__ import annotations

import csv
import io
import json
import unicodedata
from dataclasses import dataclass, field
from typing import Sequence

from .corpus import (
    CANONICAL_DATASET_ORDER,
    ManifestEntry,
    Track,
    filter_track,
)
from .errors import NoValidReferences, UnmatchedHypothesis

TRACK_ORDER = (
    Track.PREPARED_PT_BR,
    Track.PREPARED_PT_PT,
    Track.SPONTANEOUS,
    Track.MIXED,
)

_KEPT_PUNCT = {"'", "-"}


def normalize_text(s: str) -> str:
    """Canonical scoring form: NFC, lowercase, keep letters/digits/'/-,
    collapse whitespace runs, trim."""
    s = unicodedata.normalize("NFC", s).lower()
    s = unicodedata.normalize("NFC", s)
    kept = []
    for ch in s:
        if ch.isspace():
            kept.append(" ")
            continue
        cat = unicodedata.category(ch)
        if cat.startswith("L") or cat == "Nd" or ch in _KEPT_PUNCT:
            kept.append(ch)
    return " ".join("".join(kept).split())


def edit_distance(a: Sequence, b: Sequence) -> int:
    """Levenshtein distance with unit costs, O(|a|*|b|) two-row DP."""
    if a == b:
        return 0
    # trim common affixes; keeps the quadratic core small on near matches
    start = 0
    while start < len(a) and start < len(b) and a[start] == b[start]:
        start += 1
    end_a, end_b = len(a), len(b)
    while end_a > start and end_b > start and a[end_a - 1] == b[end_b - 1]:
        end_a -= 1
        end_b -= 1
    a = a[start:end_a]
    b = b[start:end_b]
    if not a:
        return len(b)
    if not b:
        return len(a)
    if len(b) < len(a):
        a, b = b, a
    prev = list(range(len(a) + 1))
    for j, bj in enumerate(b, start=1):
        cur = [j]
        for i, ai in enumerate(a, start=1):
            cur.append(
                min(
                    prev[i] + 1,
                    cur[i - 1] + 1,
                    prev[i - 1] + (ai != bj),
                )
            )
        prev = cur
    return prev[-1]


@dataclass
class CorpusScore:
    """Pooled error sums for one group of (reference, hypothesis) pairs."""

    word_edits: int = 0
    word_count: int = 0
    char_edits: int = 0
    char_count: int = 0
    pairs: int = 0
    excluded_empty_refs: int = 0

    @property
    def wer(self) -> float:
        return self.word_edits / self.word_count if self.word_count else 0.0

    @property
    def cer(self) -> float:
        return self.char_edits / self.char_count if self.char_count else 0.0

    def add(self, other: "CorpusScore") -> None:
        self.word_edits += other.word_edits
        self.word_count += other.word_count
        self.char_edits += other.char_edits
        self.char_count += other.char_count
        self.pairs += other.pairs
        self.excluded_empty_refs += other.excluded_empty_refs


@dataclass(frozen=True)
class ScorePair:
    cer: float
    wer: float


def score_corpus(
    pairs: Sequence[tuple[str, str]], cer_counts_spaces: bool = True
) -> CorpusScore:
    """Micro-averaged CER/WER over (reference, hypothesis) pairs.

    Pairs whose reference normalizes to the empty string are excluded and
    counted; raises NoValidReferences when none survive.
    """
    score = CorpusScore()
    for ref, hyp in pairs:
        ref_n = normalize_text(ref)
        hyp_n = normalize_text(hyp)
        if not ref_n:
            score.excluded_empty_refs += 1
            continue
        ref_chars = ref_n if cer_counts_spaces else ref_n.replace(" ", "")
        hyp_chars = hyp_n if cer_counts_spaces else hyp_n.replace(" ", "")
        score.word_edits += edit_distance(ref_n.split(), hyp_n.split())
        score.word_count += len(ref_n.split())
        score.char_edits += edit_distance(ref_chars, hyp_chars)
        score.char_count += len(ref_chars)
        score.pairs += 1
    if score.pairs == 0:
        raise NoValidReferences("every reference was empty after normalization")
    return score


@dataclass
class ScoreReport:
    """Per-track (and optional per-dataset) pooled scores."""

    tracks: dict[Track, CorpusScore | None] = field(default_factory=dict)
    datasets: dict[str, CorpusScore] | None = None
    unmatched_references: int = 0

    def pair(self, track: Track) -> ScorePair | None:
        score = self.tracks.get(track)
        return None if score is None else ScorePair(cer=score.cer, wer=score.wer)


def score_by_track(
    entries: list[ManifestEntry],
    hypotheses: dict[str, str],
    by_dataset: bool = False,
    cer_counts_spaces: bool = True,
) -> ScoreReport:
    """Join hypotheses to the manifest by audio_path and score per track.

    Every hypothesis must match a manifest entry (UnmatchedHypothesis lists
    all offenders); manifest entries without a hypothesis are skipped and
    counted. Mixed is computed from pooled sums over all joined pairs.
    """
    known = {e.audio_path for e in entries}
    orphans = sorted(set(hypotheses) - known)
    if orphans:
        raise UnmatchedHypothesis(orphans)

    joined = [e for e in entries if e.audio_path in hypotheses]
    report = ScoreReport(unmatched_references=len(entries) - len(joined))

    for track in TRACK_ORDER:
        group = [e for e in filter_track(joined, track)]
        if not group:
            report.tracks[track] = None
            continue
        report.tracks[track] = score_corpus(
            [(e.text, hypotheses[e.audio_path]) for e in group],
            cer_counts_spaces=cer_counts_spaces,
        )

    if by_dataset:
        report.datasets = {}
        for name in sorted({e.dataset for e in joined}):
            group = [e for e in joined if e.dataset == name]
            report.datasets[name] = score_corpus(
                [(e.text, hypotheses[e.audio_path]) for e in group],
                cer_counts_spaces=cer_counts_spaces,
            )
    return report


def _fmt_pct(value: float | None) -> str:
    return "--" if value is None else f"{100.0 * value:.2f}%"


def _dataset_columns(names: Sequence[str]) -> list[str]:
    known = [n for n in CANONICAL_DATASET_ORDER if n in names]
    rest = sorted(n for n in names if n not in CANONICAL_DATASET_ORDER)
    return known + rest


def render_report(report: ScoreReport, fmt: str = "text-table") -> str:
    """Render per-track CER/WER (paper column order) as text, CSV or JSON."""
    if fmt == "text-table":
        return _render_text(report)
    if fmt == "csv":
        return _render_csv(report)
    if fmt == "json":
        return _render_json(report)
    raise ValueError(f"unknown report format {fmt!r}")


def _track_cells(report: ScoreReport) -> list[str]:
    cells = []
    for track in TRACK_ORDER:
        pair = report.pair(track)
        cells.append(_fmt_pct(None if pair is None else pair.cer))
        cells.append(_fmt_pct(None if pair is None else pair.wer))
    return cells


def _render_text(report: ScoreReport) -> str:
    header = []
    for track in TRACK_ORDER:
        header.extend([f"{track.value}_cer", f"{track.value}_wer"])
    lines = [" ".join(header), " ".join(_track_cells(report))]
    if report.datasets is not None:
        names = _dataset_columns(list(report.datasets))
        sub_header = []
        sub_cells = []
        for name in names:
            score = report.datasets[name]
            key = name.replace(" ", "_")
            sub_header.extend([f"{key}_cer", f"{key}_wer"])
            sub_cells.extend([_fmt_pct(score.cer), _fmt_pct(score.wer)])
        lines.append(" ".join(sub_header))
        lines.append(" ".join(sub_cells))
    return "\n".join(lines)


def _render_csv(report: ScoreReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["group", "name", "cer", "wer", "pairs"])
    for track in TRACK_ORDER:
        score = report.tracks.get(track)
        if score is None:
            writer.writerow(["track", track.value, "", "", 0])
        else:
            writer.writerow(
                ["track", track.value, repr(score.cer), repr(score.wer), score.pairs]
            )
    if report.datasets is not None:
        for name in _dataset_columns(list(report.datasets)):
            score = report.datasets[name]
            writer.writerow(
                ["dataset", name, repr(score.cer), repr(score.wer), score.pairs]
            )
    return buf.getvalue()


def _render_json(report: ScoreReport) -> str:
    obj: dict = {"tracks": {}, "unmatched_references": report.unmatched_references}
    for track in TRACK_ORDER:
        score = report.tracks.get(track)
        obj["tracks"][track.value] = (
            None
            if score is None
            else {"cer": score.cer, "wer": score.wer, "pairs": score.pairs}
        )
    if report.datasets is not None:
        obj["datasets"] = {
            name: {
                "cer": report.datasets[name].cer,
                "wer": report.datasets[name].wer,
                "pairs": report.datasets[name].pairs,
            }
            for name in _dataset_columns(list(report.datasets))
        }
    return json.dumps(obj, ensure_ascii=False, indent=2)
