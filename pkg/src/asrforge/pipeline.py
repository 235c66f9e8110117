"""Batch drivers wiring the library into pipeline stages.

Each stage mirrors one CLI command / service endpoint: normalize, augment,
decode, score, lm-train, stats, validate. Every stage that writes outputs
also writes a ``run_record.json`` (resolved config, toolkit version, input
digests) next to them. Worker count never influences output bytes: all
randomness is per-file-seeded and reports are assembled in manifest order,
so ``jobs`` is deliberately left out of the run record.
"""

from __future__ import annotations

import csv
import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import __version__, audio_io, augment, corpus, ctc_decode, gain, metrics, ngram_lm
from .errors import InputError, IoFailure, MissingFile

RUN_RECORD_NAME = "run_record.json"


def _digest_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _digest_tree(path: Path, pattern: str) -> str:
    names = sorted(str(p.relative_to(path)) for p in path.rglob(pattern))
    return hashlib.sha256("\n".join(names).encode("utf-8")).hexdigest()


def write_run_record(
    out_dir: Path, command: str, config: dict, inputs: dict[str, str]
) -> Path:
    record = {
        "tool": "asrforge",
        "version": __version__,
        "command": command,
        "config": config,
        "inputs": inputs,
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / RUN_RECORD_NAME
    path.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _map_jobs(fn, items, jobs: int):
    """Apply fn over items preserving order; jobs <= 1 stays in-process."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# --- stats / validate ---------------------------------------------------------

def manifest_stats(manifest_path: str | Path) -> tuple[str, list[dict]]:
    entries = corpus.load_manifest(manifest_path)
    stats = corpus.split_stats(entries)
    return corpus.render_split_stats(stats), corpus.split_stats_records(stats)


def validate_manifest(manifest_path: str | Path, audio_root: str | Path):
    entries = corpus.load_manifest(manifest_path)
    return corpus.validate_corpus(entries, audio_root)


# --- normalize ----------------------------------------------------------------

SIDECAR_NAME = "normalization_report.csv"


@dataclass
class NormalizeResult:
    target_dbfs: float
    target_source: str
    files_written: int
    silent_passthrough: int
    clipped_files: int
    out_dir: str
    sidecar: str


def normalize_corpus(
    manifest_path: str | Path,
    audio_root: str | Path,
    out_dir: str | Path,
    target_dbfs: float | None = None,
    splits: list[corpus.Split] | None = None,
    jobs: int = 1,
) -> NormalizeResult:
    """Normalize every selected clip's RMS to the target (or the train-split
    corpus mean when target is None). Silent clips pass through unchanged."""
    manifest_path = Path(manifest_path)
    root = Path(audio_root)
    out = Path(out_dir)
    entries = corpus.load_manifest(manifest_path)
    selected = [e for e in entries if splits is None or e.split in splits]

    if target_dbfs is None:
        target = gain.corpus_mean_gain(entries, corpus.Split.TRAIN, root)
    else:
        target = gain.GainTarget(float(target_dbfs), gain.GainSource.EXPLICIT)

    def process(entry: corpus.ManifestEntry):
        src = root / entry.audio_path
        if not src.is_file():
            raise MissingFile(f"manifest references missing audio: {src}")
        clip = audio_io.read_wav(src)
        stats = audio_io.level_stats(clip)
        dst = out / entry.audio_path
        dst.parent.mkdir(parents=True, exist_ok=True)
        if stats.is_silent:
            audio_io.write_wav(clip, dst)
            return entry.audio_path, stats.rms_dbfs, 0.0, 0, "silent"
        normalized, gain_db, clipped = gain.normalize_clip_counted(clip, target)
        clipped += audio_io.write_wav(normalized, dst)
        return entry.audio_path, stats.rms_dbfs, gain_db, clipped, "ok"

    rows = _map_jobs(process, selected, jobs)

    out.mkdir(parents=True, exist_ok=True)
    sidecar = out / SIDECAR_NAME
    with open(sidecar, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["audio_path", "original_rms_dbfs", "applied_gain_db", "clipped_samples", "status"]
        )
        for path, rms, gain_db, clipped, status in rows:
            writer.writerow([path, repr(rms), repr(gain_db), clipped, status])

    write_run_record(
        out,
        "normalize",
        {
            "target_dbfs": target.target_rms_dbfs,
            "target_source": target.source.value,
            "splits": None if splits is None else [s.value for s in splits],
        },
        {str(manifest_path): _digest_file(manifest_path)},
    )
    return NormalizeResult(
        target_dbfs=target.target_rms_dbfs,
        target_source=target.source.value,
        files_written=len(rows),
        silent_passthrough=sum(1 for r in rows if r[4] == "silent"),
        clipped_files=sum(1 for r in rows if r[3] > 0),
        out_dir=str(out),
        sidecar=str(sidecar),
    )


# --- augment --------------------------------------------------------------------

AUGMENT_LOG_NAME = "augmentation_log.jsonl"


@dataclass
class AugmentResult:
    files_written: int
    augmented: int
    passthrough: int
    out_dir: str
    log_path: str


def load_augment_log(path: str | Path) -> dict[str, augment.NoiseAction | None]:
    """Parse a JSON-lines augmentation log back into replayable actions."""
    actions: dict[str, augment.NoiseAction | None] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read augmentation log {path}: {exc}") from exc
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            action = (
                None
                if obj["action"] is None
                else augment.NoiseAction(
                    augment.NoiseKind(obj["action"]["kind"]),
                    obj["action"]["params"],
                    int(obj["action"]["seed"]),
                )
            )
            actions[obj["path"]] = action
        except (KeyError, ValueError) as exc:
            raise InputError(f"bad augmentation log line {line_no}: {exc}") from exc
    return actions


def augment_corpus(
    manifest_path: str | Path,
    audio_root: str | Path,
    out_dir: str | Path,
    policy: augment.AugmentPolicy,
    jobs: int = 1,
    replay_log: str | Path | None = None,
) -> AugmentResult:
    """Apply selective noise insertion, emitting audio plus a replayable
    JSON-lines action log (one record per file, manifest order)."""
    manifest_path = Path(manifest_path)
    root = Path(audio_root)
    out = Path(out_dir)
    entries = corpus.load_manifest(manifest_path)
    banks = augment.load_banks(policy)
    replay = None if replay_log is None else load_augment_log(replay_log)

    def process(entry: corpus.ManifestEntry):
        src = root / entry.audio_path
        if not src.is_file():
            raise MissingFile(f"manifest references missing audio: {src}")
        clip = audio_io.read_wav(src)
        if replay is not None:
            action = replay.get(entry.audio_path)
            output = clip if action is None else augment.apply_action(clip, action, banks)
        else:
            action = augment.draw_action(entry, policy, banks)
            output = clip if action is None else augment.apply_action(clip, action, banks)
        dst = out / entry.audio_path
        dst.parent.mkdir(parents=True, exist_ok=True)
        audio_io.write_wav(output, dst)
        return entry.audio_path, entry.dataset, action

    rows = _map_jobs(process, entries, jobs)

    out.mkdir(parents=True, exist_ok=True)
    log_path = out / AUGMENT_LOG_NAME
    with open(log_path, "w", encoding="utf-8") as fh:
        for path, dataset, action in rows:
            record = {
                "path": path,
                "dataset": dataset,
                "action": None
                if action is None
                else {"kind": action.kind.value, "params": action.params, "seed": action.seed},
            }
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")

    write_run_record(
        out,
        "augment",
        {
            "low_noise_datasets": sorted(policy.low_noise_datasets),
            "global_seed": policy.global_seed,
            "ranges": {
                "additive_snr_db": list(policy.ranges.additive_snr_db),
                "gaussian_snr_db": list(policy.ranges.gaussian_snr_db),
                "gain_db": list(policy.ranges.gain_db),
                "pitch_semitones": list(policy.ranges.pitch_semitones),
                "rir_wet_level": list(policy.ranges.rir_wet_level),
            },
            "replay": replay_log is not None,
        },
        {str(manifest_path): _digest_file(manifest_path)},
    )
    augmented = sum(1 for r in rows if r[2] is not None)
    return AugmentResult(
        files_written=len(rows),
        augmented=augmented,
        passthrough=len(rows) - augmented,
        out_dir=str(out),
        log_path=str(log_path),
    )


# --- decode ---------------------------------------------------------------------

@dataclass
class DecodeResult:
    utterances: int
    out_csv: str


def decode_directory(
    emissions_dir: str | Path,
    out_csv: str | Path,
    params: ctc_decode.FusionParams,
    lm_path: str | Path | None = None,
    normalize: bool = False,
    jobs: int = 1,
) -> DecodeResult:
    """Decode every .ctce file under the directory into a hypothesis CSV.

    The hypothesis key is the emission's relative path with the extension
    swapped to .wav, matching manifests whose emissions mirror the audio
    tree.
    """
    src = Path(emissions_dir)
    if not src.is_dir():
        raise IoFailure(f"no such emissions directory: {src}")
    files = sorted(src.rglob("*.ctce"))
    lm = None if lm_path is None else ngram_lm.load_arpa(lm_path)

    def process(path: Path):
        em = ctc_decode.read_emissions(path, normalize=normalize)
        text = ctc_decode.beam_decode(em, params, lm)
        rel = path.relative_to(src).with_suffix(".wav")
        return str(rel), text.strip()

    rows = _map_jobs(process, files, jobs)

    out_csv = Path(out_csv)
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    with open(out_csv, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["audio_path", "hypothesis"])
        writer.writerows(rows)

    inputs = {str(src): _digest_tree(src, "*.ctce")}
    if lm_path is not None:
        inputs[str(lm_path)] = _digest_file(Path(lm_path))
    write_run_record(
        out_csv.parent,
        "decode",
        {
            "alpha": params.alpha,
            "beta": params.beta,
            "beam_width": params.beam_width,
            "normalize": normalize,
            "lm": None if lm_path is None else str(lm_path),
        },
        inputs,
    )
    return DecodeResult(utterances=len(rows), out_csv=str(out_csv))


# --- score ----------------------------------------------------------------------

def load_hypotheses(path: str | Path) -> dict[str, str]:
    """Hypothesis CSV (audio_path,hypothesis) -> mapping."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read hypotheses {path}: {exc}") from exc
    reader = csv.reader(text.splitlines())
    try:
        header = next(reader)
    except StopIteration:
        raise InputError("hypothesis CSV is empty") from None
    if header[:2] != ["audio_path", "hypothesis"]:
        raise InputError("hypothesis CSV must start with header audio_path,hypothesis")
    out: dict[str, str] = {}
    for row in reader:
        if not row:
            continue
        if len(row) < 2:
            raise InputError(f"hypothesis row with {len(row)} fields: {row!r}")
        out[row[0]] = row[1]
    return out


def score_files(
    manifest_path: str | Path,
    hypotheses_csv: str | Path,
    by_dataset: bool = False,
    fmt: str = "text-table",
    cer_counts_spaces: bool = True,
) -> tuple[metrics.ScoreReport, str]:
    entries = corpus.load_manifest(manifest_path)
    hyps = load_hypotheses(hypotheses_csv)
    report = metrics.score_by_track(
        entries, hyps, by_dataset=by_dataset, cer_counts_spaces=cer_counts_spaces
    )
    return report, metrics.render_report(report, fmt)


# --- lm-train -------------------------------------------------------------------

@dataclass
class LmTrainResult:
    arpa_path: str
    order: int
    ngram_counts: dict[int, int]
    dev_perplexity: float | None


def _read_sentences(path: Path) -> list[str]:
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IoFailure(f"cannot read corpus {path}: {exc}") from exc
    sentences = [metrics.normalize_text(line) for line in lines]
    return [s for s in sentences if s]


def train_lm_file(
    corpus_path: str | Path,
    out_path: str | Path,
    order: int = 4,
    discount: float = 0.75,
    dev_path: str | Path | None = None,
) -> LmTrainResult:
    """Normalize, train and serialize an ARPA model; optional held-out
    perplexity when a dev file is given."""
    sentences = _read_sentences(Path(corpus_path))
    model = ngram_lm.train_ngram(sentences, order=order, discount=discount)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    ngram_lm.save_arpa(model, out_path)

    dev_pp = None
    if dev_path is not None:
        dev_sentences = _read_sentences(Path(dev_path))
        dev_pp = ngram_lm.perplexity(model, dev_sentences)

    write_run_record(
        out_path.parent,
        "lm-train",
        {"order": order, "discount": discount, "out": out_path.name},
        {str(corpus_path): _digest_file(Path(corpus_path))},
    )
    counts = {k: len(model.probs.get(k, {})) for k in range(1, order + 1)}
    return LmTrainResult(
        arpa_path=str(out_path),
        order=order,
        ngram_counts=counts,
        dev_perplexity=dev_pp,
    )
