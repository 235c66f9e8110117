"""CTC decoding: greedy collapse and prefix beam search with LM fusion.

The beam search tracks, per collapsed prefix, the probability mass of all
paths ending in blank (p_b) and in the prefix's final symbol (p_nb). With a
language model present and alpha > 0, the score of a prefix adds
alpha * ln(10) * log10 P_lm over completed words plus a word-insertion
bonus beta per word; the final partial word is scored once at end of
utterance. alpha == 0 (or no LM) means pure acoustic scoring.

Per frame, only the top-`beam_width` symbols by emission probability are
considered, so beam_width 1 reproduces the greedy best path exactly while a
saturating width explores every labeling.
"""

from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    DimensionOverflow,
    IoFailure,
    TruncatedPayload,
    VocabMismatch,
)
from .ngram_lm import NGramModel

log = logging.getLogger(__name__)

NEG_INF = float("-inf")
LN10 = math.log(10.0)

_MAGIC = b"CTCE"
_VERSION = 1
_MAX_CELLS = 1 << 28  # 1 GiB of float32 is already unreasonable for one file


@dataclass
class EmissionMatrix:
    """T x V natural-log probability lattice plus its output alphabet."""

    log_probs: np.ndarray
    vocab: tuple[str, ...]
    blank_index: int

    def __post_init__(self):
        self.log_probs = np.asarray(self.log_probs)
        if self.log_probs.ndim != 2:
            raise ValueError("log_probs must be a T x V matrix")
        t, v = self.log_probs.shape
        if t < 1 or v < 2:
            raise ValueError("emission matrix needs T >= 1 and V >= 2")
        if len(self.vocab) != v:
            raise ValueError("vocab length must equal V")
        if not 0 <= self.blank_index < v:
            raise ValueError("blank_index out of range")

    @property
    def num_frames(self) -> int:
        return self.log_probs.shape[0]

    @property
    def vocab_size(self) -> int:
        return self.log_probs.shape[1]


@dataclass(frozen=True)
class FusionParams:
    """Shallow-fusion knobs; alpha = 0 disables all LM terms."""

    alpha: float = 0.5
    beta: float = 1.0
    beam_width: int = 100

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.beam_width < 1:
            raise ValueError("beam_width must be >= 1")


def collapse_path(ids: list[int], blank_index: int) -> list[int]:
    """CTC collapse: merge adjacent repeats, then delete blanks."""
    merged: list[int] = []
    prev: int | None = None
    for i in ids:
        if i != prev:
            merged.append(i)
            prev = i
    return [i for i in merged if i != blank_index]


def find_word_delimiter(vocab: tuple[str, ...]) -> str | None:
    """Conventional delimiter tokens, most common first."""
    for candidate in ("|", " "):
        if candidate in vocab:
            return candidate
    return None


def ids_to_text(ids: list[int], vocab: tuple[str, ...], delimiter: str | None) -> str:
    return "".join(" " if delimiter is not None and vocab[i] == delimiter else vocab[i] for i in ids)


def greedy_decode(em: EmissionMatrix, word_delimiter: str | None = None) -> str:
    """Best-path decoding: per-frame argmax, CTC collapse, symbol mapping."""
    ids = np.argmax(em.log_probs, axis=1).tolist()
    delimiter = word_delimiter if word_delimiter is not None else find_word_delimiter(em.vocab)
    return ids_to_text(collapse_path(ids, em.blank_index), em.vocab, delimiter)


def _lse(a: float, b: float) -> float:
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a < b:
        a, b = b, a
    return a + math.log1p(math.exp(b - a))


@dataclass(frozen=True)
class BeamHypothesis:
    text: str
    log_p_blank: float
    log_p_non_blank: float
    score: float

    @property
    def log_mass(self) -> float:
        return _lse(self.log_p_blank, self.log_p_non_blank)


class _LmState:
    """LM bookkeeping for one prefix: completed-word score, word count,
    conditioning context and the trailing partial word."""

    __slots__ = ("lm_log10", "words", "context", "partial")

    def __init__(self, lm_log10: float, words: int, context: tuple[str, ...], partial: str):
        self.lm_log10 = lm_log10
        self.words = words
        self.context = context
        self.partial = partial

    def extend(self, token: str, delimiter: str | None, lm: NGramModel) -> "_LmState":
        if delimiter is not None and token == delimiter:
            if not self.partial:
                return self
            lm_log10 = self.lm_log10 + lm.conditional(self.context, self.partial)
            context = self.context + (self.partial,)
            if lm.order > 1:
                context = context[-(lm.order - 1):]
            else:
                context = ()
            return _LmState(lm_log10, self.words + 1, context, "")
        return _LmState(self.lm_log10, self.words, self.context, self.partial + token)


def beam_search(
    em: EmissionMatrix,
    params: FusionParams,
    lm: NGramModel | None = None,
    word_delimiter: str | None = None,
) -> list[BeamHypothesis]:
    """Prefix beam search; returns surviving hypotheses, best first."""
    delimiter = word_delimiter if word_delimiter is not None else find_word_delimiter(em.vocab)
    use_lm = lm is not None and params.alpha > 0.0
    if use_lm and delimiter is None:
        raise VocabMismatch(
            "LM fusion needs a word delimiter symbol in the emission vocabulary"
        )
    alpha_ln = params.alpha * LN10
    vocab = em.vocab
    blank = em.blank_index
    width = params.beam_width

    beams: dict[tuple[int, ...], list[float]] = {(): [0.0, NEG_INF]}
    lm_states: dict[tuple[int, ...], _LmState] = {(): _LmState(0.0, 0, (), "")}

    def rank_score(prefix: tuple[int, ...], pb: float, pnb: float) -> float:
        score = _lse(pb, pnb)
        if use_lm:
            state = lm_states[prefix]
            score += alpha_ln * state.lm_log10 + params.beta * state.words
        return score

    text_cache: dict[tuple[int, ...], str] = {(): ""}

    def text_of(prefix: tuple[int, ...]) -> str:
        cached = text_cache.get(prefix)
        if cached is None:
            cached = ids_to_text(list(prefix), vocab, delimiter)
            text_cache[prefix] = cached
        return cached

    for t in range(em.num_frames):
        row = em.log_probs[t]
        if width < em.vocab_size:
            candidates = np.argpartition(row, -width)[-width:].tolist()
        else:
            candidates = range(em.vocab_size)

        nxt: dict[tuple[int, ...], list[float]] = {}
        for prefix, (pb, pnb) in beams.items():
            total = _lse(pb, pnb)
            for s in candidates:
                lp = float(row[s])
                if s == blank:
                    entry = nxt.get(prefix)
                    if entry is None:
                        entry = nxt[prefix] = [NEG_INF, NEG_INF]
                    entry[0] = _lse(entry[0], total + lp)
                    continue
                extended = prefix + (s,)
                if prefix and s == prefix[-1]:
                    entry = nxt.get(prefix)
                    if entry is None:
                        entry = nxt[prefix] = [NEG_INF, NEG_INF]
                    entry[1] = _lse(entry[1], pnb + lp)
                    entry2 = nxt.get(extended)
                    if entry2 is None:
                        entry2 = nxt[extended] = [NEG_INF, NEG_INF]
                    entry2[1] = _lse(entry2[1], pb + lp)
                else:
                    entry2 = nxt.get(extended)
                    if entry2 is None:
                        entry2 = nxt[extended] = [NEG_INF, NEG_INF]
                    entry2[1] = _lse(entry2[1], total + lp)
                if use_lm and extended in nxt and extended not in lm_states:
                    lm_states[extended] = lm_states[prefix].extend(vocab[s], delimiter, lm)

        scored = sorted(
            nxt.items(),
            key=lambda kv: (-rank_score(kv[0], kv[1][0], kv[1][1]), text_of(kv[0])),
        )
        beams = dict(scored[:width])

    results: list[BeamHypothesis] = []
    for prefix, (pb, pnb) in beams.items():
        score = _lse(pb, pnb)
        if use_lm:
            state = lm_states[prefix]
            lm_total = state.lm_log10
            words = state.words
            if state.partial:
                lm_total += lm.conditional(state.context, state.partial)
                words += 1
            score += alpha_ln * lm_total + params.beta * words
        results.append(
            BeamHypothesis(
                text=text_of(prefix), log_p_blank=pb, log_p_non_blank=pnb, score=score
            )
        )
    results.sort(key=lambda h: (-h.score, h.text))
    return results


def beam_decode(
    em: EmissionMatrix,
    params: FusionParams,
    lm: NGramModel | None = None,
    word_delimiter: str | None = None,
) -> str:
    """Highest-scoring complete prefix from beam_search."""
    return beam_search(em, params, lm, word_delimiter)[0].text


def validate_rows(em: EmissionMatrix, source: str = "emissions") -> None:
    """Warn when exponentiated rows stray from probability simplexes."""
    sums = np.exp(em.log_probs.astype(np.float64)).sum(axis=1)
    bad = int(np.count_nonzero(np.abs(sums - 1.0) > 1e-3))
    if bad:
        log.warning(
            "%s: %d of %d rows do not sum to 1 (max |err| %.3g); "
            "consider normalize=True",
            source,
            bad,
            len(sums),
            float(np.max(np.abs(sums - 1.0))),
        )


def normalize_rows(em: EmissionMatrix) -> EmissionMatrix:
    """Log-softmax every frame (for upstream models emitting raw logits)."""
    x = em.log_probs.astype(np.float64)
    x = x - x.max(axis=1, keepdims=True)
    x = x - np.log(np.exp(x).sum(axis=1, keepdims=True))
    return EmissionMatrix(x.astype(np.float32), em.vocab, em.blank_index)


def write_emissions(em: EmissionMatrix, path: str | Path) -> None:
    """CTCE binary format: magic, version, T, V, blank, vocab, f32 payload."""
    t, v = em.log_probs.shape
    if t >= 1 << 32 or v >= 1 << 32:
        raise DimensionOverflow("matrix dimensions exceed u32")
    parts = [
        _MAGIC,
        struct.pack("<IIIII", _VERSION, t, v, em.blank_index, v),
    ]
    for token in em.vocab:
        raw = token.encode("utf-8")
        if len(raw) >= 1 << 16:
            raise DimensionOverflow(f"vocab token longer than u16: {token[:20]!r}...")
        parts.append(struct.pack("<H", len(raw)) + raw)
    parts.append(np.ascontiguousarray(em.log_probs, dtype="<f4").tobytes())
    try:
        Path(path).write_bytes(b"".join(parts))
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_emissions(path: str | Path, normalize: bool = False) -> EmissionMatrix:
    """Parse a CTCE file; lossless for the float32 payload."""
    try:
        data = Path(path).read_bytes()
    except FileNotFoundError:
        raise IoFailure(f"no such emission file: {path}") from None
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc

    if len(data) < 4 or data[:4] != _MAGIC:
        raise BadMagic(f"{path}: not a CTCE file")
    if len(data) < 24:
        raise TruncatedPayload(f"{path}: header truncated")
    version, t, v, blank_index, vocab_count = struct.unpack_from("<IIIII", data, 4)
    if version != _VERSION:
        raise BadMagic(f"{path}: unsupported CTCE version {version}")
    if t < 1 or v < 2 or vocab_count != v or blank_index >= v or t * v > _MAX_CELLS:
        raise DimensionOverflow(
            f"{path}: implausible header T={t} V={v} blank={blank_index} vocab={vocab_count}"
        )

    pos = 24
    vocab: list[str] = []
    for _ in range(v):
        if pos + 2 > len(data):
            raise TruncatedPayload(f"{path}: vocab table truncated")
        (length,) = struct.unpack_from("<H", data, pos)
        pos += 2
        if pos + length > len(data):
            raise TruncatedPayload(f"{path}: vocab token truncated")
        vocab.append(data[pos : pos + length].decode("utf-8"))
        pos += length

    expected = t * v * 4
    if len(data) - pos < expected:
        raise TruncatedPayload(
            f"{path}: payload holds {len(data) - pos} bytes, expected {expected}"
        )
    floats = np.frombuffer(data, dtype="<f4", count=t * v, offset=pos).reshape(t, v)
    em = EmissionMatrix(floats.copy(), tuple(vocab), int(blank_index))
    if normalize:
        return normalize_rows(em)
    validate_rows(em, source=str(path))
    return em
