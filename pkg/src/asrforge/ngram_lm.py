"""Backoff n-gram language models: training, ARPA I/O, scoring, perplexity.

Training uses interpolated Kneser-Ney with one fixed discount D per order:
the highest order keeps raw counts, lower orders use continuation counts
(except n-grams starting with <s>, which cannot be left-extended), and the
unigram level interpolates with the uniform distribution over the
prediction vocabulary. <unk> receives the unigram continuation mass share.

Conventions (documented, not universal): models of order >= 2 pad each
sentence with (order-1) <s> and one </s> during counting, and scoring
initializes the context with (order-1) <s> and appends a </s> term.
Order-1 models are bags of words, trained without boundary markers; the
</s> term is added at scoring time only when </s> exists in the model's
vocabulary. Tokens are whitespace-delimited; callers normalize text first.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    CountMismatch,
    EmptyCorpus,
    IoFailure,
    MalformedSection,
    OrderTooLargeForCorpus,
)

SOS = "<s>"
EOS = "</s>"
UNK = "<unk>"

# log10 placeholder for "never predicted" entries such as <s>
EPS_LOG10 = -99.0


@dataclass
class NGramModel:
    """Immutable after construction; safe for concurrent scoring.

    ``probs[k]`` maps k-token tuples to log10 conditional probabilities;
    ``backoffs[k]`` maps k-token context tuples to log10 backoff weights
    (absent context => weight 1).
    """

    order: int
    probs: dict[int, dict[tuple[str, ...], float]]
    backoffs: dict[int, dict[tuple[str, ...], float]] = field(default_factory=dict)

    @property
    def vocab(self) -> set[str]:
        return {g[0] for g in self.probs.get(1, {})}

    def _map_token(self, token: str) -> str:
        return token if (token,) in self.probs[1] else UNK

    def conditional(self, context: tuple[str, ...], word: str) -> float:
        """Backoff-resolved log10 P(word | context)."""
        ctx = tuple(self._map_token(t) for t in context[max(0, len(context) - (self.order - 1)):])
        return self._cond(ctx, self._map_token(word))

    def _cond(self, ctx: tuple[str, ...], w: str) -> float:
        gram = ctx + (w,)
        p = self.probs.get(len(gram), {}).get(gram)
        if p is not None:
            return p
        if not ctx:
            return self.probs[1].get((UNK,), EPS_LOG10)
        bo = self.backoffs.get(len(ctx), {}).get(ctx, 0.0)
        return bo + self._cond(ctx[1:], w)

    def has_eos(self) -> bool:
        return (EOS,) in self.probs.get(1, {})


def _padded(words: list[str], order: int) -> list[str]:
    return [SOS] * (order - 1) + words + [EOS]


def train_ngram(corpus: list[str], order: int, discount: float = 0.75) -> NGramModel:
    """Interpolated Kneser-Ney with a single fixed discount per order.

    ``corpus`` holds one sentence per element, tokens whitespace-delimited.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    if not 0.0 <= discount < 1.0:
        raise ValueError("discount must lie in [0, 1)")
    if not corpus:
        raise EmptyCorpus("no sentences to train on")
    sentences = [s.split() for s in corpus]

    if order == 1:
        return _train_unigram(sentences, discount)

    raw: dict[int, Counter] = {k: Counter() for k in range(1, order + 1)}
    for words in sentences:
        seq = _padded(words, order)
        for k in range(1, order + 1):
            for i in range(len(seq) - k + 1):
                raw[k][tuple(seq[i : i + k])] += 1
    if not raw[order]:
        raise OrderTooLargeForCorpus(f"no {order}-gram occurs in the corpus")

    # Kneser-Ney adjusted counts: continuation counts below the top order,
    # raw counts for <s>-initial n-grams (nothing can precede <s>).
    adjusted: dict[int, dict[tuple[str, ...], int]] = {order: dict(raw[order])}
    for k in range(order - 1, 0, -1):
        predecessors: dict[tuple[str, ...], set[str]] = defaultdict(set)
        for gram in raw[k + 1]:
            predecessors[gram[1:]].add(gram[0])
        adjusted[k] = {
            gram: raw[k][gram] if gram[0] == SOS else len(predecessors.get(gram, ()))
            for gram in raw[k]
        }

    # Linear-domain tables built bottom-up; converted to log10 at the end.
    linear: dict[int, dict[tuple[str, ...], float]] = {}
    backoff_linear: dict[int, dict[tuple[str, ...], float]] = {}

    vocab_pred = sorted({g[0] for g in raw[1]} - {SOS}) + [UNK]
    uniform = 1.0 / len(vocab_pred)
    total = sum(adjusted[1].get((w,), 0) for w in vocab_pred)
    seen = sum(1 for w in vocab_pred if adjusted[1].get((w,), 0) > 0)
    linear[1] = {}
    for w in vocab_pred:
        count = adjusted[1].get((w,), 0)
        linear[1][(w,)] = (max(count - discount, 0.0) + discount * seen * uniform) / total
    linear[1][(SOS,)] = 10.0**EPS_LOG10

    for k in range(2, order + 1):
        by_context: dict[tuple[str, ...], list[tuple[tuple[str, ...], int]]] = defaultdict(list)
        for gram, count in adjusted[k].items():
            by_context[gram[:-1]].append((gram, count))
        linear[k] = {}
        backoff_linear[k - 1] = {}
        for context, members in by_context.items():
            denom = sum(c for _, c in members)
            bo = discount * len(members) / denom
            backoff_linear[k - 1][context] = bo
            for gram, count in members:
                lower = linear[k - 1][gram[1:]]
                linear[k][gram] = max(count - discount, 0.0) / denom + bo * lower

    probs = {
        k: {g: (math.log10(p) if p > 0.0 else EPS_LOG10) for g, p in table.items()}
        for k, table in linear.items()
    }
    backoffs = {
        k: {c: math.log10(b) for c, b in table.items()}
        for k, table in backoff_linear.items()
    }
    return NGramModel(order=order, probs=probs, backoffs=backoffs)


def _train_unigram(sentences: list[list[str]], discount: float) -> NGramModel:
    counts = Counter(w for words in sentences for w in words)
    if not counts:
        raise OrderTooLargeForCorpus("no unigram occurs in the corpus")
    vocab_pred = sorted(counts) + [UNK]
    uniform = 1.0 / len(vocab_pred)
    total = sum(counts.values())
    seen = len(counts)
    probs: dict[tuple[str, ...], float] = {}
    for w in vocab_pred:
        p = (max(counts.get(w, 0) - discount, 0.0) + discount * seen * uniform) / total
        probs[(w,)] = math.log10(p) if p > 0.0 else EPS_LOG10
    return NGramModel(order=1, probs={1: probs}, backoffs={})


def score_sequence(model: NGramModel, tokens: list[str]) -> float:
    """Sum of backoff-resolved log10 conditionals over the sentence.

    Context starts as (order-1) <s>; a terminating </s> term is added when
    the model's vocabulary contains </s>.
    """
    if model.order == 1:
        total = sum(model.conditional((), t) for t in tokens)
        if model.has_eos():
            total += model.conditional(tuple(tokens), EOS)
        return total
    ctx: tuple[str, ...] = (SOS,) * (model.order - 1)
    total = 0.0
    for t in tokens:
        total += model.conditional(ctx, t)
        ctx = (ctx + (t,))[1:]
    if model.has_eos():
        total += model.conditional(ctx, EOS)
    return total


def perplexity(model: NGramModel, corpus: list[str]) -> float:
    """10^(-total_log10 / token_count); </s> counts one token per sentence
    when the model scores it."""
    if not corpus:
        raise EmptyCorpus("no sentences to evaluate")
    total = 0.0
    token_count = 0
    eos_term = model.has_eos()
    for sentence in corpus:
        words = sentence.split()
        total += score_sequence(model, words)
        token_count += len(words) + (1 if eos_term else 0)
    if token_count == 0:
        raise EmptyCorpus("corpus contains no tokens")
    return 10.0 ** (-total / token_count)


def save_arpa(model: NGramModel, path: str | Path) -> None:
    """Serialize to standard ARPA text (log10, tab-separated fields)."""
    lines = ["\\data\\"]
    for k in range(1, model.order + 1):
        lines.append(f"ngram {k}={len(model.probs.get(k, {}))}")
    for k in range(1, model.order + 1):
        lines.append("")
        lines.append(f"\\{k}-grams:")
        table = model.probs.get(k, {})
        backoffs = model.backoffs.get(k, {})
        for gram in sorted(table):
            row = f"{table[gram]:.7f}\t{' '.join(gram)}"
            if gram in backoffs:
                row += f"\t{backoffs[gram]:.7f}"
            lines.append(row)
    lines += ["", "\\end\\", ""]
    try:
        Path(path).write_text("\n".join(lines), encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _parse_entry(line: str, k: int) -> tuple[float, tuple[str, ...], float | None]:
    parts = line.split("\t")
    if len(parts) >= 2:
        tokens = tuple(parts[1].split())
        prob_raw, bo_raw = parts[0], parts[2] if len(parts) > 2 else None
    else:
        fields = line.split()
        if len(fields) == k + 1:
            prob_raw, tokens, bo_raw = fields[0], tuple(fields[1:]), None
        elif len(fields) == k + 2:
            prob_raw, tokens, bo_raw = fields[0], tuple(fields[1:-1]), fields[-1]
        else:
            raise MalformedSection(f"bad {k}-gram line: {line!r}")
    if len(tokens) != k:
        raise MalformedSection(f"expected {k} tokens in line: {line!r}")
    try:
        prob = float(prob_raw)
        backoff = None if bo_raw is None else float(bo_raw)
    except ValueError:
        raise MalformedSection(f"non-numeric field in line: {line!r}") from None
    return prob, tokens, backoff


def load_arpa(path: str | Path) -> NGramModel:
    """Parse an ARPA file, validating declared against actual counts."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        raise IoFailure(f"no such ARPA file: {path}") from None
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc

    lines = iter(text.splitlines())
    for line in lines:
        if line.strip() == "\\data\\":
            break
    else:
        raise MalformedSection("missing \\data\\ section")

    declared: dict[int, int] = {}
    for line in lines:
        line = line.strip()
        if not line:
            continue
        if line.startswith("ngram "):
            try:
                k_raw, count_raw = line[len("ngram "):].split("=")
                declared[int(k_raw)] = int(count_raw)
            except ValueError:
                raise MalformedSection(f"bad ngram declaration: {line!r}") from None
        else:
            first_section = line
            break
    else:
        raise MalformedSection("no n-gram sections after \\data\\")
    if not declared:
        raise MalformedSection("\\data\\ declares no orders")

    order = max(declared)
    probs: dict[int, dict[tuple[str, ...], float]] = {k: {} for k in declared}
    backoffs: dict[int, dict[tuple[str, ...], float]] = {}

    current = first_section
    ended = False
    while True:
        if current == "\\end\\":
            ended = True
            break
        if not (current.startswith("\\") and current.endswith("-grams:")):
            raise MalformedSection(f"unexpected section header: {current!r}")
        try:
            k = int(current[1 : -len("-grams:")])
        except ValueError:
            raise MalformedSection(f"bad section header: {current!r}") from None
        if k not in declared:
            raise MalformedSection(f"section {current!r} not declared in \\data\\")
        current = None
        for line in lines:
            line = line.strip()
            if not line:
                continue
            if line.startswith("\\"):
                current = line
                break
            prob, tokens, backoff = _parse_entry(line, k)
            probs[k][tokens] = prob
            if backoff is not None:
                backoffs.setdefault(k, {})[tokens] = backoff
        if current is None:
            break
    if not ended:
        raise MalformedSection("missing \\end\\")

    for k, expected in declared.items():
        if len(probs[k]) != expected:
            raise CountMismatch(
                f"ngram {k}: declared {expected}, found {len(probs[k])}"
            )
    if 1 not in probs or not probs[1]:
        raise MalformedSection("ARPA model must contain unigrams")
    return NGramModel(order=order, probs=probs, backoffs=backoffs)
