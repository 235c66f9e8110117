"""Exception hierarchy shared by all modules.

Every error carries a ``category`` that the service and CLI map onto a
stable contract: ``input`` -> HTTP 400 / exit 2, ``domain`` -> HTTP 422 /
exit 3, ``io`` -> HTTP 500 / exit 4.
"""

from __future__ import annotations


class AsrForgeError(Exception):
    """Base class for all toolkit errors."""

    category = "domain"

    @property
    def code(self) -> str:
        return type(self).__name__


class InputError(AsrForgeError):
    """Malformed user input: manifests, flags, CSV rows."""

    category = "input"


class IoFailure(AsrForgeError):
    """Filesystem-level failure (missing file, unreadable path, write error)."""

    category = "io"


# --- audio-io ---------------------------------------------------------------

class UnsupportedFormat(AsrForgeError):
    """WAV codec other than PCM-16 / IEEE float-32, or channel count > 2."""


class CorruptHeader(AsrForgeError):
    """File is not a parseable RIFF/WAVE container."""


class EmptyAudio(AsrForgeError):
    """Audio payload decodes to zero samples."""


# --- gain-norm --------------------------------------------------------------

class AllSilent(AsrForgeError):
    """No non-silent clip available to estimate the corpus mean gain."""


class SilentInput(AsrForgeError):
    """Per-clip normalization cannot scale a silent clip."""


class MissingFile(IoFailure):
    """A manifest entry points at an audio file that does not exist."""


# --- augment ----------------------------------------------------------------

class SilentSignal(AsrForgeError):
    """SNR is undefined against a silent signal."""


class SilentNoise(AsrForgeError):
    """SNR is undefined with a silent noise source."""


class EmptyRir(AsrForgeError):
    """Impulse response is empty or identically zero."""


class NoiseBankEmpty(AsrForgeError):
    """Additive-noise transform selected but the noise bank holds no WAVs."""


class RirBankEmpty(AsrForgeError):
    """RIR transform selected but the impulse-response bank holds no WAVs."""


# --- corpus -----------------------------------------------------------------

class ManifestError(InputError):
    """One or more manifest rows failed to parse.

    ``problems`` is a list of (line_number, message) pairs covering every
    offending row, not just the first.
    """

    def __init__(self, problems: list[tuple[int, str]]):
        self.problems = list(problems)
        lines = "; ".join(f"line {n}: {msg}" for n, msg in self.problems)
        super().__init__(f"manifest errors: {lines}")


class MissingHeader(InputError):
    """Manifest lacks the required CSV header."""


# --- ngram-lm ---------------------------------------------------------------

class EmptyCorpus(AsrForgeError):
    """LM training or perplexity received an empty corpus."""


class OrderTooLargeForCorpus(AsrForgeError):
    """No n-gram of the requested order occurs in the training data."""


class MalformedSection(AsrForgeError):
    """ARPA file violates the \\data\\ / \\k-grams: / \\end\\ structure."""


class CountMismatch(AsrForgeError):
    """ARPA header declares a different n-gram count than the body lists."""


# --- ctc-decode -------------------------------------------------------------

class BadMagic(AsrForgeError):
    """Emission file does not start with the CTCE magic/version."""


class DimensionOverflow(AsrForgeError):
    """Emission header declares absurd or inconsistent dimensions."""


class TruncatedPayload(AsrForgeError):
    """Emission file ends before the declared payload is complete."""


class VocabMismatch(AsrForgeError):
    """LM fusion requested but the emission vocabulary has no word delimiter."""


# --- metrics ----------------------------------------------------------------

class NoValidReferences(AsrForgeError):
    """Every reference was empty after text normalization."""


class UnmatchedHypothesis(AsrForgeError):
    """Hypothesis rows reference audio paths absent from the manifest."""

    def __init__(self, paths: list[str]):
        self.paths = list(paths)
        shown = ", ".join(self.paths[:10])
        more = "" if len(self.paths) <= 10 else f" (+{len(self.paths) - 10} more)"
        super().__init__(f"hypotheses without manifest entries: {shown}{more}")
