"""Pydantic request/response models for the HTTP API.

Paths in requests are resolved on the service host's filesystem; the
service is a single-user tool for a trusted machine, not a public API.
"""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class ErrorBody(BaseModel):
    code: str
    category: str
    message: str


class StatsRequest(BaseModel):
    manifest: str


class StatsResponse(BaseModel):
    table: str
    records: list[dict]


class ValidateRequest(BaseModel):
    manifest: str
    audio_root: str


class ValidateResponse(BaseModel):
    ok: bool
    report: str
    jsonl: str


class NormalizeRequest(BaseModel):
    manifest: str
    audio_root: str
    out_dir: str
    target_dbfs: float | None = None  # None = corpus mean over the train split
    splits: list[str] | None = None
    jobs: int = Field(default=1, ge=1)


class NormalizeResponse(BaseModel):
    target_dbfs: float
    target_source: str
    files_written: int
    silent_passthrough: int
    clipped_files: int
    out_dir: str
    sidecar: str


class RangePair(BaseModel):
    low: float
    high: float

    def as_tuple(self) -> tuple[float, float]:
        return (self.low, self.high)


class AugmentRanges(BaseModel):
    additive_snr_db: RangePair | None = None
    gaussian_snr_db: RangePair | None = None
    gain_db: RangePair | None = None
    pitch_semitones: RangePair | None = None
    rir_wet_level: RangePair | None = None


class AugmentRequest(BaseModel):
    manifest: str
    audio_root: str
    out_dir: str
    low_noise_datasets: list[str] = ["MLS", "CETUC"]
    noise_dir: str | None = None
    rir_dir: str | None = None
    seed: int = 0
    ranges: AugmentRanges | None = None
    replay_log: str | None = None
    jobs: int = Field(default=1, ge=1)


class AugmentResponse(BaseModel):
    files_written: int
    augmented: int
    passthrough: int
    out_dir: str
    log_path: str


class DecodeRequest(BaseModel):
    emissions_dir: str
    out_csv: str
    lm: str | None = None
    alpha: float = Field(default=0.5, ge=0)
    beta: float = 1.0
    beam_width: int = Field(default=100, ge=1)
    normalize: bool = False
    jobs: int = Field(default=1, ge=1)


class DecodeResponse(BaseModel):
    utterances: int
    out_csv: str


class ScoreRequest(BaseModel):
    manifest: str
    hypotheses: str
    by_dataset: bool = False
    format: str = "text-table"
    cer_counts_spaces: bool = True


class ScoreResponse(BaseModel):
    report: str
    tracks: dict[str, dict | None]


class LmTrainRequest(BaseModel):
    corpus: str
    out: str
    order: int = Field(default=4, ge=1)
    discount: float = Field(default=0.75, ge=0.0, lt=1.0)
    dev: str | None = None


class LmTrainResponse(BaseModel):
    arpa_path: str
    order: int
    ngram_counts: dict[int, int]
    dev_perplexity: float | None
