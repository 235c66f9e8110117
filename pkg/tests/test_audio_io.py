from __future__ import annotations

import struct

import numpy as np
import pytest

from asrforge import audio_io
from asrforge.audio_io import AudioClip, level_stats, read_wav, resample, write_wav
from asrforge.errors import CorruptHeader, EmptyAudio, IoFailure, UnsupportedFormat

from conftest import make_sine
from oracles import rms_dbfs


def _write_raw_wav(path, payload: bytes, fmt_tag=1, channels=1, rate=16000, bits=16):
    block = channels * bits // 8
    header = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    header += b"fmt " + struct.pack(
        "<IHHIIHH", 16, fmt_tag, channels, rate, rate * block, block, bits
    )
    header += b"data" + struct.pack("<I", len(payload))
    path.write_bytes(header + payload)


class TestReadWav:
    def test_pcm16_scaling(self, tmp_path):
        path = tmp_path / "a.wav"
        _write_raw_wav(path, struct.pack("<2h", 16384, -16384))
        clip = read_wav(path)
        assert clip.sample_rate_hz == 16000
        assert np.array_equal(clip.samples, [0.5, -0.5])

    def test_stereo_mixdown_mean(self, tmp_path):
        path = tmp_path / "st.wav"
        # channels [1.0] and [0.0] -> mono [0.5]
        _write_raw_wav(path, struct.pack("<2f", 1.0, 0.0), fmt_tag=3, channels=2, bits=32)
        clip = read_wav(path)
        assert np.array_equal(clip.samples, [0.5])

    def test_duration_preserves_source_rate(self, tmp_path):
        path = tmp_path / "8k.wav"
        _write_raw_wav(path, struct.pack("<8000h", *([0] * 8000)), rate=8000)
        clip = read_wav(path)
        assert clip.sample_rate_hz == 8000
        assert clip.duration_s == 1.0

    def test_float32_roundtrip(self, tmp_path):
        path = tmp_path / "f.wav"
        values = np.array([0.25, -0.75, 0.5], dtype="<f4")
        _write_raw_wav(path, values.tobytes(), fmt_tag=3, bits=32)
        clip = read_wav(path)
        assert np.array_equal(clip.samples, values.astype(np.float64))

    def test_rejects_non_riff(self, tmp_path):
        path = tmp_path / "x.wav"
        path.write_bytes(b"OGGSxxxxxxxxxxxxxxxx")
        with pytest.raises(CorruptHeader):
            read_wav(path)

    def test_rejects_unsupported_codec(self, tmp_path):
        path = tmp_path / "ulaw.wav"
        _write_raw_wav(path, b"\x00\x00", fmt_tag=7, bits=8)
        with pytest.raises(UnsupportedFormat):
            read_wav(path)

    def test_rejects_empty_payload(self, tmp_path):
        path = tmp_path / "empty.wav"
        _write_raw_wav(path, b"")
        with pytest.raises(EmptyAudio):
            read_wav(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoFailure):
            read_wav(tmp_path / "nope.wav")


class TestWriteWav:
    def test_zero_roundtrip_identical(self, tmp_path):
        clip = AudioClip(np.zeros(16), 16000)
        write_wav(clip, tmp_path / "z.wav")
        assert np.array_equal(read_wav(tmp_path / "z.wav").samples, clip.samples)

    def test_half_within_quantization(self, tmp_path):
        clip = AudioClip(np.array([0.5]), 16000)
        write_wav(clip, tmp_path / "h.wav")
        back = read_wav(tmp_path / "h.wav")
        assert abs(back.samples[0] - 0.5) <= 1.0 / 32768

    def test_full_scale_quantizes_to_32767(self, tmp_path):
        # oracle: integer quantization formula, full scale -> 32767/32768
        expected = min(float(np.round(1.0 * 32768)), 32767.0) / 32768.0
        assert expected == 32767 / 32768
        clip = AudioClip(np.array([1.0]), 16000)
        write_wav(clip, tmp_path / "one.wav")
        back = read_wav(tmp_path / "one.wav")
        assert back.samples[0] == expected
        assert abs(back.samples[0] - 1.0) <= 1.0 / 32768

    def test_roundtrip_error_bound_random(self, tmp_path):
        rng = np.random.default_rng(7)
        clip = AudioClip(rng.uniform(-1, 1, 2048), 16000)
        write_wav(clip, tmp_path / "r.wav")
        back = read_wav(tmp_path / "r.wav")
        assert np.max(np.abs(back.samples - clip.samples)) <= 1.0 / 32768

    def test_out_of_range_clipped_and_counted(self, tmp_path):
        clip = AudioClip(np.array([2.0, -3.0, 0.5]), 16000)
        clipped = write_wav(clip, tmp_path / "c.wav")
        assert clipped == 2
        back = read_wav(tmp_path / "c.wav")
        assert np.max(np.abs(back.samples)) <= 1.0


class TestResample:
    def test_identity(self, sine_clip):
        out = resample(sine_clip, 16000)
        assert out.sample_rate_hz == 16000
        assert np.array_equal(out.samples, sine_clip.samples)

    def test_length_formula_upsample(self):
        clip = make_sine(duration_s=1.0, sample_rate=8000)
        out = resample(clip, 16000)
        assert out.sample_rate_hz == 16000
        assert len(out.samples) == 16000

    def test_sine_frequency_preserved(self):
        # oracle: dominant DFT bin of the output
        clip = make_sine(freq=440.0, duration_s=1.0, sample_rate=48000, amplitude=0.5)
        out = resample(clip, 16000)
        spectrum = np.abs(np.fft.rfft(out.samples))
        freqs = np.fft.rfftfreq(len(out.samples), 1 / 16000)
        peak = freqs[int(np.argmax(spectrum))]
        bin_width = 16000 / len(out.samples)
        assert abs(peak - 440.0) <= bin_width

    @pytest.mark.parametrize("src,dst", [(48000, 16000), (8000, 16000), (44100, 16000)])
    def test_rms_preserved_for_bandlimited(self, src, dst):
        # tone below 0.4 * min Nyquist
        freq = 0.3 * min(src, dst) / 2
        clip = make_sine(freq=freq, duration_s=0.5, sample_rate=src, amplitude=0.25)
        out = resample(clip, dst)
        in_db = rms_dbfs(clip.samples)
        out_db = rms_dbfs(out.samples)
        assert abs(in_db - out_db) < 0.5


class TestLevelStats:
    def test_full_scale(self):
        stats = level_stats(AudioClip(np.ones(128), 16000))
        assert stats.rms_dbfs == 0.0
        assert stats.peak_dbfs == 0.0
        assert not stats.is_silent

    def test_constant_tenth(self):
        stats = level_stats(AudioClip(np.full(64, 0.1), 16000))
        assert stats.rms_dbfs == pytest.approx(-20.0, abs=1e-12)

    def test_silence_flagged_with_sentinel(self):
        stats = level_stats(AudioClip(np.zeros(64), 16000))
        assert stats.is_silent
        assert stats.rms_dbfs == float("-inf")

    def test_peak_at_least_rms(self):
        rng = np.random.default_rng(3)
        clip = AudioClip(rng.uniform(-0.5, 0.5, 1000), 16000)
        stats = level_stats(clip)
        assert stats.peak_dbfs >= stats.rms_dbfs

    def test_pure_function(self, sine_clip):
        a = level_stats(sine_clip)
        b = level_stats(sine_clip)
        assert a == b

    def test_matches_plain_math(self, sine_clip):
        assert level_stats(sine_clip).rms_dbfs == pytest.approx(
            rms_dbfs(sine_clip.samples), abs=1e-12
        )
