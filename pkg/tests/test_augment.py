from __future__ import annotations

import math
from collections import Counter
from pathlib import Path

import numpy as np
import pytest

from asrforge.audio_io import AudioClip, write_wav
from asrforge.augment import (
    AugmentPolicy,
    Banks,
    NoiseAction,
    NoiseKind,
    ParamRanges,
    add_gaussian,
    apply_action,
    convolve_rir,
    draw_action,
    load_banks,
    mix_additive,
    pitch_shift,
    select_and_apply,
)
from asrforge.corpus import ManifestEntry, SpeechStyle, Split, Variant
from asrforge.errors import EmptyRir, NoiseBankEmpty, SilentNoise, SilentSignal
from asrforge.seeds import file_seed, fnv1a64, splitmix64

from conftest import make_sine
from oracles import rms_dbfs


def _entry(path: str, dataset: str = "CETUC") -> ManifestEntry:
    return ManifestEntry(
        path, "texto", 0.1, dataset, SpeechStyle.PREPARED, Variant.PT_BR, Split.TRAIN
    )


class TestSeeds:
    def test_fnv1a64_known_vectors(self):
        # published FNV-1a 64-bit test vectors
        assert fnv1a64(b"") == 0xCBF29CE484222325
        assert fnv1a64(b"a") == 0xAF63DC4C8601EC8C
        assert fnv1a64(b"foobar") == 0x85944171F73967E8

    def test_splitmix64_known_vector(self):
        # first output of SplitMix64 seeded with 0 (reference implementation)
        assert splitmix64(0) == 0xE220A8397B1DCDAF

    def test_file_seed_is_path_sensitive(self):
        assert file_seed(1, "a.wav") != file_seed(1, "b.wav")
        assert file_seed(1, "a.wav") != file_seed(2, "a.wav")
        assert file_seed(1, "a.wav") == file_seed(1, "a.wav")


class TestMixAdditive:
    def test_snr_20db_noise_component(self, sine_clip):
        # oracle: measure RMS of (output - signal)
        noise = make_sine(freq=977.0, amplitude=0.1414213562373095)
        out = mix_additive(sine_clip, noise, 20.0)
        component = out.samples - sine_clip.samples
        sig_db = rms_dbfs(sine_clip.samples)
        noise_db = rms_dbfs(component)
        assert sig_db - noise_db == pytest.approx(20.0, abs=0.01)

    def test_snr_zero_matches_signal_rms(self, sine_clip):
        noise = make_sine(freq=733.0, amplitude=0.02)
        out = mix_additive(sine_clip, noise, 0.0)
        component = out.samples - sine_clip.samples
        assert rms_dbfs(component) == pytest.approx(rms_dbfs(sine_clip.samples), abs=0.01)

    def test_infinite_snr_rejected(self, sine_clip):
        noise = make_sine(freq=733.0)
        with pytest.raises(ValueError):
            mix_additive(sine_clip, noise, float("inf"))

    def test_short_noise_tiled(self):
        # oracle: cross-check against an explicitly tiled buffer
        clip = make_sine(duration_s=0.5)
        rng = np.random.default_rng(11)
        short = AudioClip(rng.uniform(-0.2, 0.2, 1000), 16000)
        out = mix_additive(clip, short, 15.0)
        component = out.samples - clip.samples
        period = 1000
        assert np.allclose(component[:period], component[period : 2 * period])
        expected = np.tile(short.samples, 8)[: len(clip.samples)]
        expected = expected * (np.linalg.norm(component) / np.linalg.norm(expected))
        assert np.allclose(component, expected, atol=1e-12)

    def test_silent_inputs_rejected(self, sine_clip):
        silent = AudioClip(np.zeros(100), 16000)
        with pytest.raises(SilentSignal):
            mix_additive(silent, sine_clip, 10.0)
        with pytest.raises(SilentNoise):
            mix_additive(sine_clip, silent, 10.0)

    def test_output_in_range(self):
        clip = make_sine(amplitude=0.9)
        noise = make_sine(freq=700.0, amplitude=0.9)
        out = mix_additive(clip, noise, 0.0)
        assert np.max(np.abs(out.samples)) <= 1.0


class TestConvolveRir:
    def test_unit_impulse_identity(self, sine_clip):
        rir = AudioClip(np.array([1.0]), 16000)
        out = convolve_rir(sine_clip, rir, wet_level=1.0)
        assert np.max(np.abs(out.samples - sine_clip.samples)) < 1e-6

    def test_dry_path_exact(self, sine_clip):
        rir = AudioClip(np.array([0.3, 0.5, 0.1]), 16000)
        out = convolve_rir(sine_clip, rir, wet_level=0.0)
        assert np.array_equal(out.samples, sine_clip.samples)

    def test_one_sample_delay(self):
        # oracle: direct O(N*K) convolution
        clip = make_sine(duration_s=0.05)
        rir = AudioClip(np.array([0.0, 1.0]), 16000)
        out = convolve_rir(clip, rir, wet_level=1.0)
        direct = np.convolve(clip.samples, [0.0, 1.0])[: len(clip.samples)]
        direct = direct * (
            np.sqrt(np.mean(clip.samples**2)) / np.sqrt(np.mean(direct**2))
        )
        assert np.allclose(out.samples, direct, atol=1e-9)

    def test_rms_renormalized(self, sine_clip):
        rng = np.random.default_rng(3)
        rir = AudioClip(np.abs(rng.normal(0, 1, 64)) * np.exp(-np.arange(64) / 8), 16000)
        out = convolve_rir(sine_clip, rir, wet_level=0.7)
        assert rms_dbfs(out.samples) == pytest.approx(rms_dbfs(sine_clip.samples), abs=1e-6)

    def test_empty_or_zero_rir_rejected(self, sine_clip):
        with pytest.raises(EmptyRir):
            convolve_rir(sine_clip, AudioClip(np.zeros(4), 16000), 0.5)


class TestPitchShift:
    def test_zero_identity(self, sine_clip):
        out = pitch_shift(sine_clip, 0.0)
        assert np.array_equal(out.samples, sine_clip.samples)

    def test_octave_up(self):
        # oracle: dominant DFT bin doubles, length halves
        clip = make_sine(freq=440.0, duration_s=1.0, amplitude=0.5)
        out = pitch_shift(clip, 12.0)
        assert abs(len(out.samples) - len(clip.samples) / 2) <= 1
        spectrum = np.abs(np.fft.rfft(out.samples))
        freqs = np.fft.rfftfreq(len(out.samples), 1 / 16000)
        peak = freqs[int(np.argmax(spectrum))]
        assert abs(peak - 880.0) <= 16000 / len(out.samples)

    def test_octave_down_doubles_length(self, sine_clip):
        out = pitch_shift(sine_clip, -12.0)
        assert abs(len(out.samples) - 2 * len(sine_clip.samples)) <= 1

    def test_fractional_length_formula(self, sine_clip):
        semitones = 1.3
        out = pitch_shift(sine_clip, semitones)
        rate = 2 ** (semitones / 12)
        assert len(out.samples) == int(math.floor(len(sine_clip.samples) / rate + 0.5))

    def test_sample_rate_preserved(self, sine_clip):
        assert pitch_shift(sine_clip, 2.0).sample_rate_hz == 16000


class TestAddGaussian:
    def test_deterministic_per_seed(self, sine_clip):
        a = add_gaussian(sine_clip, 20.0, seed=99)
        b = add_gaussian(sine_clip, 20.0, seed=99)
        assert np.array_equal(a.samples, b.samples)
        c = add_gaussian(sine_clip, 20.0, seed=100)
        assert not np.array_equal(a.samples, c.samples)

    def test_snr_within_5_percent(self):
        # oracle: sample-RMS concentration for >= 1 s at 16 kHz
        clip = make_sine(duration_s=1.0, amplitude=0.1414213562373095)
        out = add_gaussian(clip, 20.0, seed=7)
        component = out.samples - clip.samples
        target_rms = 10 ** ((rms_dbfs(clip.samples) - 20.0) / 20)
        measured = np.sqrt(np.mean(component**2))
        assert abs(measured - target_rms) / target_rms < 0.05

    def test_zero_mean_clt_bound(self):
        clip = make_sine(duration_s=1.0)
        out = add_gaussian(clip, 15.0, seed=21)
        component = out.samples - clip.samples
        sigma = np.std(component)
        n = len(component)
        assert abs(np.mean(component)) < 4 * sigma / math.sqrt(n)

    def test_silent_signal_rejected(self):
        with pytest.raises(SilentSignal):
            add_gaussian(AudioClip(np.zeros(100), 16000), 20.0, seed=1)


@pytest.fixture
def bank_dirs(tmp_path):
    noise_dir = tmp_path / "noise"
    rir_dir = tmp_path / "rir"
    noise_dir.mkdir()
    rir_dir.mkdir()
    rng = np.random.default_rng(1234)
    for i in range(3):
        write_wav(AudioClip(rng.uniform(-0.3, 0.3, 3200), 16000), noise_dir / f"n{i}.wav")
    for i in range(2):
        kernel = np.exp(-np.arange(256) / 32.0) * rng.uniform(0.2, 1.0, 256)
        write_wav(AudioClip(kernel / np.max(np.abs(kernel)), 16000), rir_dir / f"r{i}.wav")
    return noise_dir, rir_dir


@pytest.fixture
def policy(bank_dirs) -> AugmentPolicy:
    noise_dir, rir_dir = bank_dirs
    return AugmentPolicy(
        low_noise_datasets=frozenset({"MLS", "CETUC"}),
        noise_dir=noise_dir,
        rir_dir=rir_dir,
        global_seed=2024,
    )


class TestSelectAndApply:
    def test_non_eligible_untouched(self, policy, sine_clip):
        out, action = select_and_apply(_entry("x.wav", dataset="ALIP"), sine_clip, policy)
        assert action is None
        assert np.array_equal(out.samples, sine_clip.samples)

    def test_eligible_gets_one_of_five(self, policy, sine_clip):
        out, action = select_and_apply(_entry("x.wav", dataset="CETUC"), sine_clip, policy)
        assert action is not None
        assert action.kind in NoiseKind

    def test_kind_frequencies_near_uniform(self, policy):
        banks = load_banks(policy)
        kinds = Counter(
            draw_action(_entry(f"clips/{i:05d}.wav"), policy, banks).kind
            for i in range(10_000)
        )
        for kind in NoiseKind:
            assert 0.18 <= kinds[kind] / 10_000 <= 0.22

    def test_parameters_within_ranges(self, policy):
        banks = load_banks(policy)
        ranges = ParamRanges()
        for i in range(500):
            action = draw_action(_entry(f"r/{i}.wav"), policy, banks)
            p = action.params
            if action.kind is NoiseKind.ADDITIVE_NOISE:
                assert ranges.additive_snr_db[0] <= p["snr_db"] <= ranges.additive_snr_db[1]
            elif action.kind is NoiseKind.GAUSSIAN_NOISE:
                assert ranges.gaussian_snr_db[0] <= p["snr_db"] <= ranges.gaussian_snr_db[1]
            elif action.kind is NoiseKind.GAIN_PERTURB:
                assert ranges.gain_db[0] <= p["gain_db"] <= ranges.gain_db[1]
            elif action.kind is NoiseKind.PITCH_SHIFT:
                assert ranges.pitch_semitones[0] <= p["semitones"] <= ranges.pitch_semitones[1]
            else:
                assert ranges.rir_wet_level[0] <= p["wet_level"] <= ranges.rir_wet_level[1]

    def test_same_seed_bit_identical(self, policy, sine_clip):
        entry = _entry("same.wav")
        out1, act1 = select_and_apply(entry, sine_clip, policy)
        out2, act2 = select_and_apply(entry, sine_clip, policy)
        assert act1 == act2
        assert np.array_equal(out1.samples, out2.samples)

    def test_action_json_roundtrip_replays_bit_identically(self, policy, sine_clip):
        banks = load_banks(policy)
        for i in range(40):
            entry = _entry(f"rt/{i}.wav")
            out, action = select_and_apply(entry, sine_clip, policy, banks)
            replayed = apply_action(
                sine_clip, NoiseAction.from_json(action.to_json()), banks
            )
            assert np.array_equal(out.samples, replayed.samples), action.kind

    def test_empty_banks_raise_when_drawn(self, sine_clip):
        from asrforge.errors import RirBankEmpty

        bare = AugmentPolicy(
            low_noise_datasets=frozenset({"CETUC"}), noise_dir=None, rir_dir=None,
            global_seed=3,
        )
        banks = load_banks(bare)
        seen: set[type] = set()
        for i in range(200):
            try:
                draw_action(_entry(f"probe/{i}.wav"), bare, banks)
            except (NoiseBankEmpty, RirBankEmpty) as exc:
                seen.add(type(exc))
        assert seen == {NoiseBankEmpty, RirBankEmpty}

    def test_outputs_stay_in_range(self, policy, sine_clip):
        loud = make_sine(amplitude=0.95)
        banks = load_banks(policy)
        for i in range(60):
            out, _ = select_and_apply(_entry(f"l/{i}.wav"), loud, policy, banks)
            assert np.max(np.abs(out.samples)) <= 1.0

    def test_only_pitch_changes_length(self, policy, sine_clip):
        banks = load_banks(policy)
        for i in range(60):
            out, action = select_and_apply(_entry(f"n/{i}.wav"), sine_clip, policy, banks)
            assert out.sample_rate_hz == sine_clip.sample_rate_hz
            if action.kind is not NoiseKind.PITCH_SHIFT:
                assert len(out.samples) == len(sine_clip.samples)
