from __future__ import annotations

import numpy as np
import pytest

from asrforge.audio_io import AudioClip


def make_sine(
    freq: float = 440.0,
    duration_s: float = 1.0,
    sample_rate: int = 16000,
    amplitude: float = 0.1,
    phase: float = 0.0,
) -> AudioClip:
    n = int(round(duration_s * sample_rate))
    t = np.arange(n) / sample_rate
    return AudioClip(amplitude * np.sin(2 * np.pi * freq * t + phase), sample_rate)


@pytest.fixture
def sine_clip() -> AudioClip:
    return make_sine()


@pytest.fixture
def service_client():
    import httpx

    from asrforge.service import create_app

    transport = httpx.ASGITransport(app=create_app())
    with httpx.Client(transport=transport, base_url="http://test", timeout=None) as client:
        yield client
