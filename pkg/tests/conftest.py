import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from vgmfeat import cli


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    """27-track synthetic corpus (3 genres x 3 games x 3 tracks), seed 7."""
    d = tmp_path_factory.mktemp("corpus")
    assert cli.main(["synth-corpus", "--out", str(d), "--seed", "7"]) == 0
    return d


def sine(freq_hz, duration_s=1.0, sample_rate_hz=48000, amplitude=0.5, phase=0.0):
    t = np.arange(round(duration_s * sample_rate_hz)) / sample_rate_hz
    return amplitude * np.sin(2.0 * np.pi * freq_hz * t + phase)
