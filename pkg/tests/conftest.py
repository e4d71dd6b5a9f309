import numpy as np
import pytest

from splicelab.dsp import AudioBuffer
from splicelab.forge import VadConfig
from splicelab.hosts import HostConfig, write_host_corpus

FS = 16000
SYNTH_VAD = VadConfig(threshold_db=-15.0)
SHORT_HOST = HostConfig(duration_s=1.5)


def tone_with_gap(before=16000, gap=3200, after=16000, f0=440.0, amp=0.5):
    n = np.arange(before + gap + after)
    x = amp * np.sin(2 * np.pi * f0 * n / FS)
    x[before:before + gap] = 0.0
    return AudioBuffer(x, FS)


@pytest.fixture(scope="session")
def host_dirs(tmp_path_factory):
    root = tmp_path_factory.mktemp("hosts")
    write_host_corpus(root, 14, 12, seed=7, real_cfg=SHORT_HOST)
    return root / "real", root / "fake"


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
