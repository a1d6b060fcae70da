import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import pytest

from adcss.forge import SynthConfig, build_split


def small_synth_config(**overrides) -> SynthConfig:
    cfg = dict(n_train=12, n_valid=4, n_test=4, toy_min_dur=0.2, toy_max_dur=0.4, max_utterances=2,
               max_silence=0.3, toy_utterances=4)
    cfg.update(overrides)
    return SynthConfig(**cfg)


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """Tiny 2-speaker toy dataset: {split: manifest path}."""
    root = tmp_path_factory.mktemp("toy2")
    cfg = small_synth_config()
    return {split: build_split(cfg, split, root) for split in ("train", "valid", "test")}


def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance PASS/FAIL lines, which are otherwise captured."""
    lines = getattr(sys.modules.get("test_acceptance"), "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance summary")
        for line in lines:
            terminalreporter.write_line(line)
