import os
import sys

import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

from fuzzylive.synth import CorpusSpec, synth_generate  # noqa: E402

settings.register_profile("default", deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def ideal_corpus(tmp_path_factory):
    """Seeded corpus: 50 live plus 50 of each attack medium."""
    out = tmp_path_factory.mktemp("ideal")
    synth_generate(CorpusSpec(), seed=2013, out_dir=str(out))
    return out / "manifest.json"


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("small")
    spec = CorpusSpec(live=4, attacks={"photo-laptop": 2, "photo-paper": 2, "video-hd": 2})
    synth_generate(spec, seed=11, out_dir=str(out))
    return out / "manifest.json"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
