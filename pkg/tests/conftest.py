from pathlib import Path

import numpy as np
import pytest

from asrforge.subword_bpe import train_bpe
from asrforge.text_normalizer import load_profile, normalize

FIXTURES = Path(__file__).parent / "fixtures"


def read_corpus(lang):
    return (FIXTURES / f"{lang}_corpus.txt").read_text(encoding="utf-8").splitlines()


@pytest.fixture(scope="session")
def persian_lines():
    profile = load_profile("persian")
    return [normalize(line, profile) for line in read_corpus("persian")]


@pytest.fixture(scope="session")
def persian_model(persian_lines):
    return train_bpe(persian_lines, 512, lang="persian")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(test_acceptance.RESULTS, key=lambda s: s[7:9]):
            terminalreporter.write_line(line)
