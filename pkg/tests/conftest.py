import numpy as np
import pytest

from speechmark.engine import EmbedConfig, embed
from speechmark.spreading import WatermarkKey
from speechmark.synth import make_corpus, make_utterance

# fixed test seeds; every statistical bound below was checked against these
KEY_HEX = "3f7a9c0e5b21d4f68a0c3e5b7d9f1a2c4e6b8d0f2a4c6e8b0d2f4a6c8e0b2d4f"
OTHER_KEY_HEX = "8c1e4b7a2d5f0936e8b1c4a7d0f3e6b9c2a5d8f1e4b7a0d3c6f9e2b5a8d1c4f7"
T0 = 1_262_304_000  # 2010-01-01T00:00:00Z


@pytest.fixture(scope="session")
def key():
    return WatermarkKey.from_hex(KEY_HEX)


@pytest.fixture(scope="session")
def other_key():
    return WatermarkKey.from_hex(OTHER_KEY_HEX)


@pytest.fixture(scope="session")
def cfg():
    return EmbedConfig(start_timestamp=T0)


@pytest.fixture(scope="session")
def speech10():
    return make_utterance(10.0, seed=11)


@pytest.fixture(scope="session")
def marked10(speech10, key, cfg):
    return embed(speech10, key, cfg)


@pytest.fixture(scope="session")
def speech60():
    return make_utterance(60.0, seed=60)


@pytest.fixture(scope="session")
def marked60(speech60, key, cfg):
    return embed(speech60, key, cfg)


@pytest.fixture(scope="session")
def corpus():
    return make_corpus()


@pytest.fixture(scope="session")
def marked_corpus(corpus, key, cfg):
    return [embed(u, key, cfg) for u in corpus]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance lines are collected here and echoed in the terminal summary,
# so they show up even when pytest captures stdout
_CRITERIA = {}


@pytest.fixture
def report_criterion():
    def record(number: int, passed: bool, text: str):
        line = f"CRITERION {number} {'PASS' if passed else 'FAIL'}: {text}"
        _CRITERIA[number] = line
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n])
