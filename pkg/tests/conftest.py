from __future__ import annotations

from pathlib import Path

import pytest

from highlight_danmaku.comments import load_bank
from highlight_danmaku.state import ActionClass, GameFrame, MatchConfig, PlayerState

FIXTURES = Path(__file__).parent / "fixtures"

MINIMAL_BANK = (
    "player\t1\tRyu\n"
    "player\t2\tKen\n"
    "lexicon\tamazing\n"
    "situational\tRoundStart\tRound start!\n"
    "situational\tBigDamage\t«ACTOR» lands a huge hit!\n"
    "situational\tCloseCombat\tUp close now\n"
    "situational\tSpecialMove\t«ACTOR» uses «MOVE»\n"
    "situational\tSuperMove\tSUPER by «ACTOR»\n"
    "situational\tLowHealth\t«ACTOR» is in danger\n"
    "situational\tRoundEnd\tKO!\n"
    "highlight\tHighlightOnset\t«EMO»!!!\n"
)


def frame(k=1, round_id=1, hp=(400, 400), x=(100, 800), action=(ActionClass.IDLE, ActionClass.IDLE)):
    """Build a GameFrame with compact per-player tuples."""
    return GameFrame(
        k,
        round_id,
        PlayerState(hp[0], x[0], ActionClass(action[0])),
        PlayerState(hp[1], x[1], ActionClass(action[1])),
    )


@pytest.fixture
def match():
    return MatchConfig(max_hp=400, stage_width=960, fps=60)


@pytest.fixture
def minimal_bank():
    return load_bank(MINIMAL_BANK)


@pytest.fixture
def fixtures_dir():
    return FIXTURES


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
