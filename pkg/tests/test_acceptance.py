"""Acceptance criteria 1-9 at their stated tolerances.

Each test prints one pass/fail line; the lines are repeated in the terminal
summary. Criterion 8 is expected to fail: its resonant-control bound is not
attainable for r = 1 (see the README).
"""
import pytest

from nflab.acceptance import CRITERIA

SLOW = {6, 8, 9}


@pytest.mark.parametrize("number", [pytest.param(n, marks=pytest.mark.slow) if n in SLOW else n
                                    for n in sorted(CRITERIA)])
def test_criterion(number, acceptance_log):
    res = CRITERIA[number]()
    acceptance_log.append(res)
    print(res.line())
    assert res.passed, res.line()
