"""Acceptance criteria, one test per criterion.

Each test prints a single PASS/FAIL line with the measured numbers.
"""

import pytest

from weilkit.verify import CHECKS, run_check

NUMBERS = [c[0] for c in CHECKS]


@pytest.mark.parametrize("number", NUMBERS)
def test_acceptance(number, capsys):
    r = run_check(number)
    with capsys.disabled():
        print("\n" + r.line())
    assert r.passed, r.detail
