"""Acceptance criteria 1-10 at their stated tolerances.

Each test prints one PASS/FAIL line (outside pytest's capture) and then asserts
the criterion.  Nothing is relaxed here: criteria that the implementation
cannot meet fail, and the reasons are recorded alongside the project notes.
"""

import pytest

from longtail_lab import acceptance as acc


@pytest.mark.slow
@pytest.mark.parametrize("fn", acc.CRITERIA, ids=[f"criterion_{i}" for i in range(1, 11)])
def test_criterion(fn, capsys):
    res = fn()
    with capsys.disabled():
        print("\n" + res.line())
    assert res.passed, res.values
