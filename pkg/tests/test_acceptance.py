"""Full verification battery: one test per quantitative acceptance criterion.

Each test prints the report's single pass/fail summary line and asserts it
passed at the stated tolerance.  Run with `pytest -s tests/test_acceptance.py`
to see the lines as they complete.
"""

import pytest

from ccbox import acceptance


@pytest.mark.parametrize("number", range(1, 13))
def test_criterion(number):
    fn = getattr(acceptance, f"criterion_{number}")
    rep = fn()
    print(rep.summary_line())
    assert rep.passed, rep.summary_line()


def test_run_all_converts_exceptions_to_failed_reports(monkeypatch):
    def boom(seed=0):
        raise RuntimeError("synthetic failure")

    monkeypatch.setattr(acceptance, "CRITERIA", [boom])
    reports = acceptance.run_all(seed=0)
    assert len(reports) == 1
    assert not reports[0].passed
