"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

from __future__ import annotations

import pytest

from simplemech.acceptance import CRITERIA


@pytest.mark.parametrize("k", range(1, len(CRITERIA) + 1))
def test_criterion(k, capsys):
    res = CRITERIA[k - 1]()
    with capsys.disabled():
        print("\n" + res.line())
    assert res.ok, res.detail
