"""Acceptance gate: every criterion at its stated tolerance and runtime budget.

Each criterion prints one ``[PASS]``/``[FAIL]`` line; the lines are repeated
in the terminal summary so they survive output capture.  Run directly with
``python tests/test_acceptance.py`` for the bare report.
"""

import sys

import pytest

from shortvol.validation import CRITERIA

# seconds; criteria without a stated budget are unbounded
RUNTIME_BUDGET = {1: 1.0, 2: 30.0, 3: 120.0, 7: 300.0, 10: 600.0}

ACCEPTANCE_LINES = []


def evaluate(num):
    res = CRITERIA[num]()
    budget = RUNTIME_BUDGET.get(num)
    over = budget is not None and res.elapsed > budget
    ok = res.passed and not res.skipped and not over
    note = f" runtime {res.elapsed:.1f}s exceeds {budget:.0f}s" if over else ""
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {res.line()}{note}"
    return ok, line


@pytest.mark.parametrize("num", sorted(CRITERIA))
def test_criterion(num):
    ok, line = evaluate(num)
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


if __name__ == "__main__":
    results = [evaluate(n) for n in sorted(CRITERIA)]
    for _, line in results:
        print(line, flush=True)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
