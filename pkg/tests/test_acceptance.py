"""Each acceptance criterion at its stated tolerance; one pass/fail line per criterion."""

import json

import pytest

from meander import acceptance

from conftest import RESULT_LINES


@pytest.mark.parametrize("number", sorted(acceptance.CRITERIA))
def test_criterion(number):
    res = acceptance.CRITERIA[number](seed=0)
    line = f"{res.line()}  [{res.seconds:.1f} s]"
    RESULT_LINES.append(line)
    print(line)
    for check in res.checks:
        print(f"    {'ok  ' if check.passed else 'FAIL'} {check.label}: {check.value:.4g} (threshold {check.threshold:.4g})")
    if res.diagnostics:
        print("    diagnostics:", json.dumps(res.diagnostics, default=float))
    assert res.passed, "; ".join(f"{c.label}={c.value:.4g} >= {c.threshold:.4g}" for c in res.checks if not c.passed)
