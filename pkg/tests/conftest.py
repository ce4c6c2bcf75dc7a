from __future__ import annotations

import pytest

# criterion number -> (title, passed, detail), filled in by test_acceptance.py
ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}
TITLES = {
    1: "linear scaling approximation",
    2: "unit-capacity simple variant",
    3: "invariant audits",
    4: "per-scale iteration budget and scale count",
    5: "concave solver equals scaling on the multiedge expansion",
    6: "concave guarantee on quadratic instances",
    7: "signed weights and min-cost with reward",
    8: "gradient padding",
    9: "reduced-cost identity",
    10: "oracle against brute force",
}


@pytest.fixture
def record():
    def save(number: int, passed: bool, detail: str) -> None:
        ACCEPTANCE[number] = (TITLES[number], bool(passed), detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}")
    return save


def pytest_terminal_summary(terminalreporter):
    ran = bool(ACCEPTANCE)
    selected = any(r.nodeid.startswith("tests/test_acceptance.py")
                   for key in ("passed", "failed", "error")
                   for r in terminalreporter.stats.get(key, []))
    if not (ran or selected):
        return
    terminalreporter.section("acceptance criteria")
    for number, title in TITLES.items():
        if number in ACCEPTANCE:
            _, passed, detail = ACCEPTANCE[number]
            terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number:>2}. {title}: {detail}")
        elif selected:
            terminalreporter.write_line(f"[FAIL] {number:>2}. {title}: no result (not selected, or the test raised)")
