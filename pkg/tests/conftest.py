from __future__ import annotations

import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        name, ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:>2} {'PASS' if ok else 'FAIL'}  {name}: {detail}")
