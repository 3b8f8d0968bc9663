import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

# (criterion id, description, passed) in execution order; filled by test_acceptance.
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for cid, desc, ok, detail in ACCEPTANCE_RESULTS:
        line = f"[{'PASS' if ok else 'FAIL'}] {cid}: {desc}"
        if detail:
            line += f" ({detail})"
        terminalreporter.write_line(line)
