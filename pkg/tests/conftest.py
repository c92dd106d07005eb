import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

_LINES: list[str] = []


def record(line: str) -> None:
    _LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
