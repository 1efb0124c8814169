"""Shared record of acceptance outcomes, printed at the end of the session."""

LINES = {}


def report(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"criterion {number:2d} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
    LINES[number] = line
    print(line)
