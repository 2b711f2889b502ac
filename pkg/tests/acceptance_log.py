"""Shared record of acceptance-criterion outcomes for the terminal summary."""

import time

SESSION_START = time.monotonic()
RESULTS = {}
NETWORK_ATTEMPTS = []


def record(number, title, passed, detail=""):
    RESULTS[number] = (title, passed, detail)
    line = format_line(number)
    print(line)
    return line


def format_line(number):
    title, passed, detail = RESULTS[number]
    status = "PASS" if passed else "FAIL"
    return f"criterion {number:>2} {status}  {title}" + (f"  ({detail})" if detail else "")


def lines():
    return [format_line(n) for n in sorted(RESULTS)]
