"""Per-criterion outcomes collected by the acceptance tests and printed at the end of the run."""

from __future__ import annotations

RESULTS: dict[int, tuple[bool, str]] = {}


def record(number: int, ok: bool, detail: str) -> bool:
    previous = RESULTS.get(number)
    if previous is not None:
        ok = ok and previous[0]
        detail = previous[1] + "; " + detail
    RESULTS[number] = (bool(ok), detail)
    print(f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}")
    return bool(ok)
