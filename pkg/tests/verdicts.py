"""One PASS/FAIL line per acceptance criterion, repeated in the terminal summary."""

CRITERIA: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    line = f"CRITERION {number}: {'PASS' if passed else 'FAIL'} {detail}"
    CRITERIA[number] = line
    print(line)
