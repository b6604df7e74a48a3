import json
from pathlib import Path

import pytest

FIXTURE_DIR = Path(__file__).parent / "fixtures" / "chains"


@pytest.fixture(scope="session")
def chain_manifest() -> dict:
    return json.loads((FIXTURE_DIR / "manifest.json").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def chain_fixtures(chain_manifest) -> dict[str, str]:
    """Name -> raw canonical chain text for the six golden chains."""
    return {
        name: (FIXTURE_DIR / info["file"]).read_text(encoding="utf-8")
        for name, info in chain_manifest.items()
    }


def pytest_runtest_logreport(report):
    # One visible pass/fail line per acceptance criterion.
    if "test_acceptance" not in report.nodeid:
        return
    if report.when != "call" and not (report.when == "setup" and report.skipped):
        return
    name = report.nodeid.split("::")[-1]
    if report.skipped:
        status = "SKIP"
    else:
        status = "PASS" if report.passed else "FAIL"
    print(f"\n[ACCEPTANCE {status}] {name}")
