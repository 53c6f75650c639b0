import pytest

from boat.ingest import SyntheticSpec, write_synthetic_dataset
from boat.storage import open_dataset

# criterion number -> (ok, detail); filled by tests/test_acceptance.py
ACCEPTANCE: dict = {}

SMALL = SyntheticSpec(seed=11, counties=3, grids_per_county=3, days=2, speed_grids_per_county=2)


@pytest.fixture(scope="session")
def small_path(tmp_path_factory):
    return write_synthetic_dataset(SMALL, tmp_path_factory.mktemp("small") / "ds")


@pytest.fixture(scope="session")
def small_ds(small_path):
    ds = open_dataset(small_path)
    yield ds
    ds.close()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        status, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {status} - {detail}")
