import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from linstack.datasets import make_synthetic, read_csv  # noqa: E402

DATA = Path(__file__).parent / "data"

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        number, text = mark.args
        detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
        _criteria[number] = (text, report.passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        text, passed, detail = _criteria[number]
        line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}: {text}"
        if detail:
            line += f" ({detail})"
        terminalreporter.write_line(line)


@pytest.fixture
def detail(request):
    """Attach a short measurement to the acceptance summary line."""

    def add(text):
        request.node.user_properties.append(("detail", text))

    return add


@pytest.fixture(scope="session")
def wine():
    return read_csv(DATA / "wine.csv", header=True)


def synthetic_fixture():
    """Wine-shaped seeded synthetic data: 3 classes, 13 features, 4 informative."""
    return make_synthetic(n_per_class=60, n_classes=3, n_features=13, n_informative=4, seed=0)


@pytest.fixture(scope="session")
def synthetic():
    return synthetic_fixture()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def diverse_level1(synthetic):
    """Level-1 data of the 25-member diverse ensemble on the synthetic fixture."""
    from linstack.stacking import diverse_spec, internal_cv_scores

    return internal_cv_scores(synthetic.X, synthetic.y, diverse_spec(), seed=2024, n_classes=3)
