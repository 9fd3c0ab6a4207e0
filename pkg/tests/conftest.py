import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], max_examples=60)
settings.load_profile("default")

# acceptance criterion lines, printed once at the end of the session
ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, title: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    line = f"[{status}] criterion {number:>2}: {title}"
    if detail:
        line += f" ({detail})"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_synthetic():
    from crashsev.harness.synth import SynthParams, generate_synthetic
    from crashsev.ingest import linear_join

    data = generate_synthetic(SynthParams(n_records=1500), seed=3)
    joined = linear_join(data.crashes, data.segments)
    return data, joined


@pytest.fixture(scope="session")
def fast_settings():
    """Reduced learner sizes so pipeline tests run in seconds."""
    from crashsev.harness.config import Settings

    return Settings.from_dict({
        "text": {"w2v_dim": 16, "w2v_epochs": 2},
        "select": {"n_trees": 10, "top_k": 30},
        "rf": {"n_trees": 15},
        "adaboost": {"max_stages": 15},
        "gbt": {"n_rounds": 15, "grid_learning_rate": [0.1], "grid_max_depth": [3],
                "early_stopping_rounds": 5},
    })
