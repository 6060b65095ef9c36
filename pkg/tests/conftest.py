import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def hurdle_csv(tmp_path):
    """CSV with 40% zeros, two covariates and one unusable row."""
    rng = np.random.default_rng(5)
    n = 300
    x1 = rng.normal(4.0, 1.0, n)
    x2 = (rng.random(n) < 0.5).astype(float)
    zero = rng.random(n) < 0.4
    y = np.where(zero, 0.0, np.exp(1.0 + 0.2 * x1 - 0.3 * x2 + rng.normal(0, 0.5, n)))
    path = tmp_path / "data.csv"
    lines = ["y,x1,x2"] + [f"{a},{b},{c}" for a, b, c in zip(y.tolist(), x1.tolist(), x2.tolist())]
    lines.append(",1.0,0.0")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def pytest_terminal_summary(terminalreporter):
    from tests import test_acceptance

    verdicts = test_acceptance.VERDICTS
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(verdicts):
        terminalreporter.write_line(verdicts[k])
