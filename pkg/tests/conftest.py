import json
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "repo", derandomize=True, deadline=None, max_examples=100, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")

ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture
def icu_card_path() -> Path:
    return ROOT / "samples" / "icu_card.json"


@pytest.fixture
def icu_card_doc(icu_card_path) -> dict:
    return json.loads(icu_card_path.read_text(encoding="utf-8"))


@pytest.fixture
def shift_csv(tmp_path) -> Path:
    from regime_gauge.datasets import SimConfig, TabularDataset, generate_shifting

    train, ood = generate_shifting(SimConfig(n_per_env=300, max_spurious=8), 8)
    path = tmp_path / "shift.csv"
    TabularDataset.concat([train, ood]).write_csv(path)
    return path


@pytest.fixture
def xor_csv(tmp_path) -> Path:
    """Interaction signal that a linear baseline cannot express."""
    import numpy as np

    from regime_gauge.datasets import TabularDataset

    rng = np.random.default_rng(5)
    X = rng.standard_normal((1200, 2))
    y = (X[:, 0] * X[:, 1] > 0).astype(int)
    env = np.array(["A"] * 800 + ["C"] * 400)
    path = tmp_path / "xor.csv"
    TabularDataset(X, y, env, ("x0", "x1")).write_csv(path)
    return path


# filled by tests/test_acceptance.py, printed once at the end of the run
ACCEPTANCE: dict[int, tuple[str, bool]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {title}")
