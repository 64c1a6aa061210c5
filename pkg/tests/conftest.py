import numpy as np
import pytest

from pao.scene import Scene, default_scene


@pytest.fixture(scope="session")
def office() -> Scene:
    return default_scene()


def empty_box(scene: Scene | None = None, max_order: int = 2) -> Scene:
    """The office room with its furniture removed and no blocked links."""
    from dataclasses import replace
    scene = scene or default_scene()
    return replace(scene, obstacles=(), blocked_links=frozenset(), max_order=max_order)


@pytest.fixture(scope="session")
def box(office) -> Scene:
    return empty_box(office)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# A configuration small enough to run every harness path in seconds.
TINY = {
    "seeds": [0],
    "s_list": [3, 11],
    "n_train": 300,
    "n_test": 60,
    "n_sweeps": 2,
    "pretrain": {"epochs": 2, "batch_size": 64, "lr": 1e-3},
    "finetune": {"epochs": 1, "batch_size": 64, "lr": 1e-4},
    "optimizer": {"kind": "GBO", "starts": 3},
    "n_eval_random": 2,
    "budget_s": 3,
    "dms_list": [1, 2, 3],
    "baseline_max_evals": 40,
    "baseline_dms": 3,
    "mismatch_samples": 4,
    "mismatch_bins": 2,
}


@pytest.fixture
def tiny_config(tmp_path):
    import json
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(TINY))
    return path


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
