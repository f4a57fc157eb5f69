"""
Pytest configuration and fixtures for pmlab tests.
"""

import sys
import tempfile
from pathlib import Path

import pytest

# Add project root to path
PROJECT_ROOT = Path(__file__).parent.parent
sys.path.insert(0, str(PROJECT_ROOT))

# Acceptance runs use 2^14 cells; unit tests stay on a small mesh
SMALL_CELLS = 2 ** 10


@pytest.fixture
def temp_dir():
    """Provide a temporary directory for tests."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield Path(tmpdir)


@pytest.fixture
def mesh():
    """Small graded mesh at alpha = 1/2."""
    from core.density import GradedMesh
    return GradedMesh(0.5, SMALL_CELLS)


@pytest.fixture
def fine_mesh():
    """Acceptance-size graded mesh at alpha = 1/2."""
    from core.density import GradedMesh
    return GradedMesh(0.5, 2 ** 14)


@pytest.fixture
def cone():
    """Cone constants at alpha = 1/2 with a = a_min."""
    from core.cones import ConeParams
    return ConeParams(0.5)


@pytest.fixture
def mock_command_registry():
    """Provide a fresh command registry for testing."""
    from experiments.registry import CommandRegistry
    return CommandRegistry()


@pytest.fixture
def defaults_file(temp_dir):
    """YAML lab defaults with a small mesh."""
    import yaml

    path = temp_dir / "config.yml"
    with open(path, "w") as f:
        yaml.dump({
            "mesh": {"n": SMALL_CELLS, "grading": None},
            "transfer": {"conserve_mass": True, "c_cov": 3.0, "kappa": 1.0},
            "fit": {"band": [-1.25, -0.85], "use_log_correction": True},
            "cones": {"samples": 10},
            "kernel": {"z_points": 8, "x_points": 8},
            "output": {"dir": str(temp_dir / "results")},
        }, f)
    return path


@pytest.fixture
def isolated_env(monkeypatch, defaults_file):
    """Point the lab at the test defaults and clear the output override."""
    monkeypatch.setenv("PMLAB_DEFAULTS", str(defaults_file))
    monkeypatch.delenv("PMLAB_OUTPUT_DIR", raising=False)
    monkeypatch.delenv("PMLAB_LOG_LEVEL", raising=False)
    return defaults_file
