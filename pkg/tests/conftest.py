"""
Gemeinsame Fixtures für die Tests
"""

import sys
from pathlib import Path

import numpy as np
import pytest

# Projekt-Root für 'import src...' ohne Installation
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from src.config_manager import ConfigManager  # noqa: E402


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_hessenberg(rng: np.random.Generator, rows: int, cols: int = None) -> np.ndarray:
    """Echte obere Hessenberg-Matrix (Subdiagonale von 0 weg)."""
    cols = rows if cols is None else cols
    h = np.triu(complex_normal(rng, (rows, cols)), -1)
    for i in range(min(rows - 1, cols)):
        h[i + 1, i] += np.sign(h[i + 1, i].real or 1.0) * 0.5
    return h


def separated_spectrum_matrix(rng: np.random.Generator, m: int, spacing: float = 1.0) -> np.ndarray:
    """Nichtnormale Matrix mit reellem Spektrum spacing·(1..m)."""
    eigs = spacing * np.arange(1, m + 1)
    x = np.eye(m) + 0.3 * complex_normal(rng, (m, m)) / np.sqrt(m)
    return x @ np.diag(eigs) @ np.linalg.inv(x)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def random_matrix(rng):
    return complex_normal(rng, (20, 20))


@pytest.fixture
def config(tmp_path):
    """ConfigManager mit einer (noch nicht existierenden) Benutzerdatei in tmp_path."""
    return ConfigManager(str(tmp_path / "user_config.yaml"), setup_logging=False)
