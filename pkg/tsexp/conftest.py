"""Shared pytest fixtures. Modules import flat from the application
directory, so it goes on sys.path before any test module is collected."""

import sys
from pathlib import Path

APP_DIR = Path(__file__).resolve().parent
sys.path.insert(0, str(APP_DIR))

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from core.experiment import UnitExperiment  # noqa: E402
from core.mechanisms import BernoulliConstant  # noqa: E402
from core.paths import TreatmentPath  # noqa: E402
from models import PotentialProcessSpec  # noqa: E402
from process.simulator import draw_noise, simulate_experiment  # noqa: E402


@pytest.fixture
def test_data_dir() -> Path:
    return APP_DIR / "test_data"


@pytest.fixture
def ar_spec() -> PotentialProcessSpec:
    return PotentialProcessSpec(mu0=0.0, mu1=0.5, phi=0.5, sigma0=1.0, sigma1=1.0)


@pytest.fixture
def null_spec() -> PotentialProcessSpec:
    return PotentialProcessSpec(mu0=0.0, mu1=0.0, phi=0.5, sigma0=1.0, sigma1=1.0)


@pytest.fixture
def half() -> BernoulliConstant:
    return BernoulliConstant(0.5)


@pytest.fixture
def make_unit():
    """Hand-built unit with a constant Bernoulli(pi) mechanism."""

    def _make(y, w, pi: float = 0.5, unit_id: str = "u") -> UnitExperiment:
        y = np.asarray(y, dtype=float)
        return UnitExperiment(
            unit_id=unit_id,
            times=np.arange(1, y.size + 1),
            outcomes=y,
            treatments=TreatmentPath(np.asarray(w)),
            mechanism=BernoulliConstant(pi),
            probabilities=np.full(y.size, pi),
        )

    return _make


@pytest.fixture
def simulated(ar_spec, half):
    """Simulated unit from the potential AR design, T = 100."""

    def _sim(spec: PotentialProcessSpec | None = None, T: int = 100, seed: int = 0, unit_id: str = "sim"):
        spec = spec or ar_spec
        noise = draw_noise(spec, T, seed)
        return simulate_experiment(spec, noise, half, seed + 1, unit_id=unit_id)

    return _sim
