import numpy as np
import pytest

from unmixer import ReactionSpec, compose, kinetics, spectra
from unmixer.cli import default_config, resolve_dataset

RATE_MATRIX = np.array([
    [-0.53, 0.53, 0.00, 0.00, 0.00],
    [0.02, -0.66, 0.43, 0.21, 0.00],
    [0.00, 0.25, -0.36, 0.00, 0.11],
    [0.00, 0.00, 0.00, 0.00, 0.00],
    [0.00, 0.00, 0.10, 0.00, -0.10],
])


@pytest.fixture(scope="session")
def reaction_spec():
    return ReactionSpec(k=RATE_MATRIX, h0=[1.0, 0, 0, 0, 0],
                        t_grid=np.linspace(0.0, 20.0, 200))


@pytest.fixture(scope="session")
def default_dataset():
    """The shipped noiseless five-species dataset with ground truth."""
    return resolve_dataset(default_config())


@pytest.fixture(scope="session")
def small_dataset(reaction_spec):
    """A cheaper 5-species instance (120 channels, 80 timesteps) for
    module-level tests that only need exact-rank structure."""
    rng = np.random.default_rng(7)
    spec = ReactionSpec(k=RATE_MATRIX, h0=[1.0, 0, 0, 0, 0],
                        t_grid=np.linspace(0.0, 20.0, 80))
    h = kinetics(spec)
    grid = np.linspace(200.0, 1700.0, 120)
    from unmixer import random_peaks
    peaks = random_peaks(rng, 5, (200.0, 1700.0), (3, 5), (40.0, 160.0), (15.0, 40.0))
    w = spectra(peaks, grid)
    return {"w": w, "h": h, "m": compose(w, h), "spec": spec, "grid": grid}
