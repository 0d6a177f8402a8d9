import numpy as np
import pytest

from steerkit import DEFAULT_NOISE, DEFAULT_SOURCE, NoiseParams, SteeringSettings


@pytest.fixture
def reference_source():
    """Heralded-source occupations of the modeled setup."""
    return DEFAULT_SOURCE


@pytest.fixture
def normalized_source():
    """Same occupations rescaled to sum exactly to 1 (makes the closed forms
    exact, so pipeline-vs-formula comparisons can use tight tolerances)."""
    return DEFAULT_SOURCE.normalized()


@pytest.fixture
def reference_noise():
    return DEFAULT_NOISE


@pytest.fixture
def ideal_noise():
    return NoiseParams.ideal()


@pytest.fixture
def settings6():
    return SteeringSettings.default(6)


@pytest.fixture
def rng():
    return np.random.default_rng(20240831)


def random_density(rng, dim):
    """Random full-rank density matrix (Hilbert-Schmidt-ish)."""
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    m = g @ g.conj().T
    return m / np.trace(m).real
