import numpy as np
import pytest

from sparse_shortener import (
    NoiseSpec,
    build_channel_matrix,
    build_correlations,
    generate_updp_cir,
)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_corr(v, n_f, snr_db, seed):
    """Channel, noise and correlation set for one random realization."""
    rng = np.random.default_rng(seed)
    cir = generate_updp_cir(v, rng)
    noise = NoiseSpec.from_db(snr_db)
    corr = build_correlations(build_channel_matrix(cir, n_f), noise)
    return cir, noise, corr


def random_hermitian_pd(n, seed, jitter=0.5):
    """Random Hermitian positive definite matrix for factorization tests."""
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return a @ a.conj().T + jitter * np.eye(n)
