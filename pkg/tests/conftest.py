import numpy as np
import pytest

from dexsim import default_paper_scheme, run_plan

# Session-wide plan runs: the fig3 plans take ~20 s each, so every test that
# needs them shares one execution per seed.

ACCEPTANCE_SEED = 20210


@pytest.fixture(scope="session")
def default_scheme():
    return default_paper_scheme()


@pytest.fixture(scope="session")
def fig1_result():
    return run_plan("fig1_spectrum", seed=ACCEPTANCE_SEED)


@pytest.fixture(scope="session")
def fig2_singlet_result():
    return run_plan("fig2_singlet", seed=ACCEPTANCE_SEED)


@pytest.fixture(scope="session")
def fig2_triplet_result():
    return run_plan("fig2_triplet", seed=ACCEPTANCE_SEED)


@pytest.fixture(scope="session")
def fig3_xplus_result():
    return run_plan("fig3_xplus", seed=ACCEPTANCE_SEED)


@pytest.fixture(scope="session")
def fig3_xminus_result():
    return run_plan("fig3_xminus", seed=ACCEPTANCE_SEED + 1)


def binomial_sigma(p, n):
    return np.sqrt(max(p * (1.0 - p), 1e-12) / n)
