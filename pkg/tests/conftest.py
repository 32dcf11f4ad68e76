import numpy as np
import pytest

from tricds.contracts import RecoverySpec, standard_cds
from tricds.market import load_bundled_snapshot


@pytest.fixture(scope="session")
def snapshot():
    return load_bundled_snapshot()


@pytest.fixture(scope="session")
def contract_5y():
    return standard_cds(notional=10_000_000.0, spread=0.027, maturity_years=5.0)


@pytest.fixture(scope="session")
def recovery_two_way():
    return RecoverySpec()


@pytest.fixture()
def rng():
    return np.random.default_rng(20240811)
